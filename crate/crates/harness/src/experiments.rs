//! Monte Carlo experiments over many environments.
//!
//! Trial `t` draws its environment from `substream_seed(seed, <label>, t)`
//! and its walks from a second seed derived the same way, so every trial is
//! a pure function of the master seed and its index: trials can run on any
//! number of threads and dropping one never changes another.

use rangewalk::biased_walk::{CutIndexer, Walker};
use rangewalk::environment::{
    localization_report, GrowthBudget, Landscape, LerwBudget, LerwEnvironment, SrwEnvironment,
};
use rangewalk::lattice::Point;
use rangewalk::rng::{substream, substream_seed};
use rangewalk::rwre::rwre_step;
use rangewalk::valleys::{EventParams, LocalizationReport};
use rangewalk::Error as CoreError;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Model};
use crate::error::{is_budget, HarnessError, Result};
use crate::report::{Table, Value};
use crate::stats::{ks_distance, ks_permutation_quantile, not_above, Proportion};

/// Run `f` over `0..count` on `threads` workers, results in index order.
pub fn parallel_map<T: Send>(threads: usize, count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..count).into_par_iter().map(&f).collect()))
}

/// An environment of either model.
pub enum Land {
    Srw(Box<SrwEnvironment>),
    Lerw(Box<LerwEnvironment>),
}

impl Land {
    pub fn new(cfg: &ExperimentConfig, model: Model, beta: f64, seed: u64, max_window: u64) -> rangewalk::Result<Land> {
        Ok(match model {
            Model::Srw => Land::Srw(Box::new(SrwEnvironment::new(
                cfg.dimension,
                beta,
                seed,
                GrowthBudget { initial_core: cfg.window, max_core: max_window, guard_factor: cfg.guard },
            )?)),
            Model::Lerw => Land::Lerw(Box::new(LerwEnvironment::new(
                cfg.dimension,
                beta,
                seed,
                LerwBudget {
                    initial_half_window: cfg.window as usize,
                    max_half_window: max_window as usize,
                    max_attempts: cfg.max_attempts,
                    horizon_factor: cfg.horizon_factor,
                },
            )?)),
        })
    }

    pub fn landscape(&mut self) -> &mut dyn Landscape {
        match self {
            Land::Srw(e) => e.as_mut(),
            Land::Lerw(e) => e.as_mut(),
        }
    }

    pub fn view(&self) -> &dyn Landscape {
        match self {
            Land::Srw(e) => e.as_ref(),
            Land::Lerw(e) => e.as_ref(),
        }
    }
}

pub fn event_params(cfg: &ExperimentConfig, n: u64) -> EventParams {
    EventParams { n: n as f64, k: cfg.k, delta: cfg.delta }
}

/// Valley reports for every horizon, recomputed until no growth happens in
/// between so that all of them refer to the same indexing. Budget failures
/// are kept per horizon; other errors abort.
pub fn stable_reports(
    land: &mut Land,
    cfg: &ExperimentConfig,
    horizons: &[u64],
    with_event: bool,
) -> rangewalk::Result<Vec<std::result::Result<LocalizationReport, String>>> {
    loop {
        let rev = land.view().revision();
        let mut out: Vec<std::result::Result<LocalizationReport, String>> = Vec::with_capacity(horizons.len());
        // Largest horizon first: its requirements cover the smaller ones.
        for &n in horizons.iter().rev() {
            match localization_report(land.landscape(), &event_params(cfg, n), with_event) {
                Ok(r) => out.push(Ok(r)),
                Err(e) if is_budget(&e) => out.push(Err(e.to_string())),
                Err(e) => return Err(e),
            }
        }
        if land.view().revision() == rev {
            out.reverse();
            return Ok(out);
        }
    }
}

/// Where the walk stands at each checkpoint, and `sup |J|` over the cut
/// indices it visited up to then.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkRecord {
    pub positions: Vec<Point>,
    pub sup_jump: Vec<i64>,
}

/// Run the biased walk from `S_0` for `checkpoints.last()` steps. A walk that
/// reaches the edge of the window reports the side as
/// [`CoreError::WindowExhausted`].
pub fn walk_checkpoints(land: &Land, checkpoints: &[u64], seed: u64) -> rangewalk::Result<WalkRecord> {
    let mut rng = substream(seed, "biased-walk", 0);
    let mut rec = WalkRecord { positions: Vec::with_capacity(checkpoints.len()), sup_jump: Vec::new() };
    let n_max = checkpoints.last().copied().unwrap_or(0);
    let mut next = 0;
    match land {
        Land::Srw(env) => {
            let g = &env.graph;
            let indexer = CutIndexer::new(g, &env.cuts);
            let mut walker = Walker::new(g, g.vertex_at(0)?)?;
            let mut sup = 0i64;
            let classify = |v: u32, t: u64| match indexer.classify(g, v, t) {
                Err(CoreError::Uncertified { step }) => Err(CoreError::WindowExhausted { side: g.boundary_side(v), step }),
                other => other,
            };
            if let Some(j) = classify(walker.position(), 0)? {
                sup = j.abs();
            }
            for t in 1..=n_max {
                let v = walker.step(&mut rng)?;
                if let Some(j) = classify(v, t)? {
                    sup = sup.max(j.abs());
                }
                while next < checkpoints.len() && checkpoints[next] == t {
                    rec.positions.push(g.point(v));
                    rec.sup_jump.push(sup);
                    next += 1;
                }
            }
        }
        Land::Lerw(env) => {
            let mut y = 0i64;
            let mut sup = 0i64;
            for t in 1..=n_max {
                y = rwre_step(&env.env, y, t - 1, &mut rng)?;
                sup = sup.max(y.abs());
                while next < checkpoints.len() && checkpoints[next] == t {
                    rec.positions.push(env.path.position(y)?);
                    rec.sup_jump.push(sup);
                    next += 1;
                }
            }
        }
    }
    Ok(rec)
}

/// Walk, growing the environment whenever the walk reaches its edge. Growth
/// may reindex, so callers recompute reports when the revision changes.
fn walk_with_growth(land: &mut Land, checkpoints: &[u64], seed: u64) -> rangewalk::Result<WalkRecord> {
    loop {
        match walk_checkpoints(land, checkpoints, seed) {
            Err(CoreError::WindowExhausted { side, .. }) => land.landscape().grow(side)?,
            other => return other,
        }
    }
}

/// One row per (beta, trial, n) of a localization experiment.
#[derive(Clone, Debug)]
pub struct TrialResult {
    pub beta: f64,
    pub trial: usize,
    pub n: u64,
    pub env_seed: u64,
    pub walk_seed: u64,
    /// `ok`, or the reason the trial was excluded.
    pub status: String,
    pub x: Vec<f64>,
    pub site: Vec<f64>,
    pub deviation: f64,
    pub base: i64,
    pub depth: f64,
    /// `sup |J|` over the cut indices visited up to time `n`, over `(log n)^2`.
    pub confinement: f64,
}

fn excluded(beta: f64, trial: usize, n: u64, seeds: (u64, u64), dim: usize, why: String) -> TrialResult {
    TrialResult {
        beta,
        trial,
        n,
        env_seed: seeds.0,
        walk_seed: seeds.1,
        status: why,
        x: vec![f64::NAN; dim],
        site: vec![f64::NAN; dim],
        deviation: f64::NAN,
        base: 0,
        depth: f64::NAN,
        confinement: f64::NAN,
    }
}

pub fn trial_seeds(master: u64, t: usize) -> (u64, u64) {
    (substream_seed(master, "environment", t as u64), substream_seed(master, "walk", t as u64))
}

fn localization_trial(cfg: &ExperimentConfig, model: Model, beta: f64, trial: usize) -> Result<Vec<TrialResult>> {
    let seeds = trial_seeds(cfg.seed, trial);
    let dim = cfg.dimension;
    let mut horizons = cfg.horizons.clone();
    horizons.sort_unstable();
    horizons.dedup();
    let fail_all = |why: String| -> Vec<TrialResult> {
        horizons.iter().map(|&n| excluded(beta, trial, n, seeds, dim, why.clone())).collect()
    };
    let mut land = match Land::new(cfg, model, beta, seeds.0, cfg.max_window_for(model)) {
        Ok(l) => l,
        Err(e) if is_budget(&e) => return Ok(fail_all(format!("environment: {e}"))),
        Err(e) => return Err(e.into()),
    };
    loop {
        let reports = if beta > 1.0 {
            Some(stable_reports(&mut land, cfg, &horizons, false)?)
        } else {
            None
        };
        let rev = land.view().revision();
        let walk = match walk_with_growth(&mut land, &horizons, seeds.1) {
            Ok(w) => w,
            Err(e) if is_budget(&e) => return Ok(fail_all(format!("walk: {e}"))),
            Err(e) => return Err(e.into()),
        };
        if land.view().revision() != rev && beta > 1.0 {
            continue;
        }
        let mut out = Vec::with_capacity(horizons.len());
        for (k, &n) in horizons.iter().enumerate() {
            let log_n = (n as f64).ln();
            let x: Vec<f64> = walk.positions[k].coords(dim).iter().map(|&c| f64::from(c) / log_n).collect();
            // Without bias there is no valley; the origin serves as the control site.
            let (site, base, depth) = match &reports {
                None => (vec![0.0; dim], 0, f64::NAN),
                Some(reps) => match &reps[k] {
                    Ok(r) => (r.site.clone(), r.smallest.b, r.depth),
                    Err(why) => {
                        out.push(excluded(beta, trial, n, seeds, dim, format!("valleys: {why}")));
                        continue;
                    }
                },
            };
            let deviation = x.iter().zip(&site).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            out.push(TrialResult {
                beta,
                trial,
                n,
                env_seed: seeds.0,
                walk_seed: seeds.1,
                status: "ok".into(),
                x,
                site,
                deviation,
                base,
                depth,
                confinement: walk.sup_jump[k] as f64 / (log_n * log_n),
            });
        }
        return Ok(out);
    }
}

pub struct LocalizationOutput {
    pub trials: Vec<TrialResult>,
    pub trial_table: Table,
    pub summary: Table,
}

/// Deviation probabilities `P(|X_n / log n - L_n| > eps)` per (beta, n, eps).
pub fn run_localization(cfg: &ExperimentConfig, model: Model) -> Result<LocalizationOutput> {
    cfg.validate()?;
    let jobs: Vec<(f64, usize)> = cfg.betas.iter().flat_map(|&b| (0..cfg.trials).map(move |t| (b, t))).collect();
    let results = parallel_map(cfg.threads, jobs.len(), |i| localization_trial(cfg, model, jobs[i].0, jobs[i].1))?;
    let trials: Vec<TrialResult> = results.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();

    let dim = cfg.dimension;
    let mut cols: Vec<String> = ["beta", "trial", "n", "env_seed", "walk_seed", "status"].map(String::from).to_vec();
    cols.extend((1..=dim).map(|i| format!("x_{i}")));
    cols.extend((1..=dim).map(|i| format!("l_{i}")));
    cols.extend(["deviation", "base", "depth", "confinement"].map(String::from));
    let mut trial_table = Table::new(cols);
    for r in &trials {
        let mut row: Vec<Value> = vec![
            r.beta.into(),
            r.trial.into(),
            r.n.into(),
            Value::Text(r.env_seed.to_string()),
            Value::Text(r.walk_seed.to_string()),
            r.status.clone().into(),
        ];
        row.extend(r.x.iter().map(|&v| Value::from(v)));
        row.extend(r.site.iter().map(|&v| Value::from(v)));
        row.extend([r.deviation.into(), r.base.into(), r.depth.into(), r.confinement.into()]);
        trial_table.push(row);
    }

    let mut summary = Table::new(["beta", "n", "epsilon", "trials", "used", "excluded", "exceed", "p_hat", "se"]);
    let mut horizons = cfg.horizons.clone();
    horizons.sort_unstable();
    horizons.dedup();
    for &beta in &cfg.betas {
        for &n in &horizons {
            let rows: Vec<&TrialResult> = trials.iter().filter(|r| r.beta == beta && r.n == n).collect();
            let used: Vec<&&TrialResult> = rows.iter().filter(|r| r.status == "ok").collect();
            for &eps in &cfg.epsilons {
                let exceed = used.iter().filter(|r| r.deviation > eps).count() as u64;
                let p = Proportion::new(exceed, used.len() as u64);
                summary.push(vec![
                    beta.into(),
                    n.into(),
                    eps.into(),
                    rows.len().into(),
                    used.len().into(),
                    (rows.len() - used.len()).into(),
                    exceed.into(),
                    p.estimate().into(),
                    p.se().into(),
                ]);
            }
        }
    }
    Ok(LocalizationOutput { trials, trial_table, summary })
}

/// The trend check on a localization summary for one (beta, eps): estimates
/// non-increasing in `n` within `z` combined standard errors, and the last at
/// most `ratio` times the first.
pub fn localization_trend(summary: &Table, beta: f64, eps: f64, z: f64, ratio: f64) -> (bool, Vec<Proportion>) {
    let props: Vec<Proportion> = (0..summary.rows.len())
        .filter(|&i| summary.get(i, "beta").as_f64() == Some(beta) && summary.get(i, "epsilon").as_f64() == Some(eps))
        .map(|i| {
            let used = summary.get(i, "used").as_f64().unwrap_or(0.0) as u64;
            let exceed = summary.get(i, "exceed").as_f64().unwrap_or(0.0) as u64;
            Proportion::new(exceed, used)
        })
        .collect();
    let monotone = props.windows(2).all(|w| not_above(&w[1], &w[0], z));
    let shrinks = match (props.first(), props.last()) {
        (Some(a), Some(b)) => b.estimate() <= ratio * a.estimate(),
        _ => false,
    };
    (monotone && shrinks && !props.is_empty(), props)
}

/// Growth cap for beta-invariance samples: the cap for beta = 2 rescaled by
/// `(log 2 / log beta)^2`, so every beta sees the same window in units of
/// its valley depth `log n / log beta`.
pub fn invariance_cap(cfg: &ExperimentConfig, beta: f64) -> u64 {
    let base = cfg.max_window_for(Model::Srw) as f64;
    let scaled = base * (2f64.ln() / beta.ln()).powi(2);
    (scaled.round() as u64).max(cfg.window)
}

pub struct InvarianceOutput {
    pub samples: Table,
    pub summary: Table,
    /// Per entry of `cfg.betas`: first coordinate of `L_n` for the used samples.
    pub sites: Vec<Vec<f64>>,
}

/// Empirical laws of `L_n^(1) log beta` for each beta (largest horizon),
/// and pairwise KS distances with a permutation null.
pub fn run_beta_invariance(cfg: &ExperimentConfig) -> Result<InvarianceOutput> {
    cfg.validate()?;
    if cfg.betas.iter().any(|&b| b <= 1.0) {
        return Err(HarnessError::Config("beta invariance needs every beta > 1".into()));
    }
    let n = *cfg.horizons.iter().max().expect("validated non-empty");
    let jobs: Vec<(usize, usize)> = (0..cfg.betas.len()).flat_map(|i| (0..cfg.trials).map(move |t| (i, t))).collect();
    let results = parallel_map(cfg.threads, jobs.len(), |j| -> Result<(String, f64)> {
        let (i, t) = jobs[j];
        let beta = cfg.betas[i];
        // Each list entry has its own streams, so repeating a beta gives an independent sample.
        let seed = substream_seed(cfg.seed, &format!("invariance-{i}"), t as u64);
        let mut land = match Land::new(cfg, Model::Srw, beta, seed, invariance_cap(cfg, beta)) {
            Ok(l) => l,
            Err(e) if is_budget(&e) => return Ok((format!("environment: {e}"), f64::NAN)),
            Err(e) => return Err(e.into()),
        };
        match localization_report(land.landscape(), &event_params(cfg, n), false) {
            Ok(r) => Ok(("ok".into(), r.site[0])),
            Err(e) if is_budget(&e) => Ok((format!("valleys: {e}"), f64::NAN)),
            Err(e) => Err(e.into()),
        }
    })?;
    let results: Vec<(String, f64)> = results.into_iter().collect::<Result<_>>()?;

    let mut samples = Table::new(["set", "beta", "trial", "status", "l_1", "l_1_log_beta"]);
    let mut sites = vec![Vec::new(); cfg.betas.len()];
    for (j, (status, l1)) in results.iter().enumerate() {
        let (i, t) = jobs[j];
        let beta = cfg.betas[i];
        samples.push(vec![i.into(), beta.into(), t.into(), status.clone().into(), (*l1).into(), (l1 * beta.ln()).into()]);
        if status == "ok" {
            sites[i].push(*l1);
        }
    }
    let mut summary = Table::new([
        "set_a", "beta_a", "set_b", "beta_b", "used_a", "used_b", "ks_rescaled", "ks_unscaled", "null_q99",
    ]);
    let mut pair = 0u64;
    for i in 0..cfg.betas.len() {
        for j in i + 1..cfg.betas.len() {
            let (ba, bb) = (cfg.betas[i], cfg.betas[j]);
            let a: Vec<f64> = sites[i].iter().map(|x| x * ba.ln()).collect();
            let b: Vec<f64> = sites[j].iter().map(|x| x * bb.ln()).collect();
            let ks = ks_distance(&a, &b);
            let raw = ks_distance(&sites[i], &sites[j]);
            let q99 = ks_permutation_quantile(&a, &b, cfg.permutations, 0.99, substream_seed(cfg.seed, "null", pair));
            pair += 1;
            summary.push(vec![
                i.into(),
                ba.into(),
                j.into(),
                bb.into(),
                a.len().into(),
                b.len().into(),
                ks.into(),
                raw.into(),
                q99.into(),
            ]);
        }
    }
    Ok(InvarianceOutput { samples, summary, sites })
}

/// Quenched frequencies of the three lemma events for one environment and
/// horizon, over `walks` independent walks.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LemmaCounts {
    pub walks: u64,
    pub hit_base: u64,
    pub confined: u64,
    pub fast_hits: u64,
}

/// One lemma-check walk on an SRW environment.
///
/// `H` comes from the biased walk itself: the event is that the cut-point set
/// has been hit `floor(n^(1 - delta^2)) + 1` times by time `n`. The hitting
/// and confinement events concern `J` over up to `n` of its own steps, which
/// may need far more than `n` walk steps; `J` is therefore continued as the
/// one-dimensional chain with the environment's jump probabilities from its
/// first value, which has exactly the law of `J`.
fn lemma_walk(env: &SrwEnvironment, report: &LocalizationReport, n: u64, cfg: &ExperimentConfig, seed: u64) -> rangewalk::Result<(bool, bool, bool)> {
    let g = &env.graph;
    let indexer = CutIndexer::new(g, &env.cuts);
    let mut rng = substream(seed, "lemma-walk", 0);
    let mut walker = Walker::new(g, g.vertex_at(0)?)?;
    let n1 = (n as f64).powf(1.0 - cfg.delta * cfg.delta).floor() as u64;
    let classify = |v: u32, t: u64| match indexer.classify(g, v, t) {
        Err(CoreError::Uncertified { step }) => Err(CoreError::WindowExhausted { side: g.boundary_side(v), step }),
        other => other,
    };
    let mut hits = 0u64;
    let mut first: Option<i64> = classify(walker.position(), 0)?;
    if first.is_some() {
        hits = 1;
    }
    let mut t = 0;
    while t < n && hits <= n1 {
        t += 1;
        if let Some(j) = classify(walker.step(&mut rng)?, t)? {
            first.get_or_insert(j);
            hits += 1;
        }
    }
    let fast_hits = hits > n1;
    let Some(j0) = first else {
        // No cut-point reached within n steps: J has not started, so it cannot have hit b(n).
        return Ok((false, true, fast_hits));
    };
    let mut chain = substream(seed, "lemma-chain", 0);
    let bound = cfg.k * (n as f64).ln().powi(2);
    let b = report.smallest.b;
    let mut j = j0;
    let mut hit = j == b;
    let mut confined = (j.abs() as f64) <= bound;
    for m in 1..=n {
        if !confined && (hit || m > n1) {
            break;
        }
        j = rwre_step(&env.env, j, m - 1, &mut chain)?;
        if j == b && m <= n1 {
            hit = true;
        }
        if (j.abs() as f64) > bound {
            confined = false;
        }
    }
    Ok((hit, confined, fast_hits))
}

#[derive(Clone, Debug)]
pub struct LemmaEnvResult {
    pub beta: f64,
    pub trial: usize,
    pub n: u64,
    pub status: String,
    pub event: rangewalk::valleys::EventA,
    pub counts: LemmaCounts,
}

fn lemma_trial(cfg: &ExperimentConfig, beta: f64, trial: usize) -> Result<Vec<LemmaEnvResult>> {
    let (env_seed, walk_seed) = trial_seeds(cfg.seed, trial);
    let mut horizons = cfg.horizons.clone();
    horizons.sort_unstable();
    horizons.dedup();
    let fail = |n: u64, why: String| LemmaEnvResult {
        beta,
        trial,
        n,
        status: why,
        event: Default::default(),
        counts: LemmaCounts::default(),
    };
    let mut land = match Land::new(cfg, Model::Srw, beta, env_seed, cfg.max_window_for(Model::Srw)) {
        Ok(l) => l,
        Err(e) if is_budget(&e) => return Ok(horizons.iter().map(|&n| fail(n, format!("environment: {e}"))).collect()),
        Err(e) => return Err(e.into()),
    };
    'outer: loop {
        let reports = stable_reports(&mut land, cfg, &horizons, true)?;
        let rev = land.view().revision();
        let mut out = Vec::with_capacity(horizons.len());
        for (k, &n) in horizons.iter().enumerate() {
            let report = match &reports[k] {
                Ok(r) => r,
                Err(why) => {
                    out.push(fail(n, format!("valleys: {why}")));
                    continue;
                }
            };
            let mut counts = LemmaCounts::default();
            for w in 0..cfg.walks {
                let seed = substream_seed(walk_seed, &format!("lemma-{n}"), w as u64);
                let Land::Srw(env) = &land else { unreachable!("lemma checks use SRW environments") };
                match lemma_walk(env, report, n, cfg, seed) {
                    Ok((a, b, c)) => {
                        counts.walks += 1;
                        counts.hit_base += u64::from(a);
                        counts.confined += u64::from(b);
                        counts.fast_hits += u64::from(c);
                    }
                    Err(CoreError::WindowExhausted { side, .. }) => match land.landscape().grow(side) {
                        Ok(()) => continue 'outer,
                        Err(e) if is_budget(&e) => {
                            return Ok(horizons.iter().map(|&n| fail(n, format!("walk: {e}"))).collect())
                        }
                        Err(e) => return Err(e.into()),
                    },
                    Err(e) if is_budget(&e) => {
                        return Ok(horizons.iter().map(|&n| fail(n, format!("walk: {e}"))).collect())
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            debug_assert_eq!(rev, land.view().revision());
            out.push(LemmaEnvResult { beta, trial, n, status: "ok".into(), event: report.event_a, counts });
        }
        return Ok(out);
    }
}

pub struct LemmaOutput {
    pub envs: Vec<LemmaEnvResult>,
    pub env_table: Table,
    pub summary: Table,
}

/// The three bounds: hitting and confinement `1 - n^(-delta/4)`, the
/// hitting-time bound `1 - n^(-delta^2/4)`.
pub fn lemma_bounds(n: u64, delta: f64) -> [f64; 3] {
    let n = n as f64;
    [1.0 - n.powf(-delta / 4.0), 1.0 - n.powf(-delta / 4.0), 1.0 - n.powf(-delta * delta / 4.0)]
}

pub fn run_lemma_checks(cfg: &ExperimentConfig) -> Result<LemmaOutput> {
    cfg.validate()?;
    if cfg.betas.iter().any(|&b| b <= 1.0) {
        return Err(HarnessError::Config("lemma checks need every beta > 1".into()));
    }
    let jobs: Vec<(f64, usize)> = cfg.betas.iter().flat_map(|&b| (0..cfg.trials).map(move |t| (b, t))).collect();
    let results = parallel_map(cfg.threads, jobs.len(), |i| lemma_trial(cfg, jobs[i].0, jobs[i].1))?;
    let envs: Vec<LemmaEnvResult> = results.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();

    let mut env_table = Table::new([
        "beta", "trial", "n", "status", "same_base", "shallow_refinements", "steep_walls", "narrow",
        "small_fluctuations", "exhaustive", "event_a", "walks", "hit_base", "confined", "fast_hits",
    ]);
    for e in &envs {
        env_table.push(vec![
            e.beta.into(),
            e.trial.into(),
            e.n.into(),
            e.status.clone().into(),
            e.event.same_base.into(),
            e.event.shallow_refinements.into(),
            e.event.steep_walls.into(),
            e.event.narrow.into(),
            e.event.small_fluctuations.into(),
            e.event.exhaustive.into(),
            e.event.all().into(),
            e.counts.walks.into(),
            e.counts.hit_base.into(),
            e.counts.confined.into(),
            e.counts.fast_hits.into(),
        ]);
    }

    let mut cols: Vec<String> = ["beta", "n", "envs", "used", "in_a"].map(String::from).to_vec();
    for ev in ["hit_base", "confined", "fast_hits"] {
        for part in ["bound", "freq_a", "se_a", "freq_all", "se_all"] {
            cols.push(format!("{ev}_{part}"));
        }
    }
    let mut summary = Table::new(cols);
    let mut horizons = cfg.horizons.clone();
    horizons.sort_unstable();
    horizons.dedup();
    for &beta in &cfg.betas {
        for &n in &horizons {
            let rows: Vec<&LemmaEnvResult> = envs.iter().filter(|e| e.beta == beta && e.n == n).collect();
            let used: Vec<&&LemmaEnvResult> = rows.iter().filter(|e| e.status == "ok").collect();
            let in_a: Vec<&&&LemmaEnvResult> = used.iter().filter(|e| e.event.all()).collect();
            let bounds = lemma_bounds(n, cfg.delta);
            let mut row: Vec<Value> =
                vec![beta.into(), n.into(), rows.len().into(), used.len().into(), in_a.len().into()];
            let pick = |c: &LemmaCounts, k: usize| [c.hit_base, c.confined, c.fast_hits][k];
            for (k, bound) in bounds.iter().enumerate() {
                let pa = Proportion::new(
                    in_a.iter().map(|e| pick(&e.counts, k)).sum(),
                    in_a.iter().map(|e| e.counts.walks).sum(),
                );
                let pu = Proportion::new(
                    used.iter().map(|e| pick(&e.counts, k)).sum(),
                    used.iter().map(|e| e.counts.walks).sum(),
                );
                row.extend([(*bound).into(), pa.estimate().into(), pa.se().into(), pu.estimate().into(), pu.se().into()]);
            }
            summary.push(row);
        }
    }
    Ok(LemmaOutput { envs, env_table, summary })
}
