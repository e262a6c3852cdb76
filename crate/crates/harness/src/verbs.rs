//! One function per CLI verb. Each returns its tables: the first is the
//! main report, the rest are written next to it as `<stem>.<name>.<ext>`.

use rangewalk::biased_walk::{CutIndexer, Walker};
use rangewalk::environment::srw_cut_window;
use rangewalk::lattice::sample_two_sided_srw;
use rangewalk::lerw::sample_two_sided_lerw;
use rangewalk::range_graph::{build_range_graph, check_resistance_bounds};
use rangewalk::rng::{substream, substream_seed};
use rangewalk::rwre::{check_esti, estimate_sigma2, jump_lower_bound_margin, jump_probability_oracle, verify_potential_identity};
use rangewalk::valleys::Valley;
use rangewalk::{Error as CoreError, LatticePath, Point};

use crate::config::{ExperimentConfig, Model};
use crate::error::{is_budget, HarnessError, Result};
use crate::experiments::{
    parallel_map, run_beta_invariance, run_lemma_checks, run_localization, stable_reports, trial_seeds, Land,
};
use crate::report::{Table, Value};

pub type Tables = Vec<(Option<&'static str>, Table)>;

fn coord_columns(prefix: &str, dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("{prefix}_{i}")).collect()
}

fn coords(p: &Point, dim: usize) -> Vec<Value> {
    p.coords(dim).iter().map(|&c| Value::Int(i64::from(c))).collect()
}

fn path_table(path: &LatticePath) -> Table {
    let dim = path.dim();
    let mut cols = vec!["index".to_string()];
    cols.extend(coord_columns("s", dim));
    let mut t = Table::new(cols);
    for (n, p) in path.iter() {
        let mut row = vec![Value::Int(n)];
        row.extend(coords(&p, dim));
        t.push(row);
    }
    t
}

fn first_beta(cfg: &ExperimentConfig) -> f64 {
    cfg.betas[0]
}

fn largest_horizon(cfg: &ExperimentConfig) -> u64 {
    *cfg.horizons.iter().max().expect("validated non-empty")
}

/// Trajectory of one walk of `n` steps (largest horizon), with the cut index
/// at each step when the walk sits on a cut-point, and the jump process.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Tables> {
    cfg.validate()?;
    let dim = cfg.dimension;
    let (env_seed, walk_seed) = trial_seeds(cfg.seed, 0);
    let n = largest_horizon(cfg);
    let mut land = Land::new(cfg, cfg.model, first_beta(cfg), env_seed, cfg.max_window_for(cfg.model))?;
    let mut cols = vec!["t".to_string()];
    cols.extend(coord_columns("x", dim));
    cols.push("cut_index".into());
    loop {
        let mut steps = Table::new(cols.clone());
        let mut jumps = Table::new(["k", "hitting_time", "j"]);
        let mut rng = substream(walk_seed, "biased-walk", 0);
        let outcome: rangewalk::Result<()> = (|| {
            let mut record = |t: u64, p: Point, j: Option<i64>| {
                let mut row = vec![Value::Int(t as i64)];
                row.extend(coords(&p, dim));
                row.push(j.map_or(Value::Text(String::new()), Value::Int));
                steps.push(row);
                if let Some(j) = j {
                    let k = jumps.rows.len();
                    jumps.push(vec![k.into(), t.into(), j.into()]);
                }
            };
            match &land {
                Land::Srw(env) => {
                    let g = &env.graph;
                    let indexer = CutIndexer::new(g, &env.cuts);
                    let mut walker = Walker::new(g, g.vertex_at(0)?)?;
                    let classify = |v: u32, t: u64| match indexer.classify(g, v, t) {
                        Err(CoreError::Uncertified { step }) => {
                            Err(CoreError::WindowExhausted { side: g.boundary_side(v), step })
                        }
                        other => other,
                    };
                    record(0, g.point(walker.position()), classify(walker.position(), 0)?);
                    for t in 1..=n {
                        let v = walker.step(&mut rng)?;
                        record(t, g.point(v), classify(v, t)?);
                    }
                }
                Land::Lerw(env) => {
                    let mut y = 0;
                    record(0, env.path.position(0)?, Some(0));
                    for t in 1..=n {
                        y = rangewalk::rwre::rwre_step(&env.env, y, t - 1, &mut rng)?;
                        record(t, env.path.position(y)?, Some(y));
                    }
                }
            }
            Ok(())
        })();
        match outcome {
            Ok(()) => return Ok(vec![(None, steps), (Some("jumps"), jumps)]),
            Err(CoreError::WindowExhausted { side, .. }) => land.landscape().grow(side)?,
            Err(e) => return Err(e.into()),
        }
    }
}

pub fn localize(cfg: &ExperimentConfig, model: Model) -> Result<Tables> {
    let out = run_localization(cfg, model)?;
    Ok(vec![(None, out.summary), (Some("trials"), out.trial_table)])
}

pub fn beta_invariance(cfg: &ExperimentConfig) -> Result<Tables> {
    let out = run_beta_invariance(cfg)?;
    Ok(vec![(None, out.summary), (Some("samples"), out.samples)])
}

pub fn lemma_checks(cfg: &ExperimentConfig) -> Result<Tables> {
    let out = run_lemma_checks(cfg)?;
    Ok(vec![(None, out.summary), (Some("environments"), out.env_table)])
}

/// Outer, smallest and delta valleys with the event flags, per trial and horizon.
pub fn valleys(cfg: &ExperimentConfig) -> Result<Tables> {
    cfg.validate()?;
    let beta = first_beta(cfg);
    if beta <= 1.0 {
        return Err(HarnessError::Config("valleys need beta > 1".into()));
    }
    let dim = cfg.dimension;
    let mut horizons = cfg.horizons.clone();
    horizons.sort_unstable();
    horizons.dedup();
    let mut cols: Vec<String> = ["trial", "n", "env_seed", "status"].map(String::from).to_vec();
    for v in ["outer", "smallest", "delta"] {
        cols.extend(["a", "b", "c"].map(|e| format!("{v}_{e}")));
    }
    cols.push("depth".into());
    cols.extend(coord_columns("l", dim));
    cols.extend(
        ["same_base", "shallow_refinements", "steep_walls", "narrow", "small_fluctuations", "exhaustive", "event_a"]
            .map(String::from),
    );
    let width = cols.len();
    let rows = parallel_map(cfg.threads, cfg.trials, |t| -> Result<Vec<Vec<Value>>> {
        let (env_seed, _) = trial_seeds(cfg.seed, t);
        let head = |n: u64, status: String| vec![t.into(), n.into(), Value::Text(env_seed.to_string()), status.into()];
        let pad = |mut row: Vec<Value>| {
            row.resize(width, Value::Float(f64::NAN));
            row
        };
        let mut land = match Land::new(cfg, cfg.model, beta, env_seed, cfg.max_window_for(cfg.model)) {
            Ok(l) => l,
            Err(e) if is_budget(&e) => {
                return Ok(horizons.iter().map(|&n| pad(head(n, format!("environment: {e}")))).collect())
            }
            Err(e) => return Err(e.into()),
        };
        let reports = stable_reports(&mut land, cfg, &horizons, true)?;
        Ok(horizons
            .iter()
            .zip(reports)
            .map(|(&n, r)| match r {
                Err(why) => pad(head(n, format!("valleys: {why}"))),
                Ok(r) => {
                    let mut row = head(n, "ok".into());
                    let delta = r.delta_valley.expect("computed with the event flags");
                    for Valley { a, b, c } in [r.outer, r.smallest, delta] {
                        row.extend([a.into(), b.into(), c.into()]);
                    }
                    row.push(r.depth.into());
                    row.extend(r.site.iter().map(|&x| Value::from(x)));
                    let e = r.event_a;
                    row.extend(
                        [e.same_base, e.shallow_refinements, e.steep_walls, e.narrow, e.small_fluctuations, e.exhaustive, e.all()]
                            .map(Value::from),
                    );
                    row
                }
            })
            .collect())
    })?;
    let mut table = Table::new(cols);
    for r in rows {
        for row in r? {
            table.push(row);
        }
    }
    Ok(vec![(None, table)])
}

/// Cut-times `T_n` for `|n| <= cut-steps` of one two-sided walk.
pub fn cut_times(cfg: &ExperimentConfig) -> Result<Tables> {
    cfg.validate()?;
    let dim = cfg.dimension;
    let (path, cuts) = srw_cut_window(dim, cfg.cut_steps as i64, substream_seed(cfg.seed, "environment", 0))?;
    let mut cols: Vec<String> = ["index", "time"].map(String::from).to_vec();
    cols.extend(coord_columns("c", dim));
    let mut t = Table::new(cols);
    let m = cfg.cut_steps as i64;
    for (n, time) in cuts.iter().filter(|&(n, _)| -m <= n && n <= m) {
        let mut row = vec![n.into(), time.into()];
        row.extend(coords(&path.position(time)?, dim));
        t.push(row);
    }
    Ok(vec![(None, t)])
}

/// One two-sided loop-erased walk of half-window `window`.
pub fn lerw_sample(cfg: &ExperimentConfig) -> Result<Tables> {
    cfg.validate()?;
    let window = cfg.window as usize;
    let s = sample_two_sided_lerw(
        cfg.dimension,
        window,
        substream_seed(cfg.seed, "environment", 0),
        cfg.max_attempts,
        cfg.horizon_factor * window,
    )?;
    let mut stats = Table::new(["half_window", "attempts"]);
    stats.push(vec![window.into(), s.attempts.into()]);
    Ok(vec![(None, path_table(&s.path)), (Some("sampling"), stats)])
}

/// Potential and jump probabilities of one environment at its initial window.
pub fn potential(cfg: &ExperimentConfig) -> Result<Tables> {
    cfg.validate()?;
    let land = Land::new(cfg, cfg.model, first_beta(cfg), substream_seed(cfg.seed, "environment", 0), cfg.max_window_for(cfg.model))?;
    let (env, r) = match &land {
        Land::Srw(e) => (&e.env, &e.potential),
        Land::Lerw(e) => (&e.env, &e.potential),
    };
    let mut t = Table::new(["n", "potential", "omega_minus", "omega_zero", "omega_plus"]);
    for n in env.first_site..=env.last_site() {
        let (m, z, p) = env.at(n)?;
        t.push(vec![n.into(), r.try_get(n).unwrap_or(f64::NAN).into(), m.into(), z.into(), p.into()]);
    }
    Ok(vec![(None, t)])
}

pub fn dump_path(cfg: &ExperimentConfig) -> Result<Tables> {
    cfg.validate()?;
    let path = sample_two_sided_srw(cfg.dimension, cfg.window, substream_seed(cfg.seed, "environment", 0))?;
    Ok(vec![(None, path_table(&path))])
}

/// Largest relative violation of detailed balance and of row sums on a range
/// graph: `mu(u) P(u, v)` against `mu(v) P(v, u)`, both divided by the common
/// conductance so the comparison is scale-free.
pub fn detailed_balance_error(graph: &rangewalk::range_graph::RangeGraph) -> (f64, f64) {
    let mut balance = 0.0f64;
    let mut rows = 0.0f64;
    let beta = graph.beta();
    for u in 0..graph.num_vertices() as u32 {
        let probs = graph.transition_probabilities(u);
        rows = rows.max((probs.iter().sum::<f64>() - 1.0).abs());
        for (k, &v) in graph.neighbors(u).iter().enumerate() {
            let e = graph.edge_exponent(u, k);
            let scale = |w: u32| beta.powi((i64::from(graph.first_coordinate(w)) - e) as i32);
            let lhs = graph.local_measure(u) * probs[k] * scale(u);
            let rhs = graph.local_measure(v) * graph.transition_probability(v, u) * scale(v);
            balance = balance.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()));
        }
    }
    (balance, rows)
}

struct Check {
    name: &'static str,
    environments: usize,
    value: f64,
    tolerance: f64,
    pass: bool,
}

/// Exact identities and oracle comparisons on `trials` sampled environments
/// (capped at 50), then the variance and mean-gap estimates. Any failed check
/// makes the verb exit with a validation error after writing the report.
pub fn validate(cfg: &ExperimentConfig) -> Result<Tables> {
    cfg.validate()?;
    let dim = cfg.dimension;
    let envs = cfg.trials.min(50);
    let window = cfg.window;
    let mut checks = Vec::new();

    // Potential identity on loop-erased environments, every beta.
    let mut worst = 0.0f64;
    for (i, &beta) in cfg.betas.iter().enumerate() {
        for e in 0..envs {
            let s = sample_two_sided_lerw(
                dim,
                window as usize,
                substream_seed(cfg.seed, &format!("validate-lerw-{i}"), e as u64),
                cfg.max_attempts,
                cfg.horizon_factor * window as usize,
            )?;
            worst = worst.max(verify_potential_identity(&s.path, beta)?);
        }
    }
    checks.push(Check { name: "potential_identity", environments: envs * cfg.betas.len(), value: worst, tolerance: 1e-9, pass: worst <= 1e-9 });

    let beta = first_beta(cfg).max(1.0 + 1e-9);
    let (mut balance, mut rowsum) = (0.0f64, 0.0f64);
    let (mut lower, mut upper, mut esti) = (f64::INFINITY, f64::INFINITY, true);
    let (mut oracle, mut omega0, mut margin) = (0.0f64, f64::INFINITY, f64::INFINITY);
    let per_env = parallel_map(cfg.threads, envs, |e| -> Result<[f64; 8]> {
        let seed = substream_seed(cfg.seed, "validate-srw", e as u64);
        let (path, cuts) = srw_cut_window(dim, 60, seed)?;
        let (b, r) = detailed_balance_error(&build_range_graph(&path, beta)?);
        let graph = rangewalk::range_graph::RangeGraph::between(&path, beta, cuts.time(-51)?, cuts.time(51)?)?;
        let (mut lo, mut hi) = (f64::INFINITY, f64::INFINITY);
        for n in -50..50 {
            let rb = check_resistance_bounds(&graph, &cuts, n)?;
            lo = lo.min(rb.lower_gap() / rb.log_resistance.abs().max(1.0));
            hi = hi.min(rb.upper_gap() / rb.log_resistance.abs().max(1.0));
        }
        let env = rangewalk::rwre::environment_from_cut_chain(&graph, &cuts)?;
        let pot = rangewalk::rwre::potential(&env)?;
        let est = check_esti(&graph, &cuts, &pot, 40)?;
        let mut orc = 0.0f64;
        for n in [-1, 0, 1] {
            let (m, z, p) = env.at(n)?;
            let (om, oz, op) = jump_probability_oracle(&graph, &cuts, n)?;
            orc = orc.max((m - om).abs()).max((z - oz).abs()).max((p - op).abs());
        }
        let mg = jump_lower_bound_margin(&graph, &cuts, &env, dim)?;
        Ok([b, r, lo, hi, f64::from(u8::from(est.holds())), orc, env.min_raw_omega_zero, mg])
    })?;
    for r in per_env {
        let [b, r, lo, hi, est, orc, z, mg] = r?;
        balance = balance.max(b);
        rowsum = rowsum.max(r);
        lower = lower.min(lo);
        upper = upper.min(hi);
        esti &= est == 1.0;
        oracle = oracle.max(orc);
        omega0 = omega0.min(z);
        margin = margin.min(mg);
    }
    checks.push(Check { name: "detailed_balance", environments: envs, value: balance, tolerance: 1e-12, pass: balance <= 1e-12 });
    checks.push(Check { name: "row_sums", environments: envs, value: rowsum, tolerance: 1e-12, pass: rowsum <= 1e-12 });
    checks.push(Check { name: "resistance_lower_gap", environments: envs, value: lower, tolerance: -1e-12, pass: lower >= -1e-12 });
    checks.push(Check { name: "resistance_upper_gap", environments: envs, value: upper, tolerance: -1e-12, pass: upper >= -1e-12 });
    checks.push(Check { name: "esti", environments: envs, value: f64::from(u8::from(esti)), tolerance: 1.0, pass: esti });
    checks.push(Check { name: "jump_oracle", environments: envs, value: oracle, tolerance: 1e-9, pass: oracle <= 1e-9 });
    checks.push(Check { name: "omega_zero_min", environments: envs, value: omega0, tolerance: -1e-12, pass: omega0 >= -1e-12 });
    checks.push(Check { name: "jump_lower_bound_margin", environments: envs, value: margin, tolerance: 0.0, pass: margin >= -1e-12 });

    if beta > 1.0 + 1e-6 {
        let s = estimate_sigma2(dim, beta, cfg.trials, cfg.cut_steps as i64, substream_seed(cfg.seed, "validate-sigma2", 0))?;
        checks.push(Check { name: "sigma2_ratio", environments: cfg.trials, value: s.ratio, tolerance: 1.25, pass: (0.8..=1.25).contains(&s.ratio) });
        checks.push(Check { name: "tau", environments: cfg.trials, value: s.tau, tolerance: f64::NAN, pass: s.tau.is_finite() && s.tau >= 1.0 });
    }

    let mut t = Table::new(["check", "environments", "value", "tolerance", "pass"]);
    for c in checks {
        t.push(vec![c.name.into(), c.environments.into(), c.value.into(), c.tolerance.into(), c.pass.into()]);
    }
    Ok(vec![(None, t)])
}

/// Names of failed checks in a `validate` table.
pub fn failed_checks(t: &Table) -> Vec<String> {
    (0..t.rows.len())
        .filter(|&i| t.get(i, "pass") == &Value::Bool(false))
        .map(|i| match t.get(i, "check") {
            Value::Text(s) => s.clone(),
            v => format!("{v:?}"),
        })
        .collect()
}
