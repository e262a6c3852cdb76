//! The one-dimensional random walk in random environment induced by a path,
//! and its potential.
//!
//! For a self-avoiding path the environment at `n` is the pair of transition
//! probabilities of the biased walk from `S_n` to `S_{n-1}` and `S_{n+1}`. For
//! a general path it is the law of the next cut-point visited from `C_n`,
//! given by `omega_n^(+-) = 1 / (mu(C_n) R_eff(C_n, C_{n+-1}))`, with holding
//! probability `omega_n^0 = 1 - omega_n^- - omega_n^+`.

use rand::Rng;

use crate::cut_times::{mean_and_se, CutStructure};
use crate::error::{Error, Result, Side};
use crate::lattice::{LatticePath, PathKind};
use crate::linalg::{solve_dense, DenseMatrix};
use crate::range_graph::RangeGraph;
use crate::rng::StreamRng;

/// Raw holding probabilities in `[-HOLDING_TOLERANCE, 0)` are rounding and
/// are clamped to zero; anything below is reported as an error.
pub const HOLDING_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    SelfAvoiding,
    CutChain,
}

/// Transition probabilities on the sites `first_site ..= last_site()`.
#[derive(Clone, Debug)]
pub struct Environment1D {
    pub flavor: Flavor,
    pub first_site: i64,
    pub omega_minus: Vec<f64>,
    pub omega_zero: Vec<f64>,
    pub omega_plus: Vec<f64>,
    /// `log(omega_n^- / omega_n^+)`, computed from logarithms directly.
    pub log_rho: Vec<f64>,
    /// Smallest holding probability before clamping.
    pub min_raw_omega_zero: f64,
}

impl Environment1D {
    pub fn last_site(&self) -> i64 {
        self.first_site + self.omega_plus.len() as i64 - 1
    }

    pub fn contains(&self, n: i64) -> bool {
        n >= self.first_site && n <= self.last_site()
    }

    #[inline]
    fn slot(&self, n: i64) -> usize {
        (n - self.first_site) as usize
    }

    /// `(omega^-, omega^0, omega^+)` at site `n`.
    pub fn at(&self, n: i64) -> Result<(f64, f64, f64)> {
        if !self.contains(n) {
            return Err(Error::IndexOutOfWindow { index: n, lo: self.first_site, hi: self.last_site() });
        }
        let k = self.slot(n);
        Ok((self.omega_minus[k], self.omega_zero[k], self.omega_plus[k]))
    }

    pub fn log_rho_at(&self, n: i64) -> f64 {
        self.log_rho[self.slot(n)]
    }

    /// Constant environment on `lo..=hi`, mainly for tests.
    pub fn homogeneous(lo: i64, hi: i64, minus: f64, plus: f64) -> Result<Self> {
        let zero = 1.0 - minus - plus;
        if !(minus >= 0.0 && plus >= 0.0 && zero >= -1e-15) || lo > hi {
            return Err(Error::InvalidParameter("probabilities must be non-negative and sum to at most 1".into()));
        }
        let len = (hi - lo + 1) as usize;
        Ok(Environment1D {
            flavor: Flavor::CutChain,
            first_site: lo,
            omega_minus: vec![minus; len],
            omega_zero: vec![zero.max(0.0); len],
            omega_plus: vec![plus; len],
            log_rho: vec![minus.ln() - plus.ln(); len],
            min_raw_omega_zero: zero,
        })
    }
}

/// Environment of a self-avoiding path on the sites `lo + 1 ..= hi - 1`.
pub fn environment_from_selfavoiding(path: &LatticePath, beta: f64) -> Result<Environment1D> {
    if !(beta >= 1.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta must be finite and >= 1, got {beta}")));
    }
    if let Some(index) = path.first_revisit() {
        return Err(Error::NotSelfAvoiding { index });
    }
    if path.len() < 3 {
        return Err(Error::InvalidParameter("path needs at least three points".into()));
    }
    let log_beta = beta.ln();
    let x = |m: i64| i64::from(path.first_coordinate(m));
    let sites = path.lo() + 1..path.hi();
    let len = (path.hi() - path.lo() - 1) as usize;
    let mut env = Environment1D {
        flavor: Flavor::SelfAvoiding,
        first_site: path.lo() + 1,
        omega_minus: Vec::with_capacity(len),
        omega_zero: vec![0.0; len],
        omega_plus: Vec::with_capacity(len),
        log_rho: Vec::with_capacity(len),
        min_raw_omega_zero: 0.0,
    };
    for n in sites {
        let down = x(n - 1).max(x(n));
        let up = x(n).max(x(n + 1));
        // omega^- = c_- / (c_- + c_+) with the larger exponent factored out.
        let minus = 1.0 / (1.0 + beta.powi((up - down) as i32));
        let plus = 1.0 / (1.0 + beta.powi((down - up) as i32));
        env.omega_minus.push(minus);
        env.omega_plus.push(plus);
        env.log_rho.push((down - up) as f64 * log_beta);
    }
    Ok(env)
}

/// `log(R_eff(C_n, C_{n+1}) beta^{C_n^(1)})` for every segment with both ends
/// inside the graph.
fn scaled_segment_resistances(graph: &RangeGraph, cuts: &CutStructure) -> Result<(i64, Vec<f64>)> {
    let (glo, ghi) = graph.index_range();
    let inside: Vec<(i64, i64)> = cuts.iter().filter(|&(_, t)| glo <= t && t <= ghi).collect();
    if inside.len() < 3 {
        return Err(Error::TooFewCutTimes { found: inside.len(), needed: 3 });
    }
    let mut out = Vec::with_capacity(inside.len() - 1);
    for w in inside.windows(2) {
        let (a, b) = (w[0].1, w[1].1);
        let (s, t) = (graph.vertex_at_unchecked(a), graph.vertex_at_unchecked(b));
        if b == a + 1 {
            // A single edge: the solver would return this same value.
            let lift = (graph.first_coordinate(t) - graph.first_coordinate(s)).max(0);
            out.push(-graph.beta().powf(f64::from(lift)).ln());
            continue;
        }
        let support = graph.support_between(a, b)?;
        out.push(graph.log_scaled_resistance(s, &[t], &support)?);
    }
    Ok((inside[0].0, out))
}

/// Cut-chain environment on every cut index whose two adjacent segments lie
/// inside the graph.
pub fn environment_from_cut_chain(graph: &RangeGraph, cuts: &CutStructure) -> Result<Environment1D> {
    let (first_segment, scaled) = scaled_segment_resistances(graph, cuts)?;
    let log_beta = graph.log_beta();
    let len = scaled.len() - 1;
    let mut env = Environment1D {
        flavor: Flavor::CutChain,
        first_site: first_segment + 1,
        omega_minus: Vec::with_capacity(len),
        omega_zero: Vec::with_capacity(len),
        omega_plus: Vec::with_capacity(len),
        log_rho: Vec::with_capacity(len),
        min_raw_omega_zero: f64::INFINITY,
    };
    for k in 1..scaled.len() {
        let n = first_segment + k as i64;
        let c_n = graph.vertex_at_unchecked(cuts.time_unchecked(n));
        let c_prev = graph.vertex_at_unchecked(cuts.time_unchecked(n - 1));
        let shift = f64::from(graph.first_coordinate(c_n) - graph.first_coordinate(c_prev)) * log_beta;
        let log_local = graph.local_measure(c_n).ln();
        let log_plus = -log_local - scaled[k];
        let log_minus = -log_local - (scaled[k - 1] + shift);
        let (minus, plus) = (log_minus.exp(), log_plus.exp());
        let raw_zero = 1.0 - minus - plus;
        env.min_raw_omega_zero = env.min_raw_omega_zero.min(raw_zero);
        if raw_zero < -HOLDING_TOLERANCE {
            return Err(Error::NegativeHolding { site: n, value: raw_zero });
        }
        env.omega_minus.push(minus);
        env.omega_plus.push(plus);
        env.omega_zero.push(raw_zero.max(0.0));
        env.log_rho.push(log_minus - log_plus);
    }
    Ok(env)
}

/// Jump-chain probabilities at `C_n` from the walk itself: starting at `C_n`,
/// the probabilities of reaching `C_{n-1}`, returning to `C_n`, or reaching
/// `C_{n+1}` first. Solved densely on the two adjacent segments.
pub fn jump_probability_oracle(graph: &RangeGraph, cuts: &CutStructure, n: i64) -> Result<(f64, f64, f64)> {
    let (t_prev, t_n, t_next) = (cuts.time(n - 1)?, cuts.time(n)?, cuts.time(n + 1)?);
    let support = graph.support_between(t_prev, t_next)?;
    let ends = [
        graph.vertex_at_unchecked(t_prev),
        graph.vertex_at_unchecked(t_n),
        graph.vertex_at_unchecked(t_next),
    ];
    let unknown: Vec<u32> = support.iter().copied().filter(|v| !ends.contains(v)).collect();
    let slot = |v: u32| unknown.binary_search(&v).ok();
    let m = unknown.len();
    let mut a = DenseMatrix::zeros(m);
    let mut rhs = vec![0.0; 3 * m];
    for (i, &y) in unknown.iter().enumerate() {
        a.add(i, i, 1.0);
        let probs = graph.transition_probabilities(y);
        for (&z, &p) in graph.neighbors(y).iter().zip(&probs) {
            if let Some(j) = slot(z) {
                a.add(i, j, -p);
            } else if let Some(e) = ends.iter().position(|&c| c == z) {
                rhs[e * m + i] += p;
            } else {
                return Err(Error::Invariant(format!("segment vertex {y} has a neighbour outside the segments")));
            }
        }
    }
    let h = solve_dense(a, rhs, 3)?;
    let mut out = [0.0; 3];
    let start = ends[1];
    let probs = graph.transition_probabilities(start);
    for (&z, &p) in graph.neighbors(start).iter().zip(&probs) {
        for (e, o) in out.iter_mut().enumerate() {
            *o += p * match slot(z) {
                Some(j) => h[e * m + j],
                None => f64::from(u8::from(ends[e] == z)),
            };
        }
    }
    Ok((out[0], out[1], out[2]))
}

/// Potential `R` of an environment, defined on `first ..= last` with `R_0 = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    pub first: i64,
    pub values: Vec<f64>,
}

impl Potential {
    pub fn new(first: i64, values: Vec<f64>) -> Self {
        Potential { first, values }
    }

    pub fn last(&self) -> i64 {
        self.first + self.values.len() as i64 - 1
    }

    pub fn contains(&self, n: i64) -> bool {
        n >= self.first && n <= self.last()
    }

    #[inline]
    pub fn get(&self, n: i64) -> f64 {
        self.values[(n - self.first) as usize]
    }

    pub fn try_get(&self, n: i64) -> Option<f64> {
        self.contains(n).then(|| self.get(n))
    }
}

/// Compensated running sum.
#[derive(Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `R_n = sum_{i=1}^n log rho_i` for `n >= 1` and `-sum_{i=n+1}^0 log rho_i`
/// for `n <= -1`, over the largest range the environment determines.
pub fn potential(env: &Environment1D) -> Result<Potential> {
    if env.first_site > 1 || env.last_site() < 0 {
        return Err(Error::InvalidParameter("environment must cover site 0 or 1".into()));
    }
    // R_n needs rho_1..rho_n (n >= 1) or rho_{n+1}..rho_0 (n <= -1).
    let first = (env.first_site - 1).min(0);
    let last = env.last_site().max(0);
    let mut values = vec![0.0; (last - first + 1) as usize];
    let mut acc = Neumaier::default();
    for n in 1..=last {
        acc.add(env.log_rho_at(n));
        values[(n - first) as usize] = acc.value();
    }
    let mut acc = Neumaier::default();
    for n in (first..0).rev() {
        acc.add(-env.log_rho_at(n + 1));
        values[(n - first) as usize] = acc.value();
    }
    Ok(Potential { first, values })
}

/// Largest `|R_n + log beta (S_n^(1) + D^+_{n+1} - D^+_1)|` over the sites of a
/// self-avoiding path where both sides are defined.
pub fn verify_potential_identity(path: &LatticePath, beta: f64) -> Result<f64> {
    let env = environment_from_selfavoiding(path, beta)?;
    let r = potential(&env)?;
    let log_beta = beta.ln();
    let d1 = f64::from(path.increment_pos(1)?);
    let mut worst = 0.0f64;
    for n in r.first.max(path.lo())..=r.last().min(path.hi() - 1) {
        let rhs = -log_beta * (f64::from(path.first_coordinate(n)) + f64::from(path.increment_pos(n + 1)?) - d1);
        worst = worst.max((r.get(n) - rhs).abs());
    }
    Ok(worst)
}

/// Markov chain on `Z` driven by `env`; one uniform per step.
pub fn simulate_rwre(env: &Environment1D, start: i64, n_steps: u64, rng: &mut StreamRng) -> Result<Vec<i64>> {
    let mut out = Vec::with_capacity(n_steps as usize + 1);
    let mut x = start;
    out.push(x);
    for step in 0..n_steps {
        x = rwre_step(env, x, step, rng)?;
        out.push(x);
    }
    Ok(out)
}

#[inline]
pub fn rwre_step(env: &Environment1D, x: i64, step: u64, rng: &mut StreamRng) -> Result<i64> {
    if !env.contains(x) {
        let side = if x < env.first_site { Side::Backward } else { Side::Forward };
        return Err(Error::WindowExhausted { side, step });
    }
    let k = env.slot(x);
    let u: f64 = rng.random();
    Ok(if u < env.omega_minus[k] {
        x - 1
    } else if u < env.omega_minus[k] + env.omega_zero[k] {
        x
    } else {
        x + 1
    })
}

/// `log(T_{m+1} - T_m) + log beta sup_{T_m <= k <= T_{m+1}} |C_m^(1) - S_k^(1)|`.
pub fn segment_fluctuation(graph: &RangeGraph, cuts: &CutStructure, m: i64) -> Result<f64> {
    let (a, b) = (cuts.time(m)?, cuts.time(m + 1)?);
    graph.vertex_at(a)?;
    graph.vertex_at(b)?;
    let x = |k: i64| graph.first_coordinate(graph.vertex_at_unchecked(k));
    let c = x(a);
    let spread = (a..=b).map(|k| c.abs_diff(x(k))).max().unwrap_or(0);
    Ok(((b - a) as f64).ln() + graph.log_beta() * f64::from(spread))
}

/// Both sides of the comparison between `R` and the first coordinate of the
/// cut-points over `|m| <= n`.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct EstiReport {
    pub n: i64,
    /// `sup |R_m + C_m^(1) log beta|`.
    pub lhs: f64,
    /// `2 sup [segment fluctuation at m]`.
    pub rhs: f64,
}

impl EstiReport {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-12) + 1e-12
    }
}

pub fn check_esti(graph: &RangeGraph, cuts: &CutStructure, r: &Potential, n: i64) -> Result<EstiReport> {
    let mut lhs = 0.0f64;
    let mut rhs = 0.0f64;
    for m in -n..=n {
        let rm = r.try_get(m).ok_or(Error::IndexOutOfWindow { index: m, lo: r.first, hi: r.last() })?;
        let c = graph.first_coordinate(graph.vertex_at(cuts.time(m)?)?);
        lhs = lhs.max((rm + f64::from(c) * graph.log_beta()).abs());
        rhs = rhs.max(segment_fluctuation(graph, cuts, m)?);
    }
    Ok(EstiReport { n, lhs, rhs: 2.0 * rhs })
}

/// Smallest margin, over the sites of `env`, of the per-site lower bounds
/// `log omega^+_m >= -log(2 d beta) - log(T_{m+1} - T_m) - log beta sup (C_m^(1) - S_k^(1))`
/// (sup over the forward segment) and the analogue for `omega^-_m` over the
/// backward segment. Non-negative when every bound holds.
pub fn jump_lower_bound_margin(graph: &RangeGraph, cuts: &CutStructure, env: &Environment1D, dim: usize) -> Result<f64> {
    let lb = graph.log_beta();
    let base = -(2.0 * dim as f64 * graph.beta()).ln();
    let x = |k: i64| i64::from(graph.first_coordinate(graph.vertex_at_unchecked(k)));
    let mut worst = f64::INFINITY;
    for m in env.first_site..=env.last_site() {
        let (minus, _, plus) = env.at(m)?;
        let (tp, t, tn) = (cuts.time(m - 1)?, cuts.time(m)?, cuts.time(m + 1)?);
        let c = x(t);
        let up = (t..=tn).map(|k| c - x(k)).max().unwrap_or(0);
        let down = (tp..=t).map(|k| c - x(k)).max().unwrap_or(0);
        let bound_plus = base - ((tn - t) as f64).ln() - lb * up as f64;
        let bound_minus = base - ((t - tp) as f64).ln() - lb * down as f64;
        worst = worst.min(plus.ln() - bound_plus).min(minus.ln() - bound_minus);
    }
    Ok(worst)
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct Sigma2Estimate {
    pub formula: f64,
    pub formula_se: f64,
    pub empirical: f64,
    pub empirical_se: f64,
    pub ratio: f64,
    pub tau: f64,
    pub environments: usize,
}

/// Per-environment ingredients of the variance estimate: `T_N - T_{-N}` over
/// `2N`, and `(R_N^2 + R_{-N}^2) / (2N)`. Only the simple random walk is
/// accepted, since the variance formula describes that environment.
pub fn sigma2_terms(path: &LatticePath, graph: &RangeGraph, cuts: &CutStructure, n_cut_steps: i64) -> Result<(f64, f64)> {
    if path.kind() != PathKind::SimpleRandomWalk {
        return Err(Error::Unsupported("variance formula applies to simple random walk environments only".into()));
    }
    let n = n_cut_steps;
    let tau = (cuts.time(n)? - cuts.time(-n)?) as f64 / (2 * n) as f64;
    let seg = |m: i64| -> Result<f64> { graph.log_segment_resistance(cuts, m) };
    let l0 = seg(0)?;
    let (rp, rm) = (seg(n)? - l0, seg(-n)? - l0);
    Ok((tau, (rp * rp + rm * rm) / (2 * n) as f64))
}

/// Compare `(log beta)^2 tau / d` with the empirical `E R_N^2 / N` over
/// independent simple-random-walk environments.
pub fn estimate_sigma2(dim: usize, beta: f64, n_environments: usize, n_cut_steps: i64, seed: u64) -> Result<Sigma2Estimate> {
    if beta <= 1.0 {
        return Err(Error::InvalidParameter("beta must exceed 1".into()));
    }
    let mut taus = Vec::with_capacity(n_environments);
    let mut squares = Vec::with_capacity(n_environments);
    for e in 0..n_environments {
        let (path, cuts) = crate::environment::srw_cut_window(dim, n_cut_steps + 1, crate::rng::substream_seed(seed, "sigma2-env", e as u64))?;
        let graph = RangeGraph::between(&path, beta, cuts.time(-n_cut_steps)?, cuts.time(n_cut_steps + 1)?)?;
        let (t, s) = sigma2_terms(&path, &graph, &cuts, n_cut_steps)?;
        taus.push(t);
        squares.push(s);
    }
    let lb2 = beta.ln().powi(2);
    let (tau, tau_se) = mean_and_se(&taus);
    let (empirical, empirical_se) = mean_and_se(&squares);
    let formula = lb2 * tau / dim as f64;
    Ok(Sigma2Estimate {
        formula,
        formula_se: lb2 * tau_se / dim as f64,
        empirical,
        empirical_se,
        ratio: empirical / formula,
        tau,
        environments: n_environments,
    })
}
