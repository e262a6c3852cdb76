//! Cut-times and cut-points of a two-sided path.
//!
//! A time `n` is a cut-time when the past `S_{(-inf, n]}` and the strict future
//! `S_{[n+1, inf)}` share no vertex. Only a finite window is ever available,
//! so a cut-time is reported as *certified* when the disjointness holds over
//! the core window widened by a guard margin on both sides. Widening the guard
//! can only remove cut-times.

use rustc_hash::FxHashMap;

use crate::error::{Error, Result, Side};
use crate::lattice::{sample_two_sided_srw, LatticePath, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndexWindow {
    pub lo: i64,
    pub hi: i64,
}

impl IndexWindow {
    pub fn new(lo: i64, hi: i64) -> Self {
        IndexWindow { lo, hi }
    }

    pub fn symmetric(half: i64) -> Self {
        IndexWindow { lo: -half, hi: half }
    }

    pub fn contains(&self, n: i64) -> bool {
        self.lo <= n && n <= self.hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Guard {
    pub backward: u64,
    pub forward: u64,
}

impl Guard {
    pub fn symmetric(g: u64) -> Self {
        Guard { backward: g, forward: g }
    }
}

/// Certified cut-times `... < T_{-1} < T_0 <= 0 < T_1 < ...` inside a core window.
#[derive(Clone, Debug)]
pub struct CutStructure {
    /// Index `n` of `times[0]`.
    first_index: i64,
    times: Vec<i64>,
    core: IndexWindow,
    certified_over: IndexWindow,
}

/// Default core for a path window: one sixth of each side, leaving a guard of
/// five times the core.
pub fn default_core(path: &LatticePath) -> (IndexWindow, Guard) {
    let core = IndexWindow::new(path.lo() / 6, path.hi() / 6);
    let guard = Guard { backward: (5 * -core.lo) as u64, forward: (5 * core.hi) as u64 };
    (core, guard)
}

/// All certified cut-times of `path` inside `core`.
pub fn find_cut_times(path: &LatticePath, core: IndexWindow, guard: Guard) -> Result<CutStructure> {
    if !(core.lo <= 0 && 0 <= core.hi) {
        return Err(Error::InvalidParameter(format!(
            "core window [{}, {}] must contain index 0",
            core.lo, core.hi
        )));
    }
    let span = IndexWindow::new(core.lo - guard.backward as i64, core.hi + guard.forward as i64);
    if span.lo < path.lo() {
        return Err(Error::NeedsExtension { side: Side::Backward, steps: (path.lo() - span.lo) as u64 });
    }
    if span.hi > path.hi() {
        return Err(Error::NeedsExtension { side: Side::Forward, steps: (span.hi - path.hi()) as u64 });
    }

    // A vertex first seen at `a` and last seen at `b` rules out every n in [a, b).
    let len = (span.hi - span.lo + 1) as usize;
    let full_window = span.lo == path.lo() && span.hi == path.hi();
    let mut cover = vec![0i32; len + 1];
    if full_window {
        for v in 0..path.num_vertices() as u32 {
            let (a, b) = path.visit_span(v);
            if a < b {
                cover[(a - span.lo) as usize] += 1;
                cover[(b - span.lo) as usize] -= 1;
            }
        }
    } else {
        let mut local: FxHashMap<u32, (i64, i64)> = FxHashMap::default();
        for n in span.lo..=span.hi {
            let e = local.entry(path.vertex_unchecked(n)).or_insert((n, n));
            e.1 = n;
        }
        for (a, b) in local.into_values() {
            if a < b {
                cover[(a - span.lo) as usize] += 1;
                cover[(b - span.lo) as usize] -= 1;
            }
        }
    }

    let mut times = Vec::new();
    // The last index of the span has an empty certified future; it counts as a
    // cut so that the certified set shrinks monotonically as the guard grows.
    let mut depth = 0i32;
    for n in span.lo..=span.hi {
        depth += cover[(n - span.lo) as usize];
        if depth == 0 && core.contains(n) {
            times.push(n);
        }
    }
    let non_positive = times.iter().filter(|&&t| t <= 0).count();
    if non_positive == 0 {
        return Err(Error::NoCutTimeInCore { side: Side::Backward });
    }
    if non_positive == times.len() {
        return Err(Error::NoCutTimeInCore { side: Side::Forward });
    }
    Ok(CutStructure { first_index: 1 - non_positive as i64, times, core, certified_over: span })
}

impl CutStructure {
    /// Smallest and largest certified cut index.
    pub fn index_range(&self) -> (i64, i64) {
        (self.first_index, self.first_index + self.times.len() as i64 - 1)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn contains_index(&self, n: i64) -> bool {
        let (lo, hi) = self.index_range();
        lo <= n && n <= hi
    }

    pub fn core(&self) -> IndexWindow {
        self.core
    }

    /// Window over which the disjointness was checked.
    pub fn certified_over(&self) -> IndexWindow {
        self.certified_over
    }

    #[inline]
    pub fn time_unchecked(&self, n: i64) -> i64 {
        self.times[(n - self.first_index) as usize]
    }

    /// `T_n`.
    pub fn time(&self, n: i64) -> Result<i64> {
        if !self.contains_index(n) {
            let (lo, hi) = self.index_range();
            return Err(Error::CutIndexOutOfRange { index: n, lo, hi });
        }
        Ok(self.time_unchecked(n))
    }

    /// `C_n = S_{T_n}`.
    pub fn point(&self, path: &LatticePath, n: i64) -> Result<Point> {
        Ok(path.position_unchecked(self.time(n)?))
    }

    /// Cut index `n` with `T_n = t`, if `t` is a certified cut-time.
    pub fn index_of_time(&self, t: i64) -> Option<i64> {
        self.times.binary_search(&t).ok().map(|k| self.first_index + k as i64)
    }

    pub fn times(&self) -> &[i64] {
        &self.times
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        self.times.iter().enumerate().map(move |(k, &t)| (self.first_index + k as i64, t))
    }

    /// Map from path vertex id to cut index for every certified cut-point.
    pub fn vertex_index(&self, path: &LatticePath) -> FxHashMap<u32, i64> {
        self.iter().map(|(n, t)| (path.vertex_unchecked(t), n)).collect()
    }
}

/// Ergodic averages `T_N / N` read off one cut structure, forward and backward.
pub fn tau_from_cuts(cuts: &CutStructure) -> (f64, f64) {
    let (lo, hi) = cuts.index_range();
    let forward = cuts.time_unchecked(hi) as f64 / hi as f64;
    let backward = if lo < 0 { cuts.time_unchecked(lo) as f64 / lo as f64 } else { f64::NAN };
    (forward, backward)
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct TauEstimate {
    pub tau: f64,
    pub se: f64,
    pub forward: f64,
    pub forward_se: f64,
    pub backward: f64,
    pub backward_se: f64,
    pub environments: usize,
}

pub(crate) fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Estimate `E(T_1 | 0 in T)` by the ergodic average `T_N / N` over independent
/// two-sided walks of half-window `half_window`.
pub fn estimate_tau(dim: usize, n_environments: usize, half_window: u64, seed: u64) -> Result<TauEstimate> {
    const MIN_CUTS: usize = 50;
    if n_environments == 0 {
        return Err(Error::InvalidParameter("need at least one environment".into()));
    }
    let mut fwd = Vec::with_capacity(n_environments);
    let mut bwd = Vec::with_capacity(n_environments);
    for e in 0..n_environments {
        let path = sample_two_sided_srw(dim, half_window, crate::rng::substream_seed(seed, "tau-env", e as u64))?;
        let (core, guard) = default_core(&path);
        let cuts = find_cut_times(&path, core, guard)?;
        let (lo, hi) = cuts.index_range();
        if hi < MIN_CUTS as i64 || -lo < MIN_CUTS as i64 {
            return Err(Error::TooFewCutTimes { found: cuts.len(), needed: 2 * MIN_CUTS });
        }
        let (f, b) = tau_from_cuts(&cuts);
        fwd.push(f);
        bwd.push(b);
    }
    let both: Vec<f64> = fwd.iter().zip(&bwd).map(|(f, b)| 0.5 * (f + b)).collect();
    let (tau, se) = mean_and_se(&both);
    let (forward, forward_se) = mean_and_se(&fwd);
    let (backward, backward_se) = mean_and_se(&bwd);
    Ok(TauEstimate { tau, se, forward, forward_se, backward, backward_se, environments: n_environments })
}
