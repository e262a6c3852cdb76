//! Growable environments: a sampled path together with its one-dimensional
//! environment and potential, enlarged on demand until the valleys needed for
//! a given horizon are inside the window.

use crate::cut_times::{default_core, find_cut_times, CutStructure, Guard, IndexWindow};
use crate::error::{Error, Result, Side};
use crate::lattice::{sample_two_sided_srw, LatticePath, Point};
use crate::lerw::sample_two_sided_lerw;
use crate::range_graph::RangeGraph;
use crate::rng::substream_seed;
use crate::rwre::{environment_from_cut_chain, environment_from_selfavoiding, potential, segment_fluctuation, Environment1D, Potential};
use crate::valleys::{
    evaluate_event_a, localization_site, outer_valley, refine_to_smallest, EventA, EventParams, LocalizationReport,
    PotentialSource, Valley,
};

/// Simple-random-walk path and cut structure whose certified cut indices
/// cover `[-n_cut, n_cut]`, growing the window as needed.
pub fn srw_cut_window(dim: usize, n_cut: i64, seed: u64) -> Result<(LatticePath, CutStructure)> {
    let mut path = sample_two_sided_srw(dim, (24 * n_cut.max(50)) as u64, seed)?;
    loop {
        let (core, guard) = default_core(&path);
        let cuts = match find_cut_times(&path, core, guard) {
            Err(Error::NoCutTimeInCore { side }) => {
                let steps = match side {
                    Side::Backward => -path.lo(),
                    Side::Forward => path.hi(),
                };
                path.extend(side, steps as u64)?;
                continue;
            }
            other => other?,
        };
        let (lo, hi) = cuts.index_range();
        if lo <= -n_cut && hi >= n_cut {
            return Ok((path, cuts));
        }
        if lo > -n_cut {
            path.extend(Side::Backward, (-path.lo()) as u64)?;
        }
        if hi < n_cut {
            path.extend(Side::Forward, path.hi() as u64)?;
        }
    }
}

/// Limits on environment growth, in walk steps per side of the certified core.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GrowthBudget {
    pub initial_core: u64,
    pub max_core: u64,
    /// Guard margin as a multiple of the core.
    pub guard_factor: u64,
}

impl Default for GrowthBudget {
    fn default() -> Self {
        GrowthBudget { initial_core: 4_096, max_core: 1 << 19, guard_factor: 5 }
    }
}

/// What the experiments need from an environment besides its potential.
pub trait Landscape: PotentialSource {
    fn dim(&self) -> usize;
    fn beta(&self) -> f64;
    /// `C_n`.
    fn cut_point(&self, n: i64) -> Result<Point>;
    /// Segment fluctuation at cut index `m`, if the window covers it.
    fn fluctuation(&self, m: i64) -> Result<f64>;
    /// Side on which the window must grow so that fluctuations are available
    /// for every `|m| <= range`, if any.
    fn missing_fluctuations(&self, range: i64) -> Option<Side>;
    /// Number of successful growths so far; indices computed before a
    /// growth may be stale afterwards.
    fn revision(&self) -> u64;
}

fn sup_on_side(r: &Potential, side: Side) -> f64 {
    let range = match side {
        Side::Backward => r.first..=0,
        Side::Forward => 0..=r.last(),
    };
    range.map(|m| r.get(m)).fold(f64::NEG_INFINITY, f64::max)
}

/// Cut-chain environment of a two-sided simple random walk.
#[derive(Clone, Debug)]
pub struct SrwEnvironment {
    dim: usize,
    beta: f64,
    budget: GrowthBudget,
    /// Core half-widths (backward, forward).
    core: [u64; 2],
    revision: u64,
    pub path: LatticePath,
    pub cuts: CutStructure,
    pub graph: RangeGraph,
    pub env: Environment1D,
    pub potential: Potential,
}

fn side_slot(side: Side) -> usize {
    match side {
        Side::Backward => 0,
        Side::Forward => 1,
    }
}

impl SrwEnvironment {
    pub fn new(dim: usize, beta: f64, seed: u64, budget: GrowthBudget) -> Result<Self> {
        if dim < 5 {
            return Err(Error::InvalidParameter(format!("dimension must be at least 5, got {dim}")));
        }
        if budget.initial_core == 0 || budget.max_core < budget.initial_core {
            return Err(Error::InvalidParameter("growth budget needs 0 < initial_core <= max_core".into()));
        }
        let mut core = [budget.initial_core; 2];
        let mut path = sample_two_sided_srw(dim, (budget.guard_factor + 1) * budget.initial_core, seed)?;
        let (cuts, graph, env, potential) = Self::settle(&mut path, beta, &mut core, budget)?;
        Ok(SrwEnvironment { dim, beta, budget, core, revision: 0, path, cuts, graph, env, potential })
    }

    /// Make the path long enough for `core`, then derive everything, doubling
    /// a side of the core whenever it holds no cut-time.
    fn settle(
        path: &mut LatticePath,
        beta: f64,
        core: &mut [u64; 2],
        budget: GrowthBudget,
    ) -> Result<(CutStructure, RangeGraph, Environment1D, Potential)> {
        loop {
            for side in [Side::Backward, Side::Forward] {
                let needed = (budget.guard_factor + 1) * core[side_slot(side)];
                let have = match side {
                    Side::Backward => (-path.lo()) as u64,
                    Side::Forward => path.hi() as u64,
                };
                if needed > have {
                    path.extend(side, needed - have)?;
                }
            }
            match Self::derive(path, beta, *core, budget.guard_factor) {
                Err(Error::NoCutTimeInCore { side }) => {
                    let k = side_slot(side);
                    if core[k] >= budget.max_core {
                        return Err(Error::BudgetExhausted { side, sup_r: f64::NAN });
                    }
                    core[k] = (2 * core[k]).min(budget.max_core);
                }
                other => return other,
            }
        }
    }

    fn derive(
        path: &LatticePath,
        beta: f64,
        core: [u64; 2],
        guard_factor: u64,
    ) -> Result<(CutStructure, RangeGraph, Environment1D, Potential)> {
        let window = IndexWindow::new(-(core[0] as i64), core[1] as i64);
        let guard = Guard { backward: guard_factor * core[0], forward: guard_factor * core[1] };
        let cuts = find_cut_times(path, window, guard)?;
        let (lo, hi) = cuts.index_range();
        let graph = RangeGraph::between(path, beta, cuts.time(lo)?, cuts.time(hi)?)?;
        let env = environment_from_cut_chain(&graph, &cuts)?;
        let potential = potential(&env)?;
        Ok((cuts, graph, env, potential))
    }

    pub fn core(&self) -> [u64; 2] {
        self.core
    }

    /// Double the core on `side`.
    pub fn grow_side(&mut self, side: Side) -> Result<()> {
        let k = side_slot(side);
        if self.core[k] >= self.budget.max_core {
            return Err(Error::BudgetExhausted { side, sup_r: sup_on_side(&self.potential, side) });
        }
        let mut core = self.core;
        core[k] = (2 * core[k]).min(self.budget.max_core);
        let (cuts, graph, env, potential) = Self::settle(&mut self.path, self.beta, &mut core, self.budget)?;
        self.core = core;
        self.revision += 1;
        self.cuts = cuts;
        self.graph = graph;
        self.env = env;
        self.potential = potential;
        Ok(())
    }
}

impl PotentialSource for SrwEnvironment {
    fn potential(&self) -> &Potential {
        &self.potential
    }

    fn grow(&mut self, side: Side) -> Result<()> {
        self.grow_side(side)
    }
}

impl Landscape for SrwEnvironment {
    fn dim(&self) -> usize {
        self.dim
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn cut_point(&self, n: i64) -> Result<Point> {
        self.cuts.point(&self.path, n)
    }

    fn fluctuation(&self, m: i64) -> Result<f64> {
        segment_fluctuation(&self.graph, &self.cuts, m)
    }

    fn revision(&self) -> u64 {
        self.revision
    }

    fn missing_fluctuations(&self, range: i64) -> Option<Side> {
        let (lo, hi) = self.cuts.index_range();
        if lo > -range {
            Some(Side::Backward)
        } else if hi < range + 1 {
            Some(Side::Forward)
        } else {
            None
        }
    }
}

/// Self-avoiding environment of a two-sided loop-erased walk. Growing samples
/// again with a doubled window from the same streams: the erased prefix of a
/// longer walk can differ from the shorter one, so it cannot be extended in
/// place.
#[derive(Clone, Debug)]
pub struct LerwEnvironment {
    dim: usize,
    beta: f64,
    seed: u64,
    level: u32,
    half_window: usize,
    max_half_window: usize,
    max_attempts: u64,
    horizon_factor: usize,
    pub attempts: u64,
    pub path: LatticePath,
    pub env: Environment1D,
    pub potential: Potential,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LerwBudget {
    pub initial_half_window: usize,
    pub max_half_window: usize,
    pub max_attempts: u64,
    pub horizon_factor: usize,
}

impl Default for LerwBudget {
    fn default() -> Self {
        LerwBudget { initial_half_window: 4_096, max_half_window: 1 << 17, max_attempts: 10_000, horizon_factor: 20 }
    }
}

impl LerwEnvironment {
    pub fn new(dim: usize, beta: f64, seed: u64, budget: LerwBudget) -> Result<Self> {
        let (path, attempts) = Self::sample(dim, seed, budget.initial_half_window, budget.max_attempts, budget.horizon_factor)?;
        let env = environment_from_selfavoiding(&path, beta)?;
        let potential = potential(&env)?;
        Ok(LerwEnvironment {
            dim,
            beta,
            seed,
            level: 0,
            half_window: budget.initial_half_window,
            max_half_window: budget.max_half_window,
            max_attempts: budget.max_attempts,
            horizon_factor: budget.horizon_factor,
            attempts,
            path,
            env,
            potential,
        })
    }

    /// Every window uses the same walk streams, so a larger sample continues a
    /// smaller one unless the accepted pair of walks meets in the added
    /// stretch or a late loop erases part of the prefix.
    fn sample(dim: usize, seed: u64, half: usize, max_attempts: u64, factor: usize) -> Result<(LatticePath, u64)> {
        let s = sample_two_sided_lerw(dim, half, substream_seed(seed, "lerw-window", 0), max_attempts, factor * half)?;
        Ok((s.path, s.attempts))
    }

    pub fn half_window(&self) -> usize {
        self.half_window
    }
}

impl PotentialSource for LerwEnvironment {
    fn potential(&self) -> &Potential {
        &self.potential
    }

    fn grow(&mut self, side: Side) -> Result<()> {
        if self.half_window >= self.max_half_window {
            return Err(Error::BudgetExhausted { side, sup_r: sup_on_side(&self.potential, side) });
        }
        let half = (2 * self.half_window).min(self.max_half_window);
        let (path, attempts) = Self::sample(self.dim, self.seed, half, self.max_attempts, self.horizon_factor)?;
        let env = environment_from_selfavoiding(&path, self.beta)?;
        self.potential = potential(&env)?;
        self.env = env;
        self.path = path;
        self.attempts = attempts;
        self.half_window = half;
        self.level += 1;
        Ok(())
    }
}

impl Landscape for LerwEnvironment {
    fn dim(&self) -> usize {
        self.dim
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn cut_point(&self, n: i64) -> Result<Point> {
        self.path.position(n)
    }

    /// Every time is a cut-time, so the segment is a single step.
    fn fluctuation(&self, m: i64) -> Result<f64> {
        let d = self.path.increment(m + 1)?;
        Ok(self.beta.ln() * f64::from(d.abs()))
    }

    fn revision(&self) -> u64 {
        u64::from(self.level)
    }

    fn missing_fluctuations(&self, range: i64) -> Option<Side> {
        if self.path.lo() > -range {
            Some(Side::Backward)
        } else if self.path.hi() < range + 1 {
            Some(Side::Forward)
        } else {
            None
        }
    }
}

/// Grow `land` until the outer valley at `log n` exists, then compute the
/// smallest valley and the localization site. With `with_event` the growth
/// continues until the outer valley at `(1 + delta) log n` exists and the
/// fluctuation range is covered, and the delta valley and event flags are
/// filled in; without it the event flags stay false.
pub fn localization_report<L: Landscape + ?Sized>(
    land: &mut L,
    params: &EventParams,
    with_event: bool,
) -> Result<LocalizationReport> {
    let log_n = params.log_n();
    let h_delta = (1.0 + params.delta) * log_n;
    let needed = if with_event { h_delta } else { log_n };
    loop {
        if let Err(side) = outer_valley(land.potential(), needed) {
            land.grow(side)?;
            continue;
        }
        if with_event {
            if let Some(side) = land.missing_fluctuations(params.fluctuation_range()) {
                land.grow(side)?;
                continue;
            }
        }
        break;
    }
    let r = land.potential().clone();
    let outer = outer_valley(&r, log_n).map_err(|_| Error::Invariant("outer valley vanished".into()))?;
    let smallest = refine_to_smallest(outer, &r, log_n)?;
    let (delta_valley, event_a) = if with_event {
        let outer_delta = outer_valley(&r, h_delta).map_err(|_| Error::Invariant("outer valley vanished".into()))?;
        let delta_valley = refine_to_smallest(outer_delta, &r, h_delta)?;
        let event = evaluate_event_a(&r, &smallest, &delta_valley, params, &mut |m| land.fluctuation(m))?;
        (Some(delta_valley), event)
    } else {
        (None, EventA::default())
    };
    let base = land.cut_point(smallest.b)?;
    Ok(LocalizationReport {
        n: params.n,
        k: params.k,
        delta: params.delta,
        outer,
        smallest,
        delta_valley,
        depth: smallest.depth(&r),
        site: localization_site(base, land.dim(), params.n),
        event_a,
    })
}

/// Valleys of a fixed potential, without growth; used for fixtures.
pub fn valleys_of(r: &Potential, log_n: f64, delta: f64) -> Result<(Valley, Valley)> {
    let outer = outer_valley(r, log_n).map_err(|side| Error::NeedsExtension { side, steps: 0 })?;
    let outer_delta = outer_valley(r, (1.0 + delta) * log_n).map_err(|side| Error::NeedsExtension { side, steps: 0 })?;
    Ok((refine_to_smallest(outer, r, log_n)?, refine_to_smallest(outer_delta, r, (1.0 + delta) * log_n)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn srw_environment_grows_deterministically() {
        let budget = GrowthBudget { initial_core: 512, max_core: 1 << 17, guard_factor: 5 };
        let params = EventParams { n: 1e4, k: 20.0, delta: 0.2 };
        let mut a = SrwEnvironment::new(5, 2.0, 42, budget).unwrap();
        let ra = localization_report(&mut a, &params, true).unwrap();
        let mut b = SrwEnvironment::new(5, 2.0, 42, budget).unwrap();
        let rb = localization_report(&mut b, &params, true).unwrap();
        assert_eq!(ra.smallest, rb.smallest);
        assert_eq!(ra.site, rb.site);
        assert!(ra.smallest.straddles_origin() && ra.depth >= params.n.ln());
        assert!(ra.smallest.nested_in(&ra.delta_valley.unwrap()));
        let c = a.cut_point(ra.smallest.b).unwrap();
        for (s, x) in ra.site.iter().zip(c.coords(5)) {
            assert_eq!(*s, f64::from(*x) / params.n.ln());
        }
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let budget = GrowthBudget { initial_core: 64, max_core: 64, guard_factor: 5 };
        let params = EventParams { n: 1e12, k: 20.0, delta: 0.2 };
        let mut env = SrwEnvironment::new(5, 1.2, 7, budget).unwrap();
        assert!(matches!(localization_report(&mut env, &params, false), Err(Error::BudgetExhausted { .. })));
    }

    #[test]
    fn lerw_environment_report() {
        let budget = LerwBudget { initial_half_window: 1_000, max_half_window: 1 << 16, max_attempts: 1_000, horizon_factor: 20 };
        let params = EventParams { n: 1e4, k: 20.0, delta: 0.2 };
        let mut env = LerwEnvironment::new(5, 2.0, 3, budget).unwrap();
        let rep = localization_report(&mut env, &params, true).unwrap();
        assert!(rep.smallest.straddles_origin());
        assert!(rep.smallest.nested_in(&rep.delta_valley.unwrap()));
        // Unit steps: every fluctuation is 0 or log beta.
        assert!(rep.event_a.small_fluctuations == (2f64.ln() <= 0.2f64.powi(4) * params.n.ln()));
    }

    #[test]
    fn straight_path_fixture() {
        // Ballistic potential: R_n = -n log beta has no valley on the forward side,
        // but the fluctuation bullet is computable everywhere.
        let path = LatticePath::straight(5, -100, 100).unwrap();
        let env = environment_from_selfavoiding(&path, 2.0).unwrap();
        let r = potential(&env).unwrap();
        assert!(matches!(valleys_of(&r, 2.0, 0.2), Err(Error::NeedsExtension { side: Side::Forward, .. })));
        for m in -50..50 {
            assert_eq!(f64::from(path.increment(m + 1).unwrap().abs()) * 2f64.ln(), 2f64.ln());
        }
    }
}
