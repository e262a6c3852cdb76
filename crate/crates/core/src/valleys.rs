//! Valleys of a potential and the localization site.
//!
//! `(a, b, c)` with `a < b < c` is a valley of `R` when `R_a` is the maximum of
//! `R` on `[a, b]`, `R_b` the minimum on `[a, c]` and `R_c` the maximum on
//! `[b, c]`. Its depth is `min(R_a - R_b, R_c - R_b)`.
//!
//! A left refinement picks `a < d < e < b` maximizing `R_e - R_d` and splits
//! the valley into `(a, d, e)` and `(e, b, c)`. The right refinement is the
//! mirror image: `b < d < e < c` maximizing `R_d - R_e`, giving `(a, b, d)` and
//! `(d, e, c)`. Ties go to the lexicographically smallest `(d, e)`. A side is
//! refinable when the maximal rise is positive.

use rustc_hash::FxHashSet;

use crate::error::{Error, Result, Side};
use crate::lattice::Point;
use crate::rwre::Potential;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct Valley {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl Valley {
    pub fn new(a: i64, b: i64, c: i64) -> Self {
        Valley { a, b, c }
    }

    pub fn depth(&self, r: &Potential) -> f64 {
        depth(self, r)
    }

    pub fn straddles_origin(&self) -> bool {
        self.a < 0 && 0 < self.c
    }

    /// `[a, c]` of `self` lies inside `[a, c]` of `other`.
    pub fn nested_in(&self, other: &Valley) -> bool {
        other.a <= self.a && self.c <= other.c
    }

    /// Check the three defining extremum conditions exactly.
    pub fn is_valid(&self, r: &Potential) -> bool {
        let (a, b, c) = (self.a, self.b, self.c);
        if !(a < b && b < c && r.contains(a) && r.contains(c)) {
            return false;
        }
        let (ra, rb, rc) = (r.get(a), r.get(b), r.get(c));
        (a..=b).all(|m| r.get(m) <= ra) && (a..=c).all(|m| r.get(m) >= rb) && (b..=c).all(|m| r.get(m) <= rc)
    }
}

pub fn depth(v: &Valley, r: &Potential) -> f64 {
    let rb = r.get(v.b);
    (r.get(v.a) - rb).min(r.get(v.c) - rb)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineSide {
    Left,
    Right,
}

/// `x - y` as an unevaluated sum `s + t` with `s = fl(x - y)`. Ordering pairs
/// lexicographically orders the exact differences, so near-ties that round to
/// the same `f64` are still broken correctly.
fn exact_diff(x: f64, y: f64) -> (f64, f64) {
    let s = x - y;
    let yv = x - s;
    let xv = s + yv;
    (s, (x - xv) + (yv - y))
}

fn greater(p: (f64, f64), q: (f64, f64)) -> bool {
    p.0 > q.0 || (p.0 == q.0 && p.1 > q.1)
}

/// Largest rise `R_e - R_d` over `lo < d < e < hi` and its lexicographically
/// smallest maximizer.
fn best_rise(r: &Potential, lo: i64, hi: i64, sign: f64) -> Option<(f64, i64, i64)> {
    if hi - lo < 3 {
        return None;
    }
    let f = |m: i64| sign * r.get(m);
    // suffix[k] = max f over (lo + 1 + k, hi).
    let len = (hi - lo - 1) as usize;
    let mut suffix = vec![f64::NEG_INFINITY; len + 1];
    for k in (0..len).rev() {
        suffix[k] = suffix[k + 1].max(f(lo + 1 + k as i64));
    }
    let mut best: Option<(usize, (f64, f64))> = None;
    for k in 0..len - 1 {
        let rise = exact_diff(suffix[k + 1], f(lo + 1 + k as i64));
        if best.is_none_or(|(_, b)| greater(rise, b)) {
            best = Some((k, rise));
        }
    }
    let (k, rise) = best?;
    let d = lo + 1 + k as i64;
    let e = (d + 1..hi).find(|&e| f(e) == suffix[k + 1])?;
    let positive = rise.0 > 0.0 || (rise.0 == 0.0 && rise.1 > 0.0);
    Some((if positive { rise.0.max(f64::MIN_POSITIVE) } else { 0.0 }, d, e))
}

/// Split `v` on `side`. Fails with [`Error::NotRefinable`] when no positive
/// rise exists on that side.
pub fn refine(v: &Valley, r: &Potential, side: RefineSide) -> Result<(Valley, Valley)> {
    if !(v.a < v.b && v.b < v.c && r.contains(v.a) && r.contains(v.c)) {
        return Err(Error::InvalidParameter(format!("({}, {}, {}) is not an ordered triple inside R", v.a, v.b, v.c)));
    }
    let out = match side {
        RefineSide::Left => {
            let (rise, d, e) = best_rise(r, v.a, v.b, 1.0).ok_or(Error::NotRefinable)?;
            if rise <= 0.0 {
                return Err(Error::NotRefinable);
            }
            (Valley::new(v.a, d, e), Valley::new(e, v.b, v.c))
        }
        RefineSide::Right => {
            // R_d - R_e is a rise of -R.
            let (rise, d, e) = best_rise(r, v.b, v.c, -1.0).ok_or(Error::NotRefinable)?;
            if rise <= 0.0 {
                return Err(Error::NotRefinable);
            }
            (Valley::new(v.a, v.b, d), Valley::new(d, e, v.c))
        }
    };
    if !out.0.is_valid(r) || !out.1.is_valid(r) {
        return Err(Error::InvalidParameter(format!(
            "refinement of ({}, {}, {}) is not a pair of valleys; the input is not a valley",
            v.a, v.b, v.c
        )));
    }
    Ok(out)
}

/// A potential that may be lengthened on demand.
pub trait PotentialSource {
    fn potential(&self) -> &Potential;
    /// Lengthen the potential on `side`, or fail with a budget error.
    fn grow(&mut self, side: Side) -> Result<()>;
}

/// A fixed potential; growing it always fails.
pub struct FixedPotential<'a>(pub &'a Potential);

impl PotentialSource for FixedPotential<'_> {
    fn potential(&self) -> &Potential {
        self.0
    }

    fn grow(&mut self, side: Side) -> Result<()> {
        let r = self.0;
        let range = match side {
            Side::Backward => r.first..=0,
            Side::Forward => 0..=r.last(),
        };
        let sup_r = range.map(|m| r.get(m)).fold(f64::NEG_INFINITY, f64::max);
        Err(Error::BudgetExhausted { side, sup_r })
    }
}

/// Outer valley at `threshold` inside the given potential, or the side on
/// which `R` never reaches the threshold. The threshold is absolute; with the
/// usual normalisation `R_0 = 0` the origin itself never qualifies, and it is
/// excluded so that `a' < 0 < c'` regardless.
pub fn outer_valley(r: &Potential, threshold: f64) -> std::result::Result<Valley, Side> {
    let a = (r.first..0).rev().find(|&m| r.get(m) >= threshold).ok_or(Side::Backward)?;
    let c = (1..=r.last()).find(|&m| r.get(m) >= threshold).ok_or(Side::Forward)?;
    let mut b = a;
    for m in a..=c {
        if r.get(m) < r.get(b) {
            b = m;
        }
    }
    Ok(Valley::new(a, b, c))
}

/// `a' = sup{m <= 0 : R_m >= threshold}`, `c' = inf{m >= 0 : ...}` and
/// `b'` the smallest minimizer of `R` on `[a', c']`, growing the source as needed.
pub fn find_outer_valley<S: PotentialSource + ?Sized>(src: &mut S, threshold: f64) -> Result<Valley> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!("threshold must be positive, got {threshold}")));
    }
    loop {
        match outer_valley(src.potential(), threshold) {
            Ok(v) => return Ok(v),
            Err(side) => src.grow(side)?,
        }
    }
}

/// Smallest valley below a given valley: repeatedly replace the current
/// valley by the first refinement child (left side before right side) that
/// still straddles 0 with depth at least `threshold`.
pub fn refine_to_smallest(start: Valley, r: &Potential, threshold: f64) -> Result<Valley> {
    let mut v = start;
    'outer: loop {
        for side in [RefineSide::Left, RefineSide::Right] {
            match refine(&v, r, side) {
                Ok((x, y)) => {
                    for child in [x, y] {
                        if child.straddles_origin() && depth(&child, r) >= threshold {
                            v = child;
                            continue 'outer;
                        }
                    }
                }
                Err(Error::NotRefinable) => {}
                Err(e) => return Err(e),
            }
        }
        return Ok(v);
    }
}

/// `(a(n), b(n), c(n))` for `threshold = log n`.
pub fn smallest_valley<S: PotentialSource + ?Sized>(src: &mut S, threshold: f64) -> Result<Valley> {
    let outer = find_outer_valley(src, threshold)?;
    refine_to_smallest(outer, src.potential(), threshold)
}

/// Every valley reachable from `root` by refinements, the root included, up
/// to `cap` valleys. The flag reports whether the enumeration was complete.
pub fn refinement_closure(root: Valley, r: &Potential, cap: usize) -> Result<(Vec<Valley>, bool)> {
    let mut seen: FxHashSet<Valley> = FxHashSet::default();
    let mut order = Vec::new();
    let mut stack = vec![root];
    seen.insert(root);
    while let Some(v) = stack.pop() {
        order.push(v);
        if seen.len() > cap {
            return Ok((order, false));
        }
        for side in [RefineSide::Left, RefineSide::Right] {
            match refine(&v, r, side) {
                Ok((x, y)) => {
                    for child in [x, y] {
                        if seen.insert(child) {
                            stack.push(child);
                        }
                    }
                }
                Err(Error::NotRefinable) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok((order, true))
}

/// The five conditions defining the good event for horizon `n`.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EventA {
    pub same_base: bool,
    pub shallow_refinements: bool,
    pub steep_walls: bool,
    pub narrow: bool,
    pub small_fluctuations: bool,
    /// Whether the refinement enumeration behind the second flag was complete.
    pub exhaustive: bool,
}

impl EventA {
    pub fn all(&self) -> bool {
        self.same_base && self.shallow_refinements && self.steep_walls && self.narrow && self.small_fluctuations
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EventParams {
    pub n: f64,
    pub k: f64,
    pub delta: f64,
}

impl EventParams {
    pub fn log_n(&self) -> f64 {
        self.n.ln()
    }

    /// `K (log n)^2 + 1`, the range of the fluctuation condition.
    pub fn fluctuation_range(&self) -> i64 {
        (self.k * self.log_n().powi(2) + 1.0).floor() as i64
    }
}

/// Node cap for the refinement enumeration of the second condition.
pub const REFINEMENT_CAP: usize = 200_000;

/// Evaluate the five conditions. `fluctuation(m)` must return
/// `log(T_{m+1} - T_m) + log beta sup_{T_m <= k <= T_{m+1}} |C_m^(1) - S_k^(1)|`.
pub fn evaluate_event_a(
    r: &Potential,
    smallest: &Valley,
    delta_valley: &Valley,
    params: &EventParams,
    fluctuation: &mut dyn FnMut(i64) -> Result<f64>,
) -> Result<EventA> {
    let log_n = params.log_n();
    let delta = params.delta;
    let b = smallest.b;
    let (closure, exhaustive) = refinement_closure(*delta_valley, r, REFINEMENT_CAP)?;
    let shallow_refinements = closure
        .iter()
        .skip(1)
        .filter(|v| v.b != b)
        .all(|v| depth(v, r) < (1.0 - delta) * log_n);
    let band = delta * log_n * log_n;
    let rb = r.get(b);
    let steep_walls = (delta_valley.a..=delta_valley.c)
        .filter(|&m| ((m - b) as f64).abs() > band)
        .all(|m| r.get(m) - rb > delta.powi(3) * log_n);
    let narrow = (delta_valley.a.abs() + delta_valley.c.abs()) as f64 <= params.k * log_n * log_n;
    let range = params.fluctuation_range();
    let mut sup = f64::NEG_INFINITY;
    for m in -range..=range {
        sup = sup.max(fluctuation(m)?);
    }
    let small_fluctuations = sup <= delta.powi(4) * log_n;
    Ok(EventA {
        same_base: smallest.b == delta_valley.b,
        shallow_refinements,
        steep_walls,
        narrow,
        small_fluctuations,
        exhaustive,
    })
}

/// Valleys and flags for one environment and horizon.
#[derive(Clone, Debug, serde::Serialize)]
pub struct LocalizationReport {
    pub n: f64,
    pub k: f64,
    pub delta: f64,
    pub outer: Valley,
    pub smallest: Valley,
    /// Smallest valley at `(1 + delta) log n`, computed with the event flags.
    pub delta_valley: Option<Valley>,
    pub depth: f64,
    pub site: Vec<f64>,
    pub event_a: EventA,
}

/// `C_{b(n)} / log n`.
pub fn localization_site(base: Point, dim: usize, n: f64) -> Vec<f64> {
    let log_n = n.ln();
    base.coords(dim).iter().map(|&x| f64::from(x) / log_n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pot(first: i64, values: &[f64]) -> Potential {
        Potential::new(first, values.to_vec())
    }

    #[test]
    fn depth_examples() {
        let r = pot(-2, &[2.0, 1.0, 0.0, 1.0, 2.0]);
        assert_eq!(depth(&Valley::new(-2, 0, 2), &r), 2.0);
        let r = pot(-1, &[3.0, 0.0, 1.0]);
        assert_eq!(depth(&Valley::new(-1, 0, 1), &r), 1.0);
    }

    #[test]
    fn outer_valley_examples() {
        let r = pot(-5, &[5.0, 4.0, 3.0, 2.0, 1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(outer_valley(&r, 2.5), Ok(Valley::new(-3, 0, 3)));
        let r = pot(-2, &[3.0, 0.0, 1.0, 0.0, 3.0]);
        assert_eq!(outer_valley(&r, 3.0), Ok(Valley::new(-2, -1, 2)));
        let r = pot(-2, &[3.0, 2.0, 0.0, -1.0, -2.0]);
        assert_eq!(outer_valley(&r, 3.0), Err(Side::Forward));
        assert!(matches!(
            find_outer_valley(&mut FixedPotential(&r), 3.0),
            Err(Error::BudgetExhausted { side: Side::Forward, .. })
        ));
    }

    #[test]
    fn refine_examples() {
        let r = pot(0, &[5.0, 0.0, 3.0, 1.0, 6.0]);
        let (x, y) = refine(&Valley::new(0, 3, 4), &r, RefineSide::Left).unwrap();
        assert_eq!((x, y), (Valley::new(0, 1, 2), Valley::new(2, 3, 4)));
        let r = pot(0, &[4.0, 3.0, 2.0, 1.0, 0.0, 5.0]);
        assert!(matches!(refine(&Valley::new(0, 4, 5), &r, RefineSide::Left), Err(Error::NotRefinable)));
        // Mirror image of the first example.
        let r = pot(0, &[6.0, 1.0, 3.0, 0.0, 5.0]);
        let (x, y) = refine(&Valley::new(0, 1, 4), &r, RefineSide::Right).unwrap();
        assert_eq!((x, y), (Valley::new(0, 1, 2), Valley::new(2, 3, 4)));
    }

    #[test]
    fn rounding_ties_are_broken_exactly() {
        // R_2 exceeds R_0 by one ulp; both drops to R_3 round to the same value.
        let hi = 0.8305239101167299_f64;
        let lo = 0.8305239101167298_f64;
        assert!(hi > lo && hi - (-1.9421) == lo - (-1.9421));
        let r = pot(-1, &[4.0, -3.0, lo, 0.5, hi, -1.9421, 0.0, 4.0]);
        let outer = Valley::new(-1, 0, 6);
        assert!(outer.is_valid(&r));
        let (x, y) = refine(&outer, &r, RefineSide::Right).unwrap();
        assert_eq!((x, y), (Valley::new(-1, 0, 3), Valley::new(3, 4, 6)));
    }

    #[test]
    fn single_basin_is_its_own_smallest_valley() {
        let values: Vec<f64> = (-6i64..=6).map(|m| (m * m) as f64).collect();
        let r = pot(-6, &values);
        let v = smallest_valley(&mut FixedPotential(&r), 9.0).unwrap();
        assert_eq!(v, Valley::new(-3, 0, 3));
    }

    /// Indices -4..=8: the origin lies in a basin with base -1 closed by a
    /// ridge at 2; a deeper basin with base 5 lies behind the ridge.
    const TWO_BASINS: [f64; 13] = [5.0, 4.0, 1.0, -3.0, 0.0, 1.0, 3.0, 0.0, -4.0, -8.0, -2.0, 2.0, 6.0];

    #[test]
    fn two_basin_fixture() {
        let r = pot(-4, &TWO_BASINS);
        let outer = outer_valley(&r, 4.0).unwrap();
        assert_eq!(outer, Valley::new(-3, 5, 8));
        let v = smallest_valley(&mut FixedPotential(&r), 4.0).unwrap();
        assert_eq!(v, Valley::new(-3, -1, 2));
        assert!(v.is_valid(&r) && depth(&v, &r) == 6.0);
    }

    #[test]
    fn threshold_is_absolute() {
        let shifted: Vec<f64> = TWO_BASINS.iter().map(|x| x + 17.25).collect();
        let a = outer_valley(&pot(-4, &TWO_BASINS), 4.0).unwrap();
        let b = outer_valley(&pot(-4, &shifted), 4.0 + 17.25).unwrap();
        assert_eq!(a, b);
        assert_ne!(outer_valley(&pot(-4, &shifted), 4.0), Ok(a));
    }

    /// Quadratic scan over all pairs.
    fn brute_refine(v: &Valley, r: &Potential, side: RefineSide) -> Option<(Valley, Valley)> {
        let mut best: Option<(f64, i64, i64)> = None;
        let (lo, hi) = match side {
            RefineSide::Left => (v.a, v.b),
            RefineSide::Right => (v.b, v.c),
        };
        for d in lo + 1..hi {
            for e in d + 1..hi {
                let rise = match side {
                    RefineSide::Left => r.get(e) - r.get(d),
                    RefineSide::Right => r.get(d) - r.get(e),
                };
                if best.is_none_or(|b| rise > b.0) {
                    best = Some((rise, d, e));
                }
            }
        }
        let (rise, d, e) = best?;
        (rise > 0.0).then(|| match side {
            RefineSide::Left => (Valley::new(v.a, d, e), Valley::new(e, v.b, v.c)),
            RefineSide::Right => (Valley::new(v.a, v.b, d), Valley::new(d, e, v.c)),
        })
    }

    fn random_potential() -> impl Strategy<Value = (i64, Vec<f64>)> {
        (1usize..40, 1usize..40).prop_flat_map(|(left, right)| {
            let n = left + right + 1;
            (Just(-(left as i64)), proptest::collection::vec(-6i32..=6, n))
        })
        .prop_map(|(first, steps)| {
            let mut acc = 0.0;
            let mut vals: Vec<f64> = steps.iter().map(|&s| { acc += f64::from(s) * 0.5; acc }).collect();
            let r0 = vals[(-first) as usize];
            vals.iter_mut().for_each(|v| *v -= r0);
            (first, vals)
        })
    }

    proptest! {
        #[test]
        fn refine_matches_quadratic_scan((first, vals) in random_potential()) {
            let r = Potential::new(first, vals);
            let last = r.last();
            for a in r.first..=last {
                for c in a + 2..=last {
                    for b in a + 1..c {
                        let v = Valley::new(a, b, c);
                        if !v.is_valid(&r) {
                            continue;
                        }
                        for side in [RefineSide::Left, RefineSide::Right] {
                            let got = refine(&v, &r, side).ok();
                            prop_assert_eq!(got, brute_refine(&v, &r, side));
                            if let Some((x, y)) = got {
                                prop_assert!(x.is_valid(&r) && y.is_valid(&r));
                            }
                        }
                    }
                }
            }
        }

        #[test]
        fn depth_matches_recomputation((first, vals) in random_potential()) {
            let r = Potential::new(first, vals);
            for a in r.first..=r.last() {
                for c in a + 2..=r.last() {
                    for b in a + 1..c {
                        let v = Valley::new(a, b, c);
                        let min_wall = [r.get(a), r.get(c)].iter().map(|w| w - r.get(b)).fold(f64::INFINITY, f64::min);
                        prop_assert_eq!(depth(&v, &r), min_wall);
                    }
                }
            }
        }

        #[test]
        fn smallest_valley_is_minimal_reachable((first, vals) in random_potential(), h in 0.5f64..4.0) {
            let r = Potential::new(first, vals);
            let Ok(outer) = outer_valley(&r, h) else { return Ok(()); };
            // Brute-force outer valley by linear scans.
            let a = (r.first..=0).filter(|&m| r.get(m) >= h).max().unwrap();
            let c = (0..=r.last()).filter(|&m| r.get(m) >= h).min().unwrap();
            let min = (a..=c).map(|m| r.get(m)).fold(f64::INFINITY, f64::min);
            let b = (a..=c).find(|&m| r.get(m) == min).unwrap();
            prop_assert_eq!(outer, Valley::new(a, b, c));
            prop_assert!(outer.is_valid(&r));

            let got = refine_to_smallest(outer, &r, h).unwrap();
            let (all, complete) = refinement_closure(outer, &r, 1_000_000).unwrap();
            prop_assert!(complete);
            let admissible: Vec<Valley> = all.into_iter()
                .filter(|v| v.straddles_origin() && depth(v, &r) >= h)
                .collect();
            let minimal: Vec<&Valley> = admissible.iter()
                .filter(|v| !admissible.iter().any(|w| w != *v && w.nested_in(v)))
                .collect();
            prop_assert_eq!(minimal, vec![&got]);
        }
    }
}
