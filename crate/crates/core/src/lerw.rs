//! Chronological loop-erasure and the two-sided loop-erased random walk.

use rand::Rng;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::lattice::{LatticePath, PathKind, Point};
use crate::rng::{substream, StreamRng};

/// Output of [`loop_erase`]: `output[n] == input[sigma_times[n]]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErasureRecord {
    pub input_length: usize,
    pub sigma_times: Vec<usize>,
    pub output: Vec<Point>,
}

/// Chronological loop-erasure of a finite nearest-neighbour path.
///
/// `sigma_0` is the last visit to the starting point and
/// `sigma_n = max{m : xi_m = xi_{sigma_{n-1} + 1}}`, the maxima being taken
/// over the finite input. Loops through the start are erased as well, so the
/// output is always self-avoiding.
pub fn loop_erase(xi: &[Point]) -> Result<ErasureRecord> {
    if xi.is_empty() {
        return Err(Error::EmptyPath);
    }
    if let Some(k) = xi.windows(2).position(|w| w[0].l1_distance(&w[1]) != 1) {
        return Err(Error::InvalidParameter(format!("step {} is not nearest-neighbour", k + 1)));
    }
    let mut last = FxHashMap::default();
    for (m, p) in xi.iter().enumerate() {
        last.insert(*p, m);
    }
    Ok(erase_with_last_visits(xi, &last))
}

fn erase_with_last_visits(xi: &[Point], last: &FxHashMap<Point, usize>) -> ErasureRecord {
    let mut sigma_times = Vec::new();
    let mut s = last[&xi[0]];
    sigma_times.push(s);
    while s + 1 < xi.len() {
        s = last[&xi[s + 1]];
        sigma_times.push(s);
    }
    let output = sigma_times.iter().map(|&m| xi[m]).collect();
    ErasureRecord { input_length: xi.len(), sigma_times, output }
}

/// An accepted two-sided loop-erased sample and the number of attempts used.
#[derive(Clone, Debug)]
pub struct LerwSample {
    pub path: LatticePath,
    pub attempts: u64,
}

pub const LERW_STREAM_FIRST: &str = "lerw-xi1";
pub const LERW_STREAM_SECOND: &str = "lerw-xi2";

fn unit_step(rng: &mut StreamRng, dim: usize) -> Point {
    let k = rng.random_range(0..2 * dim as u32);
    Point::axis((k / 2) as usize, if k % 2 == 0 { 1 } else { -1 })
}

struct WalkPair {
    first: Vec<Point>,
    second: Vec<Point>,
    last_first: FxHashMap<Point, usize>,
    last_second: FxHashMap<Point, usize>,
}

/// Run two independent walks of `horizon` steps from the origin in lockstep and
/// return them if `xi1[0..=horizon]` and `xi2[1..=horizon]` are disjoint.
fn disjoint_pair(dim: usize, horizon: usize, seed: u64, attempt: u64, keep: bool) -> Option<WalkPair> {
    let mut rng1 = substream(seed, LERW_STREAM_FIRST, attempt);
    let mut rng2 = substream(seed, LERW_STREAM_SECOND, attempt);
    let mut last_first = FxHashMap::default();
    let mut last_second = FxHashMap::default();
    last_first.insert(Point::ORIGIN, 0);
    let (mut p1, mut p2) = (Point::ORIGIN, Point::ORIGIN);
    let mut first = Vec::new();
    let mut second = Vec::new();
    if keep {
        first.reserve(horizon + 1);
        second.reserve(horizon + 1);
        first.push(p1);
        second.push(p2);
    }
    for m in 1..=horizon {
        p1 = p1.checked_add(&unit_step(&mut rng1, dim))?;
        if last_second.contains_key(&p1) {
            return None;
        }
        last_first.insert(p1, m);
        p2 = p2.checked_add(&unit_step(&mut rng2, dim))?;
        if last_first.contains_key(&p2) {
            return None;
        }
        last_second.insert(p2, m);
        if keep {
            first.push(p1);
            second.push(p2);
        }
    }
    last_second.insert(Point::ORIGIN, 0);
    Some(WalkPair { first, second, last_first, last_second })
}

/// Fraction of `attempts` independent walk pairs whose ranges are disjoint
/// up to `horizon` (the truncated non-intersection event).
pub fn acceptance_rate(dim: usize, horizon: usize, attempts: u64, seed: u64) -> f64 {
    let accepted = (0..attempts)
        .filter(|&a| disjoint_pair(dim, horizon, seed, a, false).is_some())
        .count();
    accepted as f64 / attempts as f64
}

/// Two-sided loop-erased random walk on `[-half_window, half_window]`.
///
/// Attempts are independent pairs of simple random walks of `horizon` steps;
/// the first pair (in attempt order) whose ranges are disjoint is loop-erased
/// and glued at the origin, `S_n = S1_{-n}` for `n <= 0` and `S_n = S2_n` for
/// `n >= 0`, both halves truncated to `half_window` erased steps.
pub fn sample_two_sided_lerw(
    dim: usize,
    half_window: usize,
    seed: u64,
    max_attempts: u64,
    horizon: usize,
) -> Result<LerwSample> {
    if dim < 5 || dim > crate::lattice::MAX_DIM {
        return Err(Error::InvalidParameter(format!(
            "two-sided loop-erased walk needs 5 <= dimension <= {}, got {dim}",
            crate::lattice::MAX_DIM
        )));
    }
    if horizon < half_window {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} shorter than half window {half_window}"
        )));
    }
    for attempt in 0..max_attempts {
        let Some(pair) = disjoint_pair(dim, horizon, seed, attempt, true) else {
            continue;
        };
        let left = erase_with_last_visits(&pair.first, &pair.last_first);
        let right = erase_with_last_visits(&pair.second, &pair.last_second);
        let got = left.output.len().min(right.output.len());
        if got < half_window + 1 {
            return Err(Error::HorizonTooShort { got: got.saturating_sub(1), needed: half_window });
        }
        let mut points: Vec<Point> = left.output[..=half_window].iter().rev().copied().collect();
        points.extend_from_slice(&right.output[1..=half_window]);
        let path = LatticePath::from_points(dim, -(half_window as i64), &points, PathKind::LoopErased)?;
        return Ok(LerwSample { path, attempts: attempt + 1 });
    }
    Err(Error::SamplingFailed { attempts: max_attempts })
}
