//! Weighted graph on the range of a path.
//!
//! The edge `{x, y}` carries conductance `beta^max(x1, y1)`. Conductances are
//! kept as integer exponents: every edge at `x` has exponent `x1` or `x1 + 1`,
//! so `mu(x) = beta^x1 (a + b beta)` with `a` and `b` small neighbour counts
//! and all transition probabilities are exact ratios of `1` and `beta`.

use rustc_hash::FxHashMap;

use crate::cut_times::CutStructure;
use crate::error::{Error, Result, Side};
use crate::lattice::{LatticePath, Point};
use crate::linalg;

#[derive(Clone, Debug)]
pub struct RangeGraph {
    beta: f64,
    log_beta: f64,
    /// Path index range the graph was built from.
    lo: i64,
    hi: i64,
    /// Local vertex id at each index `lo..=hi`.
    index_vertex: Vec<u32>,
    points: Vec<Point>,
    /// First and last visit of each local vertex, over the whole path window.
    spans: Vec<(i64, i64)>,
    offsets: Vec<u32>,
    neighbors: Vec<u32>,
    /// `max(x1, y1) - x1`, either 0 or 1, stored per directed edge.
    lifts: Vec<u8>,
    /// Cumulative transition probabilities per directed edge.
    cumulative: Vec<f64>,
    /// `a + b beta` per vertex, so that `mu(x) = beta^x1 * local_measure[x]`.
    local_measure: Vec<f64>,
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 1.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta must be finite and >= 1, got {beta}")));
    }
    Ok(())
}

/// Range graph of the whole generated window.
pub fn build_range_graph(path: &LatticePath, beta: f64) -> Result<RangeGraph> {
    RangeGraph::between(path, beta, path.lo(), path.hi())
}

impl RangeGraph {
    /// Graph with vertices `{S_m : lo <= m <= hi}` and edges `{S_m, S_{m+1}}`
    /// for `lo <= m < hi`.
    pub fn between(path: &LatticePath, beta: f64, lo: i64, hi: i64) -> Result<RangeGraph> {
        check_beta(beta)?;
        if lo > hi || !path.contains_index(lo) || !path.contains_index(hi) {
            return Err(Error::IndexOutOfWindow { index: if path.contains_index(lo) { hi } else { lo }, lo: path.lo(), hi: path.hi() });
        }
        let mut local: FxHashMap<u32, u32> = FxHashMap::default();
        let mut points = Vec::new();
        let mut spans = Vec::new();
        let mut index_vertex = Vec::with_capacity((hi - lo + 1) as usize);
        for m in lo..=hi {
            let g = path.vertex_unchecked(m);
            let next = points.len() as u32;
            let id = *local.entry(g).or_insert(next);
            if id == next {
                points.push(path.point(g));
                spans.push(path.visit_span(g));
            }
            index_vertex.push(id);
        }
        let nv = points.len();
        let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(2 * index_vertex.len());
        for w in index_vertex.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidParameter("path has a zero step".into()));
            }
            pairs.push((w[0], w[1]));
            pairs.push((w[1], w[0]));
        }
        pairs.sort_unstable();
        pairs.dedup();
        let mut offsets = vec![0u32; nv + 1];
        for &(u, _) in &pairs {
            offsets[u as usize + 1] += 1;
        }
        for i in 0..nv {
            offsets[i + 1] += offsets[i];
        }
        let neighbors: Vec<u32> = pairs.iter().map(|p| p.1).collect();
        let mut lifts = Vec::with_capacity(neighbors.len());
        for &(u, v) in &pairs {
            let (xu, xv) = (points[u as usize].first(), points[v as usize].first());
            if xu.abs_diff(xv) > 1 {
                return Err(Error::InvalidParameter("first coordinates of an edge differ by more than 1".into()));
            }
            lifts.push(u8::from(xv > xu));
        }
        let mut local_measure = vec![0.0; nv];
        let mut cumulative = vec![0.0; neighbors.len()];
        for x in 0..nv {
            let (s, e) = (offsets[x] as usize, offsets[x + 1] as usize);
            let lifted = lifts[s..e].iter().filter(|&&l| l == 1).count() as f64;
            let total = (e - s) as f64 - lifted + lifted * beta;
            local_measure[x] = total;
            let mut acc = 0.0;
            for k in s..e {
                acc += if lifts[k] == 1 { beta } else { 1.0 };
                cumulative[k] = acc / total;
            }
            if e > s {
                cumulative[e - 1] = 1.0;
            }
        }
        Ok(RangeGraph {
            beta,
            log_beta: beta.ln(),
            lo,
            hi,
            index_vertex,
            points,
            spans,
            offsets,
            neighbors,
            lifts,
            cumulative,
            local_measure,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn log_beta(&self) -> f64 {
        self.log_beta
    }

    pub fn index_range(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    pub fn num_vertices(&self) -> usize {
        self.points.len()
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Local vertex at path index `m`.
    pub fn vertex_at(&self, m: i64) -> Result<u32> {
        if m < self.lo || m > self.hi {
            return Err(Error::IndexOutOfWindow { index: m, lo: self.lo, hi: self.hi });
        }
        Ok(self.index_vertex[(m - self.lo) as usize])
    }

    #[inline]
    pub fn vertex_at_unchecked(&self, m: i64) -> u32 {
        self.index_vertex[(m - self.lo) as usize]
    }

    #[inline]
    pub fn point(&self, v: u32) -> Point {
        self.points[v as usize]
    }

    #[inline]
    pub fn first_coordinate(&self, v: u32) -> i32 {
        self.points[v as usize].first()
    }

    /// First and last path index visiting `v` over the whole path window.
    pub fn visit_span(&self, v: u32) -> (i64, i64) {
        self.spans[v as usize]
    }

    /// Whether every edge of the full range graph at `v` is present here.
    #[inline]
    pub fn is_complete(&self, v: u32) -> bool {
        let (a, b) = self.spans[v as usize];
        a > self.lo && b < self.hi
    }

    /// Side on which an incomplete vertex touches the boundary.
    pub fn boundary_side(&self, v: u32) -> Side {
        let (a, b) = self.spans[v as usize];
        if a <= self.lo && !(b >= self.hi && self.hi - b < a - self.lo) {
            Side::Backward
        } else {
            Side::Forward
        }
    }

    #[inline]
    pub fn neighbors(&self, v: u32) -> &[u32] {
        let (s, e) = (self.offsets[v as usize] as usize, self.offsets[v as usize + 1] as usize);
        &self.neighbors[s..e]
    }

    #[inline]
    fn edge_range(&self, v: u32) -> std::ops::Range<usize> {
        self.offsets[v as usize] as usize..self.offsets[v as usize + 1] as usize
    }

    /// Integer exponent `max(x1, y1)` of the edge from `v` to its `k`-th neighbour.
    pub fn edge_exponent(&self, v: u32, k: usize) -> i64 {
        let r = self.edge_range(v);
        i64::from(self.first_coordinate(v)) + i64::from(self.lifts[r.start + k])
    }

    /// Exponent of the edge `{u, v}`, if present.
    pub fn exponent_between(&self, u: u32, v: u32) -> Option<i64> {
        let k = self.neighbors(u).iter().position(|&w| w == v)?;
        Some(self.edge_exponent(u, k))
    }

    pub fn log_conductance(&self, u: u32, v: u32) -> Option<f64> {
        self.exponent_between(u, v).map(|e| e as f64 * self.log_beta)
    }

    /// `mu(v) / beta^v1`.
    #[inline]
    pub fn local_measure(&self, v: u32) -> f64 {
        self.local_measure[v as usize]
    }

    pub fn log_measure(&self, v: u32) -> f64 {
        f64::from(self.first_coordinate(v)) * self.log_beta + self.local_measure[v as usize].ln()
    }

    /// Transition probabilities from `v`, aligned with [`Self::neighbors`].
    pub fn transition_probabilities(&self, v: u32) -> Vec<f64> {
        let r = self.edge_range(v);
        let total = self.local_measure[v as usize];
        self.lifts[r].iter().map(|&l| if l == 1 { self.beta / total } else { 1.0 / total }).collect()
    }

    pub fn transition_probability(&self, u: u32, v: u32) -> f64 {
        match self.neighbors(u).iter().position(|&w| w == v) {
            Some(k) => self.transition_probabilities(u)[k],
            None => 0.0,
        }
    }

    /// Cumulative transition table of `v`.
    #[inline]
    pub fn cumulative(&self, v: u32) -> &[f64] {
        &self.cumulative[self.edge_range(v)]
    }

    /// Local ids of `{S_m : from <= m <= to}`, sorted and deduplicated.
    pub fn support_between(&self, from: i64, to: i64) -> Result<Vec<u32>> {
        self.vertex_at(from)?;
        self.vertex_at(to)?;
        let mut s: Vec<u32> = (from..=to).map(|m| self.vertex_at_unchecked(m)).collect();
        s.sort_unstable();
        s.dedup();
        Ok(s)
    }

    /// Edges induced on `support`, relabelled to `0..support.len()`, with
    /// conductances `beta^(exponent - reference)`.
    fn induced_edges(&self, support: &[u32], reference: i64) -> (FxHashMap<u32, u32>, Vec<(u32, u32, f64)>) {
        let label: FxHashMap<u32, u32> = support.iter().enumerate().map(|(i, &v)| (v, i as u32)).collect();
        let mut edges = Vec::new();
        for &u in support {
            for (k, &v) in self.neighbors(u).iter().enumerate() {
                if u < v {
                    if let Some(&lv) = label.get(&v) {
                        let c = self.beta.powf((self.edge_exponent(u, k) - reference) as f64);
                        edges.push((label[&u], lv, c));
                    }
                }
            }
        }
        (label, edges)
    }

    fn resistance_with(
        &self,
        source: u32,
        sinks: &[u32],
        support: &[u32],
        solver: fn(usize, &[(u32, u32, f64)], u32, &[u32]) -> Result<f64>,
    ) -> Result<f64> {
        if !support.contains(&source) || sinks.iter().any(|s| !support.contains(s)) || sinks.is_empty() {
            return Err(Error::InvalidParameter("source and sinks must lie in the support".into()));
        }
        let reference = i64::from(self.first_coordinate(source));
        // Keep only the component of the source.
        let component = self.component(source, support);
        if !sinks.iter().any(|s| component.binary_search(s).is_ok()) {
            return Err(Error::Disconnected);
        }
        let (label, edges) = self.induced_edges(&component, reference);
        let local_sinks: Vec<u32> = sinks.iter().filter_map(|s| label.get(s).copied()).collect();
        let conductance = solver(component.len(), &edges, label[&source], &local_sinks)?;
        Ok(-conductance.ln())
    }

    fn component(&self, source: u32, support: &[u32]) -> Vec<u32> {
        let mut sorted = support.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut seen = rustc_hash::FxHashSet::default();
        let mut stack = vec![source];
        seen.insert(source);
        while let Some(u) = stack.pop() {
            for &v in self.neighbors(u) {
                if sorted.binary_search(&v).is_ok() && seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        let mut out: Vec<u32> = seen.into_iter().collect();
        out.sort_unstable();
        out
    }

    fn unscale(&self, source: u32, scaled: f64) -> f64 {
        scaled - f64::from(self.first_coordinate(source)) * self.log_beta
    }

    /// `log(R_eff(source, sinks) beta^source1)`, computed without forming the
    /// unscaled conductances.
    pub fn log_scaled_resistance(&self, source: u32, sinks: &[u32], support: &[u32]) -> Result<f64> {
        self.resistance_with(source, sinks, support, linalg::effective_conductance)
    }

    /// `log R_eff(source, sinks)` on the subgraph induced by `support`.
    pub fn log_effective_resistance(&self, source: u32, sinks: &[u32], support: &[u32]) -> Result<f64> {
        Ok(self.unscale(source, self.log_scaled_resistance(source, sinks, support)?))
    }

    pub fn effective_resistance(&self, source: u32, sinks: &[u32], support: &[u32]) -> Result<f64> {
        self.log_effective_resistance(source, sinks, support).map(f64::exp)
    }

    /// Same quantity through a dense grounded-Laplacian solve.
    pub fn log_effective_resistance_dense(&self, source: u32, sinks: &[u32], support: &[u32]) -> Result<f64> {
        let scaled = self.resistance_with(source, sinks, support, linalg::effective_conductance_dense)?;
        Ok(self.unscale(source, scaled))
    }

    /// `log R_eff(C_n, C_{n+1})` over the cut-segment `{S_m : T_n <= m <= T_{n+1}}`.
    pub fn log_segment_resistance(&self, cuts: &CutStructure, n: i64) -> Result<f64> {
        let (a, b) = (cuts.time(n)?, cuts.time(n + 1)?);
        let support = self.support_between(a, b)?;
        self.log_effective_resistance(self.vertex_at_unchecked(a), &[self.vertex_at_unchecked(b)], &support)
    }
}

/// Comparison of `R_eff(C_n, C_{n+1})` with its elementary lower and upper bounds.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct ResistanceBounds {
    pub n: i64,
    pub log_resistance: f64,
    /// `-max(S^(1)_{T_n}, S^(1)_{T_n + 1}) log beta`.
    pub log_lower: f64,
    /// `log(T_{n+1} - T_n) - min_{T_n <= m < T_{n+1}} S^(1)_m log beta`.
    pub log_upper: f64,
}

impl ResistanceBounds {
    pub fn lower_gap(&self) -> f64 {
        self.log_resistance - self.log_lower
    }

    pub fn upper_gap(&self) -> f64 {
        self.log_upper - self.log_resistance
    }

    /// Both inequalities hold up to relative slack `tol`.
    pub fn holds(&self, tol: f64) -> bool {
        self.lower_gap() >= -tol && self.upper_gap() >= -tol
    }
}

pub fn check_resistance_bounds(graph: &RangeGraph, cuts: &CutStructure, n: i64) -> Result<ResistanceBounds> {
    let (a, b) = (cuts.time(n)?, cuts.time(n + 1)?);
    let x = |m: i64| graph.first_coordinate(graph.vertex_at_unchecked(m));
    let log_resistance = graph.log_segment_resistance(cuts, n)?;
    let log_lower = -f64::from(x(a).max(x(a + 1))) * graph.log_beta();
    let min_x = (a..b).map(x).min().expect("segment has at least one step");
    let log_upper = ((b - a) as f64).ln() - f64::from(min_x) * graph.log_beta();
    Ok(ResistanceBounds { n, log_resistance, log_lower, log_upper })
}
