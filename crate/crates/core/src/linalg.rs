//! Small dense and star-mesh solvers used for resistance computations.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};

/// Row-major square matrix.
#[derive(Clone, Debug)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, x: f64) {
        self.data[i * self.n + j] += x;
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        self.data[i * self.n + j] = x;
    }
}

/// Solve `A X = B` for `k` right-hand sides stored column-major in `rhs`
/// (`rhs[c * n + i]`), by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: DenseMatrix, mut rhs: Vec<f64>, k: usize) -> Result<Vec<f64>> {
    let n = a.n;
    assert_eq!(rhs.len(), n * k);
    if n == 0 {
        return Ok(rhs);
    }
    let scale = a.data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return Err(Error::Singular { ratio: 0.0 });
    }
    let mut min_pivot = f64::INFINITY;
    for col in 0..n {
        let (piv, best) = (col..n)
            .map(|r| (r, a.get(r, col).abs()))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        min_pivot = min_pivot.min(best);
        if best <= scale * 1e-15 {
            return Err(Error::Singular { ratio: best / scale });
        }
        if piv != col {
            for j in 0..n {
                a.data.swap(piv * n + j, col * n + j);
            }
            for c in 0..k {
                rhs.swap(c * n + piv, c * n + col);
            }
        }
        let p = a.get(col, col);
        for r in col + 1..n {
            let f = a.get(r, col) / p;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                let v = a.get(col, j);
                a.add(r, j, -f * v);
            }
            for c in 0..k {
                let v = rhs[c * n + col];
                rhs[c * n + r] -= f * v;
            }
        }
    }
    for c in 0..k {
        for i in (0..n).rev() {
            let mut s = rhs[c * n + i];
            for j in i + 1..n {
                s -= a.get(i, j) * rhs[c * n + j];
            }
            rhs[c * n + i] = s / a.get(i, i);
        }
    }
    Ok(rhs)
}

/// Weighted undirected graph on `0..n` given as an edge list, reduced by
/// star-mesh elimination to the effective conductance between `source` and
/// the (shorted) set `sinks`.
///
/// Vertices are eliminated in minimum-degree order. Every update only adds
/// positive quantities, so the reduction is free of cancellation.
pub fn effective_conductance(n: usize, edges: &[(u32, u32, f64)], source: u32, sinks: &[u32]) -> Result<f64> {
    const SINK: u32 = u32::MAX;
    let relabel = |v: u32| if sinks.contains(&v) { SINK } else { v };
    if sinks.contains(&source) {
        return Err(Error::InvalidParameter("source is also a sink".into()));
    }
    let mut adj: Vec<FxHashMap<u32, f64>> = vec![FxHashMap::default(); n];
    let mut sink_adj: FxHashMap<u32, f64> = FxHashMap::default();
    for &(u, v, c) in edges {
        let (u, v) = (relabel(u), relabel(v));
        if u == v {
            continue;
        }
        if u != SINK {
            *adj[u as usize].entry(v).or_insert(0.0) += c;
        } else {
            *sink_adj.entry(v).or_insert(0.0) += c;
        }
        if v != SINK {
            *adj[v as usize].entry(u).or_insert(0.0) += c;
        } else {
            *sink_adj.entry(u).or_insert(0.0) += c;
        }
    }
    let mut alive = vec![true; n];
    for &s in sinks {
        alive[s as usize] = false;
    }
    let mut heap: BinaryHeap<Reverse<(usize, u32)>> = (0..n as u32)
        .filter(|&v| v != source && alive[v as usize])
        .map(|v| Reverse((adj[v as usize].len(), v)))
        .collect();
    while let Some(Reverse((deg, v))) = heap.pop() {
        let vi = v as usize;
        if !alive[vi] || adj[vi].len() != deg {
            continue;
        }
        alive[vi] = false;
        let star: Vec<(u32, f64)> = {
            let mut s: Vec<(u32, f64)> = adj[vi].drain().collect();
            s.sort_unstable_by_key(|x| x.0);
            s
        };
        let total: f64 = star.iter().map(|x| x.1).sum();
        for &(u, _) in &star {
            if u == SINK {
                sink_adj.remove(&v);
            } else {
                adj[u as usize].remove(&v);
            }
        }
        for (i, &(u, cu)) in star.iter().enumerate() {
            for &(w, cw) in &star[i + 1..] {
                let c = cu * cw / total;
                if u != SINK {
                    *adj[u as usize].entry(w).or_insert(0.0) += c;
                } else {
                    *sink_adj.entry(w).or_insert(0.0) += c;
                }
                if w != SINK {
                    *adj[w as usize].entry(u).or_insert(0.0) += c;
                } else {
                    *sink_adj.entry(u).or_insert(0.0) += c;
                }
            }
        }
        for &(u, _) in &star {
            if u != SINK && u != source {
                heap.push(Reverse((adj[u as usize].len(), u)));
            }
        }
    }
    match adj[source as usize].get(&SINK) {
        Some(&c) if c > 0.0 => Ok(c),
        _ => Err(Error::Disconnected),
    }
}

/// Effective conductance from the grounded Laplacian, solved densely with
/// partial pivoting. Independent of [`effective_conductance`].
pub fn effective_conductance_dense(n: usize, edges: &[(u32, u32, f64)], source: u32, sinks: &[u32]) -> Result<f64> {
    // Unknown potentials on every vertex other than the source and the sinks.
    let mut slot = vec![usize::MAX; n];
    let mut m = 0;
    for v in 0..n as u32 {
        if v != source && !sinks.contains(&v) {
            slot[v as usize] = m;
            m += 1;
        }
    }
    let mut a = DenseMatrix::zeros(m);
    let mut b = vec![0.0; m];
    let potential = |v: u32| -> Option<f64> {
        if v == source {
            Some(1.0)
        } else if sinks.contains(&v) {
            Some(0.0)
        } else {
            None
        }
    };
    for &(u, v, c) in edges {
        for (x, y) in [(u, v), (v, u)] {
            let sx = slot[x as usize];
            if sx == usize::MAX {
                continue;
            }
            a.add(sx, sx, c);
            match potential(y) {
                Some(p) => b[sx] += c * p,
                None => a.add(sx, slot[y as usize], -c),
            }
        }
    }
    let phi = solve_dense(a, b, 1)?;
    let value = |v: u32| potential(v).unwrap_or_else(|| phi[slot[v as usize]]);
    let mut current = 0.0;
    for &(u, v, c) in edges {
        if u == source {
            current += c * (1.0 - value(v));
        } else if v == source {
            current += c * (1.0 - value(u));
        }
    }
    if current > 0.0 {
        Ok(current)
    } else {
        Err(Error::Disconnected)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_solve_recovers_known_solution() {
        let mut a = DenseMatrix::zeros(3);
        let rows = [[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]];
        for (i, r) in rows.iter().enumerate() {
            for (j, &x) in r.iter().enumerate() {
                a.set(i, j, x);
            }
        }
        let x = [1.0, -2.0, 0.5];
        let b: Vec<f64> = rows.iter().map(|r| r.iter().zip(&x).map(|(p, q)| p * q).sum()).collect();
        let got = solve_dense(a, b, 1).unwrap();
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = DenseMatrix::zeros(2);
        assert!(matches!(solve_dense(a, vec![1.0, 1.0], 1), Err(Error::Singular { .. })));
    }

    #[test]
    fn series_and_parallel_laws() {
        let series = [(0, 1, 2.0), (1, 2, 3.0)];
        let c = effective_conductance(3, &series, 0, &[2]).unwrap();
        assert!((1.0 / c - (0.5 + 1.0 / 3.0)).abs() < 1e-15);
        let parallel = [(0, 1, 2.0), (0, 2, 1.0), (2, 1, 1.0)];
        let c = effective_conductance(3, &parallel, 0, &[1]).unwrap();
        assert!((c - 2.5).abs() < 1e-15);
        assert!((effective_conductance_dense(3, &parallel, 0, &[1]).unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn wheatstone_bridge_matches_dense() {
        let edges = [(0, 1, 1.0), (0, 2, 2.0), (1, 2, 3.0), (1, 3, 4.0), (2, 3, 5.0), (3, 4, 0.5)];
        let a = effective_conductance(5, &edges, 0, &[4]).unwrap();
        let b = effective_conductance_dense(5, &edges, 0, &[4]).unwrap();
        assert!((a - b).abs() < 1e-14 * b);
        let shorted = effective_conductance(5, &edges, 0, &[3, 4]).unwrap();
        assert!((shorted - effective_conductance_dense(5, &edges, 0, &[3, 4]).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn disconnected_support_is_an_error() {
        let edges = [(0, 1, 1.0), (2, 3, 1.0)];
        assert!(matches!(effective_conductance(4, &edges, 0, &[3]), Err(Error::Disconnected)));
    }
}
