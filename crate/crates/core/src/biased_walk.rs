//! The quenched biased walk on a range graph and its jump process on cut-points.

use rand::Rng;
use rustc_hash::FxHashMap;

use crate::cut_times::CutStructure;
use crate::error::{Error, Result};
use crate::range_graph::RangeGraph;
use crate::rng::StreamRng;

/// Vertices `X_0 = start, X_1, ..., X_n` of one walk.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub steps: Vec<u32>,
}

impl Trajectory {
    pub fn start(&self) -> u32 {
        self.steps[0]
    }

    pub fn len(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.steps.len() == 1
    }
}

/// Step-by-step sampler of the biased walk. Each step consumes one uniform
/// `f64` from the stream and picks the first neighbour whose cumulative
/// probability exceeds it.
#[derive(Clone, Debug)]
pub struct Walker<'g> {
    graph: &'g RangeGraph,
    current: u32,
    time: u64,
}

impl<'g> Walker<'g> {
    pub fn new(graph: &'g RangeGraph, start: u32) -> Result<Self> {
        if start as usize >= graph.num_vertices() {
            return Err(Error::InvalidParameter(format!("start vertex {start} not in graph")));
        }
        Ok(Walker { graph, current: start, time: 0 })
    }

    pub fn position(&self) -> u32 {
        self.current
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    /// Advance one step. Fails without consuming randomness when the current
    /// vertex has edges outside the graph.
    #[inline]
    pub fn step(&mut self, rng: &mut StreamRng) -> Result<u32> {
        let g = self.graph;
        if !g.is_complete(self.current) {
            return Err(Error::WindowExhausted { side: g.boundary_side(self.current), step: self.time });
        }
        let u: f64 = rng.random();
        let cum = g.cumulative(self.current);
        let k = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        self.current = g.neighbors(self.current)[k];
        self.time += 1;
        Ok(self.current)
    }
}

/// `n_steps` steps of the biased walk from `start`.
pub fn simulate(graph: &RangeGraph, start: u32, n_steps: u64, rng: &mut StreamRng) -> Result<Trajectory> {
    let mut walker = Walker::new(graph, start)?;
    let mut steps = Vec::with_capacity(n_steps as usize + 1);
    steps.push(start);
    for _ in 0..n_steps {
        steps.push(walker.step(rng)?);
    }
    Ok(Trajectory { steps })
}

/// Hitting times `H_0 < H_1 < ...` of the cut-point set and `J_k` with
/// `X_{H_k} = C_{J_k}`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct JumpTrace {
    pub hitting_times: Vec<u64>,
    pub jumps: Vec<i64>,
}

/// Maps graph vertices to cut indices and flags vertices outside the
/// certified cut region.
#[derive(Clone, Debug)]
pub struct CutIndexer {
    index: FxHashMap<u32, i64>,
    first_time: i64,
    last_time: i64,
}

impl CutIndexer {
    pub fn new(graph: &RangeGraph, cuts: &CutStructure) -> Self {
        let (glo, ghi) = graph.index_range();
        let index: FxHashMap<u32, i64> = cuts
            .iter()
            .filter(|&(_, t)| glo <= t && t <= ghi)
            .map(|(n, t)| (graph.vertex_at_unchecked(t), n))
            .collect();
        let times: Vec<i64> = cuts.times().iter().copied().filter(|&t| glo <= t && t <= ghi).collect();
        CutIndexer {
            index,
            first_time: times.first().copied().unwrap_or(i64::MAX),
            last_time: times.last().copied().unwrap_or(i64::MIN),
        }
    }

    /// Cut index of `v`, `None` for a non-cut vertex between certified
    /// cut-points, and an error for a vertex beyond them.
    #[inline]
    pub fn classify(&self, graph: &RangeGraph, v: u32, step: u64) -> Result<Option<i64>> {
        if let Some(&n) = self.index.get(&v) {
            return Ok(Some(n));
        }
        let (a, b) = graph.visit_span(v);
        if a <= self.first_time || b >= self.last_time {
            return Err(Error::Uncertified { step });
        }
        Ok(None)
    }
}

/// Streaming extraction of the jump process.
#[derive(Clone, Debug)]
pub struct JumpRecorder {
    indexer: CutIndexer,
    trace: JumpTrace,
}

impl JumpRecorder {
    pub fn new(graph: &RangeGraph, cuts: &CutStructure) -> Self {
        JumpRecorder { indexer: CutIndexer::new(graph, cuts), trace: JumpTrace::default() }
    }

    /// Record `X_time = v`.
    pub fn observe(&mut self, graph: &RangeGraph, time: u64, v: u32) -> Result<()> {
        if let Some(n) = self.indexer.classify(graph, v, time)? {
            if let Some(&prev) = self.trace.jumps.last() {
                if (n - prev).abs() > 1 {
                    return Err(Error::Invariant(format!("jump process moved from {prev} to {n} at step {time}")));
                }
            }
            self.trace.hitting_times.push(time);
            self.trace.jumps.push(n);
        }
        Ok(())
    }

    pub fn trace(&self) -> &JumpTrace {
        &self.trace
    }

    pub fn into_trace(self) -> JumpTrace {
        self.trace
    }
}

pub fn extract_jump_process(graph: &RangeGraph, trajectory: &Trajectory, cuts: &CutStructure) -> Result<JumpTrace> {
    let mut rec = JumpRecorder::new(graph, cuts);
    for (t, &v) in trajectory.steps.iter().enumerate() {
        rec.observe(graph, t as u64, v)?;
    }
    Ok(rec.into_trace())
}
