//! Two-sided lattice paths.
//!
//! A [`LatticePath`] is a finite window `[lo, hi]` (with `lo <= 0 <= hi`) of a
//! bi-infinite path in `Z^d` that passes through the origin at index 0. Paths
//! sampled as simple random walks keep the generator state of each half, so
//! the window can be grown lazily on either side and the result is the same
//! path one would have obtained by generating the larger window directly.
//!
//! Every distinct point receives a vertex id at first visit. Alongside the
//! point table the path keeps, per vertex, the first and last index at which
//! it is visited; cut-time detection and the range graph work off these.

use rand::Rng;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result, Side};
use crate::rng::{substream, StreamRng};

pub const MAX_DIM: usize = 8;

/// A point of `Z^d`, `d <= MAX_DIM`. Unused trailing coordinates are zero.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Debug)]
pub struct Point([i32; MAX_DIM]);

impl std::hash::Hash for Point {
    // Pairs of coordinates per word: half the hasher rounds of the derived impl.
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        for pair in self.0.chunks_exact(2) {
            state.write_u64(u64::from(pair[0] as u32) | (u64::from(pair[1] as u32) << 32));
        }
    }
}

impl Point {
    pub const ORIGIN: Point = Point([0; MAX_DIM]);

    pub fn from_coords(coords: &[i32]) -> Point {
        assert!(coords.len() <= MAX_DIM, "dimension above {MAX_DIM}");
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Point(c)
    }

    /// The unit vector `e_axis` scaled by `k`.
    pub fn axis(axis: usize, k: i32) -> Point {
        let mut c = [0; MAX_DIM];
        c[axis] = k;
        Point(c)
    }

    pub fn coords(&self, dim: usize) -> &[i32] {
        &self.0[..dim]
    }

    #[inline]
    pub fn first(&self) -> i32 {
        self.0[0]
    }

    pub fn l1_distance(&self, other: &Point) -> u64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (i64::from(*a) - i64::from(*b)).unsigned_abs())
            .sum()
    }

    pub fn checked_add(&self, other: &Point) -> Option<Point> {
        let mut c = [0; MAX_DIM];
        for (i, slot) in c.iter_mut().enumerate() {
            *slot = self.0[i].checked_add(other.0[i])?;
        }
        Some(Point(c))
    }
}

/// How a path was produced. Some estimators only make sense for one kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    SimpleRandomWalk,
    LoopErased,
    Custom,
}

#[derive(Clone, Debug)]
struct SideStreams {
    backward: StreamRng,
    forward: StreamRng,
}

impl SideStreams {
    fn get(&self, side: Side) -> &StreamRng {
        match side {
            Side::Backward => &self.backward,
            Side::Forward => &self.forward,
        }
    }

    fn get_mut(&mut self, side: Side) -> &mut StreamRng {
        match side {
            Side::Backward => &mut self.backward,
            Side::Forward => &mut self.forward,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LatticePath {
    dim: usize,
    kind: PathKind,
    step_bound: u32,
    /// Vertex ids at indices 0, 1, ..., hi.
    forward: Vec<u32>,
    /// Vertex ids at indices -1, -2, ..., lo.
    backward: Vec<u32>,
    points: Vec<Point>,
    /// First and last visit index of each vertex within the window.
    spans: Vec<(i32, i32)>,
    lookup: VertexIndex,
    streams: Option<SideStreams>,
}

/// Vertex ids by point. Points whose coordinates all fit in `i16` are keyed
/// by a packed 16-byte word pair, which halves the table of a long walk.
#[derive(Clone, Debug, Default)]
struct VertexIndex {
    packed: FxHashMap<(u64, u64), u32>,
    wide: FxHashMap<Point, u32>,
}

impl VertexIndex {
    #[inline]
    fn pack(p: &Point) -> Option<(u64, u64)> {
        let mut words = [0u64; 2];
        for (k, &c) in p.0.iter().enumerate() {
            let c = i16::try_from(c).ok()?;
            words[k / 4] |= u64::from(c as u16) << (16 * (k % 4));
        }
        Some((words[0], words[1]))
    }

    #[inline]
    fn entry_or_insert(&mut self, p: Point, id: u32) -> u32 {
        match Self::pack(&p) {
            Some(key) => *self.packed.entry(key).or_insert(id),
            None => *self.wide.entry(p).or_insert(id),
        }
    }

    fn get(&self, p: &Point) -> Option<u32> {
        match Self::pack(p) {
            Some(key) => self.packed.get(&key).copied(),
            None => self.wide.get(p).copied(),
        }
    }

    fn reserve(&mut self, additional: usize) {
        self.packed.reserve(additional);
    }
}

/// Stream label used for the forward half of a sampled walk.
pub const FORWARD_STREAM: &str = "srw-forward";
/// Stream label used for the backward half of a sampled walk.
pub const BACKWARD_STREAM: &str = "srw-backward";

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::InvalidParameter(format!(
            "dimension must be in 1..={MAX_DIM}, got {dim}"
        )));
    }
    Ok(())
}

/// Two-sided simple random walk on `Z^dim` observed on `[-half_window, half_window]`.
///
/// The two halves use independent substreams of `seed`; each step is uniform
/// over the `2 dim` unit vectors.
pub fn sample_two_sided_srw(dim: usize, half_window: u64, seed: u64) -> Result<LatticePath> {
    check_dim(dim)?;
    let mut path = LatticePath::origin_only(dim, PathKind::SimpleRandomWalk, 1);
    path.streams = Some(SideStreams {
        backward: substream(seed, BACKWARD_STREAM, 0),
        forward: substream(seed, FORWARD_STREAM, 0),
    });
    path.extend(Side::Forward, half_window)?;
    path.extend(Side::Backward, half_window)?;
    Ok(path)
}

impl LatticePath {
    fn origin_only(dim: usize, kind: PathKind, step_bound: u32) -> LatticePath {
        let mut lookup = VertexIndex::default();
        lookup.entry_or_insert(Point::ORIGIN, 0);
        LatticePath {
            dim,
            kind,
            step_bound,
            forward: vec![0],
            backward: Vec::new(),
            points: vec![Point::ORIGIN],
            spans: vec![(0, 0)],
            lookup,
            streams: None,
        }
    }

    /// Build a path from explicit points; `points[k]` sits at index `lo + k`
    /// and the point at index 0 must be the origin. The increment bound is the
    /// largest l1 step found.
    pub fn from_points(dim: usize, lo: i64, points: &[Point], kind: PathKind) -> Result<LatticePath> {
        check_dim(dim)?;
        if points.is_empty() {
            return Err(Error::EmptyPath);
        }
        let hi = lo + points.len() as i64 - 1;
        if lo > 0 || hi < 0 {
            return Err(Error::InvalidParameter(format!(
                "window [{lo}, {hi}] does not contain index 0"
            )));
        }
        let zero = (-lo) as usize;
        if points[zero] != Point::ORIGIN {
            return Err(Error::InvalidParameter("position at index 0 is not the origin".into()));
        }
        if points.iter().any(|p| p.0[dim..].iter().any(|&c| c != 0)) {
            return Err(Error::InvalidParameter(format!("point with more than {dim} coordinates")));
        }
        let step_bound = points
            .windows(2)
            .map(|w| w[0].l1_distance(&w[1]))
            .max()
            .unwrap_or(0)
            .max(1) as u32;
        let mut path = LatticePath::origin_only(dim, kind, step_bound);
        for p in &points[zero + 1..] {
            path.push(Side::Forward, *p);
        }
        for p in points[..zero].iter().rev() {
            path.push(Side::Backward, *p);
        }
        Ok(path)
    }

    /// Convenience wrapper over [`LatticePath::from_points`] taking coordinate rows.
    pub fn from_coords(dim: usize, lo: i64, rows: &[Vec<i32>]) -> Result<LatticePath> {
        let points: Vec<Point> = rows.iter().map(|r| Point::from_coords(r)).collect();
        LatticePath::from_points(dim, lo, &points, PathKind::Custom)
    }

    /// The path `S_n = n e_1` on `[lo, hi]`.
    pub fn straight(dim: usize, lo: i64, hi: i64) -> Result<LatticePath> {
        let points: Vec<Point> = (lo..=hi).map(|n| Point::axis(0, n as i32)).collect();
        LatticePath::from_points(dim, lo, &points, PathKind::Custom)
    }

    fn push(&mut self, side: Side, p: Point) {
        let index = match side {
            Side::Forward => self.forward.len() as i32,
            Side::Backward => -(self.backward.len() as i32) - 1,
        };
        let next_id = self.points.len() as u32;
        let id = self.lookup.entry_or_insert(p, next_id);
        if id == next_id {
            self.points.push(p);
            self.spans.push((index, index));
        } else {
            let span = &mut self.spans[id as usize];
            span.0 = span.0.min(index);
            span.1 = span.1.max(index);
        }
        match side {
            Side::Forward => self.forward.push(id),
            Side::Backward => self.backward.push(id),
        }
    }

    fn end_point(&self, side: Side) -> Point {
        let id = match side {
            Side::Forward => *self.forward.last().expect("origin present"),
            Side::Backward => *self.backward.last().unwrap_or(&self.forward[0]),
        };
        self.points[id as usize]
    }

    fn grow(&mut self, side: Side, steps: u64, rng: &mut StreamRng) -> Result<()> {
        let two_d = 2 * self.dim as u32;
        let mut current = self.end_point(side);
        let room = i32::MAX as u64 - self.forward.len().max(self.backward.len() + 1) as u64;
        if steps > room {
            return Err(Error::InvalidParameter(format!("window growth of {steps} steps too large")));
        }
        self.forward.reserve(if side == Side::Forward { steps as usize } else { 0 });
        self.backward.reserve(if side == Side::Backward { steps as usize } else { 0 });
        // In d >= 5 most steps discover a new site.
        self.lookup.reserve(steps as usize);
        self.points.reserve(steps as usize);
        self.spans.reserve(steps as usize);
        for _ in 0..steps {
            let k = rng.random_range(0..two_d);
            let axis = (k / 2) as usize;
            let sign = if k % 2 == 0 { 1 } else { -1 };
            current.0[axis] = current.0[axis].checked_add(sign).ok_or(Error::CoordinateOverflow { side })?;
            self.push(side, current);
        }
        Ok(())
    }

    /// Grow the window by `steps` on `side`, continuing the stored stream.
    pub fn extend(&mut self, side: Side, steps: u64) -> Result<()> {
        if steps == 0 {
            return Ok(());
        }
        let mut rng = match &self.streams {
            Some(s) => s.get(side).clone(),
            None => return Err(Error::NotExtendable),
        };
        self.grow(side, steps, &mut rng)?;
        if let Some(s) = self.streams.as_mut() {
            *s.get_mut(side) = rng;
        }
        Ok(())
    }

    /// Grow the window with a caller-held generator, which must be exactly
    /// the continuation of the stream that produced that side so far.
    pub fn extend_with_rng(&mut self, side: Side, steps: u64, rng: &mut StreamRng) -> Result<()> {
        match &self.streams {
            None => return Err(Error::NotExtendable),
            Some(s) if s.get(side) != rng => return Err(Error::StreamMismatch { side }),
            Some(_) => {}
        }
        self.grow(side, steps, rng)?;
        if let Some(s) = self.streams.as_mut() {
            *s.get_mut(side) = rng.clone();
        }
        Ok(())
    }

    /// Generator state that would produce the next step on `side`.
    pub fn stream_state(&self, side: Side) -> Option<&StreamRng> {
        self.streams.as_ref().map(|s| s.get(side))
    }

    pub fn is_extendable(&self) -> bool {
        self.streams.is_some()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn step_bound(&self) -> u32 {
        self.step_bound
    }

    pub fn lo(&self) -> i64 {
        -(self.backward.len() as i64)
    }

    pub fn hi(&self) -> i64 {
        self.forward.len() as i64 - 1
    }

    /// Number of indices in the window.
    pub fn len(&self) -> usize {
        self.forward.len() + self.backward.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_vertices(&self) -> usize {
        self.points.len()
    }

    pub fn contains_index(&self, n: i64) -> bool {
        self.lo() <= n && n <= self.hi()
    }

    fn check_index(&self, n: i64) -> Result<()> {
        if self.contains_index(n) {
            Ok(())
        } else {
            Err(Error::IndexOutOfWindow { index: n, lo: self.lo(), hi: self.hi() })
        }
    }

    /// Vertex id at index `n`; panics outside the window.
    #[inline]
    pub fn vertex_unchecked(&self, n: i64) -> u32 {
        if n >= 0 {
            self.forward[n as usize]
        } else {
            self.backward[(-n - 1) as usize]
        }
    }

    pub fn vertex_at(&self, n: i64) -> Result<u32> {
        self.check_index(n)?;
        Ok(self.vertex_unchecked(n))
    }

    #[inline]
    pub fn position_unchecked(&self, n: i64) -> Point {
        self.points[self.vertex_unchecked(n) as usize]
    }

    pub fn position(&self, n: i64) -> Result<Point> {
        self.check_index(n)?;
        Ok(self.position_unchecked(n))
    }

    #[inline]
    pub fn first_coordinate(&self, n: i64) -> i32 {
        self.position_unchecked(n).first()
    }

    pub fn point(&self, vertex: u32) -> Point {
        self.points[vertex as usize]
    }

    pub fn vertex_of(&self, p: &Point) -> Option<u32> {
        self.lookup.get(p)
    }

    /// First and last index at which `vertex` is visited inside the window.
    #[inline]
    pub fn visit_span(&self, vertex: u32) -> (i64, i64) {
        let (a, b) = self.spans[vertex as usize];
        (i64::from(a), i64::from(b))
    }

    /// First-coordinate increment `S_n^(1) - S_{n-1}^(1)`, for `lo < n <= hi`.
    pub fn increment(&self, n: i64) -> Result<i32> {
        if n <= self.lo() || n > self.hi() {
            return Err(Error::IndexOutOfWindow { index: n, lo: self.lo() + 1, hi: self.hi() });
        }
        Ok(self.first_coordinate(n) - self.first_coordinate(n - 1))
    }

    pub fn increment_pos(&self, n: i64) -> Result<i32> {
        Ok(self.increment(n)?.max(0))
    }

    pub fn increment_neg(&self, n: i64) -> Result<i32> {
        Ok((-self.increment(n)?).max(0))
    }

    pub fn is_self_avoiding(&self) -> bool {
        self.points.len() == self.len()
    }

    /// First index at which a vertex is visited a second time, scanning upward.
    pub fn first_revisit(&self) -> Option<i64> {
        let mut seen = vec![false; self.points.len()];
        (self.lo()..=self.hi()).find(|&n| {
            let v = self.vertex_unchecked(n) as usize;
            std::mem::replace(&mut seen[v], true)
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Point)> + '_ {
        (self.lo()..=self.hi()).map(move |n| (n, self.position_unchecked(n)))
    }
}
