//! Advancing-front node placement and spatial search.
//!
//! [`fill`] processes a queue of nodes in insertion order. Around every node
//! it scatters candidates uniformly on a sphere of radius `h` and accepts
//! those that fall inside the domain and keep at least `R_MIN · h` distance
//! from every node placed so far. The same procedure works in any dimension.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::io::{self, Write};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::geometry::{distance2, BoundaryPoint, CsgDomain, GeometryError, Location};

/// Acceptance radius factor: a candidate is kept iff its nearest node is at
/// least `R_MIN · h` away.
pub const R_MIN: f64 = 1.0;

/// Relative slack on the acceptance radius, absorbing rounding of candidates
/// placed exactly `h` from their parent.
const ACCEPT_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NodeGenError {
    #[error("no seed nodes to expand from")]
    NoSeeds,
    #[error("seed {index} at {position:?} lies outside the domain")]
    SeedOutside { index: usize, position: Vec<f64> },
    #[error("spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),
    #[error("requested {k} neighbours but the index holds {len} points")]
    TooManyNeighbours { k: usize, len: usize },
    #[error("point has {got} coordinates, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("ghost count {ghosts} does not match boundary count {boundary}")]
    GhostMismatch { ghosts: usize, boundary: usize },
    #[error("node {0} has role {1:?} but no normal")]
    MissingNormal(usize, Role),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Number of expansion candidates per node for a given dimension.
pub fn default_candidate_count(dim: usize) -> usize {
    match dim {
        0 | 1 => 2,
        2 => 15,
        3 => 30,
        4 => 60,
        d => 15 * (1 << (d - 2).min(10)),
    }
}

/// `count` points uniformly distributed on the sphere of the given radius.
///
/// In one dimension the sphere has only two points, so at most two are
/// returned: `[c − r, c + r]` for `count ≥ 2`, a random one of them otherwise.
pub fn sphere_candidates<R: rand::Rng + ?Sized>(
    center: &[f64],
    radius: f64,
    count: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let dim = center.len();
    if dim == 1 {
        let both = [vec![center[0] - radius], vec![center[0] + radius]];
        return if count >= 2 {
            both.to_vec()
        } else if count == 1 {
            vec![both[usize::from(rng.random::<bool>())].clone()]
        } else {
            Vec::new()
        };
    }
    (0..count)
        .map(|_| {
            let mut dir: Vec<f64> = loop {
                let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                let n2: f64 = v.iter().map(|a| a * a).sum();
                if n2 > 1e-24 {
                    break v;
                }
            };
            let norm = dir.iter().map(|a| a * a).sum::<f64>().sqrt();
            for (d, c) in dir.iter_mut().zip(center) {
                *d = c + radius * (*d / norm);
            }
            dir
        })
        .collect()
}

/// Background grid with cell size `h` for "is anything closer than r ≤ h"
/// queries while points are being inserted.
///
/// Cells are keyed by a hash of their integer coordinates. Hash collisions
/// only put unrelated points in the same bucket, and every candidate is
/// checked against true distances, so they cost time but never correctness.
pub(crate) struct SpatialGrid {
    dim: usize,
    cell: f64,
    buckets: HashMap<u64, Vec<usize>>,
    offsets: Vec<Vec<i64>>,
}

impl SpatialGrid {
    pub(crate) fn new(dim: usize, cell: f64) -> Self {
        let mut offsets = vec![Vec::new()];
        for _ in 0..dim {
            offsets = offsets
                .into_iter()
                .flat_map(|o| {
                    (-1..=1).map(move |s| {
                        let mut o = o.clone();
                        o.push(s);
                        o
                    })
                })
                .collect();
        }
        Self { dim, cell, buckets: HashMap::new(), offsets }
    }

    fn cell_of(&self, p: &[f64]) -> Vec<i64> {
        p.iter().map(|x| (x / self.cell).floor() as i64).collect()
    }

    fn key(cell: impl Iterator<Item = i64>) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for c in cell {
            h ^= c as u64;
            h = h.wrapping_mul(0x100_0000_01b3).rotate_left(23) ^ (h >> 29);
        }
        h
    }

    pub(crate) fn insert(&mut self, p: &[f64], idx: usize) {
        let key = Self::key(self.cell_of(p).into_iter());
        self.buckets.entry(key).or_default().push(idx);
    }

    /// True iff some inserted point is closer than `r` to `p`.
    pub(crate) fn any_within<'a>(&self, p: &[f64], r: f64, position: impl Fn(usize) -> &'a [f64]) -> bool {
        debug_assert!(r <= self.cell * (1.0 + 1e-9));
        debug_assert_eq!(p.len(), self.dim);
        let threshold = (r * (1.0 - ACCEPT_SLACK)).powi(2);
        let base = self.cell_of(p);
        self.offsets.iter().any(|off| {
            let key = Self::key(base.iter().zip(off).map(|(b, o)| b + o));
            self.buckets.get(&key).is_some_and(|ids| ids.iter().any(|&j| distance2(position(j), p) < threshold))
        })
    }
}

/// Fills `domain` with nodes spaced about `h`, expanding from `seeds`.
///
/// The result starts with the seeds, in order, followed by accepted
/// candidates in the order they were generated.
pub fn fill(domain: &CsgDomain, h: f64, seeds: &[Vec<f64>], rng_seed: u64) -> Result<Vec<Vec<f64>>, NodeGenError> {
    fill_with_candidates(domain, h, seeds, rng_seed, default_candidate_count(domain.dim()))
}

pub fn fill_with_candidates(
    domain: &CsgDomain,
    h: f64,
    seeds: &[Vec<f64>],
    rng_seed: u64,
    candidates: usize,
) -> Result<Vec<Vec<f64>>, NodeGenError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(NodeGenError::InvalidSpacing(h));
    }
    if seeds.is_empty() {
        return Err(NodeGenError::NoSeeds);
    }
    let dim = domain.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut grid = SpatialGrid::new(dim, h);
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(seeds.len() * 4);
    for (index, s) in seeds.iter().enumerate() {
        if s.len() != dim {
            return Err(NodeGenError::DimensionMismatch { expected: dim, got: s.len() });
        }
        if domain.locate(s)? == Location::Outside {
            return Err(NodeGenError::SeedOutside { index, position: s.clone() });
        }
        grid.insert(s, points.len());
        points.push(s.clone());
    }

    let min_dist = R_MIN * h;
    let mut cursor = 0;
    while cursor < points.len() {
        let cands = sphere_candidates(&points[cursor], h, candidates, &mut rng);
        cursor += 1;
        for c in cands {
            if !domain.contains_unchecked(&c) {
                continue;
            }
            if grid.any_within(&c, min_dist, |j| points[j].as_slice()) {
                continue;
            }
            grid.insert(&c, points.len());
            points.push(c);
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Interior,
    Dirichlet,
    Neumann,
    Ghost,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Interior => "interior",
            Role::Dirichlet => "dirichlet",
            Role::Neumann => "neumann",
            Role::Ghost => "ghost",
        }
    }

    pub fn is_boundary(self) -> bool {
        matches!(self, Role::Dirichlet | Role::Neumann)
    }
}

/// A single node before it is placed into a [`NodeSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub position: Vec<f64>,
    pub role: Role,
    pub normal: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RoleCounts {
    pub interior: usize,
    pub dirichlet: usize,
    pub neumann: usize,
    pub ghost: usize,
}

impl RoleCounts {
    /// N = N_i + N_d + N_n.
    pub fn physical(&self) -> usize {
        self.interior + self.dirichlet + self.neumann
    }

    /// N_t = N + N_g.
    pub fn total(&self) -> usize {
        self.physical() + self.ghost
    }

    pub fn boundary(&self) -> usize {
        self.dirichlet + self.neumann
    }
}

/// Discretization nodes stored in blocks: interior, Dirichlet, Neumann, ghost.
///
/// Within each block nodes keep the order they were given in. When ghosts
/// are present there is exactly one per boundary node, and ghost `j` of the
/// ghost block belongs to boundary node `j` of the boundary block.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    dim: usize,
    h: f64,
    positions: Vec<f64>,
    roles: Vec<Role>,
    normals: Vec<Option<Vec<f64>>>,
    counts: RoleCounts,
}

impl NodeSet {
    pub fn new(dim: usize, h: f64, mut nodes: Vec<Node>) -> Result<Self, NodeGenError> {
        nodes.sort_by_key(|n| n.role);
        let mut counts = RoleCounts::default();
        let mut positions = Vec::with_capacity(nodes.len() * dim);
        let mut roles = Vec::with_capacity(nodes.len());
        let mut normals = Vec::with_capacity(nodes.len());
        for (i, n) in nodes.into_iter().enumerate() {
            if n.position.len() != dim {
                return Err(NodeGenError::DimensionMismatch { expected: dim, got: n.position.len() });
            }
            if n.role != Role::Interior && n.normal.is_none() {
                return Err(NodeGenError::MissingNormal(i, n.role));
            }
            match n.role {
                Role::Interior => counts.interior += 1,
                Role::Dirichlet => counts.dirichlet += 1,
                Role::Neumann => counts.neumann += 1,
                Role::Ghost => counts.ghost += 1,
            }
            positions.extend_from_slice(&n.position);
            roles.push(n.role);
            normals.push(if n.role == Role::Interior { None } else { n.normal });
        }
        if counts.ghost != 0 && counts.ghost != counts.boundary() {
            return Err(NodeGenError::GhostMismatch { ghosts: counts.ghost, boundary: counts.boundary() });
        }
        Ok(Self { dim, h, positions, roles, normals, counts })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn counts(&self) -> RoleCounts {
        self.counts
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    /// All coordinates, `dim` consecutive values per node.
    pub fn flat_positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn role(&self, i: usize) -> Role {
        self.roles[i]
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn normal(&self, i: usize) -> Option<&[f64]> {
        self.normals[i].as_deref()
    }

    /// Indices of nodes that are not ghosts; this is the range `0..N`.
    pub fn physical(&self) -> std::ops::Range<usize> {
        0..self.counts.physical()
    }

    pub fn boundary(&self) -> std::ops::Range<usize> {
        self.counts.interior..self.counts.physical()
    }

    pub fn ghosts(&self) -> std::ops::Range<usize> {
        self.counts.physical()..self.counts.total()
    }

    /// Boundary node a ghost was generated from.
    pub fn ghost_parent(&self, ghost: usize) -> Option<usize> {
        self.ghosts().contains(&ghost).then(|| ghost - self.counts.physical() + self.counts.interior)
    }

    /// Ghost that belongs to a boundary node, when ghosts are present.
    pub fn ghost_of(&self, boundary: usize) -> Option<usize> {
        (self.counts.ghost > 0 && self.boundary().contains(&boundary))
            .then(|| boundary - self.counts.interior + self.counts.physical())
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        (0..self.len()).map(|i| Node {
            position: self.position(i).to_vec(),
            role: self.roles[i],
            normal: self.normals[i].clone(),
        })
    }

    /// Writes one row per node: coordinates, role, normal components (blank
    /// for interior nodes).
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# schema: rbffd-nodes v1")?;
        let coords: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        let normals: Vec<String> = (1..=self.dim).map(|i| format!("n{i}")).collect();
        writeln!(w, "{},role,{}", coords.join(","), normals.join(","))?;
        for i in 0..self.len() {
            let p: Vec<String> = self.position(i).iter().map(|x| format!("{x:e}")).collect();
            let n: Vec<String> = match self.normal(i) {
                Some(n) => n.iter().map(|x| format!("{x:e}")).collect(),
                None => vec![String::new(); self.dim],
            };
            writeln!(w, "{},{},{}", p.join(","), self.roles[i].as_str(), n.join(","))?;
        }
        Ok(())
    }
}

/// Boundary discretization followed by an interior fill.
///
/// `classify` assigns each boundary point to the Dirichlet or Neumann part.
pub fn populate(
    domain: &CsgDomain,
    h: f64,
    seed: u64,
    classify: impl Fn(&BoundaryPoint) -> Role,
) -> Result<NodeSet, NodeGenError> {
    let boundary = domain.discretize_boundary(h, seed)?;
    let seeds: Vec<Vec<f64>> = boundary.iter().map(|b| b.position.clone()).collect();
    let filled = fill(domain, h, &seeds, seed.wrapping_add(1))?;
    let mut nodes: Vec<Node> = boundary
        .iter()
        .map(|b| Node { position: b.position.clone(), role: classify(b), normal: Some(b.normal.clone()) })
        .collect();
    nodes.extend(filled.into_iter().skip(boundary.len()).map(|p| Node {
        position: p,
        role: Role::Interior,
        normal: None,
    }));
    NodeSet::new(domain.dim(), h, nodes)
}

#[derive(Clone, Copy, Debug)]
struct Neighbour {
    dist2: f64,
    index: usize,
}

impl PartialEq for Neighbour {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Neighbour {}

impl PartialOrd for Neighbour {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbour {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.index.cmp(&other.index))
    }
}

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum KdNode {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Static k-d tree over a fixed point list.
///
/// Queries return exactly what a linear scan would, with equal distances
/// ordered by point index.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    dim: usize,
    points: Vec<f64>,
    order: Vec<usize>,
    nodes: Vec<KdNode>,
}

impl SpatialIndex {
    /// Builds an index over `points`, `dim` coordinates per point.
    pub fn new(dim: usize, points: &[f64]) -> Self {
        assert!(dim > 0 && points.len().is_multiple_of(dim));
        let n = points.len() / dim;
        let mut index = Self { dim, points: points.to_vec(), order: (0..n).collect(), nodes: Vec::new() };
        if n > 0 {
            index.build(0, n);
        }
        index
    }

    pub fn from_points(points: &[Vec<f64>]) -> Self {
        let dim = points.first().map_or(1, Vec::len);
        let flat: Vec<f64> = points.iter().flatten().copied().collect();
        Self::new(dim, &flat)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(KdNode::Leaf { start, end });
            return id;
        }
        let axis = (0..self.dim)
            .map(|a| {
                let (lo, hi) =
                    self.order[start..end].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                        let x = self.points[i * self.dim + a];
                        (lo.min(x), hi.max(x))
                    });
                (a, hi - lo)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(a, _)| a)
            .unwrap();
        let mid = start + (end - start) / 2;
        let (points, dim) = (&self.points, self.dim);
        self.order[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| points[a * dim + axis].total_cmp(&points[b * dim + axis]));
        let value = self.points[self.order[mid] * self.dim + axis];
        self.nodes.push(KdNode::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = KdNode::Split { axis, value, left, right };
        id
    }

    /// The `k` nearest points to `query`, closest first, ties by index.
    pub fn knn(&self, query: &[f64], k: usize) -> Result<Vec<usize>, NodeGenError> {
        Ok(self.knn_with_distances(query, k)?.into_iter().map(|(i, _)| i).collect())
    }

    /// Like [`knn`](Self::knn) but also returns squared distances.
    pub fn knn_with_distances(&self, query: &[f64], k: usize) -> Result<Vec<(usize, f64)>, NodeGenError> {
        if query.len() != self.dim {
            return Err(NodeGenError::DimensionMismatch { expected: self.dim, got: query.len() });
        }
        if k > self.len() {
            return Err(NodeGenError::TooManyNeighbours { k, len: self.len() });
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_recurse(0, query, k, &mut heap);
        Ok(heap.into_sorted_vec().into_iter().map(|n| (n.index, n.dist2)).collect())
    }

    fn knn_recurse(&self, node: usize, q: &[f64], k: usize, heap: &mut BinaryHeap<Neighbour>) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = Neighbour { dist2: distance2(self.point(i), q), index: i };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            KdNode::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_recurse(near, q, k, heap);
                if heap.len() < k || diff * diff <= heap.peek().unwrap().dist2 {
                    self.knn_recurse(far, q, k, heap);
                }
            }
        }
    }

    /// All points within distance `radius` of `query`, closest first.
    pub fn within_radius(&self, query: &[f64], radius: f64) -> Result<Vec<usize>, NodeGenError> {
        if query.len() != self.dim {
            return Err(NodeGenError::DimensionMismatch { expected: self.dim, got: query.len() });
        }
        let mut found = Vec::new();
        if !self.is_empty() {
            self.radius_recurse(0, query, radius * radius, &mut found);
        }
        found.sort();
        Ok(found.into_iter().map(|n| n.index).collect())
    }

    fn radius_recurse(&self, node: usize, q: &[f64], r2: f64, found: &mut Vec<Neighbour>) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let dist2 = distance2(self.point(i), q);
                    if dist2 <= r2 {
                        found.push(Neighbour { dist2, index: i });
                    }
                }
            }
            KdNode::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.radius_recurse(near, q, r2, found);
                if diff * diff <= r2 {
                    self.radius_recurse(far, q, r2, found);
                }
            }
        }
    }
}

/// Linear-scan k nearest neighbours, the reference the index is tested against.
pub fn brute_force_knn(points: &[Vec<f64>], query: &[f64], k: usize) -> Vec<usize> {
    let mut all: Vec<Neighbour> =
        points.iter().enumerate().map(|(index, p)| Neighbour { dist2: distance2(p, query), index }).collect();
    all.sort();
    all.truncate(k);
    all.into_iter().map(|n| n.index).collect()
}
