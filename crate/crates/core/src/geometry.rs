//! Implicit domains built from balls by union and difference.
//!
//! A [`CsgDomain`] is `(B⁺₀ ∪ B⁺₁ ∪ …) \ (B⁻₀ ∪ B⁻₁ ∪ …)`. Membership is
//! decided with a strict interior test; points within a relative band of
//! [`SURFACE_TOL`] of a sphere are classified as lying on that sphere.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::nodegen::{self, SpatialGrid};

/// Relative band around a sphere inside which a point counts as on its surface.
pub const SURFACE_TOL: f64 = 1e-12;

/// Looser band used when the caller hands us a point that should already be
/// on the boundary, e.g. for normal lookup.
const LOOKUP_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("ball radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("domain dimension must be at least 1")]
    ZeroDimension,
    #[error("domain has no positive balls")]
    NoPositiveBalls,
    #[error("domain appears empty: no probe point fell inside")]
    EmptyDomain,
    #[error("point {0:?} is not on the boundary of the domain")]
    NotOnBoundary(Vec<f64>),
    #[error("spacing {h} is too large for a ball of radius {radius}")]
    SpacingTooLarge { h: f64, radius: f64 },
    #[error("spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    center: Vec<f64>,
    radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeometryError::InvalidRadius(radius));
        }
        if center.is_empty() {
            return Err(GeometryError::ZeroDimension);
        }
        Ok(Self { center, radius })
    }

    /// Ball whose center is `(c, c, …, c)` in `dim` dimensions.
    pub fn uniform(dim: usize, c: f64, radius: f64) -> Result<Self, GeometryError> {
        Self::new(vec![c; dim], radius)
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn distance_to_center(&self, x: &[f64]) -> f64 {
        distance(&self.center, x)
    }

    /// Signed relative distance to the sphere: negative inside, positive outside.
    fn surface_gap(&self, x: &[f64]) -> f64 {
        (self.distance_to_center(x) - self.radius) / self.radius
    }
}

/// Which side of the CSG expression a ball belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Positive,
    Negative,
}

/// Identifies one ball of a [`CsgDomain`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BallId {
    pub sign: Sign,
    pub index: usize,
}

impl BallId {
    pub fn positive(index: usize) -> Self {
        Self { sign: Sign::Positive, index }
    }

    pub fn negative(index: usize) -> Self {
        Self { sign: Sign::Negative, index }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Inside,
    Boundary,
    Outside,
}

/// A point on ∂Ω together with its outward unit normal and the ball whose
/// sphere it lies on.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub position: Vec<f64>,
    pub normal: Vec<f64>,
    pub owner: BallId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsgDomain {
    dim: usize,
    positive: Vec<Ball>,
    negative: Vec<Ball>,
}

impl CsgDomain {
    /// Builds `(∪ positive) \ (∪ negative)` and checks it is nonempty by probing.
    pub fn new(positive: Vec<Ball>, negative: Vec<Ball>) -> Result<Self, GeometryError> {
        let first = positive.first().ok_or(GeometryError::NoPositiveBalls)?;
        let dim = first.dim();
        for b in positive.iter().chain(&negative) {
            if b.dim() != dim {
                return Err(GeometryError::DimensionMismatch { expected: dim, got: b.dim() });
            }
        }
        let domain = Self { dim, positive, negative };
        if !domain.probe_nonempty(20_000) {
            return Err(GeometryError::EmptyDomain);
        }
        Ok(domain)
    }

    /// The irregular test domain `(B₀ ∪ B₁) \ (B₂ ∪ B₃)` in `dim` dimensions,
    /// with B₀ = B(½, ½), B₁ = B(⅕, ¼), B₂ = B(½, 1/10) and B₃ = B(1, ½).
    /// Scalar centers are broadcast to every coordinate.
    pub fn benchmark(dim: usize) -> Result<Self, GeometryError> {
        Self::new(
            vec![Ball::uniform(dim, 0.5, 0.5)?, Ball::uniform(dim, 0.2, 0.25)?],
            vec![Ball::uniform(dim, 0.5, 0.1)?, Ball::uniform(dim, 1.0, 0.5)?],
        )
    }

    /// The four-dimensional domain `B₀ \ (B₁ ∪ B₂ ∪ B₃)`. The small hole B₃ is
    /// `BallId::negative(2)`.
    pub fn scenario_4d() -> Result<Self, GeometryError> {
        Self::new(
            vec![Ball::uniform(4, 0.5, 0.5)?],
            vec![
                Ball::new(vec![0.5, 1.0, 0.5, 0.5], 0.25)?,
                Ball::uniform(4, 0.0, 13.0 / 16.0)?,
                Ball::new(vec![0.5, 0.5, 0.75, 0.5], 0.125)?,
            ],
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn positive(&self) -> &[Ball] {
        &self.positive
    }

    pub fn negative(&self) -> &[Ball] {
        &self.negative
    }

    pub fn ball(&self, id: BallId) -> &Ball {
        match id.sign {
            Sign::Positive => &self.positive[id.index],
            Sign::Negative => &self.negative[id.index],
        }
    }

    pub fn ball_ids(&self) -> impl Iterator<Item = BallId> + '_ {
        (0..self.positive.len()).map(BallId::positive).chain((0..self.negative.len()).map(BallId::negative))
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), GeometryError> {
        if x.len() != self.dim {
            return Err(GeometryError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    /// Axis-aligned box enclosing all positive balls.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for b in &self.positive {
            for i in 0..self.dim {
                lo[i] = lo[i].min(b.center[i] - b.radius);
                hi[i] = hi[i].max(b.center[i] + b.radius);
            }
        }
        (lo, hi)
    }

    /// Classifies `x` as strictly inside, on the boundary, or outside.
    pub fn locate(&self, x: &[f64]) -> Result<Location, GeometryError> {
        self.check_dim(x)?;
        Ok(self.locate_unchecked(x))
    }

    pub(crate) fn locate_unchecked(&self, x: &[f64]) -> Location {
        let mut in_pos = false;
        let mut on_pos = false;
        for b in &self.positive {
            let gap = b.surface_gap(x);
            if gap < -SURFACE_TOL {
                in_pos = true;
            } else if gap <= SURFACE_TOL {
                on_pos = true;
            }
        }
        let mut on_neg = false;
        for b in &self.negative {
            let gap = b.surface_gap(x);
            if gap < -SURFACE_TOL {
                return Location::Outside;
            } else if gap <= SURFACE_TOL {
                on_neg = true;
            }
        }
        match (in_pos, on_pos || on_neg) {
            (true, false) => Location::Inside,
            (true, true) => Location::Boundary,
            (false, _) if on_pos => Location::Boundary,
            _ => Location::Outside,
        }
    }

    /// True iff `x` lies strictly inside some positive ball and outside every
    /// negative ball.
    pub fn contains(&self, x: &[f64]) -> Result<bool, GeometryError> {
        Ok(self.locate(x)? == Location::Inside)
    }

    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        self.locate_unchecked(x) == Location::Inside
    }

    /// True iff `x` lies on the sphere of `id` and that part of the sphere is on ∂Ω.
    fn on_boundary_of(&self, id: BallId, x: &[f64], tol: f64) -> bool {
        let ball = self.ball(id);
        if ball.surface_gap(x).abs() > tol {
            return false;
        }
        let inside_other = |balls: &[Ball], skip: Option<usize>| {
            balls.iter().enumerate().any(|(i, b)| Some(i) != skip && b.surface_gap(x) < -tol)
        };
        match id.sign {
            Sign::Positive => !inside_other(&self.positive, Some(id.index)) && !inside_other(&self.negative, None),
            Sign::Negative => {
                let in_closure = self.positive.iter().any(|b| b.surface_gap(x) <= tol);
                in_closure && !inside_other(&self.negative, Some(id.index))
            }
        }
    }

    /// Outward normal for a sphere point: radial for positive balls, pointing
    /// toward the hole center for negative balls.
    fn normal_on(&self, id: BallId, p: &[f64]) -> Vec<f64> {
        let ball = self.ball(id);
        let r = ball.distance_to_center(p);
        let s = match id.sign {
            Sign::Positive => 1.0 / r,
            Sign::Negative => -1.0 / r,
        };
        p.iter().zip(&ball.center).map(|(pi, ci)| (pi - ci) * s).collect()
    }

    /// The ball whose sphere carries boundary point `p`, choosing the nearest
    /// sphere when `p` sits on a seam.
    pub fn owner_of(&self, p: &[f64]) -> Result<BallId, GeometryError> {
        self.check_dim(p)?;
        self.ball_ids()
            .filter(|&id| self.on_boundary_of(id, p, LOOKUP_TOL))
            .min_by(|&a, &b| {
                let ga = self.ball(a).surface_gap(p).abs();
                let gb = self.ball(b).surface_gap(p).abs();
                ga.total_cmp(&gb)
            })
            .ok_or_else(|| GeometryError::NotOnBoundary(p.to_vec()))
    }

    pub fn outward_normal(&self, p: &[f64]) -> Result<Vec<f64>, GeometryError> {
        let id = self.owner_of(p)?;
        Ok(self.normal_on(id, p))
    }

    /// Places quasi-uniform points with spacing about `h` on ∂Ω.
    ///
    /// Each sphere is covered by an advancing front on its surface, points
    /// swallowed by the CSG expression are discarded, and survivors are kept
    /// only if they are at least `h` away from points of earlier spheres. In
    /// one dimension the sphere is just the two interval endpoints.
    pub fn discretize_boundary(&self, h: f64, seed: u64) -> Result<Vec<BoundaryPoint>, GeometryError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(GeometryError::InvalidSpacing(h));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out: Vec<BoundaryPoint> = Vec::new();
        let mut grid = SpatialGrid::new(self.dim, h);
        let min_dist = nodegen::R_MIN * h;

        for id in self.ball_ids().collect::<Vec<_>>() {
            let ball = self.ball(id);
            let sphere_points = if self.dim == 1 {
                vec![vec![ball.center[0] - ball.radius], vec![ball.center[0] + ball.radius]]
            } else {
                if h >= ball.radius {
                    return Err(GeometryError::SpacingTooLarge { h, radius: ball.radius });
                }
                fill_sphere_surface(ball, h, &mut rng)
            };
            for p in sphere_points {
                if !self.on_boundary_of(id, &p, SURFACE_TOL) {
                    continue;
                }
                let positions = |i: usize| out[i].position.as_slice();
                if grid.any_within(&p, min_dist, positions) {
                    continue;
                }
                grid.insert(&p, out.len());
                let normal = self.normal_on(id, &p);
                out.push(BoundaryPoint { position: p, normal, owner: id });
            }
        }
        Ok(out)
    }

    /// Random probing for a point strictly inside.
    fn probe_nonempty(&self, samples: usize) -> bool {
        if self.positive.iter().any(|b| self.contains_unchecked(&b.center)) {
            return true;
        }
        let (lo, hi) = self.bounding_box();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut x = vec![0.0; self.dim];
        (0..samples).any(|_| {
            for i in 0..self.dim {
                x[i] = lo[i] + (hi[i] - lo[i]) * rng.random::<f64>();
            }
            self.contains_unchecked(&x)
        })
    }

    /// Fraction of uniform samples from `[lo, hi]` that land in Ω.
    pub fn inside_fraction(&self, lo: &[f64], hi: &[f64], samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = vec![0.0; self.dim];
        let hits = (0..samples)
            .filter(|_| {
                for i in 0..self.dim {
                    x[i] = lo[i] + (hi[i] - lo[i]) * rng.random::<f64>();
                }
                self.contains_unchecked(&x)
            })
            .count();
        hits as f64 / samples as f64
    }
}

/// Advancing-front fill of a whole (d−1)-sphere with chord spacing `h`.
///
/// From each surface point, candidates are spread over the (d−2)-sphere of
/// tangent directions and rotated onto the surface so that their chord
/// distance to the parent is `h`.
fn fill_sphere_surface(ball: &Ball, h: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let dim = ball.dim();
    let r = ball.radius;
    let c = &ball.center;
    // Angle subtending a chord of length h.
    let theta = 2.0 * (h / (2.0 * r)).asin();
    let (cos_t, sin_t) = (theta.cos(), theta.sin());
    let count = nodegen::default_candidate_count(dim - 1);
    let min_dist = nodegen::R_MIN * h;

    // A random start keeps the sampling from hitting sphere intersections exactly.
    let mut points = nodegen::sphere_candidates(c, r, 1, rng);
    let mut grid = SpatialGrid::new(dim, h);
    grid.insert(&points[0], 0);

    let mut cursor = 0;
    while cursor < points.len() {
        let p = points[cursor].clone();
        cursor += 1;
        let normal: Vec<f64> = p.iter().zip(c).map(|(pi, ci)| (pi - ci) / r).collect();
        for tangent in tangent_directions(&normal, count, rng) {
            let cand: Vec<f64> = (0..dim).map(|i| c[i] + r * (normal[i] * cos_t + tangent[i] * sin_t)).collect();
            if grid.any_within(&cand, min_dist, |j| points[j].as_slice()) {
                continue;
            }
            grid.insert(&cand, points.len());
            points.push(cand);
        }
    }
    points
}

/// Unit vectors orthogonal to `normal`, uniformly distributed on the
/// (d−2)-sphere of the tangent space. For d = 2 these are the two tangents.
fn tangent_directions(normal: &[f64], count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let dim = normal.len();
    if dim == 2 {
        return vec![vec![-normal[1], normal[0]], vec![normal[1], -normal[0]]];
    }
    let zero = vec![0.0; dim];
    (0..count)
        .map(|_| loop {
            let mut v = nodegen::sphere_candidates(&zero, 1.0, 1, rng).pop().unwrap();
            let dot: f64 = v.iter().zip(normal).map(|(a, b)| a * b).sum();
            for (vi, ni) in v.iter_mut().zip(normal) {
                *vi -= dot * ni;
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-6 {
                v.iter_mut().for_each(|a| *a /= norm);
                break v;
            }
        })
        .collect()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    distance2(a, b).sqrt()
}

pub(crate) fn distance2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_interval() -> CsgDomain {
        CsgDomain::new(vec![Ball::new(vec![0.5], 0.5).unwrap()], vec![]).unwrap()
    }

    #[test]
    fn contains_benchmark_2d() {
        let dom = CsgDomain::benchmark(2).unwrap();
        assert!(dom.contains(&[0.2, 0.2]).unwrap());
        assert!(!dom.contains(&[0.5, 0.5]).unwrap());
        assert!(!dom.contains(&[0.0, 0.0]).unwrap());
    }

    #[test]
    fn contains_rejects_wrong_dimension() {
        let dom = CsgDomain::benchmark(2).unwrap();
        assert_eq!(dom.contains(&[0.2]), Err(GeometryError::DimensionMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn invalid_balls_and_empty_domains_are_rejected() {
        assert!(Ball::new(vec![0.0], 0.0).is_err());
        assert!(Ball::new(vec![0.0], -1.0).is_err());
        assert_eq!(CsgDomain::new(vec![], vec![]), Err(GeometryError::NoPositiveBalls));
        let b = Ball::uniform(2, 0.0, 1.0).unwrap();
        let big = Ball::uniform(2, 0.0, 2.0).unwrap();
        assert_eq!(CsgDomain::new(vec![b], vec![big]), Err(GeometryError::EmptyDomain));
        let mixed =
            CsgDomain::new(vec![Ball::uniform(2, 0.0, 1.0).unwrap()], vec![Ball::uniform(3, 0.0, 0.5).unwrap()]);
        assert!(matches!(mixed, Err(GeometryError::DimensionMismatch { .. })));
    }

    #[test]
    fn normals() {
        let disk = CsgDomain::new(vec![Ball::uniform(2, 0.0, 1.0).unwrap()], vec![]).unwrap();
        assert_eq!(disk.outward_normal(&[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);

        let dom = CsgDomain::benchmark(2).unwrap();
        let n = dom.outward_normal(&[0.6, 0.5]).unwrap();
        assert!((n[0] + 1.0).abs() < 1e-12 && n[1].abs() < 1e-12);

        let sphere = CsgDomain::new(vec![Ball::uniform(3, 0.0, 1.0).unwrap()], vec![]).unwrap();
        assert_eq!(sphere.outward_normal(&[0.0, 0.0, 1.0]).unwrap(), vec![0.0, 0.0, 1.0]);

        assert!(matches!(dom.outward_normal(&[0.2, 0.2]), Err(GeometryError::NotOnBoundary(_))));
    }

    #[test]
    fn boundary_of_interval_is_its_endpoints() {
        let pts = unit_interval().discretize_boundary(0.1, 1).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].position, vec![0.0]);
        assert_eq!(pts[0].normal, vec![-1.0]);
        assert_eq!(pts[1].position, vec![1.0]);
        assert_eq!(pts[1].normal, vec![1.0]);
    }

    #[test]
    fn boundary_of_benchmark_1d() {
        // (−0.05, 1) minus [0.4, 0.6] ∪ [0.5, 1.5] leaves (−0.05, 0.4).
        let pts = CsgDomain::benchmark(1).unwrap().discretize_boundary(0.01, 1).unwrap();
        let mut xs: Vec<f64> = pts.iter().map(|p| p.position[0]).collect();
        xs.sort_by(f64::total_cmp);
        assert_eq!(xs.len(), 2);
        assert!((xs[0] + 0.05).abs() < 1e-15 && (xs[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn circle_point_count() {
        let dom = CsgDomain::new(vec![Ball::uniform(2, 0.0, 0.5).unwrap()], vec![]).unwrap();
        let pts = dom.discretize_boundary(0.1, 3).unwrap();
        let expected = std::f64::consts::PI / 0.1;
        let ratio = pts.len() as f64 / expected;
        assert!((0.7..=1.3).contains(&ratio), "{} points", pts.len());
    }

    #[test]
    fn benchmark_2d_boundary_points_lie_on_one_circle() {
        let dom = CsgDomain::benchmark(2).unwrap();
        let pts = dom.discretize_boundary(0.01, 7).unwrap();
        assert!(pts.len() > 100);
        for bp in &pts {
            let on: Vec<BallId> = dom
                .ball_ids()
                .filter(|&id| {
                    let b = dom.ball(id);
                    (b.distance_to_center(&bp.position) - b.radius()).abs() <= 1e-10
                })
                .collect();
            assert_eq!(on, vec![bp.owner]);
            assert_eq!(dom.locate(&bp.position).unwrap(), Location::Boundary);
            let norm: f64 = bp.normal.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normals_agree_with_containment() {
        for dim in 2..=3 {
            let dom = CsgDomain::benchmark(dim).unwrap();
            let h = if dim == 2 { 0.02 } else { 0.06 };
            let eps = 1e-3 * h;
            let pts = dom.discretize_boundary(h, 11).unwrap();
            let mut checked = 0;
            for bp in &pts {
                let far_from_seams = dom.ball_ids().filter(|&id| id != bp.owner).all(|id| {
                    let b = dom.ball(id);
                    (b.distance_to_center(&bp.position) - b.radius()).abs() > 3.0 * eps
                });
                if !far_from_seams {
                    continue;
                }
                let inward: Vec<f64> = bp.position.iter().zip(&bp.normal).map(|(p, n)| p - eps * n).collect();
                let outward: Vec<f64> = bp.position.iter().zip(&bp.normal).map(|(p, n)| p + eps * n).collect();
                assert!(dom.contains(&inward).unwrap());
                assert!(!dom.contains(&outward).unwrap());
                checked += 1;
            }
            assert!(checked > pts.len() / 2);
        }
    }

    #[test]
    fn boundary_is_deterministic() {
        let dom = CsgDomain::benchmark(3).unwrap();
        let a = dom.discretize_boundary(0.08, 42).unwrap();
        let b = dom.discretize_boundary(0.08, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn boundary_spacing_and_errors() {
        let dom = CsgDomain::benchmark(2).unwrap();
        let h = 0.02;
        let pts = dom.discretize_boundary(h, 5).unwrap();
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                assert!(distance(&a.position, &b.position) >= h * (1.0 - 1e-9));
            }
        }
        assert!(matches!(dom.discretize_boundary(0.2, 5), Err(GeometryError::SpacingTooLarge { .. })));
        assert!(matches!(dom.discretize_boundary(0.0, 5), Err(GeometryError::InvalidSpacing(_))));
    }

    #[test]
    fn scenario_4d_domain_is_nonempty() {
        let dom = CsgDomain::scenario_4d().unwrap();
        assert!(dom.inside_fraction(&[0.0; 4], &[1.0; 4], 20_000, 3) > 0.0);
    }
}
