//! RBF-FD stencil weights from polyharmonic splines augmented with monomials.
//!
//! For a stencil `x₁ … xₙ` around a center `x_c = x₁` and a linear operator
//! `L`, the weights `w` solve the saddle-point system
//!
//! ```text
//! [ A   P ] [ w ]   [ ℓ_φ ]      A_ij = φ(‖x_i − x_j‖),  P_ij = p_j(x_i)
//! [ Pᵀ  0 ] [ λ ] = [ ℓ_p ]      ℓ_φ,j = Lφ(‖x − x_j‖)|_{x_c},  ℓ_p,j = (L p_j)(x_c)
//! ```
//!
//! The last block row makes the weights exact for every monomial of total
//! degree ≤ m. The multipliers `λ` are kept for diagnostics only.
//!
//! Stencils are translated so the center is the origin and scaled by the
//! stencil radius before assembly; weights are mapped back afterwards.

use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::nodegen::{NodeSet, Role};

/// Reciprocal condition estimate below which the saddle system is treated
/// as singular.
pub const RCOND_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApproxError {
    #[error("PHS exponent must be at least 1")]
    InvalidExponent,
    #[error("augmentation degree must be at least -1, got {0}")]
    InvalidDegree(i32),
    #[error("stencil of node {node} has {n} nodes but the monomial basis needs at least {s}")]
    TooFewNodes { node: usize, n: usize, s: usize },
    #[error("empty stencil for node {0}")]
    EmptyStencil(usize),
    #[error("stencil of node {node} is not unisolvent (reciprocal condition {rcond:.3e})")]
    Unisolvent { node: usize, rcond: f64 },
    #[error("{op:?} of r^{k} is undefined at r = 0 in {dim} dimensions")]
    SingularKernel { k: u32, op: Operator, dim: usize },
    #[error("operator {op:?} does not fit dimension {dim}")]
    OperatorDimension { op: Operator, dim: usize },
    #[error("point has {got} coordinates, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("stencil list has {got} entries for {expected} nodes")]
    StencilCount { expected: usize, got: usize },
}

/// Linear differential operator being approximated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operator {
    Laplacian,
    /// First derivative along a 0-based axis.
    Partial(usize),
}

impl Operator {
    pub fn order(self) -> i32 {
        match self {
            Operator::Laplacian => 2,
            Operator::Partial(_) => 1,
        }
    }

    pub fn tag(self) -> String {
        match self {
            Operator::Laplacian => "lap".to_string(),
            Operator::Partial(i) => format!("d{}", i + 1),
        }
    }

    fn check(self, dim: usize) -> Result<(), ApproxError> {
        match self {
            Operator::Partial(i) if i >= dim => Err(ApproxError::OperatorDimension { op: self, dim }),
            _ => Ok(()),
        }
    }
}

/// Polyharmonic spline `φ(r) = r^k` for odd `k`, `r^k log r` for even `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phs {
    k: u32,
}

impl Default for Phs {
    fn default() -> Self {
        Self { k: 3 }
    }
}

impl Phs {
    pub fn new(k: u32) -> Result<Self, ApproxError> {
        if k == 0 {
            return Err(ApproxError::InvalidExponent);
        }
        Ok(Self { k })
    }

    pub fn k(self) -> u32 {
        self.k
    }

    fn is_even(self) -> bool {
        self.k.is_multiple_of(2)
    }

    pub fn value(self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        let rk = r.powi(self.k as i32);
        if self.is_even() {
            rk * r.ln()
        } else {
            rk
        }
    }

    /// `L φ(‖x − node‖)` at `x = center`, given `diff = center − node`.
    ///
    /// At `r = 0` the symbolic limit is returned; where that limit diverges
    /// the result is infinite.
    pub fn apply(self, op: Operator, diff: &[f64]) -> f64 {
        let dim = diff.len();
        let k = self.k as i32;
        let kf = f64::from(self.k);
        let r = diff.iter().map(|a| a * a).sum::<f64>().sqrt();
        match op {
            Operator::Laplacian => {
                let coef = kf * (kf + dim as f64 - 2.0);
                if r == 0.0 {
                    return if k > 2 {
                        0.0
                    } else if self.is_even() {
                        f64::NEG_INFINITY
                    } else if coef == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                }
                let rk2 = r.powi(k - 2);
                if self.is_even() {
                    rk2 * (coef * r.ln() + 2.0 * kf + dim as f64 - 2.0)
                } else {
                    coef * rk2
                }
            }
            Operator::Partial(i) => {
                if r == 0.0 {
                    return 0.0;
                }
                let rk2 = r.powi(k - 2);
                if self.is_even() {
                    rk2 * (kf * r.ln() + 1.0) * diff[i]
                } else {
                    kf * rk2 * diff[i]
                }
            }
        }
    }
}

/// `C(m + d, d)`, the number of `d`-variate monomials of total degree ≤ m;
/// zero for `m = −1`.
pub fn monomial_count(m: i32, d: usize) -> usize {
    if m < 0 {
        return 0;
    }
    let m = m as usize;
    // C(m+d, d) built incrementally stays integral at every step.
    (1..=d).fold(1usize, |acc, i| acc * (m + i) / i)
}

/// Stencil size `max(2·C(m+d, d), 2d + 1)`.
pub fn stencil_size(m: i32, d: usize) -> usize {
    (2 * monomial_count(m, d)).max(2 * d + 1)
}

/// All monomials in `dim` variables with total degree ≤ `degree`, in graded
/// lexicographic order (constant first, then `x₁, x₂, …`, then `x₁², x₁x₂, …`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Monomials {
    dim: usize,
    degree: i32,
    exponents: Vec<Vec<u32>>,
}

impl Monomials {
    pub fn new(dim: usize, degree: i32) -> Result<Self, ApproxError> {
        if degree < -1 {
            return Err(ApproxError::InvalidDegree(degree));
        }
        let mut exponents = Vec::with_capacity(monomial_count(degree, dim));
        for total in 0..=degree.max(-1) {
            let mut current = vec![0u32; dim];
            push_compositions(total as u32, 0, &mut current, &mut exponents);
        }
        Ok(Self { dim, degree, exponents })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> i32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    /// The basis restricted to the monomials at positions `keep`.
    fn subset(&self, keep: &[usize]) -> Self {
        Self {
            dim: self.dim,
            degree: self.degree,
            exponents: keep.iter().map(|&j| self.exponents[j].clone()).collect(),
        }
    }

    fn powers(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let top = self.degree.max(0) as usize;
        x.iter()
            .map(|&xi| {
                let mut p = Vec::with_capacity(top + 1);
                p.push(1.0);
                for e in 1..=top {
                    p.push(p[e - 1] * xi);
                }
                p
            })
            .collect()
    }

    /// Values `p_j(x)` of every basis monomial.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let pw = self.powers(x);
        self.exponents.iter().map(|alpha| alpha.iter().enumerate().map(|(i, &a)| pw[i][a as usize]).product()).collect()
    }

    /// Values `(L p_j)(x)` of the operator applied to every basis monomial.
    pub fn apply(&self, op: Operator, x: &[f64]) -> Vec<f64> {
        let pw = self.powers(x);
        let term = |alpha: &[u32], lowered: usize, by: u32| -> f64 {
            alpha
                .iter()
                .enumerate()
                .map(|(i, &a)| if i == lowered { pw[i][(a - by) as usize] } else { pw[i][a as usize] })
                .product()
        };
        self.exponents
            .iter()
            .map(|alpha| match op {
                Operator::Laplacian => (0..self.dim)
                    .filter(|&i| alpha[i] >= 2)
                    .map(|i| f64::from(alpha[i] * (alpha[i] - 1)) * term(alpha, i, 2))
                    .sum(),
                Operator::Partial(i) => {
                    if alpha[i] == 0 {
                        0.0
                    } else {
                        f64::from(alpha[i]) * term(alpha, i, 1)
                    }
                }
            })
            .collect()
    }
}

fn push_compositions(remaining: u32, pos: usize, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    for a in (0..=remaining).rev() {
        current[pos] = a;
        push_compositions(remaining - a, pos + 1, current, out);
    }
    current[pos] = 0;
}

/// Dense LU factorization with partial pivoting, row-major storage.
#[derive(Debug, Clone)]
pub(crate) struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    singular: bool,
}

impl DenseLu {
    pub(crate) fn factor(n: usize, mut a: Vec<f64>) -> Self {
        assert_eq!(a.len(), n * n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut singular = false;
        for k in 0..n {
            let (p, pivot) = (k..n).map(|i| (i, a[i * n + k].abs())).max_by(|x, y| x.1.total_cmp(&y.1)).unwrap();
            if pivot == 0.0 || !pivot.is_finite() {
                singular = true;
                continue;
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
            }
            let inv = 1.0 / a[k * n + k];
            let (head, tail) = a.split_at_mut((k + 1) * n);
            let row_k = &head[k * n..];
            for row in tail.chunks_exact_mut(n) {
                let f = row[k] * inv;
                if f == 0.0 {
                    continue;
                }
                row[k] = f;
                for j in k + 1..n {
                    row[j] -= f * row_k[j];
                }
            }
        }
        Self { n, lu: a, perm, singular }
    }

    /// Solves `A x = b` in place.
    pub(crate) fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, y)| l * y).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s: f64 = row.iter().zip(&x[i + 1..]).map(|(u, y)| u * y).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        b.copy_from_slice(&x);
    }

    /// Solves `Aᵀ x = b` in place.
    fn solve_transpose(&self, b: &mut [f64]) {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for (k, yk) in y.iter().enumerate().take(i) {
                s -= self.lu[k * n + i] * yk;
            }
            y[i] = s / self.lu[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for (k, yk) in y.iter().enumerate().skip(i + 1) {
                s -= self.lu[k * n + i] * yk;
            }
            y[i] = s;
        }
        for (i, &p) in self.perm.iter().enumerate() {
            b[p] = y[i];
        }
    }

    /// Hager–Higham estimate of `‖A⁻¹‖₁`.
    fn inverse_norm1(&self) -> f64 {
        let n = self.n;
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        for iter in 0..5 {
            let mut y = x.clone();
            self.solve(&mut y);
            let new_est: f64 = y.iter().map(|v| v.abs()).sum();
            if iter > 0 && new_est <= est {
                break;
            }
            est = new_est;
            let mut z: Vec<f64> = y.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect();
            self.solve_transpose(&mut z);
            let (j, zmax) = z.iter().enumerate().map(|(j, v)| (j, v.abs())).max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if iter > 0 && zmax <= ztx {
                break;
            }
            x.iter_mut().for_each(|v| *v = 0.0);
            x[j] = 1.0;
        }
        // Alternating test vector guards against the estimator's blind spots.
        let mut alt: Vec<f64> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                s * (1.0 + i as f64 / (n.max(2) - 1) as f64)
            })
            .collect();
        self.solve(&mut alt);
        let alt_est = 2.0 * alt.iter().map(|v| v.abs()).sum::<f64>() / (3.0 * n as f64);
        est.max(alt_est)
    }

    /// Estimated reciprocal 1-norm condition number, given `‖A‖₁`.
    pub(crate) fn rcond(&self, norm1: f64) -> f64 {
        if self.singular {
            return 0.0;
        }
        let inv = self.inverse_norm1();
        if !inv.is_finite() || norm1 == 0.0 {
            return 0.0;
        }
        1.0 / (norm1 * inv)
    }
}

fn norm1(n: usize, a: &[f64]) -> f64 {
    (0..n).map(|j| (0..n).map(|i| a[i * n + j].abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Weights of one operator on one stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalWeights {
    pub op: Operator,
    pub weights: Vec<f64>,
    /// Lagrange multipliers in the shifted and scaled stencil coordinates.
    /// Not used for discretization.
    pub multipliers: Vec<f64>,
}

/// An RBF-FD approximation: a PHS kernel plus a monomial basis.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfFd {
    phs: Phs,
    monomials: Monomials,
}

impl RbfFd {
    pub fn new(phs: Phs, monomials: Monomials) -> Self {
        Self { phs, monomials }
    }

    /// `r³` augmented with monomials up to degree `m` in `dim` dimensions.
    pub fn with_degree(dim: usize, m: i32) -> Result<Self, ApproxError> {
        Ok(Self::new(Phs::default(), Monomials::new(dim, m)?))
    }

    pub fn phs(&self) -> Phs {
        self.phs
    }

    pub fn monomials(&self) -> &Monomials {
        &self.monomials
    }

    pub fn dim(&self) -> usize {
        self.monomials.dim()
    }

    /// Weights of each operator in `ops` for the stencil `points`, whose first
    /// entry is the center. `center` only labels errors.
    pub fn compute_weights(
        &self,
        center: usize,
        points: &[&[f64]],
        ops: &[Operator],
    ) -> Result<Vec<LocalWeights>, ApproxError> {
        let dim = self.dim();
        let n = points.len();
        let s = self.monomials.len();
        if n == 0 {
            return Err(ApproxError::EmptyStencil(center));
        }
        if n < s {
            return Err(ApproxError::TooFewNodes { node: center, n, s });
        }
        for p in points {
            if p.len() != dim {
                return Err(ApproxError::DimensionMismatch { expected: dim, got: p.len() });
            }
        }
        for &op in ops {
            op.check(dim)?;
        }

        let c = points[0];
        let mut scaled: Vec<Vec<f64>> = points.iter().map(|p| p.iter().zip(c).map(|(a, b)| a - b).collect()).collect();
        let radius = scaled.iter().map(|p| p.iter().map(|a| a * a).sum::<f64>()).fold(0.0, f64::max).sqrt();
        let scale = if radius > 0.0 { radius } else { 1.0 };
        for p in &mut scaled {
            p.iter_mut().for_each(|a| *a /= scale);
        }

        let size = n + s;
        let m = self.saddle_matrix(&scaled);
        let lu = DenseLu::factor(size, m.clone());
        let rcond = lu.rcond(norm1(size, &m));
        if rcond.is_nan() || rcond < RCOND_THRESHOLD {
            return Err(ApproxError::Unisolvent { node: center, rcond });
        }

        let origin = vec![0.0; dim];
        ops.iter()
            .map(|&op| {
                let mut rhs = Vec::with_capacity(size);
                for p in &scaled {
                    let diff: Vec<f64> = p.iter().map(|a| -a).collect();
                    let v = self.phs.apply(op, &diff);
                    if !v.is_finite() {
                        return Err(ApproxError::SingularKernel { k: self.phs.k(), op, dim });
                    }
                    rhs.push(v);
                }
                rhs.extend(self.monomials.apply(op, &origin));
                lu.solve(&mut rhs);
                let unscale = scale.powi(-op.order());
                let multipliers = rhs.split_off(n);
                let weights = rhs.into_iter().map(|w| w * unscale).collect();
                Ok(LocalWeights { op, weights, multipliers })
            })
            .collect()
    }
}

impl RbfFd {
    /// Like [`RbfFd::compute_weights`], but first removes monomials whose
    /// values on the stencil depend linearly on earlier ones, such as `xy` on
    /// a coordinate cross. The weights stay unique; the removed exactness
    /// conditions are checked afterwards and an unmet one is an
    /// [`ApproxError::Unisolvent`] error. Returns the weights and the
    /// positions of the removed monomials.
    pub fn compute_weights_reduced(
        &self,
        center: usize,
        points: &[&[f64]],
        ops: &[Operator],
    ) -> Result<(Vec<LocalWeights>, Vec<usize>), ApproxError> {
        if points.is_empty() {
            return Err(ApproxError::EmptyStencil(center));
        }
        let c = points[0];
        let shifted: Vec<Vec<f64>> = points.iter().map(|p| p.iter().zip(c).map(|(a, b)| a - b).collect()).collect();
        let radius = shifted.iter().map(|p| p.iter().map(|a| a * a).sum::<f64>().sqrt()).fold(0.0, f64::max);
        let scale = if radius > 0.0 { radius } else { 1.0 };
        let columns: Vec<Vec<f64>> = {
            let rows: Vec<Vec<f64>> =
                shifted.iter().map(|p| self.monomials.eval(&p.iter().map(|a| a / scale).collect::<Vec<_>>())).collect();
            (0..self.monomials.len()).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
        };

        // Modified Gram–Schmidt over the columns of P, in basis order.
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let (mut keep, mut dropped) = (Vec::new(), Vec::new());
        for (j, col) in columns.iter().enumerate() {
            let norm0 = col.iter().map(|a| a * a).sum::<f64>().sqrt();
            let mut v = col.clone();
            for q in &basis {
                let d: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-10 * norm0.max(1.0) {
                v.iter_mut().for_each(|a| *a /= norm);
                basis.push(v);
                keep.push(j);
            } else {
                dropped.push(j);
            }
        }

        let reduced = RbfFd::new(self.phs, self.monomials.subset(&keep));
        let local = reduced.compute_weights(center, points, ops)?;
        let origin = vec![0.0; self.dim()];
        for lw in &local {
            let target = self.monomials.apply(lw.op, &origin);
            let w1: f64 = lw.weights.iter().map(|w| w.abs()).sum();
            for &j in &dropped {
                let values: Vec<f64> = shifted.iter().map(|p| self.monomials.eval(p)[j]).collect();
                let peak = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
                let got: f64 = lw.weights.iter().zip(&values).map(|(w, v)| w * v).sum();
                if (got - target[j]).abs() > 1e-8 * (w1 * peak).max(f64::MIN_POSITIVE) {
                    return Err(ApproxError::Unisolvent { node: center, rcond: 0.0 });
                }
            }
        }
        Ok((local, dropped))
    }

    /// Row-major `[[A P]; [Pᵀ 0]]` for the given (already shifted and
    /// scaled) stencil points.
    fn saddle_matrix(&self, points: &[Vec<f64>]) -> Vec<f64> {
        let n = points.len();
        let size = n + self.monomials.len();
        let mut m = vec![0.0; size * size];
        for i in 0..n {
            for j in 0..=i {
                let v = self.phs.value(crate::geometry::distance(&points[i], &points[j]));
                m[i * size + j] = v;
                m[j * size + i] = v;
            }
            for (j, pj) in self.monomials.eval(&points[i]).into_iter().enumerate() {
                m[i * size + n + j] = pj;
                m[(n + j) * size + i] = pj;
            }
        }
        m
    }
}

/// Stencil weights of one node: the Laplacian always, first derivatives
/// only where requested.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub center: usize,
    /// Node indices, the center first.
    pub stencil: Vec<usize>,
    pub laplacian: Vec<f64>,
    /// One weight vector per axis, when computed.
    pub gradient: Option<Vec<Vec<f64>>>,
    /// Diagnostic multipliers, one vector per computed operator.
    pub multipliers: Vec<Vec<f64>>,
}

/// Weights for every node that received a stencil, indexed by node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightStore {
    sets: Vec<Option<WeightSet>>,
}

impl WeightStore {
    /// Computes Laplacian weights for every stencil and gradient weights for
    /// nodes whose role satisfies `needs_gradient`. Stencil `i` belongs to node `i`.
    pub fn compute(
        approx: &RbfFd,
        nodes: &NodeSet,
        stencils: &[Vec<usize>],
        needs_gradient: impl Fn(Role) -> bool + Sync,
    ) -> Result<Self, ApproxError> {
        if stencils.len() > nodes.len() {
            return Err(ApproxError::StencilCount { expected: nodes.len(), got: stencils.len() });
        }
        let dim = nodes.dim();
        let sets = stencils
            .par_iter()
            .enumerate()
            .map(|(center, stencil)| {
                if stencil.is_empty() {
                    return Err(ApproxError::EmptyStencil(center));
                }
                let points: Vec<&[f64]> = stencil.iter().map(|&j| nodes.position(j)).collect();
                let with_grad = needs_gradient(nodes.role(center));
                let mut ops = vec![Operator::Laplacian];
                if with_grad {
                    ops.extend((0..dim).map(Operator::Partial));
                }
                let mut local = approx.compute_weights(center, &points, &ops)?.into_iter();
                let lap = local.next().unwrap();
                let mut multipliers = vec![lap.multipliers];
                let gradient = with_grad.then(|| {
                    local
                        .map(|w| {
                            multipliers.push(w.multipliers);
                            w.weights
                        })
                        .collect()
                });
                Ok(Some(WeightSet { center, stencil: stencil.clone(), laplacian: lap.weights, gradient, multipliers }))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { sets })
    }

    pub fn from_sets(sets: Vec<Option<WeightSet>>) -> Self {
        Self { sets }
    }

    pub fn get(&self, node: usize) -> Option<&WeightSet> {
        self.sets.get(node).and_then(Option::as_ref)
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &WeightSet> {
        self.sets.iter().flatten()
    }

    /// Long-format dump: one `center,op,neighbour,weight` row per stencil entry.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# schema: rbffd-weights v1")?;
        writeln!(w, "center,op,neighbour,weight")?;
        for set in self.iter() {
            let mut rows = vec![(Operator::Laplacian, &set.laplacian)];
            if let Some(g) = &set.gradient {
                rows.extend(g.iter().enumerate().map(|(i, wv)| (Operator::Partial(i), wv)));
            }
            for (op, weights) in rows {
                for (j, wt) in set.stencil.iter().zip(weights) {
                    writeln!(w, "{},{},{},{:e}", set.center, op.tag(), j, wt)?;
                }
            }
        }
        Ok(())
    }
}
