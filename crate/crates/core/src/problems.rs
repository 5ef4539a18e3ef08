//! The manufactured Poisson benchmark, boundary splits, error norms and the
//! order-selection rule of thumb.

use thiserror::Error;

use crate::geometry::{BallId, BoundaryPoint};
use crate::nodegen::Role;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("length mismatch: {numeric} numeric values vs {exact} exact values")]
    LengthMismatch { numeric: usize, exact: usize },
    #[error("exact solution has zero norm; relative errors are undefined")]
    ZeroNorm,
    #[error("no values to compare")]
    Empty,
}

/// Data of `∇²u = f` in Ω, `u = g_d` on Γ_d, `n·∇u = n·g_grad` on Γ_n.
pub trait PoissonProblem: Sync {
    fn dim(&self) -> usize;
    /// Right-hand side of the Poisson equation.
    fn source(&self, x: &[f64]) -> f64;
    /// Dirichlet data.
    fn dirichlet(&self, x: &[f64]) -> f64;
    /// Prescribed gradient on the Neumann boundary; only its normal
    /// component enters the discretization.
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    /// Exact solution, when known.
    fn exact(&self, _x: &[f64]) -> Option<f64> {
        None
    }
}

/// `u(x) = E(x) / g(x)` with `E = exp(Σ x_i^{a_i})`, `g = 1 + xᵀHx`,
/// `a_i = 2 + i` (1-based `i`) and `H` the Hilbert matrix of size `d`.
///
/// Since `H` is positive definite, `g ≥ 1` for every real `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedPoisson {
    dim: usize,
    hilbert: Vec<f64>,
    exponents: Vec<i32>,
}

impl ManufacturedPoisson {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        // Entry (i, j) with 1-based i, j is 1 / (i + j − 1); with 0-based
        // storage that is 1 / (i + j + 1).
        let hilbert = (0..dim * dim).map(|k| 1.0 / ((k / dim + k % dim + 1) as f64)).collect();
        // a_i = 2 + i for 1-based i.
        let exponents = (0..dim).map(|i| 3 + i as i32).collect();
        Self { dim, hilbert, exponents }
    }

    pub fn hilbert(&self) -> &[f64] {
        &self.hilbert
    }

    pub fn exponents(&self) -> &[i32] {
        &self.exponents
    }

    fn hx(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| (0..self.dim).map(|j| self.hilbert[i * self.dim + j] * x[j]).sum()).collect()
    }

    fn parts(&self, x: &[f64]) -> (f64, f64, Vec<f64>) {
        assert_eq!(x.len(), self.dim, "point dimension");
        let e = self.exponents.iter().zip(x).map(|(&a, &xi)| xi.powi(a)).sum::<f64>().exp();
        let hx = self.hx(x);
        let g = 1.0 + x.iter().zip(&hx).map(|(a, b)| a * b).sum::<f64>();
        (e, g, hx)
    }

    /// Vector with components `a_i x_i^{a_i − 1}`.
    fn exponent_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.exponents.iter().zip(x).map(|(&a, &xi)| f64::from(a) * xi.powi(a - 1)).collect()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let (e, g, _) = self.parts(x);
        e / g
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        let (e, g, hx) = self.parts(x);
        let v = self.exponent_gradient(x);
        let trace: f64 = (0..self.dim).map(|i| self.hilbert[i * self.dim + i]).sum();
        let hx_hx: f64 = hx.iter().map(|a| a * a).sum();
        let hx_v: f64 = hx.iter().zip(&v).map(|(a, b)| a * b).sum();
        let v_v: f64 = v.iter().map(|a| a * a).sum();
        let second: f64 = self.exponents.iter().zip(x).map(|(&a, &xi)| f64::from(a * (a - 1)) * xi.powi(a - 2)).sum();
        8.0 * e / g.powi(3) * hx_hx - 2.0 * e / (g * g) * (2.0 * hx_v + trace) + e / g * (second + v_v)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let (e, g, hx) = self.parts(x);
        let v = self.exponent_gradient(x);
        v.iter().zip(&hx).map(|(vi, hi)| e / g * (vi - 2.0 / g * hi)).collect()
    }
}

impl PoissonProblem for ManufacturedPoisson {
    fn dim(&self) -> usize {
        self.dim
    }

    fn source(&self, x: &[f64]) -> f64 {
        self.laplacian(x)
    }

    fn dirichlet(&self, x: &[f64]) -> f64 {
        self.value(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        ManufacturedPoisson::gradient(self, x)
    }

    fn exact(&self, x: &[f64]) -> Option<f64> {
        Some(self.value(x))
    }
}

/// How ∂Ω is split into Dirichlet and Neumann parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundarySplit {
    /// Γ_d = {x₁ < ½}, Γ_n = {x₁ ≥ ½}.
    HalfSpace,
    /// As `HalfSpace`, with the whole sphere of one ball forced to Dirichlet.
    HalfSpaceWithDirichletBall(BallId),
}

pub fn classify_boundary(p: &BoundaryPoint, split: BoundarySplit) -> Role {
    if let BoundarySplit::HalfSpaceWithDirichletBall(id) = split {
        if p.owner == id {
            return Role::Dirichlet;
        }
    }
    if p.position[0] < 0.5 {
        Role::Dirichlet
    } else {
        Role::Neumann
    }
}

/// Relative errors in the mean-absolute, RMS and max norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub e1: f64,
    pub e2: f64,
    pub e_inf: f64,
    pub n: usize,
}

pub fn error_norms(numeric: &[f64], exact: &[f64]) -> Result<ErrorReport, ProblemError> {
    if numeric.len() != exact.len() {
        return Err(ProblemError::LengthMismatch { numeric: numeric.len(), exact: exact.len() });
    }
    if exact.is_empty() {
        return Err(ProblemError::Empty);
    }
    let n = exact.len() as f64;
    let mut sum = [0.0f64; 2];
    let mut sq = [0.0f64; 2];
    let mut max = [0.0f64; 2];
    for (uh, u) in numeric.iter().zip(exact) {
        let d = (uh - u).abs();
        for (k, v) in [d, u.abs()].into_iter().enumerate() {
            sum[k] += v;
            sq[k] += v * v;
            max[k] = max[k].max(v);
        }
    }
    if max[1] == 0.0 {
        return Err(ProblemError::ZeroNorm);
    }
    Ok(ErrorReport {
        e1: (sum[0] / n) / (sum[1] / n),
        e2: (sq[0] / n).sqrt() / (sq[1] / n).sqrt(),
        e_inf: max[0] / max[1],
        n: exact.len(),
    })
}

/// Augmentation order for a target accuracy `e_∞ = 10^{-k}` in `d`
/// dimensions: `m = 5k/4 + 4d/5 − 2`, rounded to the nearest positive even
/// integer.
pub fn recommend_order(k: f64, d: usize) -> i32 {
    let m = 1.25 * k + 0.8 * d as f64 - 2.0;
    let even = 2.0 * (m / 2.0).round();
    (even as i32).max(2)
}

/// One row of the reference table of optimal orders per accuracy range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalOrder {
    pub dim: usize,
    /// Accuracy range `10^{-from} .. 10^{-to}`.
    pub from: i32,
    pub to: i32,
    pub m: i32,
}

pub const OPTIMAL_ORDERS: [OptimalOrder; 12] = [
    OptimalOrder { dim: 1, from: 0, to: 4, m: 2 },
    OptimalOrder { dim: 1, from: 4, to: 6, m: 4 },
    OptimalOrder { dim: 1, from: 6, to: 8, m: 6 },
    OptimalOrder { dim: 1, from: 8, to: 13, m: 8 },
    OptimalOrder { dim: 2, from: 0, to: 2, m: 2 },
    OptimalOrder { dim: 2, from: 2, to: 5, m: 4 },
    OptimalOrder { dim: 2, from: 5, to: 8, m: 6 },
    OptimalOrder { dim: 2, from: 8, to: 12, m: 8 },
    OptimalOrder { dim: 3, from: 0, to: 1, m: 2 },
    OptimalOrder { dim: 3, from: 1, to: 3, m: 4 },
    OptimalOrder { dim: 3, from: 3, to: 5, m: 6 },
    OptimalOrder { dim: 3, from: 5, to: 7, m: 8 },
];

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const E: f64 = std::f64::consts::E;

    #[test]
    fn closed_form_values() {
        for d in 1..=4 {
            assert_eq!(ManufacturedPoisson::new(d).value(&vec![0.0; d]), 1.0);
            assert_eq!(ManufacturedPoisson::new(d).gradient(&vec![0.0; d]), vec![0.0; d]);
        }
        assert!((ManufacturedPoisson::new(1).value(&[1.0]) - E / 2.0).abs() < 1e-15);
        assert!((ManufacturedPoisson::new(1).value(&[1.0]) - 1.3591409142295225).abs() < 1e-15);
        assert!((ManufacturedPoisson::new(2).value(&[1.0, 0.0]) - E / 2.0).abs() < 1e-15);
    }

    #[test]
    fn hilbert_matrix_and_exponents() {
        let p = ManufacturedPoisson::new(3);
        let h = p.hilbert();
        assert_eq!(h[0], 1.0);
        assert_eq!(h[1], 0.5);
        assert_eq!(h[4], 1.0 / 3.0);
        assert_eq!(h[8], 1.0 / 5.0);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(h[i * 3 + j], h[j * 3 + i]);
            }
        }
        assert_eq!(p.exponents(), &[3, 4, 5]);
    }

    /// Second derivative of e^{x³}/(1+x²) by the product rule on E·(1/g).
    fn second_derivative_1d(x: f64) -> f64 {
        let e = (x * x * x).exp();
        let g = 1.0 + x * x;
        e * ((6.0 * x + 9.0 * x.powi(4)) / g - 12.0 * x.powi(3) / (g * g) + (6.0 * x * x - 2.0) / g.powi(3))
    }

    #[test]
    fn one_dimensional_laplacian_matches_symbolic() {
        let p = ManufacturedPoisson::new(1);
        for i in 0..20 {
            let x = -1.0 + 0.1 * i as f64 + 0.037;
            let want = second_derivative_1d(x);
            let got = p.laplacian(&[x]);
            assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn divergence_of_gradient_is_laplacian() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for d in 1..=4 {
            let p = ManufacturedPoisson::new(d);
            for _ in 0..20 {
                let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                let step = 1e-5;
                let div: f64 = (0..d)
                    .map(|i| {
                        let mut a = x.clone();
                        let mut b = x.clone();
                        a[i] += step;
                        b[i] -= step;
                        (p.gradient(&a)[i] - p.gradient(&b)[i]) / (2.0 * step)
                    })
                    .sum();
                let lap = p.laplacian(&x);
                assert!((div - lap).abs() <= 1e-6 * lap.abs().max(1.0));
            }
        }
    }

    fn bp(x: Vec<f64>, owner: BallId) -> BoundaryPoint {
        let d = x.len();
        BoundaryPoint { position: x, normal: vec![1.0; d], owner }
    }

    #[test]
    fn boundary_classification() {
        let owner = BallId::positive(0);
        assert_eq!(classify_boundary(&bp(vec![0.3, 0.1], owner), BoundarySplit::HalfSpace), Role::Dirichlet);
        assert_eq!(classify_boundary(&bp(vec![0.5, 0.1], owner), BoundarySplit::HalfSpace), Role::Neumann);
        let hole = BallId::negative(2);
        let split = BoundarySplit::HalfSpaceWithDirichletBall(hole);
        assert_eq!(classify_boundary(&bp(vec![0.9, 0.5, 0.75, 0.5], hole), split), Role::Dirichlet);
        assert_eq!(classify_boundary(&bp(vec![0.9, 0.5, 0.75, 0.5], owner), split), Role::Neumann);
    }

    #[test]
    fn norms() {
        let r = error_norms(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((r.e1, r.e2, r.e_inf), (0.0, 0.0, 0.0));

        let r = error_norms(&[1.0, 1.1], &[1.0, 1.0]).unwrap();
        assert!((r.e_inf - 0.1).abs() < 1e-14);
        assert!((r.e1 - 0.05).abs() < 1e-14);
        assert!((r.e2 - 0.1 / 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(r.n, 2);

        let c = -3.5;
        let s = error_norms(&[c * 1.0, c * 1.1], &[c, c]).unwrap();
        assert!((s.e1 - r.e1).abs() < 1e-14 && (s.e2 - r.e2).abs() < 1e-14 && (s.e_inf - r.e_inf).abs() < 1e-14);

        assert_eq!(error_norms(&[1.0], &[0.0]), Err(ProblemError::ZeroNorm));
        assert!(matches!(error_norms(&[1.0], &[1.0, 2.0]), Err(ProblemError::LengthMismatch { .. })));
    }

    #[test]
    fn rule_of_thumb() {
        assert_eq!(recommend_order(2.0, 4), 4);
        assert_eq!(recommend_order(6.0, 1), 6);
        assert_eq!(recommend_order(1.0, 1), 2);
        for d in 1..=4 {
            for k in 1..12 {
                assert!(recommend_order(k as f64, d) <= recommend_order(k as f64 + 1.0, d));
                assert!(recommend_order(k as f64, d) <= recommend_order(k as f64, d + 1));
                assert_eq!(recommend_order(k as f64, d) % 2, 0);
            }
        }
    }
}
