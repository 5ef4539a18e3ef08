//! Eigenvalues of the interior Laplacian differentiation matrix.

use anyhow::{anyhow, ensure, Result};
use faer::Mat;
use rbffd::approx::WeightStore;
use rbffd::nodegen::NodeSet;

/// Largest interior node count accepted for the dense eigensolve.
pub const DEFAULT_MAX_NODES: usize = 3000;

/// Dense row-major interior block `D[i][j]`: the Laplacian weight of
/// interior node `j` in the stencil of interior node `i`.
pub fn interior_matrix(nodes: &NodeSet, weights: &WeightStore) -> Result<Vec<f64>> {
    let ni = nodes.counts().interior;
    let mut d = vec![0.0; ni * ni];
    for i in 0..ni {
        let set = weights.get(i).ok_or_else(|| anyhow!("interior node {i} has no weights"))?;
        for (&j, &w) in set.stencil.iter().zip(&set.laplacian) {
            if j < ni {
                d[i * ni + j] += w;
            }
        }
    }
    Ok(d)
}

/// All eigenvalues `(re, im)` of the interior block; refuses more than
/// `max_nodes` interior nodes.
pub fn spectrum(nodes: &NodeSet, weights: &WeightStore, max_nodes: usize) -> Result<Vec<(f64, f64)>> {
    let ni = nodes.counts().interior;
    ensure!(ni <= max_nodes, "{ni} interior nodes exceed the dense eigensolve limit of {max_nodes}");
    dense_eigenvalues(ni, &interior_matrix(nodes, weights)?)
}

pub fn dense_eigenvalues(n: usize, a: &[f64]) -> Result<Vec<(f64, f64)>> {
    ensure!(a.len() == n * n, "matrix storage does not match its size");
    if n == 0 {
        return Ok(Vec::new());
    }
    let m = Mat::<f64>::from_fn(n, n, |i, j| a[i * n + j]);
    let ev = m.eigenvalues().map_err(|e| anyhow!("eigensolver failed: {e:?}"))?;
    Ok(ev.into_iter().map(|z| (z.re, z.im)).collect())
}

/// `max Re λ / max |λ|`; non-positive values mean no eigenvalue lies in the
/// right half-plane.
pub fn relative_max_real(eigenvalues: &[(f64, f64)]) -> f64 {
    let max_abs = eigenvalues.iter().map(|&(re, im)| re.hypot(im)).fold(0.0, f64::max);
    let max_re = eigenvalues.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
    if max_abs == 0.0 {
        0.0
    } else {
        max_re / max_abs
    }
}
