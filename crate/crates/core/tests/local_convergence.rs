//! Local accuracy of Laplacian weights on a smooth non-polynomial function.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rbffd::approx::{stencil_size, Operator, RbfFd};
use rbffd::problems::ManufacturedPoisson;

/// Least-squares slope of `log err` against `log h`.
fn slope(hs: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Offsets in the unit ball; when `mirrored`, every offset comes with its negative.
fn shape(dim: usize, n: usize, mirrored: bool, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![vec![0.0; dim]];
    let sep = 0.4 / (n as f64).powf(1.0 / dim as f64);
    while out.len() < n {
        let p: Vec<f64> = (0..dim).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        if p.iter().map(|a| a * a).sum::<f64>() > 1.0 {
            continue;
        }
        let q: Vec<f64> = p.iter().map(|a| -a).collect();
        let far =
            |x: &Vec<f64>| out.iter().all(|o| o.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() >= sep);
        if !far(&p) || (mirrored && !far(&q)) {
            continue;
        }
        out.push(p);
        if mirrored {
            out.push(q);
        }
    }
    out
}

fn local_errors(dim: usize, m: i32, offsets: &[Vec<f64>], hs: &[f64]) -> Vec<f64> {
    let u = ManufacturedPoisson::new(dim);
    let approx = RbfFd::with_degree(dim, m).unwrap();
    let x0: Vec<f64> = (0..dim).map(|i| 0.3 + 0.05 * i as f64).collect();
    hs.iter()
        .map(|&h| {
            let pts: Vec<Vec<f64>> =
                offsets.iter().map(|o| x0.iter().zip(o).map(|(c, d)| c + h * d).collect()).collect();
            let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
            let w = &approx.compute_weights(0, &refs, &[Operator::Laplacian]).unwrap()[0].weights;
            let approx_lap: f64 = w.iter().zip(&pts).map(|(wi, p)| wi * u.value(p)).sum();
            (approx_lap - u.laplacian(&x0)).abs()
        })
        .collect()
}

#[test]
fn mirrored_stencils_converge_at_order_m() {
    let hs: Vec<f64> = (0..5).map(|k| 0.2 * 0.5f64.powi(k)).collect();
    for dim in 1..=3 {
        for m in [2, 4] {
            let n = stencil_size(m, dim) | 1;
            let errs = local_errors(dim, m, &shape(dim, n, true, 3), &hs);
            let rate = slope(&hs, &errs);
            assert!(rate >= m as f64 - 0.5, "d={dim} m={m}: rate {rate}, errors {errs:?}");
        }
    }
}

#[test]
fn generic_stencils_converge_at_order_m_minus_one() {
    let hs: Vec<f64> = (0..5).map(|k| 0.2 * 0.5f64.powi(k)).collect();
    for dim in 1..=3 {
        for m in [2, 4] {
            let errs = local_errors(dim, m, &shape(dim, stencil_size(m, dim), false, 8), &hs);
            // The coarsest scales are pre-asymptotic.
            let rate = slope(&hs[2..], &errs[2..]);
            assert!(rate >= m as f64 - 1.3, "d={dim} m={m}: rate {rate}, errors {errs:?}");
        }
    }
}
