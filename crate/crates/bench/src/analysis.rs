//! Convergence-order fits and accuracy/time trade-off tables.

use anyhow::{bail, ensure, Result};

use crate::run::RunRecord;

/// Least-squares slope of `log e` against `log h`.
///
/// Pairs are ordered from coarse to fine and everything after the smallest
/// error is dropped, which removes the finite-precision divergence regime.
pub fn fit_order(pairs: &[(f64, f64)]) -> Result<f64> {
    ensure!(
        pairs.iter().all(|&(h, e)| h > 0.0 && e > 0.0 && h.is_finite() && e.is_finite()),
        "spacings and errors must be positive and finite"
    );
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let best = sorted.iter().enumerate().min_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).map(|(i, _)| i).unwrap_or(0);
    sorted.truncate(best + 1);
    if sorted.len() < 3 {
        bail!("need at least 3 usable (h, e) pairs, have {}", sorted.len());
    }
    let xs: Vec<f64> = sorted.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = sorted.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    ensure!(sxx > 0.0, "all spacings are equal");
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Least-squares slope of `log y` against `log x`, without any pruning.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    ensure!(points.len() >= 2, "need at least 2 points");
    ensure!(points.iter().all(|&(x, y)| x > 0.0 && y > 0.0), "values must be positive");
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    ensure!(sxx > 0.0, "all abscissae are equal");
    Ok(xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx)
}

/// The fastest run reaching one accuracy band.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffRow {
    /// The band is `e_∞ ≤ 10^{-band}`.
    pub band: i32,
    pub m: i32,
    pub nodes: usize,
    pub e_inf: f64,
    pub t_total: f64,
}

/// For every decade `10^{-j}` reached by some run, the run that reaches it
/// in the least total time. Bands no run reaches are omitted.
pub fn tradeoff_table(records: &[RunRecord]) -> Result<Vec<TradeoffRow>> {
    let mut orders: Vec<i32> = records.iter().map(|r| r.m).collect();
    orders.sort_unstable();
    orders.dedup();
    ensure!(orders.len() >= 2, "records must span at least two orders");
    let usable: Vec<&RunRecord> = records.iter().filter(|r| !r.diverged && r.e_inf > 0.0).collect();
    let Some(best) = usable.iter().map(|r| r.e_inf).min_by(f64::total_cmp) else {
        return Ok(Vec::new());
    };
    let deepest = (-best.log10()).floor() as i32;
    let mut rows = Vec::new();
    for band in 0..=deepest {
        let limit = 10f64.powi(-band);
        if let Some(r) = usable.iter().filter(|r| r.e_inf <= limit).min_by(|a, b| a.t_total.total_cmp(&b.t_total)) {
            rows.push(TradeoffRow { band, m: r.m, nodes: r.nodes, e_inf: r.e_inf, t_total: r.t_total });
        }
    }
    Ok(rows)
}
