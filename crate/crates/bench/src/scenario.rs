//! The four-dimensional scenario at reduced scale.

use anyhow::Result;
use rbffd::geometry::CsgDomain;
use rbffd::linsolve::SolveMethod;
use rbffd::problems::recommend_order;

use crate::config::DomainChoice;
use crate::run::{run_case, spacing_for_count, CaseSpec, RunRecord};

/// Target accuracy exponent used to pick the default order: `e_∞ ≈ 10⁻²`.
pub const TARGET_ACCURACY: f64 = 2.0;

/// Node count, stencil size and errors of the full-scale reference run;
/// documentation only, far outside desk scale.
pub const REFERENCE_NODES: usize = 85_000;
pub const REFERENCE_STENCIL: usize = 950;
pub const REFERENCE_ERRORS: [f64; 3] = [6.83e-4, 2.11e-3, 1.72e-2];

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSettings {
    pub target_nodes: usize,
    /// Augmentation order; the rule of thumb for [`TARGET_ACCURACY`] when absent.
    pub order: Option<i32>,
    pub solver: SolveMethod,
    pub seed: u64,
    pub threads: usize,
}

impl Default for ScenarioSettings {
    fn default() -> Self {
        Self { target_nodes: 5000, order: None, solver: SolveMethod::Direct, seed: 1, threads: 1 }
    }
}

/// Runs the scenario with a spacing calibrated to about `target_nodes` nodes.
pub fn scenario_4d(settings: &ScenarioSettings) -> Result<RunRecord> {
    let choice = DomainChoice::Scenario4d;
    let (domain, split) = choice.build(4)?;
    let h = spacing_for_count(&domain, split, settings.target_nodes, settings.seed)?;
    let order = settings.order.unwrap_or_else(|| recommend_order(TARGET_ACCURACY, 4));
    run_case(&CaseSpec {
        dim: 4,
        order,
        h,
        phs_k: 3,
        solver: settings.solver,
        seed: settings.seed,
        repeats: 1,
        threads: settings.threads,
        domain: choice,
    })
}

/// Fraction of uniform samples of `[0, 1]⁴` that fall inside the domain.
pub fn inside_fraction(samples: usize, seed: u64) -> Result<f64> {
    let domain = CsgDomain::scenario_4d()?;
    Ok(domain.inside_fraction(&[0.0; 4], &[1.0; 4], samples, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_is_nonempty_and_default_order_is_four() {
        assert!(inside_fraction(20_000, 3).unwrap() > 0.0);
        assert_eq!(recommend_order(TARGET_ACCURACY, 4), 4);
    }

    #[test]
    fn small_scenario_runs() {
        let rec = scenario_4d(&ScenarioSettings { target_nodes: 600, order: Some(2), ..Default::default() }).unwrap();
        assert_eq!(rec.d, 4);
        assert!(rec.e_inf.is_finite() && rec.converged(), "{rec:?}");
    }
}
