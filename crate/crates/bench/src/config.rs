//! Study configuration and domain description files.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use rbffd::geometry::{Ball, BallId, CsgDomain};
use rbffd::linsolve::SolveMethod;
use rbffd::problems::BoundarySplit;
use serde::Deserialize;

/// A ball center: one value broadcast to every coordinate, or explicit
/// coordinates.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Center {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BallSign {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct BallSpec {
    pub center: Center,
    pub radius: f64,
    pub sign: BallSign,
    /// Force this ball's whole sphere to be Dirichlet boundary.
    #[serde(default)]
    pub dirichlet: bool,
}

/// Contents of a domain file: a list of `[[ball]]` tables.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct DomainSpec {
    #[serde(rename = "ball")]
    pub balls: Vec<BallSpec>,
}

impl DomainSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Builds the domain in `dim` dimensions together with its boundary split.
    pub fn build(&self, dim: usize) -> Result<(CsgDomain, BoundarySplit)> {
        let mut positive = Vec::new();
        let mut negative = Vec::new();
        let mut forced = None;
        for (i, b) in self.balls.iter().enumerate() {
            let center = match &b.center {
                Center::Scalar(c) => vec![*c; dim],
                Center::Vector(v) => v.clone(),
            };
            ensure!(center.len() == dim, "ball {i} has {} coordinates, expected {dim}", center.len());
            let ball = Ball::new(center, b.radius).with_context(|| format!("ball {i}"))?;
            let id = match b.sign {
                BallSign::Positive => {
                    positive.push(ball);
                    BallId::positive(positive.len() - 1)
                }
                BallSign::Negative => {
                    negative.push(ball);
                    BallId::negative(negative.len() - 1)
                }
            };
            if b.dirichlet {
                ensure!(forced.is_none(), "at most one ball may be forced to Dirichlet");
                forced = Some(id);
            }
        }
        let domain = CsgDomain::new(positive, negative)?;
        let split = forced.map_or(BoundarySplit::HalfSpace, BoundarySplit::HalfSpaceWithDirichletBall);
        Ok((domain, split))
    }
}

/// Which domain a case runs on.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainChoice {
    /// The benchmark domain in the case's dimension.
    Benchmark,
    /// The four-dimensional scenario domain.
    Scenario4d,
    Custom(DomainSpec),
}

impl DomainChoice {
    pub fn build(&self, dim: usize) -> Result<(CsgDomain, BoundarySplit)> {
        match self {
            DomainChoice::Benchmark => Ok((CsgDomain::benchmark(dim)?, BoundarySplit::HalfSpace)),
            DomainChoice::Scenario4d => {
                ensure!(dim == 4, "the scenario domain is four-dimensional, got dimension {dim}");
                let domain = CsgDomain::scenario_4d()?;
                Ok((domain, BoundarySplit::HalfSpaceWithDirichletBall(BallId::negative(2))))
            }
            DomainChoice::Custom(spec) => spec.build(dim),
        }
    }
}

pub fn parse_solver(s: &str) -> Result<SolveMethod> {
    match s {
        "direct" => Ok(SolveMethod::Direct),
        "bicgstab" => Ok(SolveMethod::BiCgStab),
        other => bail!("unknown solver {other:?}; expected \"direct\" or \"bicgstab\""),
    }
}

/// Orders allowed in studies: −1 (no monomials), 0, and positive even degrees.
pub fn check_order(m: i32) -> Result<()> {
    ensure!(m == -1 || (m >= 0 && m % 2 == 0), "order {m} must be -1 or a non-negative even integer");
    Ok(())
}

/// A convergence or trade-off study read from a TOML file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// Domain file; the benchmark domain when absent. Relative paths are
    /// resolved against the config file's directory.
    pub domain_file: Option<PathBuf>,
    pub dimensions: Vec<usize>,
    pub orders: Vec<i32>,
    /// Spacings, strictly decreasing. Exactly one of `h_schedule` and
    /// `n_schedule` must be given.
    pub h_schedule: Option<Vec<f64>>,
    /// Target node counts, strictly increasing.
    pub n_schedule: Option<Vec<usize>>,
    #[serde(default = "default_solver")]
    pub solver: String,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default = "default_phs_k")]
    pub phs_k: u32,
}

fn default_solver() -> String {
    "bicgstab".into()
}

fn default_seed() -> u64 {
    1
}

fn default_repeats() -> usize {
    3
}

fn default_threads() -> usize {
    1
}

fn default_phs_k() -> u32 {
    3
}

/// The node-count axis of a study.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Spacing(Vec<f64>),
    Count(Vec<usize>),
}

impl StudyConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let (Some(file), Some(dir)) = (&cfg.domain_file, path.parent()) {
            if file.is_relative() {
                cfg.domain_file = Some(dir.join(file));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.dimensions.is_empty(), "no dimensions given");
        ensure!(self.dimensions.iter().all(|&d| d >= 1), "dimensions must be at least 1");
        ensure!(!self.orders.is_empty(), "no orders given");
        self.orders.iter().try_for_each(|&m| check_order(m))?;
        parse_solver(&self.solver)?;
        ensure!(self.repeats >= 1, "repeats must be at least 1");
        self.schedule()?;
        Ok(())
    }

    pub fn schedule(&self) -> Result<Schedule> {
        match (&self.h_schedule, &self.n_schedule) {
            (Some(h), None) => {
                ensure!(!h.is_empty(), "empty h schedule");
                ensure!(h.iter().all(|&x| x > 0.0 && x.is_finite()), "spacings must be positive");
                ensure!(h.windows(2).all(|w| w[1] < w[0]), "h schedule must be strictly decreasing");
                Ok(Schedule::Spacing(h.clone()))
            }
            (None, Some(n)) => {
                ensure!(!n.is_empty(), "empty N schedule");
                ensure!(n.windows(2).all(|w| w[1] > w[0]), "N schedule must be strictly increasing");
                Ok(Schedule::Count(n.clone()))
            }
            _ => bail!("give exactly one of h_schedule and n_schedule"),
        }
    }

    pub fn domain(&self) -> Result<DomainChoice> {
        match &self.domain_file {
            Some(p) => Ok(DomainChoice::Custom(DomainSpec::load(p)?)),
            None => Ok(DomainChoice::Benchmark),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_file_reproduces_benchmark() {
        let text = r#"
            [[ball]]
            center = 0.5
            radius = 0.5
            sign = "positive"
            [[ball]]
            center = 0.2
            radius = 0.25
            sign = "positive"
            [[ball]]
            center = 0.5
            radius = 0.1
            sign = "negative"
            [[ball]]
            center = 1.0
            radius = 0.5
            sign = "negative"
        "#;
        let spec: DomainSpec = toml::from_str(text).unwrap();
        for dim in 1..=3 {
            let (domain, split) = spec.build(dim).unwrap();
            assert_eq!(domain, CsgDomain::benchmark(dim).unwrap());
            assert_eq!(split, BoundarySplit::HalfSpace);
        }
    }

    #[test]
    fn forced_dirichlet_ball() {
        let text = r#"
            [[ball]]
            center = [0.0, 0.0]
            radius = 1.0
            sign = "positive"
            [[ball]]
            center = [0.0, 0.0]
            radius = 0.3
            sign = "negative"
            dirichlet = true
        "#;
        let spec: DomainSpec = toml::from_str(text).unwrap();
        let (_, split) = spec.build(2).unwrap();
        assert_eq!(split, BoundarySplit::HalfSpaceWithDirichletBall(BallId::negative(0)));
        assert!(spec.build(3).is_err());
    }

    #[test]
    fn study_validation() {
        let ok: StudyConfig =
            toml::from_str("dimensions = [2]\norders = [-1, 0, 2]\nh_schedule = [0.1, 0.05]").unwrap();
        ok.validate().unwrap();
        assert_eq!(ok.solver, "bicgstab");
        let odd: StudyConfig = toml::from_str("dimensions = [2]\norders = [3]\nh_schedule = [0.1]").unwrap();
        assert!(odd.validate().is_err());
        let up: StudyConfig = toml::from_str("dimensions = [2]\norders = [2]\nh_schedule = [0.05, 0.1]").unwrap();
        assert!(up.validate().is_err());
        let both: StudyConfig =
            toml::from_str("dimensions = [2]\norders = [2]\nh_schedule = [0.1]\nn_schedule = [100]").unwrap();
        assert!(both.validate().is_err());
        let down: StudyConfig = toml::from_str("dimensions = [1]\norders = [2]\nn_schedule = [200, 100]").unwrap();
        assert!(down.validate().is_err());
        assert!(parse_solver("lu").is_err());
    }
}
