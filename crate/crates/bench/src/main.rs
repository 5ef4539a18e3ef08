use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use rbffd::geometry::CsgDomain;
use rbffd::nodegen::populate;
use rbffd::problems::{classify_boundary, recommend_order, BoundarySplit, OPTIMAL_ORDERS};
use rbffd_bench::analysis::{fit_order, tradeoff_table};
use rbffd_bench::config::{check_order, parse_solver, DomainChoice, DomainSpec, Schedule, StudyConfig};
use rbffd_bench::output::{write_nodes_file, write_runs_file, write_spectrum_file};
use rbffd_bench::run::{discretize, run_case, spacing_for_count, CaseSpec, RunRecord};
use rbffd_bench::scenario::{scenario_4d, ScenarioSettings, REFERENCE_ERRORS, REFERENCE_NODES, REFERENCE_STENCIL};
use rbffd_bench::spectrum::{relative_max_real, spectrum, DEFAULT_MAX_NODES};

#[derive(Parser)]
#[command(name = "rbffd-bench", version, about = "RBF-FD Poisson studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CaseArgs {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Augmentation degree (-1 for none).
    #[arg(long, default_value_t = 2, allow_negative_numbers = true)]
    order: i32,
    /// Internodal spacing.
    #[arg(long, default_value_t = 0.02)]
    h: f64,
    #[arg(long, default_value_t = 3)]
    phs_k: u32,
    /// `direct` or `bicgstab`.
    #[arg(long, default_value = "bicgstab")]
    solver: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Domain file with `[[ball]]` tables; the benchmark domain by default.
    #[arg(long)]
    domain: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl CaseArgs {
    fn domain_choice(&self) -> Result<DomainChoice> {
        match &self.domain {
            Some(p) => Ok(DomainChoice::Custom(DomainSpec::load(p)?)),
            None => Ok(DomainChoice::Benchmark),
        }
    }

    fn spec(&self) -> Result<CaseSpec> {
        check_order(self.order)?;
        Ok(CaseSpec {
            dim: self.dim,
            order: self.order,
            h: self.h,
            phs_k: self.phs_k,
            solver: parse_solver(&self.solver)?,
            seed: self.seed,
            repeats: self.repeats,
            threads: self.threads,
            domain: self.domain_choice()?,
        })
    }
}

#[derive(Args)]
struct StudyArgs {
    /// Study file; overrides the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    dim: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2,4", allow_negative_numbers = true)]
    order: Vec<i32>,
    /// Comma-separated spacings, coarse to fine.
    #[arg(long, value_delimiter = ',', default_value = "0.08,0.04,0.02,0.01")]
    h_schedule: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    phs_k: u32,
    #[arg(long, default_value = "bicgstab")]
    solver: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl StudyArgs {
    fn config(&self) -> Result<StudyConfig> {
        if let Some(path) = &self.config {
            let mut cfg = StudyConfig::load(path)?;
            cfg.out.get_or_insert_with(|| self.out.clone());
            return Ok(cfg);
        }
        let cfg = StudyConfig {
            domain_file: None,
            dimensions: self.dim.clone(),
            orders: self.order.clone(),
            h_schedule: Some(self.h_schedule.clone()),
            n_schedule: None,
            solver: self.solver.clone(),
            out: Some(self.out.clone()),
            seed: self.seed,
            repeats: self.repeats,
            threads: self.threads,
            phs_k: self.phs_k,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Position nodes and write nodes.csv.
    Nodes {
        #[command(flatten)]
        case: CaseArgs,
    },
    /// Run one case and write runs.csv.
    Solve {
        #[command(flatten)]
        case: CaseArgs,
    },
    /// Sweep spacings for each order and fit convergence slopes.
    Converge {
        #[command(flatten)]
        study: StudyArgs,
    },
    /// Sweep spacings and orders and tabulate the fastest order per accuracy band.
    Tradeoff {
        #[command(flatten)]
        study: StudyArgs,
    },
    /// Eigenvalues of the interior Laplacian differentiation matrix.
    Spectrum {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, default_value_t = DEFAULT_MAX_NODES)]
        max_nodes: usize,
    },
    /// Rule-of-thumb augmentation order for accuracy 10^-k.
    Recommend {
        /// Accuracy exponent k.
        #[arg(long)]
        accuracy: f64,
        #[arg(long)]
        dim: usize,
    },
    /// The four-dimensional scenario at reduced scale.
    Scenario4d {
        #[arg(long, default_value_t = 5000)]
        target_nodes: usize,
        /// Augmentation degree; chosen by the rule of thumb when absent.
        #[arg(long)]
        order: Option<i32>,
        #[arg(long, default_value = "direct")]
        solver: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn print_record(r: &RunRecord) {
    println!(
        "d={} m={} n={} N={} h={:.4e}  e1={:.3e} e2={:.3e} e_inf={:.3e}  {} {} ({} it, residual {:.2e})",
        r.d, r.m, r.n, r.nodes, r.h, r.e1, r.e2, r.e_inf, r.solver, r.solver_status, r.iterations, r.residual
    );
    println!(
        "  times [s]: nodes {:.3}  weights {:.3}  assembly {:.3}  solve {:.3}  total {:.3}  ({} threads)",
        r.t_node_positioning, r.t_weight_computation, r.t_system_assembly, r.t_system_solution, r.t_total, r.threads
    );
}

fn run_study(cfg: &StudyConfig) -> Result<Vec<RunRecord>> {
    let domain = cfg.domain()?;
    let solver = parse_solver(&cfg.solver)?;
    let mut records = Vec::new();
    for &dim in &cfg.dimensions {
        let spacings = match cfg.schedule()? {
            Schedule::Spacing(h) => h,
            Schedule::Count(counts) => {
                let (d, split) = domain.build(dim)?;
                counts.iter().map(|&n| spacing_for_count(&d, split, n, cfg.seed)).collect::<Result<_>>()?
            }
        };
        for &order in &cfg.orders {
            for &h in &spacings {
                let spec = CaseSpec {
                    dim,
                    order,
                    h,
                    phs_k: cfg.phs_k,
                    solver,
                    seed: cfg.seed,
                    repeats: cfg.repeats,
                    threads: cfg.threads,
                    domain: domain.clone(),
                };
                // A failed case (typically a singular system for m = -1) is
                // reported and skipped so the rest of the study still runs.
                match run_case(&spec) {
                    Ok(record) => {
                        print_record(&record);
                        records.push(record);
                    }
                    Err(e) => eprintln!("d={dim} m={order} h={h}: skipped ({e:#})"),
                }
            }
        }
    }
    Ok(records)
}

fn out_dir(cfg: &StudyConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn report_written(path: &Path) {
    println!("wrote {}", path.display());
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Nodes { case } => {
            let (domain, split) = case.domain_choice()?.build(case.dim)?;
            let nodes = populate(&domain, case.h, case.seed, |b| classify_boundary(b, split))?;
            let nodes = rbffd::discretize::add_ghosts(&nodes, case.h, Some(&domain))?;
            let c = nodes.counts();
            println!(
                "N={} (interior {}, dirichlet {}, neumann {}), ghosts {}",
                c.physical(),
                c.interior,
                c.dirichlet,
                c.neumann,
                c.ghost
            );
            let path = case.out.join("nodes.csv");
            write_nodes_file(&path, &nodes)?;
            report_written(&path);
        }
        Command::Solve { case } => {
            let record = run_case(&case.spec()?)?;
            print_record(&record);
            let path = case.out.join("runs.csv");
            write_runs_file(&path, &[record])?;
            report_written(&path);
        }
        Command::Converge { study } => {
            let cfg = study.config()?;
            let records = run_study(&cfg)?;
            for &dim in &cfg.dimensions {
                for &m in &cfg.orders {
                    let pairs: Vec<(f64, f64)> = records
                        .iter()
                        .filter(|r| r.d == dim && r.m == m && !r.diverged)
                        .map(|r| (r.h, r.e_inf))
                        .collect();
                    match fit_order(&pairs) {
                        Ok(slope) => println!("d={dim} m={m}: fitted order {slope:.2}"),
                        Err(e) => println!("d={dim} m={m}: no fit ({e})"),
                    }
                }
            }
            let path = out_dir(&cfg).join("runs.csv");
            write_runs_file(&path, &records)?;
            report_written(&path);
        }
        Command::Tradeoff { study } => {
            let cfg = study.config()?;
            let records = run_study(&cfg)?;
            for &dim in &cfg.dimensions {
                let subset: Vec<RunRecord> = records.iter().filter(|r| r.d == dim).cloned().collect();
                println!("d={dim}: fastest order per accuracy band");
                for row in tradeoff_table(&subset)? {
                    println!(
                        "  e_inf <= 1e-{:<2}  m={}  N={}  e_inf={:.2e}  t={:.3}s",
                        row.band, row.m, row.nodes, row.e_inf, row.t_total
                    );
                }
                for r in OPTIMAL_ORDERS.iter().filter(|r| r.dim == dim) {
                    println!("  reference: 1e-{}..1e-{} -> m={}", r.from, r.to, r.m);
                }
            }
            let path = out_dir(&cfg).join("runs.csv");
            write_runs_file(&path, &records)?;
            report_written(&path);
        }
        Command::Spectrum { case, max_nodes } => {
            check_order(case.order)?;
            let (domain, split): (CsgDomain, BoundarySplit) = case.domain_choice()?.build(case.dim)?;
            let disc = discretize(&domain, split, case.dim, case.order, case.phs_k, case.h, case.seed)?;
            let ev = spectrum(&disc.nodes, &disc.weights, max_nodes)?;
            println!("{} eigenvalues; max Re / max |lambda| = {:.3e}", ev.len(), relative_max_real(&ev));
            let path = case.out.join("spectrum.csv");
            write_spectrum_file(&path, &ev)?;
            report_written(&path);
        }
        Command::Recommend { accuracy, dim } => {
            if dim == 0 {
                bail!("dimension must be at least 1");
            }
            println!("{}", recommend_order(accuracy, dim));
        }
        Command::Scenario4d { target_nodes, order, solver, seed, threads, out } => {
            if let Some(m) = order {
                check_order(m)?;
            }
            let settings = ScenarioSettings { target_nodes, order, solver: parse_solver(&solver)?, seed, threads };
            let record = scenario_4d(&settings)?;
            print_record(&record);
            println!(
                "reference run (not reproduced here): N={REFERENCE_NODES}, n={REFERENCE_STENCIL}, e1={:.2e}, e2={:.2e}, e_inf={:.2e}",
                REFERENCE_ERRORS[0], REFERENCE_ERRORS[1], REFERENCE_ERRORS[2]
            );
            let path = out.join("runs.csv");
            write_runs_file(&path, &[record])?;
            report_written(&path);
        }
    }
    Ok(())
}
