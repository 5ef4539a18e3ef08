//! End-to-end solves of the manufactured benchmark.

use rbffd::approx::{stencil_size, RbfFd, WeightStore};
use rbffd::discretize::{add_ghosts, assemble, select_stencils};
use rbffd::geometry::CsgDomain;
use rbffd::linsolve::{solve_direct, solve_iterative, IterativeSettings, SolveStatus};
use rbffd::nodegen::{populate, NodeSet, Role};
use rbffd::problems::{classify_boundary, error_norms, BoundarySplit, ErrorReport, ManufacturedPoisson};
use rbffd::sparse::CsrMatrix;

struct Setup {
    nodes: NodeSet,
    matrix: CsrMatrix,
    rhs: Vec<f64>,
}

fn setup(dim: usize, h: f64, m: i32) -> Setup {
    let domain = CsgDomain::benchmark(dim).unwrap();
    let nodes = populate(&domain, h, 2, |b| classify_boundary(b, BoundarySplit::HalfSpace)).unwrap();
    let nodes = add_ghosts(&nodes, h, Some(&domain)).unwrap();
    let stencils = select_stencils(&nodes, stencil_size(m, dim)).unwrap();
    let approx = RbfFd::with_degree(dim, m).unwrap();
    let weights = WeightStore::compute(&approx, &nodes, &stencils, |r| r == Role::Neumann).unwrap();
    let system = assemble(&nodes, &weights, &ManufacturedPoisson::new(dim)).unwrap();
    Setup { nodes, matrix: system.matrix, rhs: system.rhs }
}

fn errors(s: &Setup, solution: &[f64]) -> ErrorReport {
    let u = ManufacturedPoisson::new(s.nodes.dim());
    let range = s.nodes.physical();
    let exact: Vec<f64> = range.clone().map(|i| u.value(s.nodes.position(i))).collect();
    error_norms(&solution[range], &exact).unwrap()
}

#[test]
fn two_dimensional_direct_solve_converges() {
    let coarse = setup(2, 0.04, 4);
    let fine = setup(2, 0.02, 4);
    let ec = errors(&coarse, &solve_direct(&coarse.matrix, &coarse.rhs).unwrap().solution);
    let ef = errors(&fine, &solve_direct(&fine.matrix, &fine.rhs).unwrap().solution);
    assert!(ef.e_inf < 1e-4, "{ef:?}");
    assert!(ef.e_inf < ec.e_inf / 4.0, "{ec:?} {ef:?}");
    assert!(ef.e1 <= ef.e2 * (1.0 + 1e-12) && ef.e2 <= ef.e_inf * (1.0 + 1e-12));
}

#[test]
fn dirichlet_rows_reproduce_boundary_data() {
    let s = setup(2, 0.05, 2);
    let rep = solve_direct(&s.matrix, &s.rhs).unwrap();
    let u = ManufacturedPoisson::new(2);
    let c = s.nodes.counts();
    for i in c.interior..c.interior + c.dirichlet {
        let g = u.value(s.nodes.position(i));
        assert!((rep.solution[i] - g).abs() <= 1e-9 * g.abs().max(1.0));
    }
}

#[test]
fn iterative_solve_agrees_with_direct() {
    for dim in [1, 2] {
        let s = setup(dim, if dim == 1 { 0.005 } else { 0.05 }, 2);
        let direct = solve_direct(&s.matrix, &s.rhs).unwrap();
        let iter = solve_iterative(&s.matrix, &s.rhs, &IterativeSettings::for_dimension(dim)).unwrap();
        assert_ne!(iter.status, SolveStatus::Breakdown);
        assert!(iter.residual < 1e-10, "d={dim}: {}", iter.residual);
        let ed = errors(&s, &direct.solution);
        let ei = errors(&s, &iter.solution);
        assert!((ed.e_inf - ei.e_inf).abs() <= 1e-3 * ed.e_inf, "{ed:?} {ei:?}");
    }
}
