//! Ghost nodes, stencil selection and assembly of the global Poisson system.
//!
//! Unknowns and rows share the node order of [`NodeSet`]: interior,
//! Dirichlet, Neumann, ghost. The row of ghost `g` collocates the Laplacian
//! at the boundary node `g` was generated from.

use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::approx::WeightStore;
use crate::geometry::CsgDomain;
use crate::nodegen::{Node, NodeGenError, NodeSet, Role, SpatialIndex};
use crate::problems::PoissonProblem;
use crate::sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscretizeError {
    #[error("node set already contains ghost nodes")]
    GhostsPresent,
    #[error("ghost spacing must be positive and finite")]
    InvalidSpacing,
    #[error("stencil size {n} exceeds the {total} available nodes")]
    StencilTooLarge { n: usize, total: usize },
    #[error("stencil size must be at least 1")]
    EmptyStencil,
    #[error("node {node} ({role:?}) has no {what} weights")]
    MissingWeights { node: usize, role: Role, what: &'static str },
    #[error("boundary node {0} has no normal")]
    MissingNormal(usize),
    #[error("problem is {problem}-dimensional, nodes are {nodes}-dimensional")]
    DimensionMismatch { problem: usize, nodes: usize },
    #[error(transparent)]
    NodeGen(#[from] NodeGenError),
}

/// Adds one ghost per boundary node at `p + h·n`.
///
/// When `domain` is given, ghosts that land inside Ω are reported with a
/// warning and kept.
pub fn add_ghosts(nodes: &NodeSet, h: f64, domain: Option<&CsgDomain>) -> Result<NodeSet, DiscretizeError> {
    if nodes.counts().ghost > 0 {
        return Err(DiscretizeError::GhostsPresent);
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(DiscretizeError::InvalidSpacing);
    }
    let mut all: Vec<Node> = nodes.nodes().collect();
    let mut inside = 0;
    for b in nodes.boundary() {
        let normal = nodes.normal(b).ok_or(DiscretizeError::MissingNormal(b))?;
        let position: Vec<f64> = nodes.position(b).iter().zip(normal).map(|(p, n)| p + h * n).collect();
        if domain.is_some_and(|d| d.contains_unchecked(&position)) {
            inside += 1;
        }
        all.push(Node { position, role: Role::Ghost, normal: Some(normal.to_vec()) });
    }
    if inside > 0 {
        log::warn!("{inside} ghost nodes fall inside the domain; they are kept as extra unknowns");
    }
    Ok(NodeSet::new(nodes.dim(), nodes.h(), all)?)
}

/// The `n` nearest nodes (ghosts included) of every non-ghost node, the
/// node itself first.
///
/// A boundary node's own ghost always belongs to its stencil, replacing the
/// farthest member if needed, so every ghost unknown appears in at least the
/// row collocated at its parent.
pub fn select_stencils(nodes: &NodeSet, n: usize) -> Result<Vec<Vec<usize>>, DiscretizeError> {
    if n == 0 {
        return Err(DiscretizeError::EmptyStencil);
    }
    if n > nodes.len() {
        return Err(DiscretizeError::StencilTooLarge { n, total: nodes.len() });
    }
    let index = SpatialIndex::new(nodes.dim(), nodes.flat_positions());
    nodes
        .physical()
        .into_par_iter()
        .map(|i| {
            let mut s = index.knn(nodes.position(i), n)?;
            // Duplicate positions may tie with the node itself.
            if let Some(k) = s.iter().position(|&j| j == i) {
                s[..=k].rotate_right(1);
            } else {
                s.pop();
                s.insert(0, i);
            }
            if let Some(g) = nodes.ghost_of(i) {
                if n >= 2 && !s.contains(&g) {
                    s[n - 1] = g;
                }
            }
            Ok(s)
        })
        .collect()
}

/// The assembled linear system `A u = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Node whose equation each row holds: the node itself, or the parent
    /// boundary node for rows in the ghost block.
    pub row_node: Vec<usize>,
}

impl SparseSystem {
    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    pub fn write_triplets<W: Write>(&self, w: W) -> io::Result<()> {
        self.matrix.write_triplets(w)
    }
}

/// Builds the global system. Interior and ghost-block rows hold the
/// Laplacian, Dirichlet rows the identity, Neumann rows the normal
/// derivative.
pub fn assemble(
    nodes: &NodeSet,
    weights: &WeightStore,
    problem: &impl PoissonProblem,
) -> Result<SparseSystem, DiscretizeError> {
    if problem.dim() != nodes.dim() {
        return Err(DiscretizeError::DimensionMismatch { problem: problem.dim(), nodes: nodes.dim() });
    }
    let total = nodes.len();
    // (entries, right-hand side, node) per row.
    type Row = (Vec<(usize, f64)>, f64, usize);
    let rows: Vec<Row> = (0..total)
        .into_par_iter()
        .map(|row| {
            let role = nodes.role(row);
            let node = match role {
                Role::Ghost => nodes.ghost_parent(row).expect("ghost block is paired"),
                _ => row,
            };
            let x = nodes.position(node);
            let missing = |what| DiscretizeError::MissingWeights { node, role: nodes.role(node), what };
            match role {
                Role::Interior | Role::Ghost => {
                    let set = weights.get(node).ok_or_else(|| missing("laplacian"))?;
                    let entries = set.stencil.iter().copied().zip(set.laplacian.iter().copied()).collect();
                    Ok((entries, problem.source(x), node))
                }
                Role::Dirichlet => Ok((vec![(row, 1.0)], problem.dirichlet(x), node)),
                Role::Neumann => {
                    let set = weights.get(node).ok_or_else(|| missing("gradient"))?;
                    let grad = set.gradient.as_ref().ok_or_else(|| missing("gradient"))?;
                    let normal = nodes.normal(node).ok_or(DiscretizeError::MissingNormal(node))?;
                    let entries = set
                        .stencil
                        .iter()
                        .enumerate()
                        .map(|(k, &j)| (j, normal.iter().zip(grad).map(|(nj, w)| nj * w[k]).sum()))
                        .collect();
                    let g = problem.gradient(x);
                    let value = normal.iter().zip(&g).map(|(a, b)| a * b).sum();
                    Ok((entries, value, node))
                }
            }
        })
        .collect::<Result<_, DiscretizeError>>()?;

    let mut entries = Vec::with_capacity(total);
    let mut rhs = Vec::with_capacity(total);
    let mut row_node = Vec::with_capacity(total);
    for (e, b, n) in rows {
        entries.push(e);
        rhs.push(b);
        row_node.push(n);
    }
    Ok(SparseSystem { matrix: CsrMatrix::from_rows(total, entries), rhs, row_node })
}

/// Upper bound on stored entries: `n(N_i + N_n + N_g) + N_d`.
pub fn nnz_bound(nodes: &NodeSet, n: usize) -> usize {
    let c = nodes.counts();
    n * (c.interior + c.neumann + c.ghost) + c.dirichlet
}
