//! Deterministic f64 numeric kernel: matrices, a reverse-mode tape, Adam,
//! dropout and finite-difference gradient checking.

mod adam;
mod gradcheck;
mod matrix;
mod param;
mod tape;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, RELATIVE_ERROR_FLOOR};
pub use matrix::Matrix;
pub use param::{ParamId, ParamStore, Parameter};
pub use tape::{contrastive_loss, dropout, dropout_mask, log_sum_exp, Tape, Var};

use crate::error::Result;
use crate::graph::FlavorGraph;

/// `A x` for the graph's weighted adjacency `A`.
pub fn sparse_aggregate(graph: &FlavorGraph, x: &Matrix) -> Result<Matrix> {
    graph.aggregate(x)
}
