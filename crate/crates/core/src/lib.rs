//! Context-aware ingredient substitution.
//!
//! The crate covers the whole benchmark loop:
//!
//! - [`corpus`]: vocabulary, recipes and substitution tuples, with ID/OOD strata
//! - [`miner`]: rule-based extraction of substitution tuples from recipe comments
//! - [`graph`]: the ingredient/compound relation graph in CSR form
//! - [`numerics`]: matrices, a reverse-mode tape, Adam, dropout and gradient checking
//! - [`model`]: the graph-based substitution model (GIN encoder, context encoder,
//!   pairwise decoder) with contrastive training and early stopping
//! - [`baselines`]: frequency/lookup rankers and embedding nearest-neighbour ranking
//! - [`eval`]: filtered MRR and Hit@k with stratified reporting

pub mod baselines;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod graph;
pub mod miner;
pub mod model;
pub mod numerics;

pub use error::{Error, Result};
