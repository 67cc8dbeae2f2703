//! Ingredient/compound relation graph.
//!
//! Node ids `0..num_ingredients` are ingredient ids; compound nodes follow.
//! The undirected graph is stored symmetrically in CSR form with neighbours
//! sorted ascending.

mod npmi;
pub mod synthetic;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub use npmi::{npmi, npmi_weights};

/// Largest graph `to_dense` will materialize.
pub const DENSE_NODE_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Ingredient,
    Compound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlavorGraph {
    num_ingredients: usize,
    compound_names: Vec<String>,
    row_offsets: Vec<usize>,
    column_indices: Vec<usize>,
    edge_weights: Vec<f64>,
}

impl FlavorGraph {
    /// Builds the graph from undirected edges `(u, v, weight)`.
    pub fn from_edges(
        num_ingredients: usize,
        num_compounds: usize,
        edges: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let names = (0..num_compounds).map(|i| format!("compound_{i}")).collect();
        Self::build(num_ingredients, names, edges)
    }

    fn build(
        num_ingredients: usize,
        compound_names: Vec<String>,
        edges: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let n = num_ingredients + compound_names.len();
        let mut adjacency: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u}, {v}) outside {n} nodes"
                )));
            }
            if u == v {
                return Err(Error::InvalidArgument(format!("self-loop on node {u}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u}, {v}) has non-positive weight {w}"
                )));
            }
            if adjacency[u].insert(v, w).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate edge ({u}, {v})")));
            }
            adjacency[v].insert(u, w);
        }

        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut column_indices = Vec::new();
        let mut edge_weights = Vec::new();
        row_offsets.push(0);
        for row in adjacency {
            for (v, w) in row {
                column_indices.push(v);
                edge_weights.push(w);
            }
            row_offsets.push(column_indices.len());
        }
        Ok(FlavorGraph {
            num_ingredients,
            compound_names,
            row_offsets,
            column_indices,
            edge_weights,
        })
    }

    /// Loads the edge CSV (`node_a,node_b,edge_kind,weight`, header required).
    ///
    /// `ingr-ingr` rows name two vocabulary ingredients. `ingr-comp` rows name an
    /// ingredient and a compound; compounds get ids after the vocabulary in order
    /// of first appearance, and a blank weight means 1.0.
    pub fn load(path: &Path, vocab: &Vocabulary) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            node_a: String,
            node_b: String,
            edge_kind: String,
            weight: Option<f64>,
        }

        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        for col in ["node_a", "node_b", "edge_kind", "weight"] {
            if !headers.iter().any(|h| h == col) {
                return Err(Error::format(path, Some(1), format!("missing column {col:?}")));
            }
        }

        let mut compounds: HashMap<String, usize> = HashMap::new();
        let mut compound_names = Vec::new();
        let mut edges = Vec::new();
        let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
        for (i, rec) in reader.deserialize::<Row>().enumerate() {
            let line = i + 2;
            let row = rec.map_err(|e| Error::format(path, Some(line), e.to_string()))?;
            let resolve = |name: &str| {
                vocab.resolve(name).ok_or_else(|| {
                    Error::format(path, Some(line), format!("unknown ingredient {name:?}"))
                })
            };
            let a = resolve(&row.node_a)?.index();
            let (b, weight) = match row.edge_kind.as_str() {
                "ingr-ingr" => {
                    let w = row.weight.ok_or_else(|| {
                        Error::format(path, Some(line), "ingr-ingr edge needs a weight")
                    })?;
                    (resolve(&row.node_b)?.index(), w)
                }
                "ingr-comp" => {
                    let next = vocab.len() + compound_names.len();
                    let id = *compounds.entry(row.node_b.clone()).or_insert_with(|| {
                        compound_names.push(row.node_b.clone());
                        next
                    });
                    (id, row.weight.unwrap_or(1.0))
                }
                other => {
                    return Err(Error::format(
                        path,
                        Some(line),
                        format!("unknown edge kind {other:?}"),
                    ))
                }
            };
            if a == b {
                return Err(Error::format(path, Some(line), "self-loop"));
            }
            if !(weight > 0.0 && weight.is_finite()) {
                return Err(Error::format(
                    path,
                    Some(line),
                    format!("weight must be positive, got {weight}"),
                ));
            }
            if let Some(prev) = seen.insert((a.min(b), a.max(b)), line) {
                return Err(Error::format(
                    path,
                    Some(line),
                    format!("duplicate undirected edge (first on line {prev})"),
                ));
            }
            edges.push((a, b, weight));
        }
        let g = Self::build(vocab.len(), compound_names, &edges)?;
        log::info!(
            "loaded graph from {}: {} ingredients, {} compounds, {} undirected edges",
            path.display(),
            g.num_ingredients,
            g.num_compounds(),
            g.edge_slots() / 2
        );
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.row_offsets.len() - 1
    }

    pub fn num_ingredients(&self) -> usize {
        self.num_ingredients
    }

    pub fn num_compounds(&self) -> usize {
        self.compound_names.len()
    }

    pub fn compound_name(&self, node: usize) -> Option<&str> {
        node.checked_sub(self.num_ingredients)
            .and_then(|i| self.compound_names.get(i))
            .map(String::as_str)
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        if node < self.num_ingredients {
            NodeKind::Ingredient
        } else {
            NodeKind::Compound
        }
    }

    /// Number of directed edge slots (twice the undirected edge count).
    pub fn edge_slots(&self) -> usize {
        self.column_indices.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn column_indices(&self) -> &[usize] {
        &self.column_indices
    }

    pub fn edge_weights(&self) -> &[f64] {
        &self.edge_weights
    }

    /// Incident edges of `v` as `(neighbor, weight)`, ascending by neighbor.
    pub fn neighbors(&self, v: usize) -> Result<impl Iterator<Item = (usize, f64)> + '_> {
        if v >= self.node_count() {
            return Err(Error::InvalidArgument(format!(
                "node {v} out of range for {} nodes",
                self.node_count()
            )));
        }
        Ok(self.row(v))
    }

    fn row(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_offsets[v]..self.row_offsets[v + 1];
        self.column_indices[span.clone()]
            .iter()
            .copied()
            .zip(self.edge_weights[span].iter().copied())
    }

    pub fn weighted_degree(&self, v: usize) -> f64 {
        self.row(v).map(|(_, w)| w).sum()
    }

    pub fn to_dense(&self) -> Result<Matrix> {
        let n = self.node_count();
        if n > DENSE_NODE_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "{n} nodes exceeds the dense limit of {DENSE_NODE_LIMIT}"
            )));
        }
        let mut a = Matrix::zeros(n, n);
        for u in 0..n {
            for (v, w) in self.row(u) {
                a[(u, v)] = w;
            }
        }
        Ok(a)
    }

    /// Row `v` of the result is `sum over neighbors u of w(v,u) * x[u]`.
    pub fn aggregate(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.node_count() {
            return Err(Error::Shape(format!(
                "feature matrix has {} rows, graph has {} nodes",
                x.rows(),
                self.node_count()
            )));
        }
        let mut out = Matrix::zeros(x.rows(), x.cols());
        self.aggregate_into(x, &mut out);
        Ok(out)
    }

    /// Accumulates `A x` into `out`.
    pub(crate) fn aggregate_into(&self, x: &Matrix, out: &mut Matrix) {
        for v in 0..self.node_count() {
            for (u, w) in self.row(v) {
                let src = x.row(u);
                for (o, s) in out.row_mut(v).iter_mut().zip(src) {
                    *o += w * s;
                }
            }
        }
    }

    /// The same graph with node ids relabeled: old node `v` becomes `perm[v]`.
    /// `perm` must map ingredients to ingredients and compounds to compounds.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.node_count();
        if perm.len() != n {
            return Err(Error::InvalidArgument("permutation length mismatch".into()));
        }
        let mut inverse = vec![usize::MAX; n];
        for (old, &new) in perm.iter().enumerate() {
            if new >= n || inverse[new] != usize::MAX {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
            if self.kind(old) != self.kind(new) {
                return Err(Error::InvalidArgument(
                    "permutation must preserve node kinds".into(),
                ));
            }
            inverse[new] = old;
        }
        let mut edges = Vec::with_capacity(self.edge_slots() / 2);
        for u in 0..n {
            for (v, w) in self.row(u) {
                if u < v {
                    edges.push((perm[u], perm[v], w));
                }
            }
        }
        let names = (0..self.num_compounds())
            .map(|i| self.compound_names[inverse[self.num_ingredients + i] - self.num_ingredients].clone())
            .collect();
        Self::build(self.num_ingredients, names, &edges)
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, line, format!("{other:?}")),
    }
}
