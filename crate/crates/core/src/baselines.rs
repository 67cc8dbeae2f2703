//! Statistical rankers fitted on the training tuples, and nearest-neighbour
//! ranking over externally trained ingredient embeddings.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_name, IngredientId, SubstitutionSample, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{QueryContext, Scorer};
use crate::numerics::Matrix;

/// Target and (source, target) counts over the training tuples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTables {
    pub vocab_size: usize,
    pub target_counts: BTreeMap<IngredientId, u64>,
    pub pair_counts: BTreeMap<(IngredientId, IngredientId), u64>,
    by_source: HashMap<IngredientId, Vec<(IngredientId, u64)>>,
}

pub fn fit_tables(train: &[SubstitutionSample], vocab_size: usize) -> Result<FrequencyTables> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("cannot fit baselines on an empty training split".into()));
    }
    let mut target_counts = BTreeMap::new();
    let mut pair_counts = BTreeMap::new();
    for s in train {
        if s.source.index() >= vocab_size || s.target.index() >= vocab_size {
            return Err(Error::InvalidArgument(format!(
                "tuple ({}, {}) outside a vocabulary of {vocab_size}",
                s.source, s.target
            )));
        }
        *target_counts.entry(s.target).or_insert(0) += 1;
        *pair_counts.entry((s.source, s.target)).or_insert(0) += 1;
    }
    let mut by_source: HashMap<IngredientId, Vec<(IngredientId, u64)>> = HashMap::new();
    for (&(s, t), &c) in &pair_counts {
        by_source.entry(s).or_default().push((t, c));
    }
    Ok(FrequencyTables {
        vocab_size,
        target_counts,
        pair_counts,
        by_source,
    })
}

impl FrequencyTables {
    pub fn pair_count(&self, source: IngredientId, target: IngredientId) -> u64 {
        self.pair_counts.get(&(source, target)).copied().unwrap_or(0)
    }

    pub fn target_count(&self, target: IngredientId) -> u64 {
        self.target_counts.get(&target).copied().unwrap_or(0)
    }

    /// Most frequent training target; ties go to the smallest id.
    pub fn mode(&self) -> IngredientId {
        let mut best = None;
        for (&id, &c) in &self.target_counts {
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((id, c));
            }
        }
        best.expect("tables are never empty").0
    }

    fn targets_of(&self, source: IngredientId) -> &[(IngredientId, u64)] {
        self.by_source.get(&source).map_or(&[], Vec::as_slice)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Random,
    Mode,
    Freq,
    Lt,
    LtFreq,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 5] = [
        BaselineKind::Random,
        BaselineKind::Mode,
        BaselineKind::Freq,
        BaselineKind::Lt,
        BaselineKind::LtFreq,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::Random => "random",
            BaselineKind::Mode => "mode",
            BaselineKind::Freq => "freq",
            BaselineKind::Lt => "lt",
            BaselineKind::LtFreq => "lt+freq",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(BaselineKind::Random),
            "mode" => Ok(BaselineKind::Mode),
            "freq" => Ok(BaselineKind::Freq),
            "lt" => Ok(BaselineKind::Lt),
            "lt+freq" | "lt_freq" | "ltfreq" => Ok(BaselineKind::LtFreq),
            other => Err(Error::InvalidArgument(format!("unknown baseline {other:?}"))),
        }
    }
}

/// Uniform random scores; each query gets its own stream of the seeded generator,
/// so scores do not depend on evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomRanker {
    pub vocab_size: usize,
    pub seed: u64,
}

impl RandomRanker {
    pub fn rank(&self, query_index: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(query_index as u64);
        (0..self.vocab_size).map(|_| rng.random::<f64>()).collect()
    }
}

impl Scorer for RandomRanker {
    fn score_candidates(&self, query: &QueryContext<'_>) -> Result<Vec<f64>> {
        Ok(self.rank(query.index))
    }
}

/// Mode, Freq, LT or LT+Freq over fitted tables.
#[derive(Debug, Clone, Copy)]
pub struct TableRanker<'t> {
    pub kind: BaselineKind,
    pub tables: &'t FrequencyTables,
}

impl<'t> TableRanker<'t> {
    pub fn new(kind: BaselineKind, tables: &'t FrequencyTables) -> Result<Self> {
        if kind == BaselineKind::Random {
            return Err(Error::InvalidArgument("random is not a table baseline".into()));
        }
        Ok(TableRanker { kind, tables })
    }

    /// Score per ingredient id for `source` (higher is better).
    pub fn rank(&self, source: IngredientId) -> Vec<f64> {
        let t = self.tables;
        let mut scores = vec![0.0; t.vocab_size];
        match self.kind {
            BaselineKind::Mode => scores[t.mode().index()] = 1.0,
            BaselineKind::Freq => {
                for (&id, &c) in &t.target_counts {
                    scores[id.index()] = c as f64;
                }
            }
            BaselineKind::Lt => {
                for &(id, _) in t.targets_of(source) {
                    scores[id.index()] = 1.0;
                }
            }
            BaselineKind::LtFreq => {
                for &(id, c) in t.targets_of(source) {
                    scores[id.index()] = c as f64;
                }
            }
            BaselineKind::Random => unreachable!("rejected in new"),
        }
        scores
    }
}

impl Scorer for TableRanker<'_> {
    fn score_candidates(&self, query: &QueryContext<'_>) -> Result<Vec<f64>> {
        Ok(self.rank(query.source))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cosine,
    Euclidean,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::InvalidArgument(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EmbeddingLoadStats {
    /// Sidecar names that did not resolve to a vocabulary ingredient.
    pub unknown_names: usize,
    /// Vocabulary ingredients with no row; they get a zero vector.
    pub missing_ingredients: usize,
}

/// Ingredient vectors aligned with the vocabulary (row `i` is ingredient `i`).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub vectors: Matrix,
    pub metric: Metric,
    norms: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Sidecar {
    RowNames(Vec<String>),
    NameRows(BTreeMap<String, usize>),
}

impl EmbeddingMatrix {
    pub fn new(vectors: Matrix, metric: Metric) -> Result<Self> {
        if !vectors.is_finite() {
            return Err(Error::InvalidArgument("embedding matrix has non-finite entries".into()));
        }
        let norms = (0..vectors.rows())
            .map(|r| vectors.row(r).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        Ok(EmbeddingMatrix { vectors, metric, norms })
    }

    /// Reads a matrix file plus a sidecar naming its rows, either a JSON array
    /// (row index to name) or an object (name to row index), and realigns the
    /// rows to `vocab`.
    pub fn load(
        matrix_path: &Path,
        sidecar_path: &Path,
        vocab: &Vocabulary,
        metric: Metric,
    ) -> Result<(Self, EmbeddingLoadStats)> {
        let raw = Matrix::read_subm(matrix_path)?;
        let text = fs::read_to_string(sidecar_path).map_err(|e| Error::io(sidecar_path, e))?;
        let sidecar: Sidecar =
            serde_json::from_str(&text).map_err(|e| Error::format(sidecar_path, None, e.to_string()))?;
        let pairs: Vec<(String, usize)> = match sidecar {
            Sidecar::RowNames(names) => names.into_iter().enumerate().map(|(i, n)| (n, i)).collect(),
            Sidecar::NameRows(map) => map.into_iter().collect(),
        };

        let mut stats = EmbeddingLoadStats::default();
        let mut aligned = Matrix::zeros(vocab.len(), raw.cols());
        let mut filled = vec![false; vocab.len()];
        for (name, row) in pairs {
            if row >= raw.rows() {
                return Err(Error::format(
                    sidecar_path,
                    None,
                    format!("row {row} for {name:?} is outside the {}-row matrix", raw.rows()),
                ));
            }
            match vocab.lookup_normalized(&normalize_name(&name)) {
                Some(id) if !filled[id.index()] => {
                    aligned.row_mut(id.index()).copy_from_slice(raw.row(row));
                    filled[id.index()] = true;
                }
                Some(_) => {}
                None => stats.unknown_names += 1,
            }
        }
        stats.missing_ingredients = filled.iter().filter(|f| !**f).count();
        if stats.missing_ingredients > 0 {
            log::warn!(
                "{} vocabulary ingredients have no embedding and score as zero vectors",
                stats.missing_ingredients
            );
        }
        Ok((Self::new(aligned, metric)?, stats))
    }

    pub fn similarity(&self, a: usize, b: usize) -> f64 {
        let (x, y) = (self.vectors.row(a), self.vectors.row(b));
        match self.metric {
            Metric::Cosine => {
                let denom = self.norms[a] * self.norms[b];
                if denom == 0.0 {
                    0.0
                } else {
                    x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>() / denom
                }
            }
            Metric::Euclidean => -x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt(),
        }
    }

    /// Similarity of every ingredient to `source`.
    pub fn rank_by_embedding(&self, source: IngredientId) -> Result<Vec<f64>> {
        if source.index() >= self.vectors.rows() {
            return Err(Error::InvalidArgument(format!("no embedding row for {source}")));
        }
        Ok((0..self.vectors.rows()).map(|v| self.similarity(source.index(), v)).collect())
    }
}

impl Scorer for EmbeddingMatrix {
    fn score_candidates(&self, query: &QueryContext<'_>) -> Result<Vec<f64>> {
        self.rank_by_embedding(query.source)
    }
}
