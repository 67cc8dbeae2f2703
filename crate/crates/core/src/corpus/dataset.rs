use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::recipes::{RecipeStore, Split};
use super::vocab::{IngredientId, Vocabulary};
use crate::error::{Error, Result};

/// A directional substitution tuple `(source -> target)` observed in one recipe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubstitutionSample {
    pub source: IngredientId,
    pub target: IngredientId,
    pub recipe_id: String,
    /// Index into the [`RecipeStore`] the sample was loaded against.
    pub recipe: usize,
    pub split: Split,
}

/// Whether an evaluation tuple was seen (in any recipe) during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stratum {
    #[serde(rename = "ID")]
    InDistribution,
    #[serde(rename = "OOD")]
    OutOfDistribution,
}

impl Stratum {
    pub const ALL: [Stratum; 2] = [Stratum::InDistribution, Stratum::OutOfDistribution];

    pub fn label(self) -> &'static str {
        match self {
            Stratum::InDistribution => "ID",
            Stratum::OutOfDistribution => "OOD",
        }
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SubstitutionLoadStats {
    pub lines: usize,
    pub unknown_recipe: usize,
    pub unresolved_source: usize,
    pub unresolved_target: usize,
    pub source_equals_target: usize,
    pub source_not_in_recipe: usize,
}

impl SubstitutionLoadStats {
    pub fn dropped(&self) -> usize {
        self.unknown_recipe
            + self.unresolved_source
            + self.unresolved_target
            + self.source_equals_target
            + self.source_not_in_recipe
    }
}

#[derive(Debug, Deserialize)]
struct SubstitutionLine {
    recipe_id: String,
    source: String,
    target: String,
}

/// Substitution tuples grouped by split.
#[derive(Debug, Clone, Default)]
pub struct SubstitutionDataset {
    pub train: Vec<SubstitutionSample>,
    pub val: Vec<SubstitutionSample>,
    pub test: Vec<SubstitutionSample>,
    pub stats: SubstitutionLoadStats,
}

impl SubstitutionDataset {
    /// Loads `{"recipe_id", "source", "target"}` lines. Each sample inherits its
    /// recipe's split; invalid samples are dropped and counted.
    pub fn load(path: &Path, recipes: &RecipeStore, vocab: &Vocabulary) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut ds = SubstitutionDataset::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            ds.stats.lines += 1;
            let raw: SubstitutionLine = serde_json::from_str(line)
                .map_err(|e| Error::format(path, Some(i + 1), e.to_string()))?;
            let Some(recipe_idx) = recipes.index_of(&raw.recipe_id) else {
                ds.stats.unknown_recipe += 1;
                continue;
            };
            let Some(source) = vocab.resolve(&raw.source) else {
                ds.stats.unresolved_source += 1;
                continue;
            };
            let Some(target) = vocab.resolve(&raw.target) else {
                ds.stats.unresolved_target += 1;
                continue;
            };
            if source == target {
                ds.stats.source_equals_target += 1;
                continue;
            }
            let recipe = recipes.get(recipe_idx);
            if !recipe.contains(source) {
                ds.stats.source_not_in_recipe += 1;
                continue;
            }
            ds.push(SubstitutionSample {
                source,
                target,
                recipe_id: raw.recipe_id,
                recipe: recipe_idx,
                split: recipe.split,
            });
        }
        let (tr, va, te) = ds.counts();
        log::info!(
            "loaded substitutions from {}: train {tr}, val {va}, test {te}, dropped {}",
            path.display(),
            ds.stats.dropped()
        );
        Ok(ds)
    }

    pub fn push(&mut self, sample: SubstitutionSample) {
        match sample.split {
            Split::Train => self.train.push(sample),
            Split::Val => self.val.push(sample),
            Split::Test => self.test.push(sample),
        }
    }

    pub fn split(&self, split: Split) -> &[SubstitutionSample] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    /// `(train, val, test)` sample counts.
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }

    /// ID/OOD labels for every sample of an evaluation split, in sample order.
    pub fn stratify(&self, split: Split) -> Vec<Stratum> {
        label_strata(&self.train, self.split(split))
    }
}

/// A sample is in-distribution iff its directional `(source, target)` pair occurs
/// in at least one training sample, regardless of recipe.
pub fn label_strata(train: &[SubstitutionSample], eval: &[SubstitutionSample]) -> Vec<Stratum> {
    let seen: HashSet<(IngredientId, IngredientId)> =
        train.iter().map(|s| (s.source, s.target)).collect();
    eval.iter()
        .map(|s| {
            if seen.contains(&(s.source, s.target)) {
                Stratum::InDistribution
            } else {
                Stratum::OutOfDistribution
            }
        })
        .collect()
}
