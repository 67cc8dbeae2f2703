use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::vocab::{IngredientId, Vocabulary};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recipe {
    pub recipe_id: String,
    pub title: String,
    /// Sorted and duplicate-free.
    pub ingredients: Vec<IngredientId>,
    pub split: Split,
    /// Kept verbatim; nothing downstream reads it.
    pub instructions: Vec<String>,
    pub title_embedding: Option<Vec<f64>>,
}

impl Recipe {
    pub fn new(
        recipe_id: impl Into<String>,
        ingredients: impl IntoIterator<Item = IngredientId>,
        split: Split,
    ) -> Self {
        let set: BTreeSet<IngredientId> = ingredients.into_iter().collect();
        Recipe {
            recipe_id: recipe_id.into(),
            title: String::new(),
            ingredients: set.into_iter().collect(),
            split,
            instructions: Vec::new(),
            title_embedding: None,
        }
    }

    pub fn contains(&self, id: IngredientId) -> bool {
        self.ingredients.binary_search(&id).is_ok()
    }
}

#[derive(Debug, Deserialize)]
struct RecipeLine {
    recipe_id: String,
    #[serde(default)]
    title: String,
    ingredients: Vec<String>,
    split: String,
    #[serde(default)]
    instructions: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RecipeLoadStats {
    pub lines: usize,
    pub unresolved_ingredients: usize,
    pub dropped_empty_recipes: usize,
    pub duplicate_ids: usize,
}

/// Recipes indexed by id; immutable after loading.
#[derive(Debug, Clone, Default)]
pub struct RecipeStore {
    recipes: Vec<Recipe>,
    by_id: HashMap<String, usize>,
    pub stats: RecipeLoadStats,
}

impl RecipeStore {
    pub fn load(path: &Path, vocab: &Vocabulary) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut store = RecipeStore::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let lineno = i + 1;
            store.stats.lines += 1;
            let raw: RecipeLine = serde_json::from_str(line)
                .map_err(|e| Error::format(path, Some(lineno), e.to_string()))?;
            let split: Split = raw
                .split
                .parse()
                .map_err(|m: String| Error::format(path, Some(lineno), m))?;
            let mut ids = BTreeSet::new();
            for name in &raw.ingredients {
                match vocab.resolve(name) {
                    Some(id) => {
                        ids.insert(id);
                    }
                    None => store.stats.unresolved_ingredients += 1,
                }
            }
            if ids.is_empty() {
                store.stats.dropped_empty_recipes += 1;
                continue;
            }
            let recipe = Recipe {
                recipe_id: raw.recipe_id,
                title: raw.title,
                ingredients: ids.into_iter().collect(),
                split,
                instructions: raw.instructions,
                title_embedding: None,
            };
            if store.by_id.contains_key(&recipe.recipe_id) {
                store.stats.duplicate_ids += 1;
                continue;
            }
            store.push(recipe);
        }
        log::info!(
            "loaded {} recipes from {} ({} unresolved ingredient mentions, {} empty recipes dropped)",
            store.len(),
            path.display(),
            store.stats.unresolved_ingredients,
            store.stats.dropped_empty_recipes
        );
        Ok(store)
    }

    pub fn from_recipes(recipes: impl IntoIterator<Item = Recipe>) -> Result<Self> {
        let mut store = RecipeStore::default();
        for r in recipes {
            if r.ingredients.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "recipe {} has no ingredients",
                    r.recipe_id
                )));
            }
            if store.by_id.contains_key(&r.recipe_id) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate recipe id {}",
                    r.recipe_id
                )));
            }
            store.push(r);
        }
        Ok(store)
    }

    fn push(&mut self, recipe: Recipe) {
        self.by_id.insert(recipe.recipe_id.clone(), self.recipes.len());
        self.recipes.push(recipe);
    }

    pub fn len(&self) -> usize {
        self.recipes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recipes.is_empty()
    }

    pub fn get(&self, index: usize) -> &Recipe {
        &self.recipes[index]
    }

    pub fn index_of(&self, recipe_id: &str) -> Option<usize> {
        self.by_id.get(recipe_id).copied()
    }

    pub fn by_id(&self, recipe_id: &str) -> Option<&Recipe> {
        self.index_of(recipe_id).map(|i| &self.recipes[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Recipe> {
        self.recipes.iter()
    }

    /// Attaches title embeddings: `matrix` rows are looked up through a JSON-lines
    /// sidecar of `{"recipe_id": str, "row": int}`. Returns how many recipes got one.
    pub fn attach_title_embeddings(&mut self, matrix_path: &Path, index_path: &Path) -> Result<usize> {
        let matrix = Matrix::read_subm(matrix_path)?;
        let text = fs::read_to_string(index_path).map_err(|e| Error::io(index_path, e))?;

        #[derive(Deserialize)]
        struct Row {
            recipe_id: String,
            row: usize,
        }

        let mut attached = 0;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Row = serde_json::from_str(line)
                .map_err(|e| Error::format(index_path, Some(i + 1), e.to_string()))?;
            if row.row >= matrix.rows() {
                return Err(Error::format(
                    index_path,
                    Some(i + 1),
                    format!("row {} out of range for {} rows", row.row, matrix.rows()),
                ));
            }
            if let Some(&idx) = self.by_id.get(&row.recipe_id) {
                self.recipes[idx].title_embedding = Some(matrix.row(row.row).to_vec());
                attached += 1;
            }
        }
        Ok(attached)
    }
}
