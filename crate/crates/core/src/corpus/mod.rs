//! Ingredient vocabulary, recipes and substitution tuples.

mod dataset;
mod recipes;
mod vocab;

pub use dataset::{
    label_strata, Stratum, SubstitutionDataset, SubstitutionLoadStats, SubstitutionSample,
};
pub use recipes::{Recipe, RecipeLoadStats, RecipeStore, Split};
pub use vocab::{normalize_name, IngredientId, Vocabulary};
