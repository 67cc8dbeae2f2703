use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense index of a canonical ingredient. Ingredient ids double as graph node ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IngredientId(pub u32);

impl IngredientId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_index(index: usize) -> Self {
        IngredientId(u32::try_from(index).expect("ingredient index exceeds u32"))
    }
}

impl fmt::Display for IngredientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Lowercases, trims and joins whitespace-separated words with `_`.
pub fn normalize_name(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join("_")
}

/// Canonical ingredient names with their alias table.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    names: Vec<String>,
    aliases: HashMap<String, IngredientId>,
}

impl Vocabulary {
    /// Reads a `canonical_name<TAB>alias` TSV. Ids follow the first appearance of
    /// each canonical name; the rows of one canonical must be contiguous.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|(line, msg)| Error::format(path, line, msg))
    }

    fn parse(text: &str) -> std::result::Result<Self, (Option<usize>, String)> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            let canonical = cols.next().unwrap_or_default();
            let alias = cols
                .next()
                .ok_or_else(|| (Some(lineno), "expected two tab-separated columns".to_string()))?;
            if cols.next().is_some() {
                return Err((Some(lineno), "expected two tab-separated columns".into()));
            }
            if lineno == 1 && canonical == "canonical_name" && alias == "alias" {
                continue;
            }
            rows.push((lineno, canonical, alias));
        }
        if rows.is_empty() {
            return Err((None, "vocabulary file is empty".into()));
        }

        let mut vocab = Vocabulary::default();
        let mut current: Option<IngredientId> = None;
        for (lineno, canonical, alias) in rows {
            let canonical = normalize_name(canonical);
            let alias = normalize_name(alias);
            if canonical.is_empty() || alias.is_empty() {
                return Err((Some(lineno), "empty name".into()));
            }
            let id = match current {
                Some(id) if vocab.names[id.index()] == canonical => id,
                _ => {
                    if vocab.names.contains(&canonical) {
                        return Err((
                            Some(lineno),
                            format!("canonical name {canonical:?} reappears after other entries"),
                        ));
                    }
                    let id = vocab.push_canonical(&canonical).map_err(|m| (Some(lineno), m))?;
                    current = Some(id);
                    id
                }
            };
            vocab.insert_alias(&alias, id).map_err(|m| (Some(lineno), m))?;
        }
        vocab.add_folded_forms();
        Ok(vocab)
    }

    /// Builds a vocabulary from canonical names only (no extra aliases).
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut vocab = Vocabulary::default();
        for n in names {
            let canonical = normalize_name(n.as_ref());
            if canonical.is_empty() {
                return Err(Error::InvalidArgument("empty ingredient name".into()));
            }
            if vocab.aliases.get(&canonical).is_some_and(|id| vocab.names[id.index()] == canonical) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate canonical name {canonical:?}"
                )));
            }
            vocab.push_canonical(&canonical).map_err(Error::InvalidArgument)?;
        }
        vocab.add_folded_forms();
        Ok(vocab)
    }

    fn push_canonical(&mut self, canonical: &str) -> std::result::Result<IngredientId, String> {
        let id = IngredientId::from_index(self.names.len());
        self.names.push(canonical.to_string());
        // The canonical form always resolves to itself, even if an earlier alias claimed it.
        if let Some(prev) = self.aliases.insert(canonical.to_string(), id) {
            return Err(format!(
                "canonical name {canonical:?} was already an alias of {:?}",
                self.names[prev.index()]
            ));
        }
        Ok(id)
    }

    fn insert_alias(&mut self, alias: &str, id: IngredientId) -> std::result::Result<(), String> {
        match self.aliases.get(alias) {
            Some(&existing) if existing != id => Err(format!(
                "alias {alias:?} maps to both {:?} and {:?}",
                self.names[existing.index()],
                self.names[id.index()]
            )),
            Some(_) => Ok(()),
            None => {
                self.aliases.insert(alias.to_string(), id);
                Ok(())
            }
        }
    }

    /// Registers the singular forms of plural canonical names, unless taken.
    fn add_folded_forms(&mut self) {
        for (i, name) in self.names.iter().enumerate() {
            for folded in plural_folds(name) {
                self.aliases
                    .entry(folded)
                    .or_insert(IngredientId::from_index(i));
            }
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn alias_count(&self) -> usize {
        self.aliases.len()
    }

    pub fn name(&self, id: IngredientId) -> &str {
        &self.names[id.index()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ids(&self) -> impl Iterator<Item = IngredientId> {
        (0..self.names.len()).map(IngredientId::from_index)
    }

    /// Exact alias lookup on an already-normalized key.
    pub fn lookup_normalized(&self, key: &str) -> Option<IngredientId> {
        self.aliases.get(key).copied()
    }

    /// Normalizes `raw` and looks it up, falling back to plural folding
    /// (`-es` stripped first, then `-s`).
    pub fn resolve(&self, raw: &str) -> Option<IngredientId> {
        let key = normalize_name(raw);
        if key.is_empty() {
            return None;
        }
        if let Some(id) = self.lookup_normalized(&key) {
            return Some(id);
        }
        plural_folds(&key)
            .into_iter()
            .find_map(|k| self.lookup_normalized(&k))
    }
}

fn plural_folds(key: &str) -> Vec<String> {
    let mut out = Vec::with_capacity(2);
    if let Some(stem) = key.strip_suffix("es") {
        if !stem.is_empty() && !stem.ends_with('_') {
            out.push(stem.to_string());
        }
    }
    if let Some(stem) = key.strip_suffix('s') {
        if !stem.is_empty() && !stem.ends_with('_') && !stem.ends_with('s') {
            out.push(stem.to_string());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Vocabulary {
        Vocabulary::parse(text).unwrap()
    }

    #[test]
    fn single_row_identity() {
        let v = parse("olive\tolive\n");
        assert_eq!(v.len(), 1);
        assert_eq!(v.resolve("olive"), Some(IngredientId(0)));
    }

    #[test]
    fn three_canonicals_two_aliases() {
        let v = parse("butter\tbutter\nbutter\tunsalted butter\nhoney\thoney\nmilk\tmilk\nmilk\twhole milk\n");
        assert_eq!(v.len(), 3);
        assert_eq!(v.alias_count(), 5);
        assert_eq!(v.resolve("Unsalted  Butter"), Some(IngredientId(0)));
        assert_eq!(v.resolve("whole milk"), Some(IngredientId(2)));
    }

    #[test]
    fn header_is_skipped() {
        let v = parse("canonical_name\talias\nsalt\tsalt\n");
        assert_eq!(v.names(), &["salt".to_string()]);
    }

    #[test]
    fn case_and_plural_folding() {
        let v = parse("olive\tolive\ntomato\ttomato\nbrown_sugar\tbrown_sugar\n");
        assert_eq!(v.resolve("Olive"), v.resolve("olive"));
        assert_eq!(v.resolve("olives"), Some(IngredientId(0)));
        assert_eq!(v.resolve("tomatoes"), Some(IngredientId(1)));
        assert_eq!(v.resolve("Brown Sugars"), Some(IngredientId(2)));
        assert_eq!(v.resolve("xyzzy"), None);
        assert_eq!(v.resolve("   "), None);
    }

    #[test]
    fn plural_canonical_gets_singular_alias() {
        let v = parse("peas\tpeas\n");
        assert_eq!(v.alias_count(), 2);
        assert_eq!(v.resolve("pea"), Some(IngredientId(0)));
    }

    #[test]
    fn empty_file_is_error() {
        assert!(Vocabulary::parse("").is_err());
        assert!(Vocabulary::parse("\n\n").is_err());
    }

    #[test]
    fn non_contiguous_canonical_is_error() {
        let err = Vocabulary::parse("a\ta\nb\tb\na\tx\n").unwrap_err();
        assert_eq!(err.0, Some(3));
    }

    #[test]
    fn conflicting_alias_is_error() {
        assert!(Vocabulary::parse("a\ta\na\tz\nb\tb\nb\tz\n").is_err());
        assert!(Vocabulary::parse("a\tb\nb\tb\n").is_err());
    }

    #[test]
    fn missing_column_is_error() {
        assert!(Vocabulary::parse("butter\n").is_err());
    }

    #[test]
    fn canonical_names_resolve_to_themselves() {
        let v = parse("a\ta\nb\tb\nb\tbee\ncheeses\tcheeses\n");
        for id in v.ids() {
            assert_eq!(v.resolve(v.name(id)), Some(id));
        }
    }
}
