//! Mining directional substitution tuples from recipe comments.
//!
//! A comment is split into sentences; a sentence is kept only if it contains a
//! substitution keyword, exactly two vocabulary ingredients, both near a
//! keyword, and exactly one of them in the commented recipe. That one is the
//! source, the other the target.

use std::fs;
use std::io::Write as _;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{IngredientId, Recipe, RecipeStore, Vocabulary};
use crate::error::{Error, Result};

/// Hits at this token distance or further from every keyword are rejected.
pub const DEFAULT_MAX_DISTANCE: usize = 7;

/// Longest ingredient mention tried, in tokens.
pub const MAX_WINDOW: usize = 4;

const SINGLE_KEYWORDS: &[&str] = &[
    "instead",
    "substitute",
    "substituted",
    "substitutes",
    "substituting",
    "replace",
    "replaced",
    "replaces",
    "replacing",
];

const PHRASE_KEYWORDS: &[&[&str]] = &[&["in", "place", "of"]];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub recipe_id: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngredientHit {
    pub id: IngredientId,
    pub span: (usize, usize),
}

impl IngredientHit {
    pub fn range(&self) -> Range<usize> {
        self.span.0..self.span.1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePhrase {
    pub tokens: Vec<String>,
    pub keyword_spans: Vec<Range<usize>>,
    pub ingredient_hits: Vec<IngredientHit>,
}

impl CandidatePhrase {
    pub fn new(tokens: Vec<String>, vocab: &Vocabulary) -> Self {
        let keyword_spans = find_keyword_spans(&tokens);
        let ingredient_hits = match_ingredients(&tokens, vocab);
        CandidatePhrase {
            tokens,
            keyword_spans,
            ingredient_hits,
        }
    }
}

/// The filter rule a keyword sentence failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    /// Not exactly two ingredients.
    IngredientCount,
    /// An ingredient is too far from every keyword.
    Distance,
    /// Not exactly one ingredient belongs to the recipe.
    RecipeMembership,
}

/// Sentences of lowercase tokens. Sentences end at `.`, `!`, `?`, `;` or a
/// newline; tokens are maximal alphanumeric runs.
pub fn split_sentences(text: &str) -> Vec<Vec<String>> {
    text.split(['.', '!', '?', ';', '\n'])
        .map(|s| {
            s.split(|c: char| !c.is_alphanumeric())
                .filter(|t| !t.is_empty())
                .map(str::to_lowercase)
                .collect::<Vec<_>>()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

/// Half-open token ranges of every keyword occurrence, in order.
pub fn find_keyword_spans<S: AsRef<str>>(tokens: &[S]) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    for i in 0..tokens.len() {
        if SINGLE_KEYWORDS.contains(&tokens[i].as_ref()) {
            spans.push(i..i + 1);
            continue;
        }
        for phrase in PHRASE_KEYWORDS {
            let end = i + phrase.len();
            if end <= tokens.len() && tokens[i..end].iter().zip(phrase.iter()).all(|(t, p)| t.as_ref() == *p) {
                spans.push(i..end);
            }
        }
    }
    spans
}

/// Greedy left-to-right longest match of up to [`MAX_WINDOW`] tokens against
/// the vocabulary; matched windows never overlap.
pub fn match_ingredients<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> Vec<IngredientHit> {
    let mut hits = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let longest = MAX_WINDOW.min(tokens.len() - i);
        let found = (1..=longest).rev().find_map(|len| {
            let key = tokens[i..i + len]
                .iter()
                .map(AsRef::as_ref)
                .collect::<Vec<_>>()
                .join("_");
            vocab.resolve(&key).map(|id| (id, len))
        });
        match found {
            Some((id, len)) => {
                hits.push(IngredientHit { id, span: (i, i + len) });
                i += len;
            }
            None => i += 1,
        }
    }
    hits
}

/// Smallest index gap between any token of `a` and any token of `b`.
pub fn token_distance(a: &Range<usize>, b: &Range<usize>) -> usize {
    if a.end <= b.start {
        b.start - (a.end - 1)
    } else if b.end <= a.start {
        a.start - (b.end - 1)
    } else {
        0
    }
}

/// Applies the three filter rules; `Ok((source, target))` on success.
pub fn check_phrase(
    phrase: &CandidatePhrase,
    recipe: &Recipe,
    max_distance: usize,
) -> std::result::Result<(IngredientId, IngredientId), Rejection> {
    let [a, b] = phrase.ingredient_hits.as_slice() else {
        return Err(Rejection::IngredientCount);
    };
    for hit in [a, b] {
        let nearest = phrase
            .keyword_spans
            .iter()
            .map(|k| token_distance(&hit.range(), k))
            .min()
            .unwrap_or(usize::MAX);
        if nearest >= max_distance {
            return Err(Rejection::Distance);
        }
    }
    match (recipe.contains(a.id), recipe.contains(b.id)) {
        (true, false) => Ok((a.id, b.id)),
        (false, true) => Ok((b.id, a.id)),
        _ => Err(Rejection::RecipeMembership),
    }
}

/// `(source, target)` if the phrase passes every rule with the default distance.
pub fn extract_tuple(phrase: &CandidatePhrase, recipe: &Recipe) -> Option<(IngredientId, IngredientId)> {
    if phrase.keyword_spans.is_empty() {
        return None;
    }
    check_phrase(phrase, recipe, DEFAULT_MAX_DISTANCE).ok()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub comments: usize,
    pub sentences_scanned: usize,
    pub keyword_sentences: usize,
    /// Sentences skipped because their comment names an unknown recipe.
    pub unknown_recipe_sentences: usize,
    pub rejected_a: usize,
    pub rejected_b: usize,
    pub rejected_c: usize,
    pub tuples_emitted: usize,
}

/// A mined tuple in the substitution file format (canonical names).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinedTuple {
    pub recipe_id: String,
    pub source: String,
    pub target: String,
}

pub fn extract_from_comments(
    comments: &[Comment],
    recipes: &RecipeStore,
    vocab: &Vocabulary,
    max_distance: usize,
) -> (Vec<MinedTuple>, ExtractionReport) {
    let mut report = ExtractionReport::default();
    let mut tuples = Vec::new();
    for comment in comments {
        report.comments += 1;
        let sentences = split_sentences(&comment.text);
        let Some(recipe) = recipes.by_id(&comment.recipe_id) else {
            report.unknown_recipe_sentences += sentences.len();
            continue;
        };
        for tokens in sentences {
            report.sentences_scanned += 1;
            let phrase = CandidatePhrase::new(tokens, vocab);
            if phrase.keyword_spans.is_empty() {
                continue;
            }
            report.keyword_sentences += 1;
            match check_phrase(&phrase, recipe, max_distance) {
                Ok((s, y)) => {
                    report.tuples_emitted += 1;
                    tuples.push(MinedTuple {
                        recipe_id: comment.recipe_id.clone(),
                        source: vocab.name(s).to_string(),
                        target: vocab.name(y).to_string(),
                    });
                }
                Err(Rejection::IngredientCount) => report.rejected_a += 1,
                Err(Rejection::Distance) => report.rejected_b += 1,
                Err(Rejection::RecipeMembership) => report.rejected_c += 1,
            }
        }
    }
    (tuples, report)
}

pub fn load_comments(path: &Path) -> Result<Vec<Comment>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::format(path, Some(i + 1), e.to_string())))
        .collect()
}

pub fn write_tuples(path: &Path, tuples: &[MinedTuple]) -> Result<()> {
    let mut out = Vec::new();
    for t in tuples {
        serde_json::to_writer(&mut out, t).map_err(|e| Error::format(path, None, e.to_string()))?;
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Reads comments, mines tuples, and writes them as substitution JSON lines.
pub fn run_extraction(
    comments: &Path,
    recipes: &RecipeStore,
    vocab: &Vocabulary,
    out: &Path,
    max_distance: usize,
) -> Result<ExtractionReport> {
    let comments = load_comments(comments)?;
    let (tuples, report) = extract_from_comments(&comments, recipes, vocab, max_distance);
    write_tuples(out, &tuples)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;

    fn vocab() -> Vocabulary {
        Vocabulary::from_names(&["butter", "margarine", "sugar", "brown_sugar", "honey", "oil", "milk"]).unwrap()
    }

    fn toks(s: &str) -> Vec<String> {
        s.split(' ').map(String::from).collect()
    }

    #[test]
    fn sentences() {
        let s = split_sentences("Great! I used oil instead of butter.");
        assert_eq!(s.len(), 2);
        assert_eq!(s[1], toks("i used oil instead of butter"));
        assert!(split_sentences("").is_empty());
        let para = split_sentences("Loved it. Used half the sugar; great\nWould make again");
        assert_eq!(para.iter().map(Vec::len).collect::<Vec<_>>(), [2, 4, 1, 3]);
    }

    #[test]
    fn keywords() {
        assert_eq!(find_keyword_spans(&toks("use oil instead of butter")), vec![2..3]);
        assert_eq!(find_keyword_spans(&toks("in place of milk")), vec![0..3]);
        assert!(find_keyword_spans(&toks("no keywords here")).is_empty());
        assert_eq!(find_keyword_spans(&toks("i replaced and substituting")), vec![1..2, 3..4]);
    }

    #[test]
    fn longest_match_first() {
        let v = vocab();
        let hits = match_ingredients(&toks("brown sugar and honey"), &v);
        let got: Vec<_> = hits.iter().map(|h| (v.name(h.id), h.span)).collect();
        assert_eq!(got, vec![("brown_sugar", (0, 2)), ("honey", (3, 4))]);
        assert!(match_ingredients(&toks("nothing to see"), &v).is_empty());
        let three = match_ingredients(&toks("mix butter with sugars and honey"), &v);
        let names: Vec<_> = three.iter().map(|h| v.name(h.id)).collect();
        assert_eq!(names, ["butter", "sugar", "honey"]);
    }

    #[test]
    fn distances() {
        assert_eq!(token_distance(&(2..3), &(3..4)), 1);
        assert_eq!(token_distance(&(5..7), &(0..3)), 3);
        assert_eq!(token_distance(&(0..2), &(1..4)), 0);
    }

    fn recipe(v: &Vocabulary, names: &[&str]) -> Recipe {
        Recipe::new("r", names.iter().map(|n| v.resolve(n).unwrap()), Split::Train)
    }

    #[test]
    fn rules() {
        let v = vocab();
        let r = recipe(&v, &["butter", "sugar"]);
        let p = CandidatePhrase::new(toks("i used margarine instead of butter"), &v);
        let got = extract_tuple(&p, &r).unwrap();
        assert_eq!((v.name(got.0), v.name(got.1)), ("butter", "margarine"));

        let three = CandidatePhrase::new(toks("honey or margarine instead of butter"), &v);
        assert_eq!(check_phrase(&three, &r, 7), Err(Rejection::IngredientCount));

        let both = CandidatePhrase::new(toks("sugar instead of butter"), &v);
        assert_eq!(check_phrase(&both, &r, 7), Err(Rejection::RecipeMembership));

        let far = CandidatePhrase::new(toks("butter instead a b c d e f g margarine"), &v);
        // margarine sits 8 tokens past the keyword
        assert_eq!(check_phrase(&far, &r, 7), Err(Rejection::Distance));
        assert!(check_phrase(&far, &r, 9).is_ok());

        let none = CandidatePhrase::new(toks("margarine and butter"), &v);
        assert_eq!(extract_tuple(&none, &r), None);
    }

    #[test]
    fn distance_six_passes_seven_fails() {
        let v = vocab();
        let r = recipe(&v, &["butter"]);
        let ok = CandidatePhrase::new(toks("butter instead a b c d e margarine"), &v);
        assert!(check_phrase(&ok, &r, 7).is_ok());
        let bad = CandidatePhrase::new(toks("butter instead a b c d e f margarine"), &v);
        assert_eq!(check_phrase(&bad, &r, 7), Err(Rejection::Distance));
    }
}
