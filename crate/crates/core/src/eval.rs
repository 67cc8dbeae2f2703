//! Filtered ranking metrics (MRR, Hit@k) with ID/OOD breakdown.
//!
//! Ranks use the mean-tie convention: a target tied with `t` other candidates
//! gets `1 + (#strictly better) + t / 2`. Metrics are reported in percent.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{IngredientId, Recipe, RecipeStore, Stratum, SubstitutionSample};
use crate::error::{Error, Result};

pub const HIT_KS: [usize; 3] = [1, 3, 10];

/// How other valid targets of the same `(recipe, source)` are treated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetPolicy {
    /// Competing valid targets are removed from the candidate pool.
    #[default]
    Filtered,
    /// Unfiltered pool; the best-ranked valid target counts.
    BestOfValid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedQuery {
    pub source: IngredientId,
    /// Index into the [`RecipeStore`].
    pub recipe: usize,
    pub true_target: IngredientId,
    /// Sorted; always contains `true_target`.
    pub valid_targets: Vec<IngredientId>,
    pub stratum: Stratum,
}

/// What a scorer sees for one query.
#[derive(Debug, Clone, Copy)]
pub struct QueryContext<'a> {
    /// Position of the query in the evaluated list.
    pub index: usize,
    pub source: IngredientId,
    pub recipe: &'a Recipe,
}

/// Anything that scores every ingredient as a substitute for a query's source.
pub trait Scorer: Sync {
    /// One score per ingredient id (higher is better). The entry at the source
    /// index is ignored.
    fn score_candidates(&self, query: &QueryContext<'_>) -> Result<Vec<f64>>;
}

/// Groups the split on `(recipe, source)` to collect every valid target.
pub fn build_queries(samples: &[SubstitutionSample], strata: &[Stratum]) -> Result<Vec<RankedQuery>> {
    if samples.len() != strata.len() {
        return Err(Error::InvalidArgument(format!(
            "{} samples but {} strata labels",
            samples.len(),
            strata.len()
        )));
    }
    let mut groups: HashMap<(usize, IngredientId), Vec<IngredientId>> = HashMap::new();
    for s in samples {
        let g = groups.entry((s.recipe, s.source)).or_default();
        if !g.contains(&s.target) {
            g.push(s.target);
        }
    }
    for g in groups.values_mut() {
        g.sort_unstable();
    }
    Ok(samples
        .iter()
        .zip(strata)
        .map(|(s, &stratum)| RankedQuery {
            source: s.source,
            recipe: s.recipe,
            true_target: s.target,
            valid_targets: groups[&(s.recipe, s.source)].clone(),
            stratum,
        })
        .collect())
}

/// Mean-tie rank of `target` among every id except `source`.
pub fn rank_of_target(
    scores: &[f64],
    source: IngredientId,
    target: IngredientId,
    valid_targets: &[IngredientId],
    policy: TargetPolicy,
) -> Result<f64> {
    if target == source || target.index() >= scores.len() {
        return Err(Error::InvalidArgument(format!(
            "target {target} is not a candidate"
        )));
    }
    match policy {
        TargetPolicy::Filtered => Ok(filtered_rank(scores, source, target, valid_targets)),
        TargetPolicy::BestOfValid => Ok(valid_targets
            .iter()
            .chain(std::iter::once(&target))
            .filter(|t| **t != source && t.index() < scores.len())
            .map(|&t| filtered_rank(scores, source, t, &[]))
            .fold(f64::INFINITY, f64::min)),
    }
}

fn filtered_rank(
    scores: &[f64],
    source: IngredientId,
    target: IngredientId,
    exclude: &[IngredientId],
) -> f64 {
    let ts = scores[target.index()];
    let mut greater = 0usize;
    let mut ties = 0usize;
    for (v, &s) in scores.iter().enumerate() {
        if v == target.index() || v == source.index() {
            continue;
        }
        if s >= ts {
            if exclude.contains(&IngredientId::from_index(v)) {
                continue;
            }
            if s > ts {
                greater += 1;
            } else {
                ties += 1;
            }
        }
    }
    1.0 + greater as f64 + ties as f64 / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumMetrics {
    pub mrr: f64,
    pub hit_at: BTreeMap<usize, f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mrr: f64,
    pub hit_at: BTreeMap<usize, f64>,
    pub query_count: usize,
    pub per_stratum: BTreeMap<Stratum, StratumMetrics>,
}

fn summarize<'r>(ranks: impl Iterator<Item = &'r f64>) -> StratumMetrics {
    let mut count = 0usize;
    let mut rr = 0.0;
    let mut hits = [0usize; HIT_KS.len()];
    for &r in ranks {
        count += 1;
        rr += 1.0 / r;
        for (h, &k) in hits.iter_mut().zip(&HIT_KS) {
            if r <= k as f64 {
                *h += 1;
            }
        }
    }
    let pct = |x: f64| if count == 0 { 0.0 } else { 100.0 * x / count as f64 };
    StratumMetrics {
        mrr: pct(rr),
        hit_at: HIT_KS
            .iter()
            .zip(hits)
            .map(|(&k, h)| (k, pct(h as f64)))
            .collect(),
        count,
    }
}

impl MetricReport {
    /// Aggregates per-query ranks (`ranks[i]` belongs to stratum `strata[i]`).
    pub fn from_ranks(ranks: &[f64], strata: &[Stratum]) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::InvalidArgument("no queries to evaluate".into()));
        }
        if ranks.len() != strata.len() {
            return Err(Error::InvalidArgument("ranks and strata differ in length".into()));
        }
        let overall = summarize(ranks.iter());
        let per_stratum = Stratum::ALL
            .iter()
            .map(|&st| {
                let m = summarize(
                    ranks
                        .iter()
                        .zip(strata)
                        .filter(|(_, s)| **s == st)
                        .map(|(r, _)| r),
                );
                (st, m)
            })
            .collect();
        let report = MetricReport {
            mrr: overall.mrr,
            hit_at: overall.hit_at,
            query_count: overall.count,
            per_stratum,
        };
        report.check_invariants()?;
        Ok(report)
    }

    pub fn hit(&self, k: usize) -> f64 {
        self.hit_at.get(&k).copied().unwrap_or(0.0)
    }

    pub fn stratum(&self, s: Stratum) -> &StratumMetrics {
        &self.per_stratum[&s]
    }

    /// Ordering chain, stratum count conservation and weighted-mean consistency.
    pub fn check_invariants(&self) -> Result<()> {
        const TOL: f64 = 1e-9;
        let (h1, h3, h10) = (self.hit(1), self.hit(3), self.hit(10));
        if !(0.0 <= h1 && h1 <= h3 + TOL && h3 <= h10 + TOL && h10 <= 100.0 + TOL) {
            return Err(Error::Invariant(format!(
                "hit@k not ordered: {h1} {h3} {h10}"
            )));
        }
        if !(h1 <= self.mrr + TOL && self.mrr <= 100.0 + TOL) {
            return Err(Error::Invariant(format!(
                "mrr {} outside [hit@1 {h1}, 100]",
                self.mrr
            )));
        }
        let counted: usize = self.per_stratum.values().map(|m| m.count).sum();
        if counted != self.query_count {
            return Err(Error::Invariant(format!(
                "strata hold {counted} queries, report has {}",
                self.query_count
            )));
        }
        let weighted: f64 = self
            .per_stratum
            .values()
            .map(|m| m.mrr * m.count as f64)
            .sum::<f64>()
            / self.query_count as f64;
        if (weighted - self.mrr).abs() > TOL {
            return Err(Error::Invariant(format!(
                "overall mrr {} differs from stratum-weighted {weighted}",
                self.mrr
            )));
        }
        Ok(())
    }

    /// Aligned text table: one row for the overall numbers and one per stratum.
    pub fn to_table(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "model", "MRR", "Hit@1", "Hit@3", "Hit@10", "queries"
        );
        let mut row = |label: String, m: f64, h: &BTreeMap<usize, f64>, n: usize| {
            let g = |k| h.get(&k).copied().unwrap_or(0.0);
            let _ = writeln!(
                out,
                "{label:<16} {m:>8.2} {:>8.2} {:>8.2} {:>8.2} {n:>8}",
                g(1),
                g(3),
                g(10)
            );
        };
        row(name.to_string(), self.mrr, &self.hit_at, self.query_count);
        for (s, m) in &self.per_stratum {
            row(format!("  {s}"), m.mrr, &m.hit_at, m.count);
        }
        out
    }
}

/// Scores every query (in parallel) and returns the per-query ranks in query order.
pub fn rank_queries<S: Scorer + ?Sized>(
    scorer: &S,
    queries: &[RankedQuery],
    recipes: &RecipeStore,
    policy: TargetPolicy,
) -> Result<Vec<f64>> {
    queries
        .par_iter()
        .enumerate()
        .map(|(index, q)| {
            let ctx = QueryContext {
                index,
                source: q.source,
                recipe: recipes.get(q.recipe),
            };
            let scores = scorer.score_candidates(&ctx)?;
            if let Some(bad) = scores
                .iter()
                .enumerate()
                .find(|(i, s)| *i != q.source.index() && !s.is_finite())
            {
                return Err(Error::Invariant(format!(
                    "scorer produced non-finite score for candidate {}",
                    bad.0
                )));
            }
            rank_of_target(&scores, q.source, q.true_target, &q.valid_targets, policy)
        })
        .collect()
}

pub fn evaluate<S: Scorer + ?Sized>(
    scorer: &S,
    queries: &[RankedQuery],
    recipes: &RecipeStore,
    policy: TargetPolicy,
) -> Result<MetricReport> {
    if queries.is_empty() {
        return Err(Error::InvalidArgument("no queries to evaluate".into()));
    }
    let ranks = rank_queries(scorer, queries, recipes, policy)?;
    let strata: Vec<Stratum> = queries.iter().map(|q| q.stratum).collect();
    MetricReport::from_ranks(&ranks, &strata)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;

    fn id(i: usize) -> IngredientId {
        IngredientId::from_index(i)
    }

    #[test]
    fn strictly_best_is_rank_one() {
        let scores = [0.1, 0.9, 0.5, 0.3];
        let r = rank_of_target(&scores, id(0), id(1), &[id(1)], TargetPolicy::Filtered).unwrap();
        assert_eq!(r, 1.0);
    }

    #[test]
    fn all_tied_is_mean_rank() {
        // source 0 excluded; 5 tied candidates
        let scores = [9.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let r = rank_of_target(&scores, id(0), id(3), &[id(3)], TargetPolicy::Filtered).unwrap();
        assert_eq!(r, 3.0);
    }

    #[test]
    fn competing_valid_target_is_filtered() {
        // candidates 1..=4 with scores .9 .8 .7 .6; 1 is another valid target
        let scores = [0.0, 0.9, 0.8, 0.7, 0.6];
        let valid = [id(1), id(2)];
        let filtered = rank_of_target(&scores, id(0), id(2), &valid, TargetPolicy::Filtered).unwrap();
        assert_eq!(filtered, 1.0);
        let unfiltered = rank_of_target(&scores, id(0), id(2), &[id(2)], TargetPolicy::Filtered).unwrap();
        assert_eq!(unfiltered, 2.0);
        let best = rank_of_target(&scores, id(0), id(2), &valid, TargetPolicy::BestOfValid).unwrap();
        assert_eq!(best, 1.0);
    }

    #[test]
    fn missing_target_is_error() {
        let scores = [0.0, 1.0];
        assert!(rank_of_target(&scores, id(0), id(0), &[], TargetPolicy::Filtered).is_err());
        assert!(rank_of_target(&scores, id(0), id(5), &[], TargetPolicy::Filtered).is_err());
    }

    #[test]
    fn report_from_hand_ranks() {
        let s = Stratum::InDistribution;
        let r = MetricReport::from_ranks(&[1.0, 2.0, 4.0], &[s, s, Stratum::OutOfDistribution]).unwrap();
        assert!((r.mrr - 100.0 * 1.75 / 3.0).abs() < 1e-12);
        assert!((r.hit(1) - 100.0 / 3.0).abs() < 1e-12);
        assert!((r.hit(3) - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.hit(10), 100.0);
        assert_eq!(r.stratum(s).count, 2);
        assert!((r.stratum(s).mrr - 75.0).abs() < 1e-12);
        assert!((r.stratum(Stratum::OutOfDistribution).mrr - 25.0).abs() < 1e-12);
    }

    #[test]
    fn single_perfect_query() {
        let r = MetricReport::from_ranks(&[1.0], &[Stratum::OutOfDistribution]).unwrap();
        assert_eq!(r.mrr, 100.0);
        assert!(HIT_KS.iter().all(|&k| r.hit(k) == 100.0));
        assert_eq!(r.stratum(Stratum::InDistribution).count, 0);
    }

    #[test]
    fn empty_queries_is_error() {
        assert!(MetricReport::from_ranks(&[], &[]).is_err());
    }

    fn sample(recipe: usize, s: usize, t: usize) -> SubstitutionSample {
        SubstitutionSample {
            source: id(s),
            target: id(t),
            recipe_id: format!("r{recipe}"),
            recipe,
            split: Split::Test,
        }
    }

    #[test]
    fn queries_group_by_recipe_and_source() {
        let samples = vec![
            sample(0, 1, 2),
            sample(0, 1, 3),
            sample(1, 1, 2),
            sample(0, 4, 2),
            sample(2, 1, 5),
        ];
        let strata = vec![Stratum::OutOfDistribution; 5];
        let qs = build_queries(&samples, &strata).unwrap();
        let sizes: Vec<usize> = qs.iter().map(|q| q.valid_targets.len()).collect();
        assert_eq!(sizes, vec![2, 2, 1, 1, 1]);
        assert_eq!(qs[0].valid_targets, vec![id(2), id(3)]);
        assert_eq!(qs[1].valid_targets, qs[0].valid_targets);
    }

    #[test]
    fn unique_groups_are_singletons() {
        let samples = vec![sample(0, 1, 2), sample(1, 1, 2)];
        let qs = build_queries(&samples, &[Stratum::InDistribution; 2]).unwrap();
        assert!(qs.iter().all(|q| q.valid_targets == vec![q.true_target]));
    }

    #[test]
    fn table_has_overall_and_strata_rows() {
        let r = MetricReport::from_ranks(&[1.0, 2.0], &[Stratum::InDistribution, Stratum::OutOfDistribution]).unwrap();
        let t = r.to_table("lt_freq");
        assert_eq!(t.lines().count(), 4);
        assert!(t.contains("Hit@10") && t.contains("  OOD"));
    }

    #[test]
    fn report_json_shape() {
        let r = MetricReport::from_ranks(&[1.0], &[Stratum::InDistribution]).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["hit_at"]["10"], 100.0);
        assert_eq!(v["per_stratum"]["OOD"]["count"], 0);
    }
}
