use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::Serialize;

use super::gismo::{Gismo, ScoredTuple};
use crate::corpus::{IngredientId, RecipeStore, SubstitutionSample};
use crate::error::{Error, Result};
use crate::eval::{evaluate, RankedQuery};
use crate::graph::FlavorGraph;
use crate::numerics::{adam_step, AdamState, Tape};

/// `count` distinct ingredient ids drawn uniformly from `0..vocab_size` minus `{source, target}`.
pub fn sample_negatives<R: Rng + ?Sized>(
    source: IngredientId,
    target: IngredientId,
    vocab_size: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<IngredientId>> {
    let excluded = if source == target { 1 } else { 2 };
    if source.index() >= vocab_size || target.index() >= vocab_size {
        return Err(Error::InvalidArgument("source or target outside vocabulary".into()));
    }
    if vocab_size < count + excluded {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {count} negatives from {vocab_size} ingredients"
        )));
    }
    let (lo, hi) = if source <= target {
        (source.index(), target.index())
    } else {
        (target.index(), source.index())
    };
    Ok(index::sample(rng, vocab_size - excluded, count)
        .into_iter()
        .map(|mut i| {
            // Map the compacted index back over the excluded ids.
            if i >= lo {
                i += 1;
            }
            if excluded == 2 && i >= hi {
                i += 1;
            }
            IngredientId::from_index(i)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    pub swapped: usize,
    pub batches: usize,
}

/// One pass over the shuffled training tuples with an Adam step per batch.
pub fn train_epoch<R: Rng + ?Sized>(
    model: &mut Gismo,
    adam: &mut AdamState,
    train: &[SubstitutionSample],
    recipes: &RecipeStore,
    graph: &FlavorGraph,
    rng: &mut R,
) -> Result<EpochStats> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("training split is empty".into()));
    }
    let cfg = model.config.clone();
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(rng);

    let mut stats = EpochStats {
        mean_loss: 0.0,
        swapped: 0,
        batches: 0,
    };
    let mut loss_sum = 0.0;
    for chunk in order.chunks(cfg.batch_size) {
        let mut tuples = Vec::with_capacity(chunk.len());
        for &i in chunk {
            let s = &train[i];
            let (source, target) = if cfg.swap_prob > 0.0 && rng.random_bool(cfg.swap_prob) {
                stats.swapped += 1;
                (s.target, s.source)
            } else {
                (s.source, s.target)
            };
            let mut candidates = Vec::with_capacity(cfg.negatives + 1);
            candidates.push(target);
            candidates.extend(sample_negatives(
                source,
                target,
                model.num_ingredients(),
                cfg.negatives,
                rng,
            )?);
            tuples.push(ScoredTuple {
                source,
                candidates,
                recipe: recipes.get(s.recipe),
            });
        }

        model.params.store.zero_grad();
        let mut tape = Tape::new();
        let loss = model.batch_loss(&mut tape, graph, &tuples, rng, true)?;
        let value = tape.value(loss).item();
        tape.backward(loss, &mut model.params.store)?;
        adam_step(&mut model.params.store, adam, cfg.lr, cfg.weight_decay);

        if !value.is_finite() {
            return Err(Error::Invariant(format!("training loss became {value}")));
        }
        loss_sum += value * chunk.len() as f64;
        stats.batches += 1;
    }
    stats.mean_loss = loss_sum / train.len() as f64;
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_mrr: f64,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Parameters from the epoch with the best validation MRR.
    pub model: Gismo,
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_mrr: f64,
}

/// Trains until `max_epochs` or until `patience` consecutive epochs fail to
/// improve validation MRR, keeping the best parameters.
pub fn fit<R: Rng + ?Sized>(
    mut model: Gismo,
    train: &[SubstitutionSample],
    val: &[RankedQuery],
    recipes: &RecipeStore,
    graph: &FlavorGraph,
    rng: &mut R,
) -> Result<FitOutcome> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidArgument(
            "training and validation splits must be non-empty".into(),
        ));
    }
    let cfg = model.config.clone();
    let mut adam = AdamState::new(&model.params.store);
    let mut best: Option<(usize, f64, Gismo)> = None;
    let mut stale = 0usize;
    let mut log = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        let stats = train_epoch(&mut model, &mut adam, train, recipes, graph, rng)?;
        let report = {
            let scorer = model.prepare(graph)?;
            evaluate(&scorer, val, recipes, cfg.target_policy)?
        };
        log.push(EpochRecord {
            epoch,
            loss: stats.mean_loss,
            val_mrr: report.mrr,
        });
        log::debug!("epoch {epoch}: loss {:.6} val mrr {:.4}", stats.mean_loss, report.mrr);

        if best.as_ref().is_none_or(|(_, mrr, _)| report.mrr > *mrr) {
            best = Some((epoch, report.mrr, model.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale > cfg.patience {
                break;
            }
        }
    }
    let (best_epoch, best_val_mrr, best_model) = best.expect("at least one epoch ran");
    Ok(FitOutcome {
        model: best_model,
        log,
        best_epoch,
        best_val_mrr,
    })
}

/// Writes `epoch,loss,val_mrr` rows.
pub fn write_training_log(path: &Path, log: &[EpochRecord]) -> Result<()> {
    let mut out = String::from("epoch,loss,val_mrr\n");
    for r in log {
        out.push_str(&format!("{},{},{}\n", r.epoch, r.loss, r.val_mrr));
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
