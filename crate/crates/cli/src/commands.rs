use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use subst_core::baselines::{fit_tables, BaselineKind, EmbeddingMatrix, RandomRanker, TableRanker};
use subst_core::corpus::{Recipe, RecipeStore, Split, SubstitutionDataset, Vocabulary};
use subst_core::eval::{build_queries, evaluate, MetricReport, RankedQuery, Scorer};
use subst_core::graph::FlavorGraph;
use subst_core::miner::{run_extraction, DEFAULT_MAX_DISTANCE};
use subst_core::model::{fit, write_training_log, Gismo};
use subst_core::numerics::Matrix;
use subst_core::{Error, Result};

use crate::config::RunConfig;

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

/// Model initialisation and training draw from separate streams of the seed.
fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation (divisor N).
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        MeanStd { mean, std: var.sqrt() }
    }
}

struct Data {
    vocab: Vocabulary,
    recipes: RecipeStore,
    subs: SubstitutionDataset,
}

fn load_vocab(cfg: &RunConfig) -> Result<Vocabulary> {
    let vocab = Vocabulary::load(&cfg.require("vocab", &cfg.vocab)?)?;
    eprintln!("vocabulary: {} ingredients, {} aliases", vocab.len(), vocab.alias_count());
    Ok(vocab)
}

fn load_recipes(cfg: &RunConfig, vocab: &Vocabulary) -> Result<RecipeStore> {
    let mut recipes = RecipeStore::load(&cfg.require("recipes", &cfg.recipes)?, vocab)?;
    eprintln!("recipes: {} kept; {:?}", recipes.len(), recipes.stats);
    if let Some(m) = &cfg.title_embeddings {
        let index = cfg.require("title_index", &cfg.title_index)?;
        let n = recipes.attach_title_embeddings(m, &index)?;
        eprintln!("title embeddings attached to {n} recipes");
    }
    Ok(recipes)
}

fn load_data(cfg: &RunConfig) -> Result<Data> {
    let vocab = load_vocab(cfg)?;
    let recipes = load_recipes(cfg, &vocab)?;
    let subs = SubstitutionDataset::load(&cfg.require("substitutions", &cfg.substitutions)?, &recipes, &vocab)?;
    let (tr, va, te) = subs.counts();
    eprintln!("substitutions: train {tr}, val {va}, test {te}; {:?}", subs.stats);
    Ok(Data { vocab, recipes, subs })
}

fn load_graph(cfg: &RunConfig, vocab: &Vocabulary) -> Result<FlavorGraph> {
    let g = FlavorGraph::load(&cfg.require("graph", &cfg.graph)?, vocab)?;
    eprintln!(
        "graph: {} ingredients, {} compounds, {} edge slots",
        g.num_ingredients(),
        g.num_compounds(),
        g.edge_slots()
    );
    Ok(g)
}

fn queries(data: &Data, split: Split) -> Result<Vec<RankedQuery>> {
    build_queries(data.subs.split(split), &data.subs.stratify(split))
}

pub fn extract(cfg: &RunConfig) -> Result<()> {
    let vocab = load_vocab(cfg)?;
    let recipes = load_recipes(cfg, &vocab)?;
    let comments = cfg.require("comments", &cfg.comments)?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| io_err(&cfg.output_dir, e))?;
    let out = cfg.output_dir.join("substitutions.jsonl");
    let report = run_extraction(&comments, &recipes, &vocab, &out, cfg.max_distance.unwrap_or(DEFAULT_MAX_DISTANCE))?;
    write_json(&cfg.output_dir.join("extraction_report.json"), &report)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn build_model(cfg: &RunConfig, seed: u64, graph: &FlavorGraph, vocab: &Vocabulary) -> Result<Gismo> {
    let mut model_cfg = cfg.model.clone();
    model_cfg.seed = seed;
    let mut model = Gismo::new(model_cfg, graph, &mut seeded(seed, 0))?;
    if let Some(path) = &cfg.features {
        let features = match &cfg.features_index {
            Some(index) => {
                let (m, stats) = EmbeddingMatrix::load(path, index, vocab, cfg.embedding_metric)?;
                eprintln!("features: {stats:?}");
                m.vectors
            }
            None => Matrix::read_subm(path)?,
        };
        model.inject_features(&features)?;
    }
    Ok(model)
}

#[derive(Serialize)]
struct SeedSummary {
    seed: u64,
    best_epoch: usize,
    best_val_mrr: f64,
    epochs_run: usize,
}

#[derive(Serialize)]
struct TrainSummary {
    runs: Vec<SeedSummary>,
    best_val_mrr: MeanStd,
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let data = load_data(cfg)?;
    let graph = load_graph(cfg, &data.vocab)?;
    let val = queries(&data, Split::Val)?;
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let model = build_model(cfg, seed, &graph, &data.vocab)?;
        let out = fit(model, &data.subs.train, &val, &data.recipes, &graph, &mut seeded(seed, 1))?;
        let dir = cfg.output_dir.join(format!("seed_{seed}"));
        out.model.save(&dir.join("checkpoint"))?;
        write_training_log(&dir.join("train_log.csv"), &out.log)?;
        eprintln!(
            "seed {seed}: best val MRR {:.2} at epoch {} of {}",
            out.best_val_mrr,
            out.best_epoch,
            out.log.len()
        );
        runs.push(SeedSummary {
            seed,
            best_epoch: out.best_epoch,
            best_val_mrr: out.best_val_mrr,
            epochs_run: out.log.len(),
        });
    }
    let mrrs: Vec<f64> = runs.iter().map(|r| r.best_val_mrr).collect();
    let summary = TrainSummary {
        best_val_mrr: MeanStd::of(&mrrs),
        runs,
    };
    write_json(&cfg.output_dir.join("summary.json"), &summary)?;
    println!(
        "best val MRR over {} seed(s): {:.2} +/- {:.2}",
        mrrs.len(),
        summary.best_val_mrr.mean,
        summary.best_val_mrr.std
    );
    Ok(())
}

/// What `eval` ranks with.
#[derive(Debug, Clone)]
pub enum Ranker {
    Checkpoint(PathBuf),
    Baseline(String),
}

#[derive(Serialize)]
struct EvalOutput {
    name: String,
    split: Split,
    /// One report per seed; deterministic rankers have exactly one.
    reports: Vec<MetricReport>,
    mrr: MeanStd,
    hit_at_10: MeanStd,
}

fn evaluate_each<S: Scorer>(scorers: &[S], q: &[RankedQuery], data: &Data, cfg: &RunConfig) -> Result<Vec<MetricReport>> {
    scorers
        .iter()
        .map(|s| evaluate(s, q, &data.recipes, cfg.model.target_policy))
        .collect()
}

pub fn eval(cfg: &RunConfig, ranker: &Ranker, split: Split) -> Result<()> {
    let data = load_data(cfg)?;
    let q = queries(&data, split)?;
    if q.is_empty() {
        return Err(Error::InvalidArgument(format!("the {split} split has no substitution tuples")));
    }
    let (name, reports) = match ranker {
        Ranker::Checkpoint(dir) => {
            let graph = load_graph(cfg, &data.vocab)?;
            let model = Gismo::load(dir)?;
            if model.node_count() != graph.node_count() {
                return Err(Error::Shape(format!(
                    "checkpoint has {} nodes but the graph has {}",
                    model.node_count(),
                    graph.node_count()
                )));
            }
            let scorer = model.prepare(&graph)?;
            ("gismo".to_string(), vec![evaluate(&scorer, &q, &data.recipes, cfg.model.target_policy)?])
        }
        Ranker::Baseline(name) if name == "embedding" => {
            let matrix = cfg.require("embeddings", &cfg.embeddings)?;
            let index = cfg.require("embeddings_index", &cfg.embeddings_index)?;
            let (emb, stats) = EmbeddingMatrix::load(&matrix, &index, &data.vocab, cfg.embedding_metric)?;
            eprintln!("embeddings: {stats:?}");
            ("embedding".to_string(), evaluate_each(&[emb], &q, &data, cfg)?)
        }
        Ranker::Baseline(name) => {
            let kind: BaselineKind = name.parse()?;
            let reports = if kind == BaselineKind::Random {
                let rankers: Vec<RandomRanker> = cfg
                    .seeds
                    .iter()
                    .map(|&seed| RandomRanker {
                        vocab_size: data.vocab.len(),
                        seed,
                    })
                    .collect();
                evaluate_each(&rankers, &q, &data, cfg)?
            } else {
                let tables = fit_tables(&data.subs.train, data.vocab.len())?;
                evaluate_each(&[TableRanker::new(kind, &tables)?], &q, &data, cfg)?
            };
            (kind.to_string(), reports)
        }
    };
    for r in &reports {
        r.check_invariants()?;
    }
    let mrr = MeanStd::of(&reports.iter().map(|r| r.mrr).collect::<Vec<_>>());
    let hit_at_10 = MeanStd::of(&reports.iter().map(|r| r.hit(10)).collect::<Vec<_>>());
    if reports.len() == 1 {
        print!("{}", reports[0].to_table(&name));
    } else {
        for (seed, r) in cfg.seeds.iter().zip(&reports) {
            print!("{}", r.to_table(&format!("{name} seed {seed}")));
        }
        println!(
            "{name}: MRR {:.2} +/- {:.2}, Hit@10 {:.2} +/- {:.2} over {} seeds",
            mrr.mean,
            mrr.std,
            hit_at_10.mean,
            hit_at_10.std,
            reports.len()
        );
    }
    let file = format!("eval_{}_{split}.json", name.replace('+', "_"));
    write_json(
        &cfg.output_dir.join(file),
        &EvalOutput {
            name,
            split,
            reports,
            mrr,
            hit_at_10,
        },
    )
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecipeInput {
    #[serde(default)]
    recipe_id: String,
    #[serde(default)]
    title: String,
    ingredients: Vec<String>,
    title_embedding: Option<Vec<f64>>,
}

pub fn suggest(cfg: &RunConfig, checkpoint: &Path, recipe_file: &Path, source: &str, top_k: usize) -> Result<()> {
    let vocab = load_vocab(cfg)?;
    let graph = load_graph(cfg, &vocab)?;
    let model = Gismo::load(checkpoint)?;
    let text = fs::read_to_string(recipe_file).map_err(|e| io_err(recipe_file, e))?;
    let input: RecipeInput = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: recipe_file.to_path_buf(),
        line: Some(e.line()),
        message: e.to_string(),
    })?;
    let source_id = vocab
        .resolve(source)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown source ingredient {source:?}")))?;
    let mut ids = Vec::new();
    for name in &input.ingredients {
        match vocab.resolve(name) {
            Some(id) => ids.push(id),
            None => eprintln!("ignoring unknown ingredient {name:?}"),
        }
    }
    ids.push(source_id);
    let mut recipe = Recipe::new(input.recipe_id, ids, Split::Test);
    recipe.title = input.title;
    recipe.title_embedding = input.title_embedding;

    let scorer = model.prepare(&graph)?;
    let ranked = scorer.suggest(source_id, &recipe, top_k)?;
    println!("{:>4}  {:<32} {:>12}", "rank", "ingredient", "score");
    for (i, (id, score)) in ranked.iter().enumerate() {
        println!("{:>4}  {:<32} {:>12.6}", i + 1, vocab.name(*id), score);
    }
    Ok(())
}
