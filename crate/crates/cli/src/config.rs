//! Run configuration: one JSON object holding the model hyperparameters and
//! the data paths, with `--set key=value` overrides applied before parsing.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::{Map, Value};

use subst_core::baselines::Metric;
use subst_core::model::GismoConfig;
use subst_core::{Error, Result};

/// Keys that belong to the run rather than the model.
const RUN_KEYS: &[&str] = &[
    "vocab",
    "graph",
    "recipes",
    "substitutions",
    "comments",
    "title_embeddings",
    "title_index",
    "features",
    "features_index",
    "embeddings",
    "embeddings_index",
    "embedding_metric",
    "max_distance",
    "seeds",
    "output_dir",
];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunFields {
    vocab: Option<PathBuf>,
    graph: Option<PathBuf>,
    recipes: Option<PathBuf>,
    substitutions: Option<PathBuf>,
    comments: Option<PathBuf>,
    title_embeddings: Option<PathBuf>,
    title_index: Option<PathBuf>,
    features: Option<PathBuf>,
    features_index: Option<PathBuf>,
    embeddings: Option<PathBuf>,
    embeddings_index: Option<PathBuf>,
    #[serde(default)]
    embedding_metric: Metric,
    max_distance: Option<usize>,
    seeds: Option<Vec<u64>>,
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: GismoConfig,
    pub vocab: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    pub recipes: Option<PathBuf>,
    pub substitutions: Option<PathBuf>,
    pub comments: Option<PathBuf>,
    pub title_embeddings: Option<PathBuf>,
    pub title_index: Option<PathBuf>,
    /// External node features injected before training (SUBM matrix).
    pub features: Option<PathBuf>,
    /// Row-name sidecar for `features`; without it rows are taken in node order.
    pub features_index: Option<PathBuf>,
    /// Ingredient embeddings for the nearest-neighbour baseline.
    pub embeddings: Option<PathBuf>,
    pub embeddings_index: Option<PathBuf>,
    pub embedding_metric: Metric,
    pub max_distance: Option<usize>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

/// `value` is parsed as JSON when it can be, so `--set lr=1e-3` gives a number
/// and `--set context_mode=none` falls back to a string.
fn parse_override(raw: &str) -> Result<(String, Value)> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| invalid(format!("--set expects KEY=VALUE, got {raw:?}")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(invalid(format!("--set has an empty key in {raw:?}")));
    }
    let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
    Ok((key.to_string(), value))
}

fn resolve(base: &Path, p: Option<PathBuf>) -> Option<PathBuf> {
    p.map(|p| if p.is_relative() { base.join(p) } else { p })
}

impl RunConfig {
    /// Relative paths in a config file are taken relative to the file; paths
    /// given with `--set` are taken relative to the working directory.
    pub fn load(path: Option<&Path>, overrides: &[String], seeds: Option<Vec<u64>>, out: Option<PathBuf>) -> Result<Self> {
        let (mut file_obj, base) = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.to_path_buf(),
                    source: e,
                })?;
                let value: Value = serde_json::from_str(&text).map_err(|e| Error::Format {
                    path: p.to_path_buf(),
                    line: Some(e.line()),
                    message: e.to_string(),
                })?;
                let Value::Object(obj) = value else {
                    return Err(Error::Format {
                        path: p.to_path_buf(),
                        line: None,
                        message: "config must be a JSON object".into(),
                    });
                };
                (obj, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (Map::new(), PathBuf::new()),
        };
        let mut set_obj = Map::new();
        for raw in overrides {
            let (k, v) = parse_override(raw)?;
            file_obj.remove(&k);
            set_obj.insert(k, v);
        }

        let split = |obj: Map<String, Value>| {
            let (run, model): (Map<_, _>, Map<_, _>) = obj.into_iter().partition(|(k, _)| RUN_KEYS.contains(&k.as_str()));
            (run, model)
        };
        let (file_run, mut model_obj) = split(file_obj);
        let (set_run, set_model) = split(set_obj);
        model_obj.extend(set_model);

        let model: GismoConfig =
            serde_json::from_value(Value::Object(model_obj)).map_err(|e| invalid(format!("config: {e}")))?;
        let parse_run = |obj| serde_json::from_value::<RunFields>(Value::Object(obj)).map_err(|e| invalid(format!("config: {e}")));
        let f = parse_run(file_run)?;
        let s = parse_run(set_run.clone())?;
        let cwd = PathBuf::new();
        let pick = |a: Option<PathBuf>, b: Option<PathBuf>| resolve(&cwd, b).or_else(|| resolve(&base, a));

        let seeds = seeds.or(s.seeds).or(f.seeds).unwrap_or_else(|| vec![model.seed]);
        if seeds.is_empty() {
            return Err(invalid("seed list is empty"));
        }
        let cfg = RunConfig {
            vocab: pick(f.vocab, s.vocab),
            graph: pick(f.graph, s.graph),
            recipes: pick(f.recipes, s.recipes),
            substitutions: pick(f.substitutions, s.substitutions),
            comments: pick(f.comments, s.comments),
            title_embeddings: pick(f.title_embeddings, s.title_embeddings),
            title_index: pick(f.title_index, s.title_index),
            features: pick(f.features, s.features),
            features_index: pick(f.features_index, s.features_index),
            embeddings: pick(f.embeddings, s.embeddings),
            embeddings_index: pick(f.embeddings_index, s.embeddings_index),
            embedding_metric: if set_run.contains_key("embedding_metric") {
                s.embedding_metric
            } else {
                f.embedding_metric
            },
            max_distance: s.max_distance.or(f.max_distance),
            seeds,
            output_dir: out
                .or_else(|| resolve(&cwd, s.output_dir))
                .or_else(|| resolve(&base, f.output_dir))
                .unwrap_or_else(|| PathBuf::from("out")),
            model,
        };
        cfg.model.validate()?;
        Ok(cfg)
    }

    /// The path stored under `key`, checked to exist.
    pub fn require(&self, key: &str, value: &Option<PathBuf>) -> Result<PathBuf> {
        let p = value
            .clone()
            .ok_or_else(|| invalid(format!("no {key} path configured (set it in the config or with --set {key}=PATH)")))?;
        if !p.exists() {
            return Err(Error::Io {
                path: p,
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
            });
        }
        Ok(p)
    }
}

/// Comma-separated seeds as given to `--seed`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

pub fn parse_seeds(raw: &str) -> std::result::Result<SeedList, String> {
    raw.split(',')
        .map(|s| s.trim().parse::<u64>().map_err(|e| format!("bad seed {s:?}: {e}")))
        .collect::<std::result::Result<_, _>>()
        .map(SeedList)
}
