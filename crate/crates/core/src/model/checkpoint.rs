//! Directory checkpoints: one `<name>.subm` per tensor plus `config.json` and
//! `manifest.json`.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::GismoConfig;
use super::gismo::{Gismo, GismoParameters, GinLayer, Linear};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, ParamId, ParamStore};

const CONFIG_FILE: &str = "config.json";
const MANIFEST_FILE: &str = "manifest.json";
const ANCHOR_FILE: &str = "feature_anchor.subm";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Number of leading rows excluded from optimization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frozen_rows: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub node_count: usize,
    pub num_ingredients: usize,
    pub tensors: Vec<TensorEntry>,
    #[serde(default)]
    pub has_feature_anchor: bool,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::format(path, None, e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, None, e.to_string()))
}

impl Gismo {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut tensors = Vec::new();
        for p in self.params.store.iter() {
            p.value.write_subm(&dir.join(format!("{}.subm", p.name)))?;
            let frozen_rows = p
                .frozen_rows
                .as_ref()
                .map(|mask| mask.iter().take_while(|&&f| f).count());
            tensors.push(TensorEntry {
                name: p.name.clone(),
                rows: p.value.rows(),
                cols: p.value.cols(),
                frozen_rows,
            });
        }
        if let Some(anchor) = self.feature_anchor() {
            anchor.write_subm(&dir.join(ANCHOR_FILE))?;
        }
        write_json(&dir.join(CONFIG_FILE), &self.config)?;
        write_json(
            &dir.join(MANIFEST_FILE),
            &Manifest {
                node_count: self.node_count(),
                num_ingredients: self.num_ingredients(),
                tensors,
                has_feature_anchor: self.feature_anchor().is_some(),
            },
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let config: GismoConfig = read_json(&dir.join(CONFIG_FILE))?;
        config.validate()?;
        let manifest: Manifest = read_json(&dir.join(MANIFEST_FILE))?;

        let mut store = ParamStore::new();
        for t in &manifest.tensors {
            let path = dir.join(format!("{}.subm", t.name));
            let value = Matrix::read_subm(&path)?;
            if value.shape() != (t.rows, t.cols) {
                return Err(Error::format(
                    &path,
                    None,
                    format!("tensor is {:?}, manifest says {}x{}", value.shape(), t.rows, t.cols),
                ));
            }
            let id = store.add(t.name.clone(), value);
            if let Some(n) = t.frozen_rows {
                let mut mask = vec![false; t.rows];
                mask[..n.min(t.rows)].iter_mut().for_each(|m| *m = true);
                store.get_mut(id).frozen_rows = Some(mask);
            }
        }

        let find = |name: String| -> Result<ParamId> {
            store
                .find(&name)
                .ok_or_else(|| Error::format(dir, None, format!("checkpoint lacks tensor {name}")))
        };
        let linear = |prefix: String| -> Result<Linear> {
            Ok(Linear {
                weight: find(format!("{prefix}.weight"))?,
                bias: find(format!("{prefix}.bias"))?,
            })
        };
        let node_embeddings = find("node_embeddings".into())?;
        let mut gin = Vec::new();
        if config.use_graph {
            for l in 0..config.gin_layers {
                gin.push(GinLayer {
                    eps: find(format!("gin.{l}.eps"))?,
                    hidden: linear(format!("gin.{l}.hidden"))?,
                    output: linear(format!("gin.{l}.output"))?,
                });
            }
        }
        let decoder = (0..config.decoder_layers)
            .map(|i| linear(format!("decoder.{i}")))
            .collect::<Result<Vec<_>>>()?;

        let expected = |id: ParamId, rows: usize, cols: usize| -> Result<()> {
            let shape = store.value(id).shape();
            if shape != (rows, cols) {
                return Err(Error::format(
                    dir,
                    None,
                    format!("{} is {shape:?}, config implies {rows}x{cols}", store.get(id).name),
                ));
            }
            Ok(())
        };
        expected(node_embeddings, manifest.node_count, config.feature_dim)?;
        expected(decoder[0].weight, config.decoder_input_dim(), decoder[0].weight_cols(&store))?;
        expected(decoder[decoder.len() - 1].bias, 1, 1)?;

        let anchor = if manifest.has_feature_anchor {
            Some(Arc::new(Matrix::read_subm(&dir.join(ANCHOR_FILE))?))
        } else {
            None
        };
        let params = GismoParameters {
            store,
            node_embeddings,
            gin,
            decoder,
        };
        let mut model = Gismo::from_parts(config, params, manifest.node_count, manifest.num_ingredients);
        model.set_feature_anchor(anchor);
        Ok(model)
    }
}

impl Linear {
    fn weight_cols(&self, store: &ParamStore) -> usize {
        store.value(self.weight).cols()
    }
}
