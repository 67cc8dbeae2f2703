#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use subst_core::corpus::{IngredientId, Recipe, RecipeStore, Split, Stratum, SubstitutionSample};
use subst_core::eval::{build_queries, RankedQuery};
use subst_core::graph::synthetic::random_graph;
use subst_core::graph::FlavorGraph;
use subst_core::model::{ContextMode, Gismo, GismoConfig};
use subst_core::numerics::Matrix;

pub fn id(i: usize) -> IngredientId {
    IngredientId::from_index(i)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tiny_config() -> GismoConfig {
    GismoConfig {
        gin_layers: 2,
        feature_dim: 8,
        embed_dim: 8,
        decoder_layers: 3,
        decoder_hidden: 8,
        negatives: 4,
        batch_size: 4,
        dropout: 0.0,
        context_mode: ContextMode::Ingredients,
        ..GismoConfig::default()
    }
}

/// A small random world: graph, recipes, and substitution tuples whose source is
/// always in its recipe.
pub struct ToyWorld {
    pub graph: FlavorGraph,
    pub recipes: RecipeStore,
    pub samples: Vec<SubstitutionSample>,
}

pub fn toy_world(num_ingredients: usize, num_compounds: usize, num_samples: usize, seed: u64) -> ToyWorld {
    let mut r = rng(seed);
    let graph = random_graph(num_ingredients, num_compounds, 0.3, &mut r);
    let mut recipes = Vec::new();
    let mut samples = Vec::new();
    let all: Vec<usize> = (0..num_ingredients).collect();
    for i in 0..num_samples {
        let size = r.random_range(2..=4.min(num_ingredients - 1));
        let chosen: Vec<usize> = all.choose_multiple(&mut r, size).copied().collect();
        let source = chosen[0];
        let target = loop {
            let t = r.random_range(0..num_ingredients);
            if !chosen.contains(&t) {
                break t;
            }
        };
        let recipe_id = format!("r{i}");
        recipes.push(Recipe::new(recipe_id.clone(), chosen.iter().map(|&c| id(c)), Split::Train));
        samples.push(SubstitutionSample {
            source: id(source),
            target: id(target),
            recipe_id,
            recipe: i,
            split: Split::Train,
        });
    }
    ToyWorld {
        graph,
        recipes: RecipeStore::from_recipes(recipes).unwrap(),
        samples,
    }
}

pub fn queries_for(samples: &[SubstitutionSample]) -> Vec<RankedQuery> {
    build_queries(samples, &vec![Stratum::InDistribution; samples.len()]).unwrap()
}

fn dense_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a[(i, k)] * b[(k, j)];
            }
            out.row_mut(i)[j] = s;
        }
    }
    out
}

fn add_bias(x: &mut Matrix, b: &Matrix) {
    for r in 0..x.rows() {
        for (o, v) in x.row_mut(r).iter_mut().zip(b.data()) {
            *o += v;
        }
    }
}

/// Encoder re-implemented with a dense adjacency matrix and naive loops.
pub fn dense_encode(model: &Gismo, graph: &FlavorGraph) -> Matrix {
    let store = &model.params.store;
    let adj = graph.to_dense().unwrap();
    let mut h = store.value(model.params.node_embeddings).clone();
    for layer in &model.params.gin {
        let eps = store.value(layer.eps).item();
        let mut m = dense_matmul(&adj, &h);
        for (o, v) in m.data_mut().iter_mut().zip(h.data()) {
            *o += (1.0 + eps) * v;
        }
        let mut z = dense_matmul(&m, store.value(layer.hidden.weight));
        add_bias(&mut z, store.value(layer.hidden.bias));
        z.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        h = dense_matmul(&z, store.value(layer.output.weight));
        add_bias(&mut h, store.value(layer.output.bias));
    }
    h
}

/// Sets every parameter to small random values so no weight is trivially zero.
pub fn randomize(model: &mut Gismo, seed: u64) {
    let mut r = rng(seed);
    for p in model.params.store.iter_mut() {
        for v in p.value.data_mut() {
            *v = r.random::<f64>() - 0.5;
        }
    }
}

pub fn zero_final_layer(model: &mut Gismo) {
    let last = *model.params.decoder.last().unwrap();
    for pid in [last.weight, last.bias] {
        model.params.store.get_mut(pid).value.fill(0.0);
    }
}
