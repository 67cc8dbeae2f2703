//! Small generated graphs for tests and toy runs.

use std::collections::BTreeMap;

use rand::Rng;

use super::{npmi_weights, FlavorGraph};
use crate::error::Result;

/// Erdős–Rényi style graph: each unordered node pair gets an edge with probability
/// `edge_prob` and a weight drawn uniformly from `(0.05, 1.0]`.
pub fn random_graph<R: Rng + ?Sized>(
    num_ingredients: usize,
    num_compounds: usize,
    edge_prob: f64,
    rng: &mut R,
) -> FlavorGraph {
    let n = num_ingredients + num_compounds;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(edge_prob) {
                let w = 1.0 - rng.random::<f64>() * 0.95;
                edges.push((u, v, w));
            }
        }
    }
    FlavorGraph::from_edges(num_ingredients, num_compounds, &edges)
        .expect("generated edges are valid")
}

/// Ingredient-only graph weighted by NPMI of co-occurrence across `recipes`.
pub fn cooccurrence_graph(num_ingredients: usize, recipes: &[Vec<usize>]) -> Result<FlavorGraph> {
    let mut marginals = vec![0u64; num_ingredients];
    let mut pairs: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for recipe in recipes {
        let mut items = recipe.clone();
        items.sort_unstable();
        items.dedup();
        for (i, &u) in items.iter().enumerate() {
            marginals[u] += 1;
            for &v in &items[i + 1..] {
                *pairs.entry((u, v)).or_default() += 1;
            }
        }
    }
    let edges = npmi_weights(&pairs, &marginals, recipes.len() as u64)?;
    FlavorGraph::from_edges(num_ingredients, 0, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_graph_is_seeded() {
        let a = random_graph(15, 5, 0.3, &mut ChaCha8Rng::seed_from_u64(3));
        let b = random_graph(15, 5, 0.3, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        assert_eq!(a.node_count(), 20);
    }

    #[test]
    fn cooccurrence_keeps_only_positive_npmi() {
        // 0 and 1 always together; 2 appears alone.
        let recipes = vec![vec![0, 1], vec![0, 1], vec![2], vec![2, 3]];
        let g = cooccurrence_graph(4, &recipes).unwrap();
        let n0: Vec<_> = g.neighbors(0).unwrap().collect();
        assert_eq!(n0.len(), 1);
        assert_eq!(n0[0].0, 1);
        assert!(n0[0].1 > 0.0 && n0[0].1 <= 1.0);
    }
}
