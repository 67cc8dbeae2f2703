use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use super::config::{ContextMode, GismoConfig};
use crate::corpus::{IngredientId, Recipe};
use crate::error::{Error, Result};
use crate::eval::{QueryContext, Scorer};
use crate::graph::FlavorGraph;
use crate::numerics::{Matrix, ParamId, ParamStore, Tape, Var};

/// `y = x W + b` with `W` stored as `in x out`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

/// One GIN layer: `f((1 + eps) h_v + sum_u w_vu h_u)` with `f` = linear, relu, dropout, linear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GinLayer {
    pub eps: ParamId,
    pub hidden: Linear,
    pub output: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GismoParameters {
    pub store: ParamStore,
    pub node_embeddings: ParamId,
    pub gin: Vec<GinLayer>,
    pub decoder: Vec<Linear>,
}

/// A training or evaluation tuple with its contrast candidates.
#[derive(Debug, Clone)]
pub struct ScoredTuple<'r> {
    pub source: IngredientId,
    /// The positive target first, then the negatives.
    pub candidates: Vec<IngredientId>,
    pub recipe: &'r Recipe,
}

/// The substitution model: node embeddings, GIN encoder, context encoder and
/// pairwise decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Gismo {
    pub config: GismoConfig,
    pub params: GismoParameters,
    node_count: usize,
    num_ingredients: usize,
    /// Injected features the embeddings are pulled back toward when fine-tuned.
    feature_anchor: Option<Arc<Matrix>>,
}

fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * limit)
        .collect();
    Matrix::from_vec(rows, cols, data).expect("sized buffer")
}

fn add_linear<R: Rng + ?Sized>(
    store: &mut ParamStore,
    prefix: &str,
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Linear {
    Linear {
        weight: store.add(format!("{prefix}.weight"), glorot(fan_in, fan_out, rng)),
        bias: store.add(format!("{prefix}.bias"), Matrix::zeros(1, fan_out)),
    }
}

impl Gismo {
    /// Fresh model sized for `graph`, initialized from `rng`.
    pub fn new<R: Rng + ?Sized>(config: GismoConfig, graph: &FlavorGraph, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let node_count = graph.node_count();
        let f = config.feature_dim;
        let d = config.embed_dim;
        let mut store = ParamStore::new();

        let emb: Vec<f64> = (0..node_count * f)
            .map(|_| StandardNormal.sample(rng))
            .collect();
        let node_embeddings = store.add("node_embeddings", Matrix::from_vec(node_count, f, emb)?);

        let mut gin = Vec::new();
        if config.use_graph {
            for l in 0..config.gin_layers {
                let fan_in = if l == 0 { f } else { d };
                let eps = store.add(format!("gin.{l}.eps"), Matrix::scalar(0.0));
                let hidden = add_linear(&mut store, &format!("gin.{l}.hidden"), fan_in, d, rng);
                let output = add_linear(&mut store, &format!("gin.{l}.output"), d, d, rng);
                gin.push(GinLayer { eps, hidden, output });
            }
        }

        let mut widths = vec![config.decoder_input_dim()];
        widths.extend(std::iter::repeat_n(config.decoder_hidden, config.decoder_layers - 1));
        widths.push(1);
        let decoder = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| add_linear(&mut store, &format!("decoder.{i}"), w[0], w[1], rng))
            .collect();

        Ok(Gismo {
            config,
            params: GismoParameters {
                store,
                node_embeddings,
                gin,
                decoder,
            },
            node_count,
            num_ingredients: graph.num_ingredients(),
            feature_anchor: None,
        })
    }

    pub(crate) fn from_parts(
        config: GismoConfig,
        params: GismoParameters,
        node_count: usize,
        num_ingredients: usize,
    ) -> Self {
        Gismo {
            config,
            params,
            node_count,
            num_ingredients,
            feature_anchor: None,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn num_ingredients(&self) -> usize {
        self.num_ingredients
    }

    pub(crate) fn set_feature_anchor(&mut self, anchor: Option<Arc<Matrix>>) {
        self.feature_anchor = anchor;
    }

    pub fn feature_anchor(&self) -> Option<&Matrix> {
        self.feature_anchor.as_deref()
    }

    /// Replaces the initial node features with externally computed ones.
    ///
    /// `features` covers either every node or only the ingredient nodes; the
    /// remaining rows keep their learned embeddings. With `freeze_features` the
    /// injected rows are excluded from optimization, otherwise they are
    /// fine-tuned with an L2 pull-back of weight `feature_l2`.
    pub fn inject_features(&mut self, features: &Matrix) -> Result<()> {
        let f = self.config.feature_dim;
        if features.cols() != f
            || (features.rows() != self.node_count && features.rows() != self.num_ingredients)
        {
            return Err(Error::Shape(format!(
                "injected features are {}x{}, expected {}x{f} or {}x{f}",
                features.rows(),
                features.cols(),
                self.node_count,
                self.num_ingredients
            )));
        }
        let p = self.params.store.get_mut(self.params.node_embeddings);
        p.value.data_mut()[..features.data().len()].copy_from_slice(features.data());
        if self.config.freeze_features {
            let mut mask = vec![false; self.node_count];
            mask[..features.rows()].iter_mut().for_each(|m| *m = true);
            p.frozen_rows = Some(mask);
            self.feature_anchor = None;
        } else {
            p.frozen_rows = None;
            self.feature_anchor = Some(Arc::new(features.clone()));
        }
        Ok(())
    }

    fn linear<'a>(&self, tape: &mut Tape<'a>, x: Var, lin: Linear) -> Result<Var> {
        let w = tape.param(&self.params.store, lin.weight);
        let b = tape.param(&self.params.store, lin.bias);
        let z = tape.matmul(x, w)?;
        tape.add_row(z, b)
    }

    /// Records the ingredient encoder; returns the `node_count x encoded_dim` matrix.
    pub fn encode_on_tape<'a, R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<'a>,
        graph: &'a FlavorGraph,
        rng: &mut R,
        training: bool,
    ) -> Result<Var> {
        if graph.node_count() != self.node_count {
            return Err(Error::Shape(format!(
                "model built for {} nodes, graph has {}",
                self.node_count,
                graph.node_count()
            )));
        }
        let rate = if self.config.dropout_in_encoder { self.config.dropout } else { 0.0 };
        let mut h = tape.param(&self.params.store, self.params.node_embeddings);
        for layer in &self.params.gin {
            let eps = tape.param(&self.params.store, layer.eps);
            let own = tape.one_plus_scale(eps, h)?;
            let neigh = tape.sparse_aggregate(graph, h)?;
            let m = tape.add(own, neigh)?;
            let z = self.linear(tape, m, layer.hidden)?;
            let z = tape.relu(z);
            let z = tape.dropout(z, rate, rng, training)?;
            h = self.linear(tape, z, layer.output)?;
        }
        Ok(h)
    }

    /// Records the context rows (one per tuple) for the configured mode.
    fn context_on_tape(&self, tape: &mut Tape<'_>, h: Var, tuples: &[ScoredTuple<'_>]) -> Result<Option<Var>> {
        let ingredients = |tape: &mut Tape<'_>| {
            let segments = tuples
                .iter()
                .map(|t| t.recipe.ingredients.iter().map(|i| i.index()).collect())
                .collect();
            tape.segment_mean(h, segments)
        };
        let title = |tape: &mut Tape<'_>| -> Result<Var> {
            let rows = tuples
                .iter()
                .map(|t| self.title_vector(t.recipe).map(<[f64]>::to_vec))
                .collect::<Result<Vec<_>>>()?;
            Ok(tape.constant(Matrix::from_rows(&rows)?))
        };
        Ok(match self.config.context_mode {
            ContextMode::None => None,
            ContextMode::Ingredients => Some(ingredients(tape)?),
            ContextMode::Title => Some(title(tape)?),
            ContextMode::Both => {
                let a = ingredients(tape)?;
                let b = title(tape)?;
                Some(tape.concat_cols(&[a, b])?)
            }
        })
    }

    fn title_vector<'r>(&self, recipe: &'r Recipe) -> Result<&'r [f64]> {
        let v = recipe.title_embedding.as_deref().ok_or_else(|| {
            Error::InvalidArgument(format!("recipe {} has no title embedding", recipe.recipe_id))
        })?;
        if v.len() != self.config.title_dim {
            return Err(Error::Shape(format!(
                "title embedding of recipe {} has {} values, expected {}",
                recipe.recipe_id,
                v.len(),
                self.config.title_dim
            )));
        }
        Ok(v)
    }

    /// Records decoder scores as a `tuples x candidates` matrix.
    pub fn scores_on_tape<'a, R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<'a>,
        h: Var,
        tuples: &[ScoredTuple<'_>],
        rng: &mut R,
        training: bool,
    ) -> Result<Var> {
        let k = tuples.first().map_or(0, |t| t.candidates.len());
        if k == 0 || tuples.iter().any(|t| t.candidates.len() != k) {
            return Err(Error::InvalidArgument(
                "every tuple needs the same non-zero number of candidates".into(),
            ));
        }
        for t in tuples {
            for &v in &t.candidates {
                self.check_candidate(t.source, v)?;
            }
        }
        let mut src_rows = Vec::with_capacity(tuples.len() * k);
        let mut cand_rows = Vec::with_capacity(tuples.len() * k);
        let mut ctx_rows = Vec::with_capacity(tuples.len() * k);
        for (b, t) in tuples.iter().enumerate() {
            for &v in &t.candidates {
                src_rows.push(t.source.index());
                cand_rows.push(v.index());
                ctx_rows.push(b);
            }
        }
        let hs = tape.gather_rows(h, src_rows)?;
        let hv = tape.gather_rows(h, cand_rows)?;
        let mut parts = vec![hs, hv];
        if let Some(ctx) = self.context_on_tape(tape, h, tuples)? {
            parts.push(tape.gather_rows(ctx, ctx_rows)?);
        }
        let mut x = tape.concat_cols(&parts)?;

        let rate = if self.config.dropout_in_decoder { self.config.dropout } else { 0.0 };
        let last = self.params.decoder.len() - 1;
        for (i, lin) in self.params.decoder.iter().enumerate() {
            x = self.linear(tape, x, *lin)?;
            if i < last {
                x = tape.relu(x);
                x = tape.dropout(x, rate, rng, training)?;
            }
        }
        tape.reshape(x, tuples.len(), k)
    }

    /// Full training objective for a batch: mean contrastive loss plus the
    /// feature pull-back when injected features are fine-tuned.
    pub fn batch_loss<'a, R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<'a>,
        graph: &'a FlavorGraph,
        tuples: &[ScoredTuple<'_>],
        rng: &mut R,
        training: bool,
    ) -> Result<Var> {
        let h = self.encode_on_tape(tape, graph, rng, training)?;
        let scores = self.scores_on_tape(tape, h, tuples, rng, training)?;
        let mut loss = tape.contrastive_loss(scores)?;
        if let Some(anchor) = &self.feature_anchor {
            if self.config.feature_l2 > 0.0 {
                let emb = tape.param(&self.params.store, self.params.node_embeddings);
                let pull = tape.sq_dist_rows(emb, anchor.clone(), self.config.feature_l2)?;
                loss = tape.add(loss, pull)?;
            }
        }
        Ok(loss)
    }

    fn check_candidate(&self, source: IngredientId, v: IngredientId) -> Result<()> {
        if v.index() >= self.num_ingredients {
            return Err(Error::InvalidArgument(format!(
                "node {v} is not an ingredient and cannot be a substitute"
            )));
        }
        if source.index() >= self.num_ingredients {
            return Err(Error::InvalidArgument(format!("source {source} is not an ingredient")));
        }
        if v == source {
            return Err(Error::InvalidArgument(format!(
                "candidate {v} equals the source ingredient"
            )));
        }
        Ok(())
    }

    /// Inference-mode encoder output (dropout off).
    pub fn encode(&self, graph: &FlavorGraph) -> Result<Matrix> {
        let mut tape = Tape::new();
        // dropout is off, so the generator is never drawn from
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let h = self.encode_on_tape(&mut tape, graph, &mut rng, false)?;
        Ok(tape.value(h).clone())
    }

    /// Context vector of `recipe` given encoded rows `h`.
    pub fn encode_context(&self, h: &Matrix, recipe: &Recipe) -> Result<Vec<f64>> {
        mean_context(h, &recipe.ingredients, self.config.context_mode, || self.title_vector(recipe))
    }

    /// `phi(s, v, r)` for one pair, with `context` from [`Gismo::encode_context`].
    pub fn score(&self, h: &Matrix, source: IngredientId, candidate: IngredientId, context: &[f64]) -> Result<f64> {
        self.check_candidate(source, candidate)?;
        if context.len() != self.config.context_dim() {
            return Err(Error::Shape(format!(
                "context has {} values, expected {}",
                context.len(),
                self.config.context_dim()
            )));
        }
        let mut x = Vec::with_capacity(self.config.decoder_input_dim());
        x.extend_from_slice(h.row(source.index()));
        x.extend_from_slice(h.row(candidate.index()));
        x.extend_from_slice(context);
        let mut x = Matrix::from_vec(1, x.len(), x)?;
        let last = self.params.decoder.len() - 1;
        for (i, lin) in self.params.decoder.iter().enumerate() {
            x = self.apply_linear(&x, *lin)?;
            if i < last {
                x.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        Ok(x.item())
    }

    fn apply_linear(&self, x: &Matrix, lin: Linear) -> Result<Matrix> {
        let mut z = x.matmul(self.params.store.value(lin.weight))?;
        let b = self.params.store.value(lin.bias);
        for r in 0..z.rows() {
            for (o, bb) in z.row_mut(r).iter_mut().zip(b.data()) {
                *o += bb;
            }
        }
        Ok(z)
    }

    /// Encodes the graph once and returns a scorer for all ingredient candidates.
    pub fn prepare(&self, graph: &FlavorGraph) -> Result<PreparedScorer<'_>> {
        let h = self.encode(graph)?;
        let dim = self.config.encoded_dim();
        let first = self.params.decoder[0];
        let w1 = self.params.store.value(first.weight);
        let ingredient_rows = h.slice_rows(0, self.num_ingredients);
        let candidate_proj = ingredient_rows.matmul(&w1.slice_rows(dim, 2 * dim))?;
        Ok(PreparedScorer {
            model: self,
            source_weight: w1.slice_rows(0, dim),
            context_weight: w1.slice_rows(2 * dim, w1.rows()),
            candidate_proj,
            h,
        })
    }
}

pub(crate) fn mean_context<'t>(
    h: &Matrix,
    ingredients: &[IngredientId],
    mode: ContextMode,
    title: impl FnOnce() -> Result<&'t [f64]>,
) -> Result<Vec<f64>> {
    let mean = || -> Result<Vec<f64>> {
        if ingredients.is_empty() {
            return Err(Error::InvalidArgument("context over an empty ingredient set".into()));
        }
        let mut out = vec![0.0; h.cols()];
        let inv = 1.0 / ingredients.len() as f64;
        for id in ingredients {
            for (o, v) in out.iter_mut().zip(h.row(id.index())) {
                *o += v * inv;
            }
        }
        Ok(out)
    };
    Ok(match mode {
        ContextMode::None => Vec::new(),
        ContextMode::Ingredients => mean()?,
        ContextMode::Title => title()?.to_vec(),
        ContextMode::Both => {
            let mut v = mean()?;
            v.extend_from_slice(title()?);
            v
        }
    })
}

/// Scores every ingredient for a query with the first decoder layer split into
/// source, candidate and context blocks, so candidate projections are shared.
pub struct PreparedScorer<'m> {
    model: &'m Gismo,
    h: Matrix,
    source_weight: Matrix,
    context_weight: Matrix,
    candidate_proj: Matrix,
}

impl PreparedScorer<'_> {
    pub fn encoded(&self) -> &Matrix {
        &self.h
    }

    /// Scores for every ingredient id; the source entry is `NEG_INFINITY`.
    pub fn score_all(&self, source: IngredientId, recipe: &Recipe) -> Result<Vec<f64>> {
        let m = self.model;
        if source.index() >= m.num_ingredients {
            return Err(Error::InvalidArgument(format!("source {source} is not an ingredient")));
        }
        let context = m.encode_context(&self.h, recipe)?;
        let src = Matrix::from_vec(1, self.h.cols(), self.h.row(source.index()).to_vec())?;
        let mut shift = src.matmul(&self.source_weight)?;
        if !context.is_empty() {
            let c = Matrix::from_vec(1, context.len(), context)?;
            shift.add_assign(&c.matmul(&self.context_weight)?);
        }
        let first = m.params.decoder[0];
        shift.add_assign(m.params.store.value(first.bias));

        let mut x = self.candidate_proj.clone();
        for r in 0..x.rows() {
            for (o, s) in x.row_mut(r).iter_mut().zip(shift.data()) {
                *o += s;
            }
        }
        for lin in &m.params.decoder[1..] {
            x.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
            x = m.apply_linear(&x, *lin)?;
        }
        let mut scores = x.into_data();
        scores[source.index()] = f64::NEG_INFINITY;
        Ok(scores)
    }

    /// Ranked `(candidate, score)` pairs, best first; ties go to the smaller id.
    pub fn suggest(&self, source: IngredientId, recipe: &Recipe, top_k: usize) -> Result<Vec<(IngredientId, f64)>> {
        if top_k == 0 {
            return Err(Error::InvalidArgument("top_k must be positive".into()));
        }
        if !recipe.contains(source) {
            return Err(Error::InvalidArgument(format!(
                "source {source} is not in recipe {}",
                recipe.recipe_id
            )));
        }
        let scores = self.score_all(source, recipe)?;
        let mut ranked: Vec<(IngredientId, f64)> = scores
            .into_iter()
            .enumerate()
            .filter(|(i, _)| *i != source.index())
            .map(|(i, s)| (IngredientId::from_index(i), s))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(top_k);
        Ok(ranked)
    }
}

impl Scorer for PreparedScorer<'_> {
    fn score_candidates(&self, query: &QueryContext<'_>) -> Result<Vec<f64>> {
        self.score_all(query.source, query.recipe)
    }
}
