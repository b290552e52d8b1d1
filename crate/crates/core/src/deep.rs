//! Twin-branch neural feedback decider.
//!
//! Each branch encodes a query together with its top-k documents:
//!
//! 1. every (query, document) pair is mapped to a vector in R^p by the pair
//!    encoder: mean-pooled query and document embeddings, their elementwise
//!    product and three overlap statistics, projected through `tanh`;
//! 2. an LSTM reads the k pair vectors in rank order and its final hidden
//!    state (R^h) is the branch encoding.
//!
//! Both branches (original query and expanded query) share every encoder and
//! aggregator parameter. A linear head over the concatenation of the two
//! branch encodings followed by a sigmoid gives `theta`. At inference only
//! the original-query branch is available, so the expanded half of the
//! concatenation is the zero vector. Training zero-masks that half with
//! probability `branch_dropout` per instance and epoch, which teaches the head
//! the inference regime.
//!
//! Training minimizes the mean squared error between `theta` and the label by
//! full-batch gradient descent; gradients are computed by hand-written
//! backpropagation through the head, the LSTM and the pair encoder.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decision::{sigmoid, DecisionMethod, DecisionOutcome};
use crate::error::{Error, Result};
use crate::index::{ByteReader, ByteWriter};

/// Vocabulary id of the empty-document sentinel. Empty queries use it too.
pub const EMPTY_ID: usize = 0;
/// Vocabulary id shared by all out-of-vocabulary tokens.
pub const UNK_ID: usize = 1;

pub const DECIDER_MAGIC: &[u8; 4] = b"SRFD";
pub const DECIDER_FORMAT_VERSION: u8 = 1;

/// Number of overlap statistics appended to each pair input.
const NUM_STATS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::from_list(Vec::new())
    }
}

impl Vocabulary {
    /// Builds a vocabulary from a token stream, most frequent first (ties in
    /// lexicographic order), keeping at most `max_size` entries including the
    /// two reserved ids.
    pub fn build<'a, I>(tokens: I, max_size: usize) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        ranked.truncate(max_size.saturating_sub(2));
        Self::from_list(ranked.into_iter().map(|(t, _)| t.to_owned()).collect())
    }

    /// Reserved entries followed by `words` in order.
    fn from_list(words: Vec<String>) -> Self {
        let mut tokens = vec!["<empty>".to_owned(), "<unk>".to_owned()];
        tokens.extend(words);
        let ids = tokens.iter().enumerate().skip(2).map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens, ids }
    }

    pub fn id(&self, token: &str) -> usize {
        self.ids.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }
}

/// Layer sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeciderDims {
    pub vocab: usize,
    pub embed: usize,
    pub pair: usize,
    pub hidden: usize,
    /// Document slots per branch.
    pub k: usize,
}

impl DeciderDims {
    /// Pair encoder input width: query mean, doc mean, their product, stats.
    pub fn pair_input(&self) -> usize {
        3 * self.embed + NUM_STATS
    }

    pub fn param_count(&self) -> usize {
        let (v, d, p, h) = (self.vocab, self.embed, self.pair, self.hidden);
        v * d + p * self.pair_input() + p + 4 * h * p + 4 * h * h + 4 * h + 2 * h + 1
    }
}

/// Token embeddings and the pair projection.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEncoderParams {
    /// vocab × embed, row-major.
    pub embeddings: Vec<f64>,
    /// pair × pair_input, row-major.
    pub projection: Vec<f64>,
    pub projection_bias: Vec<f64>,
}

/// LSTM weights, gates stacked as [input | forget | output | candidate].
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatorParams {
    /// 4·hidden × pair.
    pub input_weights: Vec<f64>,
    /// 4·hidden × hidden.
    pub recurrent_weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeciderParams {
    pub vocab: Vocabulary,
    pub dims: DeciderDims,
    pub pair: PairEncoderParams,
    pub aggregator: AggregatorParams,
    /// 2·hidden weights over [original branch | expanded branch].
    pub head: Vec<f64>,
    pub head_bias: f64,
    pub branch_dropout: f64,
}

/// Gradient of the loss with respect to every trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub pair: PairEncoderParams,
    pub aggregator: AggregatorParams,
    pub head: Vec<f64>,
    pub head_bias: f64,
}

pub const TENSOR_NAMES: [&str; 8] = [
    "embeddings",
    "projection",
    "projection_bias",
    "lstm_input",
    "lstm_recurrent",
    "lstm_bias",
    "head",
    "head_bias",
];

impl DeciderParams {
    /// Parameters drawn from uniform(-scale, scale) in declared tensor order.
    pub fn random(vocab: Vocabulary, dims: DeciderDims, branch_dropout: f64, scale: f64, rng: &mut impl Rng) -> Self {
        let dims = DeciderDims {
            vocab: vocab.len(),
            ..dims
        };
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-scale..scale)).collect() };
        let (v, d, p, h) = (dims.vocab, dims.embed, dims.pair, dims.hidden);
        let pair = PairEncoderParams {
            embeddings: draw(v * d),
            projection: draw(p * dims.pair_input()),
            projection_bias: draw(p),
        };
        let aggregator = AggregatorParams {
            input_weights: draw(4 * h * p),
            recurrent_weights: draw(4 * h * h),
            bias: draw(4 * h),
        };
        let head = draw(2 * h);
        let head_bias = draw(1)[0];
        DeciderParams {
            vocab,
            dims,
            pair,
            aggregator,
            head,
            head_bias,
            branch_dropout,
        }
    }

    pub fn tensors(&self) -> [&[f64]; 8] {
        [
            &self.pair.embeddings,
            &self.pair.projection,
            &self.pair.projection_bias,
            &self.aggregator.input_weights,
            &self.aggregator.recurrent_weights,
            &self.aggregator.bias,
            &self.head,
            std::slice::from_ref(&self.head_bias),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 8] {
        [
            &mut self.pair.embeddings,
            &mut self.pair.projection,
            &mut self.pair.projection_bias,
            &mut self.aggregator.input_weights,
            &mut self.aggregator.recurrent_weights,
            &mut self.aggregator.bias,
            &mut self.head,
            std::slice::from_mut(&mut self.head_bias),
        ]
    }

    /// Total number of trainable scalars. Both branches use the same tensors,
    /// so this equals [`DeciderDims::param_count`].
    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn check_shapes(&self) -> Result<()> {
        let expect = Gradients::zeros(&self.dims);
        for ((name, have), want) in TENSOR_NAMES.iter().zip(self.tensors()).zip(expect.tensors()) {
            if have.len() != want.len() {
                return Err(Error::Format(format!(
                    "tensor `{name}` has {} values, dims require {}",
                    have.len(),
                    want.len()
                )));
            }
        }
        if self.vocab.len() != self.dims.vocab {
            return Err(Error::Format("vocabulary size disagrees with dims".into()));
        }
        Ok(())
    }

    fn apply_update(&mut self, grads: &Gradients, learning_rate: f64) {
        for (p, g) in self.tensors_mut().into_iter().zip(grads.tensors()) {
            for (pi, gi) in p.iter_mut().zip(g) {
                *pi -= learning_rate * gi;
            }
        }
    }
}

impl Gradients {
    pub fn zeros(dims: &DeciderDims) -> Self {
        let (v, d, p, h) = (dims.vocab, dims.embed, dims.pair, dims.hidden);
        Gradients {
            pair: PairEncoderParams {
                embeddings: vec![0.0; v * d],
                projection: vec![0.0; p * dims.pair_input()],
                projection_bias: vec![0.0; p],
            },
            aggregator: AggregatorParams {
                input_weights: vec![0.0; 4 * h * p],
                recurrent_weights: vec![0.0; 4 * h * h],
                bias: vec![0.0; 4 * h],
            },
            head: vec![0.0; 2 * h],
            head_bias: 0.0,
        }
    }

    pub fn tensors(&self) -> [&[f64]; 8] {
        [
            &self.pair.embeddings,
            &self.pair.projection,
            &self.pair.projection_bias,
            &self.aggregator.input_weights,
            &self.aggregator.recurrent_weights,
            &self.aggregator.bias,
            &self.head,
            std::slice::from_ref(&self.head_bias),
        ]
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

/// One supervised example: both branches' inputs plus the label.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingInstance {
    pub query: Vec<String>,
    pub docs: Vec<Vec<String>>,
    pub expanded_query: Vec<String>,
    pub expanded_docs: Vec<Vec<String>>,
    pub label: u8,
}

impl TrainingInstance {
    /// Pads (with empty documents) or truncates both document sets to `k`.
    pub fn new(
        query: Vec<String>,
        docs: Vec<Vec<String>>,
        expanded_query: Vec<String>,
        expanded_docs: Vec<Vec<String>>,
        label: u8,
        k: usize,
    ) -> Self {
        TrainingInstance {
            query,
            docs: pad_slots(docs, k),
            expanded_query,
            expanded_docs: pad_slots(expanded_docs, k),
            label,
        }
    }
}

/// Truncates to `k` documents or pads with the empty-document sentinel.
pub fn pad_slots(mut docs: Vec<Vec<String>>, k: usize) -> Vec<Vec<String>> {
    docs.truncate(k);
    docs.resize(k, Vec::new());
    docs
}

// ---------------------------------------------------------------------------
// Dense helpers (row-major matrices stored as flat slices)
// ---------------------------------------------------------------------------

/// y = W x + b
fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    b.iter()
        .enumerate()
        .map(|(r, bias)| bias + w[r * cols..(r + 1) * cols].iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
        .collect()
}

/// y += W x (no bias)
fn matvec_acc(w: &[f64], x: &[f64], y: &mut [f64]) {
    let cols = x.len();
    for (r, yr) in y.iter_mut().enumerate() {
        *yr += w[r * cols..(r + 1) * cols].iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
    }
}

/// out += Wᵀ g
fn matvec_t_acc(w: &[f64], g: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (r, gr) in g.iter().enumerate() {
        if *gr == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
            *o += gr * a;
        }
    }
}

/// G += g xᵀ
fn outer_acc(grad: &mut [f64], g: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, gr) in g.iter().enumerate() {
        if *gr == 0.0 {
            continue;
        }
        for (o, xc) in grad[r * cols..(r + 1) * cols].iter_mut().zip(x) {
            *o += gr * xc;
        }
    }
}

// ---------------------------------------------------------------------------
// Pair encoder
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct PreparedDoc {
    ids: Vec<usize>,
    stats: [f64; NUM_STATS],
}

#[derive(Debug, Clone)]
struct PreparedBranch {
    query_ids: Vec<usize>,
    docs: Vec<PreparedDoc>,
}

#[derive(Debug, Clone)]
struct PreparedInstance {
    original: PreparedBranch,
    expanded: PreparedBranch,
    label: f64,
}

/// Query coverage, document density and an empty-document flag, computed on
/// the raw tokens.
fn overlap_stats(query: &[String], doc: &[String]) -> [f64; NUM_STATS] {
    if doc.is_empty() {
        return [0.0, 0.0, 1.0];
    }
    let doc_set: HashSet<&str> = doc.iter().map(String::as_str).collect();
    let query_set: HashSet<&str> = query.iter().map(String::as_str).collect();
    let coverage = if query.is_empty() {
        0.0
    } else {
        query.iter().filter(|t| doc_set.contains(t.as_str())).count() as f64 / query.len() as f64
    };
    let density = doc.iter().filter(|t| query_set.contains(t.as_str())).count() as f64 / doc.len() as f64;
    [coverage, density, 0.0]
}

fn prepare_branch(vocab: &Vocabulary, query: &[String], docs: &[Vec<String>]) -> PreparedBranch {
    PreparedBranch {
        query_ids: query.iter().map(|t| vocab.id(t)).collect(),
        docs: docs
            .iter()
            .map(|d| PreparedDoc {
                ids: d.iter().map(|t| vocab.id(t)).collect(),
                stats: overlap_stats(query, d),
            })
            .collect(),
    }
}

fn prepare_instance(vocab: &Vocabulary, inst: &TrainingInstance) -> PreparedInstance {
    PreparedInstance {
        original: prepare_branch(vocab, &inst.query, &inst.docs),
        expanded: prepare_branch(vocab, &inst.expanded_query, &inst.expanded_docs),
        label: f64::from(inst.label),
    }
}

/// Mean embedding of `ids`; the sentinel row when `ids` is empty.
fn mean_embedding(params: &DeciderParams, ids: &[usize]) -> Vec<f64> {
    let d = params.dims.embed;
    let emb = &params.pair.embeddings;
    if ids.is_empty() {
        return emb[EMPTY_ID * d..(EMPTY_ID + 1) * d].to_vec();
    }
    let mut out = vec![0.0; d];
    for &id in ids {
        for (o, e) in out.iter_mut().zip(&emb[id * d..(id + 1) * d]) {
            *o += e;
        }
    }
    let n = ids.len() as f64;
    out.iter_mut().for_each(|v| *v /= n);
    out
}

fn embedding_backward(grads: &mut Gradients, d: usize, ids: &[usize], g: &[f64]) {
    let emb = &mut grads.pair.embeddings;
    if ids.is_empty() {
        for (o, gi) in emb[EMPTY_ID * d..(EMPTY_ID + 1) * d].iter_mut().zip(g) {
            *o += gi;
        }
        return;
    }
    let scale = 1.0 / ids.len() as f64;
    for &id in ids {
        for (o, gi) in emb[id * d..(id + 1) * d].iter_mut().zip(g) {
            *o += gi * scale;
        }
    }
}

#[derive(Debug, Clone)]
struct PairCache {
    input: Vec<f64>,
    output: Vec<f64>,
}

fn pair_forward(params: &DeciderParams, query_ids: &[usize], doc: &PreparedDoc) -> PairCache {
    let qbar = mean_embedding(params, query_ids);
    let dbar = mean_embedding(params, &doc.ids);
    let mut input = Vec::with_capacity(params.dims.pair_input());
    input.extend_from_slice(&qbar);
    input.extend_from_slice(&dbar);
    input.extend(qbar.iter().zip(&dbar).map(|(a, b)| a * b));
    input.extend_from_slice(&doc.stats);
    let output = affine(&params.pair.projection, &params.pair.projection_bias, &input)
        .into_iter()
        .map(f64::tanh)
        .collect();
    PairCache { input, output }
}

fn pair_backward(
    params: &DeciderParams,
    query_ids: &[usize],
    doc: &PreparedDoc,
    cache: &PairCache,
    d_output: &[f64],
    grads: &mut Gradients,
) {
    let d = params.dims.embed;
    let dz: Vec<f64> = d_output
        .iter()
        .zip(&cache.output)
        .map(|(g, u)| g * (1.0 - u * u))
        .collect();
    outer_acc(&mut grads.pair.projection, &dz, &cache.input);
    for (b, g) in grads.pair.projection_bias.iter_mut().zip(&dz) {
        *b += g;
    }
    let mut dx = vec![0.0; cache.input.len()];
    matvec_t_acc(&params.pair.projection, &dz, &mut dx);
    let (qbar, rest) = cache.input.split_at(d);
    let dbar = &rest[..d];
    let d_prod = &dx[2 * d..3 * d];
    let d_qbar: Vec<f64> = (0..d).map(|i| dx[i] + d_prod[i] * dbar[i]).collect();
    let d_dbar: Vec<f64> = (0..d).map(|i| dx[d + i] + d_prod[i] * qbar[i]).collect();
    embedding_backward(grads, d, query_ids, &d_qbar);
    embedding_backward(grads, d, &doc.ids, &d_dbar);
}

// ---------------------------------------------------------------------------
// Recurrent aggregator
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct StepCache {
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[derive(Debug, Clone)]
struct BranchCache {
    pairs: Vec<PairCache>,
    steps: Vec<StepCache>,
    h: Vec<f64>,
}

fn branch_forward(params: &DeciderParams, branch: &PreparedBranch) -> BranchCache {
    let h = params.dims.hidden;
    let agg = &params.aggregator;
    let mut h_t = vec![0.0; h];
    let mut c_t = vec![0.0; h];
    let mut pairs = Vec::with_capacity(branch.docs.len());
    let mut steps = Vec::with_capacity(branch.docs.len());
    for doc in &branch.docs {
        let pair = pair_forward(params, &branch.query_ids, doc);
        let mut a = affine(&agg.input_weights, &agg.bias, &pair.output);
        matvec_acc(&agg.recurrent_weights, &h_t, &mut a);
        for v in &mut a[..3 * h] {
            *v = sigmoid(*v);
        }
        for v in &mut a[3 * h..] {
            *v = v.tanh();
        }
        let (i, f, o, g) = (&a[..h], &a[h..2 * h], &a[2 * h..3 * h], &a[3 * h..]);
        let c_next: Vec<f64> = (0..h).map(|j| f[j] * c_t[j] + i[j] * g[j]).collect();
        let tanh_c: Vec<f64> = c_next.iter().map(|c| c.tanh()).collect();
        let h_next: Vec<f64> = (0..h).map(|j| o[j] * tanh_c[j]).collect();
        steps.push(StepCache {
            h_prev: std::mem::replace(&mut h_t, h_next),
            c_prev: std::mem::replace(&mut c_t, c_next),
            gates: a,
            tanh_c,
        });
        pairs.push(pair);
    }
    BranchCache { pairs, steps, h: h_t }
}

fn branch_backward(
    params: &DeciderParams,
    branch: &PreparedBranch,
    cache: &BranchCache,
    d_h_final: &[f64],
    grads: &mut Gradients,
) {
    let h = params.dims.hidden;
    let agg = &params.aggregator;
    let mut dh = d_h_final.to_vec();
    let mut dc = vec![0.0; h];
    for t in (0..cache.steps.len()).rev() {
        let step = &cache.steps[t];
        let a = &step.gates;
        let (i, f, o, g) = (&a[..h], &a[h..2 * h], &a[2 * h..3 * h], &a[3 * h..]);
        let mut da = vec![0.0; 4 * h];
        for j in 0..h {
            let tc = step.tanh_c[j];
            let d_o = dh[j] * tc;
            dc[j] += dh[j] * o[j] * (1.0 - tc * tc);
            let d_i = dc[j] * g[j];
            let d_g = dc[j] * i[j];
            let d_f = dc[j] * step.c_prev[j];
            da[j] = d_i * i[j] * (1.0 - i[j]);
            da[h + j] = d_f * f[j] * (1.0 - f[j]);
            da[2 * h + j] = d_o * o[j] * (1.0 - o[j]);
            da[3 * h + j] = d_g * (1.0 - g[j] * g[j]);
            dc[j] *= f[j];
        }
        let pair = &cache.pairs[t];
        outer_acc(&mut grads.aggregator.input_weights, &da, &pair.output);
        outer_acc(&mut grads.aggregator.recurrent_weights, &da, &step.h_prev);
        for (b, g) in grads.aggregator.bias.iter_mut().zip(&da) {
            *b += g;
        }
        let mut d_pair = vec![0.0; params.dims.pair];
        matvec_t_acc(&agg.input_weights, &da, &mut d_pair);
        let mut dh_prev = vec![0.0; h];
        matvec_t_acc(&agg.recurrent_weights, &da, &mut dh_prev);
        dh = dh_prev;
        pair_backward(params, &branch.query_ids, &branch.docs[t], pair, &d_pair, grads);
    }
}

// ---------------------------------------------------------------------------
// Head
// ---------------------------------------------------------------------------

/// Head logit over [original | expanded]; `None` stands for the zero half.
fn head_logit(params: &DeciderParams, original: &[f64], expanded: Option<&[f64]>) -> f64 {
    let h = params.dims.hidden;
    let mut z = params.head_bias;
    z += params.head[..h].iter().zip(original).map(|(w, x)| w * x).sum::<f64>();
    if let Some(e) = expanded {
        z += params.head[h..].iter().zip(e).map(|(w, x)| w * x).sum::<f64>();
    }
    z
}

// ---------------------------------------------------------------------------
// Public forward passes
// ---------------------------------------------------------------------------

/// Pair vector in R^p for one (query, document) pair.
pub fn encode_pair(query: &[String], doc: &[String], params: &DeciderParams) -> Vec<f64> {
    let vocab = &params.vocab;
    let prepared = PreparedDoc {
        ids: doc.iter().map(|t| vocab.id(t)).collect(),
        stats: overlap_stats(query, doc),
    };
    let query_ids: Vec<usize> = query.iter().map(|t| vocab.id(t)).collect();
    pair_forward(params, &query_ids, &prepared).output
}

fn check_slots(docs: &[Vec<String>], k: usize) -> Result<()> {
    if docs.len() != k {
        return Err(Error::SlotCount {
            expected: k,
            got: docs.len(),
        });
    }
    Ok(())
}

/// Branch encoding in R^h of a query and exactly `k` ranked documents.
pub fn encode_branch(query: &[String], docs: &[Vec<String>], params: &DeciderParams) -> Result<Vec<f64>> {
    check_slots(docs, params.dims.k)?;
    let branch = prepare_branch(&params.vocab, query, docs);
    Ok(branch_forward(params, &branch).h)
}

/// The head input [E(original) ; E(expanded)] used in training.
pub fn merged_vector(instance: &TrainingInstance, params: &DeciderParams) -> Result<Vec<f64>> {
    let mut v = encode_branch(&instance.query, &instance.docs, params)?;
    v.extend(encode_branch(&instance.expanded_query, &instance.expanded_docs, params)?);
    Ok(v)
}

/// Training-time prediction with both branches merged.
pub fn forward_train(instance: &TrainingInstance, params: &DeciderParams) -> Result<f64> {
    let merged = merged_vector(instance, params)?;
    let h = params.dims.hidden;
    Ok(sigmoid(head_logit(params, &merged[..h], Some(&merged[h..]))))
}

/// Inference from the original-query branch alone.
pub fn forward_infer(
    query_id: &str,
    query: &[String],
    docs: &[Vec<String>],
    params: &DeciderParams,
) -> Result<DecisionOutcome> {
    let encoded = encode_branch(query, docs, params)?;
    let theta = sigmoid(head_logit(params, &encoded, None));
    Ok(DecisionOutcome {
        query_id: query_id.to_owned(),
        theta,
        apply_prf: theta > 0.5,
        method: DecisionMethod::DeepSrf,
    })
}

/// [`forward_infer`] on a training instance; only the original branch is read.
pub fn infer_instance(instance: &TrainingInstance, params: &DeciderParams) -> Result<DecisionOutcome> {
    forward_infer("", &instance.query, &instance.docs, params)
}

// ---------------------------------------------------------------------------
// Loss, gradients, training
// ---------------------------------------------------------------------------

struct BatchPass {
    /// MSE under the given masks.
    loss: f64,
    /// MSE averaged over the dropout distribution.
    expected_loss: f64,
    grads: Gradients,
}

fn batch_pass(params: &DeciderParams, data: &[PreparedInstance], masks: &[bool]) -> BatchPass {
    let h = params.dims.hidden;
    let n = data.len() as f64;
    let rate = params.branch_dropout;
    let mut grads = Gradients::zeros(&params.dims);
    let mut loss = 0.0;
    let mut expected_loss = 0.0;
    for (inst, &masked) in data.iter().zip(masks) {
        let orig = branch_forward(params, &inst.original);
        let exp = branch_forward(params, &inst.expanded);
        let theta_full = sigmoid(head_logit(params, &orig.h, Some(&exp.h)));
        let theta_infer = sigmoid(head_logit(params, &orig.h, None));
        expected_loss += (1.0 - rate) * (theta_full - inst.label).powi(2) + rate * (theta_infer - inst.label).powi(2);

        let theta = if masked { theta_infer } else { theta_full };
        let err = theta - inst.label;
        loss += err * err;
        let ds = 2.0 * err * theta * (1.0 - theta) / n;
        grads.head_bias += ds;
        for j in 0..h {
            grads.head[j] += ds * orig.h[j];
        }
        let d_orig: Vec<f64> = params.head[..h].iter().map(|w| ds * w).collect();
        branch_backward(params, &inst.original, &orig, &d_orig, &mut grads);
        if !masked {
            for j in 0..h {
                grads.head[h + j] += ds * exp.h[j];
            }
            let d_exp: Vec<f64> = params.head[h..].iter().map(|w| ds * w).collect();
            branch_backward(params, &inst.expanded, &exp, &d_exp, &mut grads);
        }
    }
    BatchPass {
        loss: loss / n,
        expected_loss: expected_loss / n,
        grads,
    }
}

fn validate_dataset(dataset: &[TrainingInstance], k: usize) -> Result<()> {
    for inst in dataset {
        check_slots(&inst.docs, k)?;
        check_slots(&inst.expanded_docs, k)?;
    }
    Ok(())
}

/// Mean squared error and its gradient with fixed masks (`true` zeroes the
/// expanded half for that instance).
pub fn loss_and_gradient(
    params: &DeciderParams,
    dataset: &[TrainingInstance],
    masks: &[bool],
) -> Result<(f64, Gradients)> {
    validate_dataset(dataset, params.dims.k)?;
    if masks.len() != dataset.len() {
        return Err(Error::param("masks", "one mask per instance"));
    }
    let data: Vec<PreparedInstance> = dataset.iter().map(|i| prepare_instance(&params.vocab, i)).collect();
    let pass = batch_pass(params, &data, masks);
    Ok((pass.loss, pass.grads))
}

/// Mean squared error with fixed masks.
pub fn masked_loss(params: &DeciderParams, dataset: &[TrainingInstance], masks: &[bool]) -> Result<f64> {
    Ok(loss_and_gradient(params, dataset, masks)?.0)
}

/// Training objective averaged over branch dropout:
/// mean of (1 - r)·(theta_full - y)² + r·(theta_infer - y)².
pub fn expected_loss(params: &DeciderParams, dataset: &[TrainingInstance]) -> Result<f64> {
    validate_dataset(dataset, params.dims.k)?;
    let data: Vec<PreparedInstance> = dataset.iter().map(|i| prepare_instance(&params.vocab, i)).collect();
    Ok(batch_pass(params, &data, &vec![false; data.len()]).expected_loss)
}

/// Fraction of instances whose inference-time decision matches the label.
pub fn inference_accuracy(params: &DeciderParams, dataset: &[TrainingInstance]) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("no instances"));
    }
    let mut correct = 0usize;
    for inst in dataset {
        if infer_instance(inst, params)?.apply_prf == (inst.label == 1) {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeciderConfig {
    pub embed_dim: usize,
    pub pair_dim: usize,
    pub hidden_dim: usize,
    pub k: usize,
    pub branch_dropout: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub init_scale: f64,
    pub max_vocab: usize,
    pub seed: u64,
}

impl Default for DeciderConfig {
    fn default() -> Self {
        DeciderConfig {
            embed_dim: 32,
            pair_dim: 64,
            hidden_dim: 64,
            k: 10,
            branch_dropout: 0.5,
            learning_rate: 0.5,
            epochs: 300,
            init_scale: 0.5,
            max_vocab: 20_000,
            seed: 42,
        }
    }
}

impl DeciderConfig {
    pub fn dims(&self, vocab: usize) -> DeciderDims {
        DeciderDims {
            vocab,
            embed: self.embed_dim,
            pair: self.pair_dim,
            hidden: self.hidden_dim,
            k: self.k,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.pair_dim == 0 || self.hidden_dim == 0 || self.k == 0 {
            return Err(Error::param("dims", "all layer sizes and k must be positive"));
        }
        if !(0.0..=1.0).contains(&self.branch_dropout) {
            return Err(Error::param("branch_dropout", "must lie in [0,1]"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::param("learning_rate", "must be positive"));
        }
        if !(self.init_scale.is_finite() && self.init_scale > 0.0) {
            return Err(Error::param("init_scale", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DeciderFit {
    pub params: DeciderParams,
    /// Expected (dropout-averaged) loss before each epoch's update.
    pub loss_curve: Vec<f64>,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Vocabulary over every token of every instance.
pub fn dataset_vocabulary(dataset: &[TrainingInstance], max_size: usize) -> Vocabulary {
    let tokens = dataset.iter().flat_map(|inst| {
        inst.query
            .iter()
            .chain(inst.docs.iter().flatten())
            .chain(inst.expanded_query.iter())
            .chain(inst.expanded_docs.iter().flatten())
            .map(String::as_str)
    });
    Vocabulary::build(tokens, max_size)
}

pub fn train_decider(dataset: &[TrainingInstance], config: &DeciderConfig) -> Result<DeciderFit> {
    config.validate()?;
    let positives = dataset.iter().filter(|i| i.label == 1).count();
    if positives == 0 || positives == dataset.len() {
        return Err(Error::DegenerateLabels);
    }
    validate_dataset(dataset, config.k)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vocab = dataset_vocabulary(dataset, config.max_vocab);
    let dims = config.dims(vocab.len());
    let mut params = DeciderParams::random(vocab, dims, config.branch_dropout, config.init_scale, &mut rng);
    let data: Vec<PreparedInstance> = dataset.iter().map(|i| prepare_instance(&params.vocab, i)).collect();

    let mut loss_curve = Vec::with_capacity(config.epochs);
    let mut masks = vec![false; data.len()];
    for _ in 0..config.epochs {
        for m in masks.iter_mut() {
            *m = rng.gen::<f64>() < config.branch_dropout;
        }
        let pass = batch_pass(&params, &data, &masks);
        loss_curve.push(pass.expected_loss);
        params.apply_update(&pass.grads, config.learning_rate);
    }
    let final_loss = batch_pass(&params, &data, &masks).expected_loss;
    let initial_loss = loss_curve.first().copied().unwrap_or(final_loss);
    Ok(DeciderFit {
        params,
        loss_curve,
        initial_loss,
        final_loss,
    })
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

pub fn encode_decider(params: &DeciderParams) -> Vec<u8> {
    let mut w = ByteWriter::default();
    w.bytes(DECIDER_MAGIC);
    w.u8(DECIDER_FORMAT_VERSION);
    let d = &params.dims;
    for v in [d.vocab, d.embed, d.pair, d.hidden, d.k] {
        w.u32(v as u32);
    }
    w.f64(params.branch_dropout);
    for id in 0..params.vocab.len() {
        w.string(params.vocab.token(id));
    }
    for t in params.tensors() {
        w.u32(t.len() as u32);
        for &v in t {
            w.f64(v);
        }
    }
    w.buf
}

pub fn decode_decider(bytes: &[u8]) -> Result<DeciderParams> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(4, "magic header")?;
    if magic != DECIDER_MAGIC {
        return Err(Error::Format(format!(
            "bad magic: expected {:?}, found {:?}",
            String::from_utf8_lossy(DECIDER_MAGIC),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = r.u8("format version")?;
    if version != DECIDER_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: DECIDER_FORMAT_VERSION,
            found: version,
        });
    }
    let mut dim = |what| r.u32(what).map(|v| v as usize);
    let dims = DeciderDims {
        vocab: dim("vocab size")?,
        embed: dim("embedding dim")?,
        pair: dim("pair dim")?,
        hidden: dim("hidden dim")?,
        k: dim("slot count")?,
    };
    let branch_dropout = r.f64("branch dropout")?;
    if dims.vocab < 2 {
        return Err(Error::Format("vocabulary lacks reserved entries".into()));
    }
    let mut words = Vec::with_capacity(dims.vocab.min(1 << 20));
    for id in 0..dims.vocab {
        let token = r.string("vocabulary entry")?;
        if id >= 2 {
            words.push(token);
        }
    }
    let vocab = Vocabulary::from_list(words);
    let mut tensors: Vec<Vec<f64>> = Vec::with_capacity(TENSOR_NAMES.len());
    for name in TENSOR_NAMES {
        let n = r.u32(name)? as usize;
        let mut t = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            t.push(r.f64(name)?);
        }
        tensors.push(t);
    }
    if !r.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes", r.remaining())));
    }
    let mut it = tensors.into_iter();
    let mut next = || it.next().expect("eight tensors");
    let pair = PairEncoderParams {
        embeddings: next(),
        projection: next(),
        projection_bias: next(),
    };
    let aggregator = AggregatorParams {
        input_weights: next(),
        recurrent_weights: next(),
        bias: next(),
    };
    let head = next();
    let head_bias = next();
    if head_bias.len() != 1 {
        return Err(Error::Format("head bias must be a single value".into()));
    }
    let params = DeciderParams {
        vocab,
        dims,
        pair,
        aggregator,
        head,
        head_bias: head_bias[0],
        branch_dropout,
    };
    params.check_shapes()?;
    Ok(params)
}

pub fn save_decider(params: &DeciderParams, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_decider(params))?;
    Ok(())
}

pub fn load_decider(path: impl AsRef<Path>) -> Result<DeciderParams> {
    decode_decider(&fs::read(path)?)
}
