//! Non-neural feedback decision functions.
//!
//! * QPP-SRF: threshold a normalized clarity score.
//! * TD2F: threshold the mean log-ratio of term distributions between the
//!   pre- and post-feedback lists.
//! * LR-SRF: logistic regression over four divergence features.
//!
//! Also the ground-truth labeler: a query is labeled 1 exactly when feedback
//! strictly improves its average precision.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::distribution::{js_divergence, kl_divergence, union_vocabulary, TermDistribution, SMOOTHING_EPSILON};
use crate::error::{Error, Result};
use crate::eval::{average_precision, MAP_CUTOFF};
use crate::feedback::ExpandedQuery;
use crate::index::InvertedIndex;
use crate::retrieval::{Query, RankedList};
use crate::trec::Qrels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DecisionMethod {
    QppSrf,
    Td2f,
    LrSrf,
    DeepSrf,
}

impl DecisionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            DecisionMethod::QppSrf => "qpp-srf",
            DecisionMethod::Td2f => "td2f",
            DecisionMethod::LrSrf => "lr-srf",
            DecisionMethod::DeepSrf => "deep-srf",
        }
    }
}

impl fmt::Display for DecisionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DecisionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qpp-srf" | "qpp" => Ok(DecisionMethod::QppSrf),
            "td2f" => Ok(DecisionMethod::Td2f),
            "lr-srf" | "lr" => Ok(DecisionMethod::LrSrf),
            "deep-srf" | "deep" => Ok(DecisionMethod::DeepSrf),
            other => Err(Error::Format(format!("unknown decision method `{other}`"))),
        }
    }
}

/// Per-query decision: a confidence `theta` in [0,1] and the hard bit.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionOutcome {
    pub query_id: String,
    pub theta: f64,
    pub apply_prf: bool,
    pub method: DecisionMethod,
}

/// Ground truth for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryLabel {
    pub query_id: String,
    pub y: u8,
    pub ap_pre: f64,
    pub ap_post: f64,
}

pub fn label_query(query_id: &str, pre: &RankedList, post: &RankedList, qrels: &Qrels) -> Result<QueryLabel> {
    if !qrels.contains_query(query_id) {
        return Err(Error::MissingQuery(query_id.to_owned()));
    }
    let ap_pre = average_precision(&with_id(pre, query_id), qrels, MAP_CUTOFF)?;
    let ap_post = average_precision(&with_id(post, query_id), qrels, MAP_CUTOFF)?;
    Ok(QueryLabel {
        query_id: query_id.to_owned(),
        y: u8::from(ap_post > ap_pre),
        ap_pre,
        ap_post,
    })
}

fn with_id(list: &RankedList, query_id: &str) -> RankedList {
    if list.query_id == query_id {
        list.clone()
    } else {
        RankedList {
            query_id: query_id.to_owned(),
            ..list.clone()
        }
    }
}

/// Uniform mixture of the MLE models of the first `top_n` documents of
/// `list` that exist in the index and are non-empty.
pub fn top_docs_model(list: &RankedList, index: &InvertedIndex, top_n: usize) -> Result<TermDistribution> {
    let models: Vec<TermDistribution> = list
        .top_docs(top_n)
        .filter_map(|d| index.doc_model_by_id(d))
        .collect();
    if models.is_empty() {
        return Err(Error::EmptyInput("ranked list has no indexed documents"));
    }
    Ok(TermDistribution::mixture(&models))
}

/// KL divergence of `model` from the collection model. Query-side terms that
/// the collection never saw trigger add-epsilon smoothing of the collection
/// model.
fn clarity_of(model: &TermDistribution, index: &InvertedIndex) -> f64 {
    let missing = model.terms().filter(|t| index.cf(t) == 0).count();
    let (eps, z) = if missing == 0 {
        (0.0, 1.0)
    } else {
        let support = index.vocabulary_size() + missing;
        (SMOOTHING_EPSILON, 1.0 + SMOOTHING_EPSILON * support as f64)
    };
    model
        .iter()
        .filter(|&(_, p)| p > 0.0)
        .map(|(t, p)| {
            let pc = (index.collection_prob(t) + eps) / z;
            p * (p / pc).ln()
        })
        .sum::<f64>()
        .max(0.0)
}

/// Clarity of a ranked list: KL(P(·|top docs) ‖ P(·|C)).
pub fn clarity(list: &RankedList, index: &InvertedIndex, top_n: usize) -> Result<f64> {
    if list.is_empty() {
        return Err(Error::EmptyInput("clarity of an empty ranked list"));
    }
    Ok(clarity_of(&top_docs_model(list, index, top_n)?, index))
}

/// Min-max normalization over a batch; a batch without spread maps to 0.5.
pub fn normalize_scores(scores: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("no scores to normalize"));
    }
    let min = scores.values().copied().fold(f64::INFINITY, f64::min);
    let max = scores.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    Ok(scores
        .iter()
        .map(|(q, &s)| {
            let v = if span > 0.0 { (s - min) / span } else { 0.5 };
            (q.clone(), v)
        })
        .collect())
}

/// Feedback is applied when the predicted effectiveness falls strictly below `tau`.
pub fn decide_qpp_srf(query_id: &str, normalized_qpp: f64, tau: f64) -> Result<DecisionOutcome> {
    if !(0.0..=1.0).contains(&normalized_qpp) {
        return Err(Error::param("qpp", format!("must lie in [0,1], got {normalized_qpp}")));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::param("tau", format!("must lie in [0,1], got {tau}")));
    }
    Ok(DecisionOutcome {
        query_id: query_id.to_owned(),
        theta: 1.0 - normalized_qpp,
        apply_prf: normalized_qpp < tau,
        method: DecisionMethod::QppSrf,
    })
}

/// (1/|V|)·Σ_{t∈V} [ln P(t) − ln P'(t)] over the union vocabulary, after
/// add-epsilon smoothing of both sides.
pub fn td2f_from_distributions(pre: &TermDistribution, post: &TermDistribution) -> f64 {
    let vocab: BTreeSet<&str> = union_vocabulary(pre, post);
    if vocab.is_empty() {
        return 0.0;
    }
    let p = pre.smoothed_over(vocab.iter().copied(), SMOOTHING_EPSILON);
    let q = post.smoothed_over(vocab.iter().copied(), SMOOTHING_EPSILON);
    let sum: f64 = vocab.iter().map(|t| p.prob(t).ln() - q.prob(t).ln()).sum();
    sum / vocab.len() as f64
}

pub fn td2f_divergence(pre: &RankedList, post: &RankedList, index: &InvertedIndex, top_n: usize) -> Result<f64> {
    if pre.is_empty() || post.is_empty() {
        return Err(Error::EmptyInput("TD2F needs two non-empty lists"));
    }
    let p = top_docs_model(pre, index, top_n)?;
    let q = top_docs_model(post, index, top_n)?;
    Ok(td2f_from_distributions(&p, &q))
}

pub const TD2F_MIN_TRAINING: usize = 20;

/// The ⌈0.95·n⌉-th order statistic: the smallest tau with at least 95% of the
/// scores at or below it.
pub fn calibrate_td2f_threshold(train_scores: &[f64]) -> Result<f64> {
    if train_scores.len() < TD2F_MIN_TRAINING {
        return Err(Error::TooFewScores {
            needed: TD2F_MIN_TRAINING,
            got: train_scores.len(),
        });
    }
    if train_scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::param("train_scores", "scores must be finite"));
    }
    let mut sorted = train_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = (95 * n).div_ceil(100);
    Ok(sorted[rank - 1])
}

/// Feedback is applied on the 95% side, `score <= tau`.
pub fn decide_td2f(query_id: &str, score: f64, tau: f64) -> DecisionOutcome {
    let apply = score <= tau;
    DecisionOutcome {
        query_id: query_id.to_owned(),
        theta: if apply { 1.0 } else { 0.0 },
        apply_prf: apply,
        method: DecisionMethod::Td2f,
    }
}

/// LR-SRF input features.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureVector {
    pub clarity_topdocs: f64,
    pub kl_query_vs_rm: f64,
    pub js_feedback_docs: f64,
    pub clarity_query_lm: f64,
}

impl FeatureVector {
    pub const LEN: usize = 4;

    pub fn to_array(&self) -> [f64; 4] {
        [
            self.clarity_topdocs,
            self.kl_query_vs_rm,
            self.js_feedback_docs,
            self.clarity_query_lm,
        ]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        FeatureVector {
            clarity_topdocs: a[0],
            kl_query_vs_rm: a[1],
            js_feedback_docs: a[2],
            clarity_query_lm: a[3],
        }
    }
}

/// Mean JS divergence of each document model to their centroid.
pub fn mean_js_to_centroid(models: &[TermDistribution]) -> f64 {
    if models.is_empty() {
        return 0.0;
    }
    let centroid = TermDistribution::mixture(models);
    models.iter().map(|m| js_divergence(m, &centroid)).sum::<f64>() / models.len() as f64
}

/// Extracts the four LR-SRF features from the top `top_n` documents.
///
/// `post_list` is only checked for emptiness: none of the four features reads
/// the post-feedback ranking.
pub fn extract_lr_features(
    query: &Query,
    pre_list: &RankedList,
    expanded: &ExpandedQuery,
    post_list: &RankedList,
    index: &InvertedIndex,
    top_n: usize,
) -> Result<FeatureVector> {
    if query.is_empty() {
        return Err(Error::EmptyQuery(query.query_id.clone()));
    }
    if pre_list.is_empty() || post_list.is_empty() || expanded.term_weights.is_empty() {
        return Err(Error::EmptyInput("LR-SRF features need non-empty lists and expansion"));
    }
    let doc_models: Vec<TermDistribution> = pre_list
        .top_docs(top_n)
        .filter_map(|d| index.doc_model_by_id(d))
        .collect();
    if doc_models.is_empty() {
        return Err(Error::EmptyInput("ranked list has no indexed documents"));
    }
    let qmle = query.mle();

    let clarity_topdocs = clarity_of(&TermDistribution::mixture(&doc_models), index);
    let rm = &expanded.term_weights;
    let kl_query_vs_rm = kl_divergence(rm, &qmle.covering(union_vocabulary(rm, &qmle))).abs();
    let js_feedback_docs = mean_js_to_centroid(&doc_models);
    let clarity_query_lm = clarity_of(&qmle, index);

    Ok(FeatureVector {
        clarity_topdocs,
        kl_query_vs_rm,
        js_feedback_docs,
        clarity_query_lm,
    })
}

/// Parameters of the logistic LR-SRF classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn zeros(n: usize) -> Self {
        LogisticModel {
            weights: vec![0.0; n],
            bias: 0.0,
        }
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    /// Versioned text form: a header line, then `bias` and `weights` lines.
    pub fn to_text(&self) -> String {
        let w: Vec<String> = self.weights.iter().map(|w| w.to_string()).collect();
        format!("srf-logistic v1\nbias {}\nweights {}\n", self.bias, w.join(" "))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some("srf-logistic v1") => {}
            Some(other) => return Err(Error::Format(format!("expected `srf-logistic v1`, found `{other}`"))),
            None => return Err(Error::Truncated("empty logistic model file".into())),
        }
        let parse = |line: Option<&str>, key: &str| -> Result<Vec<f64>> {
            let line = line.ok_or_else(|| Error::Truncated(format!("missing `{key}` line")))?;
            let rest = line
                .strip_prefix(key)
                .ok_or_else(|| Error::Format(format!("expected `{key}` line, found `{line}`")))?;
            rest.split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|_| Error::Format(format!("bad number `{v}`"))))
                .collect()
        };
        let bias = parse(lines.next(), "bias")?;
        let weights = parse(lines.next(), "weights")?;
        if bias.len() != 1 {
            return Err(Error::Format("bias line must hold one value".into()));
        }
        let model = LogisticModel { weights, bias: bias[0] };
        if !model.is_finite() {
            return Err(Error::Format("non-finite model parameters".into()));
        }
        Ok(model)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            learning_rate: 0.1,
            l2: 1e-4,
            epochs: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub model: LogisticModel,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Mean cross-entropy plus (l2/2)·‖w‖². The bias is not regularized.
pub fn logistic_loss(model: &LogisticModel, examples: &[(Vec<f64>, u8)], l2: f64) -> f64 {
    let n = examples.len() as f64;
    let data: f64 = examples
        .iter()
        .map(|(x, y)| {
            // log(1 + e^z) - y·z, stable for both signs of z.
            let z = model.logit(x);
            let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            softplus - f64::from(*y) * z
        })
        .sum::<f64>()
        / n;
    data + 0.5 * l2 * model.weights.iter().map(|w| w * w).sum::<f64>()
}

/// Gradient of [`logistic_loss`]: weights first, bias last.
pub fn logistic_gradient(model: &LogisticModel, examples: &[(Vec<f64>, u8)], l2: f64) -> Vec<f64> {
    let n = examples.len() as f64;
    let dim = model.weights.len();
    let mut g = vec![0.0; dim + 1];
    for (x, y) in examples {
        let err = model.predict(x) - f64::from(*y);
        for (gj, xj) in g.iter_mut().zip(x) {
            *gj += err * xj;
        }
        g[dim] += err;
    }
    for (j, gj) in g.iter_mut().enumerate() {
        *gj /= n;
        if j < dim {
            *gj += l2 * model.weights[j];
        }
    }
    g
}

/// Full-batch gradient descent from zero weights.
pub fn train_logistic_raw(examples: &[(Vec<f64>, u8)], config: &LogisticConfig) -> Result<LogisticFit> {
    if examples.len() < 2 {
        return Err(Error::DegenerateLabels);
    }
    let positives = examples.iter().filter(|(_, y)| *y == 1).count();
    if positives == 0 || positives == examples.len() {
        return Err(Error::DegenerateLabels);
    }
    let dim = examples[0].0.len();
    if examples.iter().any(|(x, _)| x.len() != dim) {
        return Err(Error::param("examples", "feature vectors differ in length"));
    }
    let mut model = LogisticModel::zeros(dim);
    let initial_loss = logistic_loss(&model, examples, config.l2);
    for _ in 0..config.epochs {
        let g = logistic_gradient(&model, examples, config.l2);
        for (w, gj) in model.weights.iter_mut().zip(&g) {
            *w -= config.learning_rate * gj;
        }
        model.bias -= config.learning_rate * g[dim];
    }
    let final_loss = logistic_loss(&model, examples, config.l2);
    Ok(LogisticFit {
        model,
        initial_loss,
        final_loss,
    })
}

pub fn train_logistic(examples: &[(FeatureVector, u8)], config: &LogisticConfig) -> Result<LogisticFit> {
    let raw: Vec<(Vec<f64>, u8)> = examples.iter().map(|(f, y)| (f.to_array().to_vec(), *y)).collect();
    train_logistic_raw(&raw, config)
}

pub fn decide_lr(query_id: &str, model: &LogisticModel, features: &FeatureVector) -> DecisionOutcome {
    let theta = model.predict(&features.to_array());
    DecisionOutcome {
        query_id: query_id.to_owned(),
        theta,
        apply_prf: theta > 0.5,
        method: DecisionMethod::LrSrf,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::interpolate_rm3;
    use crate::index::build_index;
    use crate::text::TokenizerConfig;
    use crate::trec::parse_qrels;

    fn dist(pairs: &[(&str, f64)]) -> TermDistribution {
        TermDistribution::from_weights(pairs.iter().map(|&(t, w)| (t, w)))
    }

    fn list(ids: &[&str]) -> RankedList {
        let n = ids.len();
        RankedList::from_entries("q1", ids.iter().enumerate().map(|(i, d)| (*d, (n - i) as f64)).collect())
    }

    #[test]
    fn labels_follow_strict_inequality() {
        let qrels = parse_qrels("q1 0 d1 1\nq1 0 d3 1\n").unwrap();
        let l = label_query("q1", &list(&["d1", "d2", "d3"]), &list(&["d1", "d3"]), &qrels).unwrap();
        assert!((l.ap_pre - 0.833_333_333_333_333_4).abs() < 1e-12);
        assert_eq!(l.ap_post, 1.0);
        assert_eq!(l.y, 1);
        let same = label_query("q1", &list(&["d1"]), &list(&["d1"]), &qrels).unwrap();
        assert_eq!(same.y, 0);
        assert!(matches!(label_query("q9", &list(&["d1"]), &list(&["d1"]), &qrels), Err(Error::MissingQuery(_))));
    }

    #[test]
    fn clarity_examples() {
        let index = build_index([("d1", "a"), ("d2", "b")], &TokenizerConfig::default()).unwrap();
        let c = clarity(&list(&["d1"]), &index, 10).unwrap();
        assert!((c - std::f64::consts::LN_2).abs() < 1e-12);

        let same = build_index([("d1", "a b"), ("d2", "b a")], &TokenizerConfig::default()).unwrap();
        assert_eq!(clarity(&list(&["d1", "d2"]), &same, 10).unwrap(), 0.0);
        assert!(clarity(&RankedList::new("q", 5), &index, 10).is_err());
    }

    #[test]
    fn normalize_examples() {
        let m: BTreeMap<String, f64> = [("q1".into(), 2.0), ("q2".into(), 4.0), ("q3".into(), 6.0)].into();
        let n = normalize_scores(&m).unwrap();
        assert_eq!((n["q1"], n["q2"], n["q3"]), (0.0, 0.5, 1.0));
        let c: BTreeMap<String, f64> = [("q1".into(), 3.0), ("q2".into(), 3.0)].into();
        assert!(normalize_scores(&c).unwrap().values().all(|&v| v == 0.5));
        let s: BTreeMap<String, f64> = [("q1".into(), 7.0)].into();
        assert_eq!(normalize_scores(&s).unwrap()["q1"], 0.5);
        assert!(normalize_scores(&BTreeMap::new()).is_err());
    }

    #[test]
    fn qpp_decisions() {
        assert!(!decide_qpp_srf("q", 0.9, 0.5).unwrap().apply_prf);
        assert!(decide_qpp_srf("q", 0.1, 0.5).unwrap().apply_prf);
        assert!(!decide_qpp_srf("q", 0.5, 0.5).unwrap().apply_prf);
        assert!((decide_qpp_srf("q", 0.1, 0.5).unwrap().theta - 0.9).abs() < 1e-15);
        assert!(decide_qpp_srf("q", 1.5, 0.5).is_err());
        assert!(decide_qpp_srf("q", 0.5, -0.1).is_err());
    }

    #[test]
    fn td2f_worked_example() {
        let p = dist(&[("a", 0.75), ("b", 0.25)]);
        let q = dist(&[("a", 0.25), ("b", 0.75)]);
        let v = td2f_from_distributions(&p, &q);
        assert!(v.abs() < 1e-9, "{v}");
        let r = dist(&[("a", 0.5), ("b", 0.5)]);
        let w = td2f_from_distributions(&r, &q);
        assert!((w - 0.5 * (4.0f64 / 3.0).ln()).abs() < 1e-5, "{w}");
        assert_eq!(td2f_from_distributions(&q, &p), -v);
        assert_eq!(td2f_from_distributions(&p, &p), 0.0);
    }

    #[test]
    fn td2f_thresholds() {
        let scores: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(calibrate_td2f_threshold(&scores).unwrap(), 19.0);
        let scores: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(calibrate_td2f_threshold(&scores).unwrap(), 95.0);
        assert_eq!(calibrate_td2f_threshold(&[2.5; 30]).unwrap(), 2.5);
        assert!(matches!(calibrate_td2f_threshold(&[1.0; 19]), Err(Error::TooFewScores { .. })));
        assert!(decide_td2f("q", 1.0, 1.0).apply_prf);
        assert!(!decide_td2f("q", 1.1, 1.0).apply_prf);
    }

    #[test]
    fn lr_feature_identities() {
        let index = build_index(
            [("d1", "a b"), ("d2", "a b"), ("d3", "c d")],
            &TokenizerConfig::default(),
        )
        .unwrap();
        let query = Query::new("q1", vec!["a".into()]);
        let pre = list(&["d1", "d2"]);
        let expanded = interpolate_rm3(&query, &dist(&[("b", 1.0)]), 1.0).unwrap();
        let f = extract_lr_features(&query, &pre, &expanded, &pre, &index, 10).unwrap();
        assert_eq!(f.js_feedback_docs, 0.0);
        assert_eq!(f.kl_query_vs_rm, 0.0);
        assert!(f.clarity_topdocs >= 0.0 && f.clarity_query_lm >= 0.0);

        let uniform = build_index([("d1", "a b")], &TokenizerConfig::default()).unwrap();
        let q2 = Query::new("q1", vec!["a".into(), "b".into()]);
        let e2 = interpolate_rm3(&q2, &dist(&[("a", 1.0)]), 1.0).unwrap();
        let f = extract_lr_features(&q2, &list(&["d1"]), &e2, &list(&["d1"]), &uniform, 10).unwrap();
        assert_eq!(f.clarity_query_lm, 0.0);

        assert!(extract_lr_features(&query, &RankedList::new("q1", 1), &expanded, &pre, &index, 10).is_err());
    }

    #[test]
    fn decide_lr_examples() {
        let zero = LogisticModel::zeros(4);
        let d = decide_lr("q", &zero, &FeatureVector::default());
        assert_eq!(d.theta, 0.5);
        assert!(!d.apply_prf);

        let m = LogisticModel {
            weights: vec![1.0, 0.0, 0.0, 0.0],
            bias: 0.0,
        };
        let f = FeatureVector::from_array([3f64.ln(), 9.0, -2.0, 5.0]);
        assert!((decide_lr("q", &m, &f).theta - 0.75).abs() < 1e-15);
        let big = FeatureVector::from_array([800.0, 0.0, 0.0, 0.0]);
        assert_eq!(decide_lr("q", &m, &big).theta, 1.0);
    }

    #[test]
    fn zero_model_predicts_half() {
        let m = LogisticModel::zeros(4);
        for x in [[0.0; 4], [1.0, 2.0, 3.0, 4.0], [-5.0, 0.1, 9.0, 0.0]] {
            assert_eq!(m.predict(&x), 0.5);
        }
    }

    #[test]
    fn degenerate_labels_rejected() {
        let ex = vec![(FeatureVector::default(), 1), (FeatureVector::default(), 1)];
        assert!(matches!(train_logistic(&ex, &LogisticConfig::default()), Err(Error::DegenerateLabels)));
    }

    #[test]
    fn model_text_round_trip() {
        let m = LogisticModel {
            weights: vec![0.1, -2.5, 3.0e-9, 7.0],
            bias: -0.25,
        };
        assert_eq!(LogisticModel::from_text(&m.to_text()).unwrap(), m);
        assert!(LogisticModel::from_text("srf-logistic v2\n").is_err());
        assert!(LogisticModel::from_text("").is_err());
    }
}
