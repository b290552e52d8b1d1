//! Relevance-model query expansion (RM1 estimation and RM3 interpolation).
//!
//! RM1 weights each term by Σ_D P(t|D)·P(Q|D) over the feedback documents,
//! where P(Q|D) is the Dirichlet-smoothed query likelihood renormalized over
//! the feedback set. RM3 mixes the result with the original query model.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use log::warn;

use crate::distribution::TermDistribution;
use crate::error::{Error, Result};
use crate::index::InvertedIndex;
use crate::retrieval::{dirichlet_log_likelihood, Query, RankedList, RetrievalModel, DEFAULT_MU};
use crate::trec::{parse_trec_run, Runs};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackParams {
    pub fb_docs: usize,
    pub fb_terms: usize,
    /// Weight of the original query model in the RM3 mixture.
    pub lambda: f64,
    /// Dirichlet prior used for P(Q|D).
    pub mu: f64,
}

impl Default for FeedbackParams {
    fn default() -> Self {
        FeedbackParams {
            fb_docs: 10,
            fb_terms: 20,
            lambda: 0.6,
            mu: DEFAULT_MU,
        }
    }
}

/// The enriched query produced by a feedback model.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedQuery {
    pub query_id: String,
    pub term_weights: TermDistribution,
    pub provenance: String,
    pub fb_docs: usize,
    pub fb_terms: usize,
    pub lambda: f64,
}

impl ExpandedQuery {
    /// The expansion as a weighted query for second-stage retrieval.
    pub fn to_query(&self) -> Query {
        let terms = self
            .term_weights
            .iter()
            .map(|(t, w)| (t.to_owned(), w))
            .collect();
        Query::weighted(self.query_id.clone(), terms).expect("expanded weights are positive and distinct")
    }

    /// Terms ordered by descending weight (term order breaks ties).
    pub fn ranked_terms(&self) -> Vec<(&str, f64)> {
        let mut terms: Vec<(&str, f64)> = self.term_weights.iter().collect();
        terms.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
        terms
    }
}

pub fn estimate_rm1(
    query: &Query,
    initial: &RankedList,
    index: &InvertedIndex,
    params: &FeedbackParams,
) -> Result<TermDistribution> {
    if initial.is_empty() {
        return Err(Error::NoFeedback(initial.query_id.clone()));
    }
    if params.fb_docs == 0 || params.fb_terms == 0 {
        return Err(Error::param("fb_docs/fb_terms", "must be at least 1"));
    }
    if !(params.mu.is_finite() && params.mu > 0.0) {
        return Err(Error::param("mu", format!("must be positive, got {}", params.mu)));
    }
    let total = index.total_tokens() as f64;
    let terms: Vec<(u32, f64, f64)> = query
        .weighted_terms()
        .into_iter()
        .filter_map(|(t, w)| {
            let id = index.term_id(&t)?;
            Some((id, w, index.cf_by_id(id) as f64 / total))
        })
        .collect();

    let mut feedback = Vec::new();
    for doc_id in initial.top_docs(params.fb_docs) {
        match index.internal_id(doc_id) {
            Some(d) if index.doc_len(d) > 0 => {
                feedback.push((d, dirichlet_log_likelihood(index, d, &terms, params.mu)))
            }
            Some(_) => {}
            None => warn!("feedback document `{doc_id}` is not in the index; skipped"),
        }
    }
    if feedback.is_empty() {
        return Err(Error::NoFeedback(initial.query_id.clone()));
    }

    // Renormalize P(Q|D) over the feedback set in log space.
    let max_ll = feedback.iter().map(|&(_, ll)| ll).fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = feedback.iter().map(|&(_, ll)| (ll - max_ll).exp()).collect();
    let z: f64 = raw.iter().sum();

    let mut weights: BTreeMap<u32, f64> = BTreeMap::new();
    for (&(d, _), r) in feedback.iter().zip(&raw) {
        let doc_weight = r / z;
        let len = f64::from(index.doc_len(d));
        for &(t, tf) in index.doc_vector(d) {
            *weights.entry(t).or_insert(0.0) += f64::from(tf) / len * doc_weight;
        }
    }
    let rm1 = TermDistribution::from_weights(weights.into_iter().map(|(t, w)| (index.term(t).to_owned(), w)));
    Ok(rm1.truncate_top(params.fb_terms))
}

/// weight(t) = lambda·P_mle(t|Q) + (1 - lambda)·rm1(t).
pub fn interpolate_rm3(query: &Query, rm1: &TermDistribution, lambda: f64) -> Result<ExpandedQuery> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::param("lambda", format!("must lie in [0,1], got {lambda}")));
    }
    let qmle = query.mle();
    let mut mass: BTreeMap<String, f64> = BTreeMap::new();
    for t in qmle.terms().chain(rm1.terms()) {
        let w = lambda * qmle.prob(t) + (1.0 - lambda) * rm1.prob(t);
        if w > 0.0 {
            mass.insert(t.to_owned(), w);
        }
    }
    let term_weights = TermDistribution::from_normalized(mass);
    debug_assert!(
        (term_weights.total() - 1.0).abs() < 1e-9,
        "RM3 mixture mass {}",
        term_weights.total()
    );
    Ok(ExpandedQuery {
        query_id: query.query_id.clone(),
        term_weights,
        provenance: "rm3".to_owned(),
        fb_docs: 0,
        fb_terms: rm1.len(),
        lambda,
    })
}

/// RM1 estimation followed by RM3 interpolation.
pub fn expand_rm3(
    query: &Query,
    initial: &RankedList,
    index: &InvertedIndex,
    params: &FeedbackParams,
) -> Result<ExpandedQuery> {
    let rm1 = estimate_rm1(query, initial, index, params)?;
    let mut expanded = interpolate_rm3(query, &rm1, params.lambda)?;
    expanded.fb_docs = params.fb_docs.min(initial.len());
    expanded.fb_terms = params.fb_terms;
    Ok(expanded)
}

/// Second-stage retrieval with the expansion weights as query weights.
pub fn search_expanded(
    expanded: &ExpandedQuery,
    index: &InvertedIndex,
    k: usize,
    model: RetrievalModel,
) -> Result<RankedList> {
    if expanded.term_weights.is_empty() {
        return Err(Error::EmptyQuery(expanded.query_id.clone()));
    }
    model.search(&expanded.to_query(), index, k)
}

/// Reads a run produced by an external feedback system, truncating each list to `k`.
pub fn load_external_run(path: impl AsRef<Path>, k: usize) -> Result<Runs> {
    let content = std::fs::read_to_string(path)?;
    let (mut runs, warnings) = parse_trec_run(&content)?;
    for w in warnings {
        warn!("{w}");
    }
    for list in runs.values_mut() {
        if list.len() > k {
            list.truncate(k);
        }
    }
    Ok(runs)
}

/// One line per query: `query_id<TAB>term:weight,term:weight,...`, terms by
/// descending weight.
pub fn format_expanded_queries<'a, I>(expanded: I) -> String
where
    I: IntoIterator<Item = &'a ExpandedQuery>,
{
    let mut out = String::new();
    for e in expanded {
        let body: Vec<String> = e.ranked_terms().iter().map(|(t, w)| format!("{t}:{w}")).collect();
        writeln!(out, "{}\t{}", e.query_id, body.join(",")).expect("writing to a String cannot fail");
    }
    out
}

pub fn parse_expanded_queries(content: &str) -> Result<BTreeMap<String, ExpandedQuery>> {
    let mut out = BTreeMap::new();
    for (i, raw) in content.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let (qid, body) = raw.split_once('\t').ok_or_else(|| Error::Parse {
            line,
            message: "expected `query_id<TAB>terms`".into(),
        })?;
        let mut mass = BTreeMap::new();
        for item in body.split(',').filter(|s| !s.is_empty()) {
            let (t, w) = item.rsplit_once(':').ok_or_else(|| Error::Parse {
                line,
                message: format!("bad term weight `{item}`"),
            })?;
            let w: f64 = w.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad weight `{w}`"),
            })?;
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Parse {
                    line,
                    message: format!("weight for `{t}` must be positive"),
                });
            }
            mass.insert(t.to_owned(), w);
        }
        let fb_terms = mass.len();
        let expanded = ExpandedQuery {
            query_id: qid.to_owned(),
            term_weights: TermDistribution::from_normalized(mass),
            provenance: "file".to_owned(),
            fb_docs: 0,
            fb_terms,
            lambda: f64::NAN,
        };
        if out.insert(qid.to_owned(), expanded).is_some() {
            return Err(Error::Duplicate {
                line,
                message: format!("query `{qid}` expanded twice"),
            });
        }
    }
    Ok(out)
}
