//! First-stage retrieval: BM25 and Dirichlet-smoothed query likelihood.
//!
//! Both scorers return a [`RankedList`] sorted by descending score with ties
//! broken by internal document id, so equal-scoring documents come back in
//! corpus order. Documents that match no query term are never returned.

use std::collections::HashMap;

use crate::distribution::TermDistribution;
use crate::error::{Error, Result};
use crate::index::{Document, InvertedIndex};

/// A query: its tokens plus optional per-term weights.
///
/// When `weights` is `None` each distinct term is weighted by its count in
/// `terms`. When present, `weights[i]` belongs to the `i`-th distinct term in
/// first-occurrence order.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub query_id: String,
    pub terms: Vec<String>,
    pub weights: Option<Vec<f64>>,
}

impl Query {
    pub fn new(query_id: impl Into<String>, terms: Vec<String>) -> Self {
        Query {
            query_id: query_id.into(),
            terms,
            weights: None,
        }
    }

    /// Tokenizes `text` with the index's tokenizer.
    pub fn parse(query_id: impl Into<String>, text: &str, index: &InvertedIndex) -> Self {
        Query::new(query_id, index.tokenize(text))
    }

    /// A query with explicit weights; each term must be distinct and its weight positive.
    pub fn weighted(query_id: impl Into<String>, terms: Vec<(String, f64)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for (t, w) in &terms {
            if !(w.is_finite() && *w > 0.0) {
                return Err(Error::param("weights", format!("weight for `{t}` must be positive, got {w}")));
            }
            if !seen.insert(t.as_str()) {
                return Err(Error::param("weights", format!("term `{t}` repeated")));
            }
        }
        let (terms, weights) = terms.into_iter().unzip();
        Ok(Query {
            query_id: query_id.into(),
            terms,
            weights: Some(weights),
        })
    }

    /// Distinct terms with their weights, in first-occurrence order.
    pub fn weighted_terms(&self) -> Vec<(String, f64)> {
        let mut order: Vec<String> = Vec::new();
        let mut counts: HashMap<&str, f64> = HashMap::new();
        for t in &self.terms {
            let c = counts.entry(t.as_str()).or_insert(0.0);
            if *c == 0.0 {
                order.push(t.clone());
            }
            *c += 1.0;
        }
        match &self.weights {
            Some(w) => order.into_iter().zip(w.iter().copied()).collect(),
            None => order
                .into_iter()
                .map(|t| {
                    let c = counts[t.as_str()];
                    (t, c)
                })
                .collect(),
        }
    }

    /// Maximum-likelihood query model, P_mle(t|Q) proportional to the term weights.
    pub fn mle(&self) -> TermDistribution {
        TermDistribution::from_weights(self.weighted_terms())
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn check_non_empty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptyQuery(self.query_id.clone()))
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub doc_id: String,
    pub score: f64,
}

/// An ordered top-k result list for one query. Rank `r` is `entries[r - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_id: String,
    pub entries: Vec<RankedEntry>,
    pub k: usize,
}

impl RankedList {
    pub fn new(query_id: impl Into<String>, k: usize) -> Self {
        RankedList {
            query_id: query_id.into(),
            entries: Vec::new(),
            k,
        }
    }

    pub fn from_entries<S: Into<String>>(query_id: impl Into<String>, entries: Vec<(S, f64)>) -> Self {
        let entries: Vec<RankedEntry> = entries
            .into_iter()
            .map(|(d, s)| RankedEntry {
                doc_id: d.into(),
                score: s,
            })
            .collect();
        RankedList {
            query_id: query_id.into(),
            k: entries.len(),
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries.iter().map(|e| e.doc_id.as_str())
    }

    /// The first `n` document ids.
    pub fn top_docs(&self, n: usize) -> impl Iterator<Item = &str> + '_ {
        self.doc_ids().take(n)
    }

    /// Map from document id to 1-based rank.
    pub fn rank_map(&self) -> HashMap<&str, usize> {
        self.doc_ids().enumerate().map(|(i, d)| (d, i + 1)).collect()
    }

    pub fn truncate(&mut self, k: usize) {
        self.entries.truncate(k);
        self.k = k;
    }

    /// Checks the structural invariants: unique documents, `len <= k` and
    /// non-increasing scores.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.entries.len() > self.k {
            return Err(format!("{} entries exceed depth {}", self.entries.len(), self.k));
        }
        let mut seen = std::collections::HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.doc_id.as_str()) {
                return Err(format!("duplicate document `{}`", e.doc_id));
            }
        }
        if let Some(w) = self.entries.windows(2).find(|w| w[1].score > w[0].score) {
            return Err(format!(
                "score increases from {} ({}) to {} ({})",
                w[0].doc_id, w[0].score, w[1].doc_id, w[1].score
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

pub const DEFAULT_MU: f64 = 1000.0;

/// Non-negative BM25 idf: ln(1 + (N - df + 0.5) / (df + 0.5)).
pub fn bm25_idf(num_docs: usize, df: usize) -> f64 {
    let n = num_docs as f64;
    let df = df as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// BM25 saturation component for one term in one document.
pub fn bm25_tf(tf: f64, doc_len: f64, avg_doc_len: f64, params: Bm25Params) -> f64 {
    let norm = 1.0 - params.b + params.b * doc_len / avg_doc_len;
    tf * (params.k1 + 1.0) / (tf + params.k1 * norm)
}

fn check_depth(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::param("k", "depth must be at least 1"));
    }
    Ok(())
}

pub fn search_bm25(query: &Query, index: &InvertedIndex, k: usize, params: Bm25Params) -> Result<RankedList> {
    query.check_non_empty()?;
    check_depth(k)?;
    if !(params.k1 >= 0.0 && (0.0..=1.0).contains(&params.b)) {
        return Err(Error::param("bm25", format!("k1 must be >= 0 and b in [0,1], got {params:?}")));
    }
    let n = index.num_docs();
    let avdl = index.avg_doc_len();
    let mut scores = vec![0.0f64; n];
    let mut touched = vec![false; n];
    let mut matched = Vec::new();
    for (term, weight) in query.weighted_terms() {
        let postings = index.postings(&term);
        if postings.is_empty() {
            continue;
        }
        let idf = bm25_idf(n, postings.len());
        for p in postings {
            let d = p.doc as usize;
            let dl = f64::from(index.doc_len(p.doc));
            scores[d] += weight * idf * bm25_tf(f64::from(p.tf), dl, avdl, params);
            if !touched[d] {
                touched[d] = true;
                matched.push(p.doc);
            }
        }
    }
    let scored = matched.into_iter().map(|d| (d, scores[d as usize])).collect();
    Ok(into_ranked_list(&query.query_id, scored, k, index))
}

pub fn search_lm_dirichlet(query: &Query, index: &InvertedIndex, k: usize, mu: f64) -> Result<RankedList> {
    query.check_non_empty()?;
    check_depth(k)?;
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::param("mu", format!("must be positive, got {mu}")));
    }
    // Terms unseen in the collection add the same -inf to every document and
    // are skipped.
    let terms: Vec<(u32, f64, f64)> = query
        .weighted_terms()
        .into_iter()
        .filter_map(|(t, w)| {
            let id = index.term_id(&t)?;
            let pc = index.cf_by_id(id) as f64 / index.total_tokens() as f64;
            Some((id, w, pc))
        })
        .collect();

    let mut touched = vec![false; index.num_docs()];
    let mut matched = Vec::new();
    for &(id, _, _) in &terms {
        for p in index.postings_by_id(id) {
            if !touched[p.doc as usize] {
                touched[p.doc as usize] = true;
                matched.push(p.doc);
            }
        }
    }
    let scored = matched
        .into_iter()
        .map(|d| (d, dirichlet_log_likelihood(index, d, &terms, mu)))
        .collect();
    Ok(into_ranked_list(&query.query_id, scored, k, index))
}

/// Σ_t w(t) · ln((tf(t,D) + mu·P(t|C)) / (|D| + mu)) over `(term id, weight, P(t|C))`.
pub(crate) fn dirichlet_log_likelihood(index: &InvertedIndex, doc: u32, terms: &[(u32, f64, f64)], mu: f64) -> f64 {
    let dl = f64::from(index.doc_len(doc));
    let mut score = 0.0;
    for &(id, w, pc) in terms {
        let tf = f64::from(index.tf(doc, id));
        score += w * ((tf + mu * pc) / (dl + mu)).ln();
    }
    score
}

fn into_ranked_list(query_id: &str, mut scored: Vec<(u32, f64)>, k: usize, index: &InvertedIndex) -> RankedList {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    RankedList {
        query_id: query_id.to_owned(),
        entries: scored
            .into_iter()
            .map(|(d, score)| RankedEntry {
                doc_id: index.doc(d).doc_id.clone(),
                score,
            })
            .collect(),
        k,
    }
}

/// Retrieval model selector used for second-stage retrieval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RetrievalModel {
    Bm25(Bm25Params),
    Dirichlet { mu: f64 },
}

impl RetrievalModel {
    pub fn search(&self, query: &Query, index: &InvertedIndex, k: usize) -> Result<RankedList> {
        match *self {
            RetrievalModel::Bm25(p) => search_bm25(query, index, k, p),
            RetrievalModel::Dirichlet { mu } => search_lm_dirichlet(query, index, k, mu),
        }
    }
}

/// Maximum-likelihood document model, P(t|D) = tf(t,D)/|D|.
pub fn doc_model(doc: &Document, index: &InvertedIndex) -> Result<TermDistribution> {
    let tokens = doc.tokens(index.tokenizer());
    if tokens.is_empty() {
        return Err(Error::EmptyDocument(doc.doc_id.clone()));
    }
    Ok(TermDistribution::mle(&tokens))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::build_index;
    use crate::text::TokenizerConfig;

    fn two_docs() -> InvertedIndex {
        build_index([("d1", "a b a"), ("d2", "b c")], &TokenizerConfig::default()).unwrap()
    }

    fn q(text: &str) -> Query {
        Query::new("q", text.split_whitespace().map(String::from).collect())
    }

    #[test]
    fn bm25_worked_example() {
        let list = search_bm25(&q("c"), &two_docs(), 10, Bm25Params::default()).unwrap();
        assert_eq!(list.len(), 1);
        assert_eq!(list.entries[0].doc_id, "d2");
        let expected = 2f64.ln() * 2.2 / (1.0 + 1.2 * (0.25 + 0.75 * (2.0 / 2.5)));
        assert!((list.entries[0].score - expected).abs() < 1e-12);
        assert!((list.entries[0].score - 0.7549).abs() < 1e-4);
    }

    #[test]
    fn absent_term_gives_empty_list() {
        let list = search_bm25(&q("zzz"), &two_docs(), 10, Bm25Params::default()).unwrap();
        assert!(list.is_empty());
        let list = search_lm_dirichlet(&q("zzz"), &two_docs(), 10, 100.0).unwrap();
        assert!(list.is_empty());
    }

    #[test]
    fn identical_docs_tie_break_by_internal_id() {
        let index = build_index([("z", "x y"), ("a", "x y")], &TokenizerConfig::default()).unwrap();
        let list = search_bm25(&q("x"), &index, 10, Bm25Params::default()).unwrap();
        let ids: Vec<&str> = list.doc_ids().collect();
        assert_eq!(ids, ["z", "a"]);
        assert_eq!(list.entries[0].score, list.entries[1].score);
        let list = search_lm_dirichlet(&q("x"), &index, 10, 1000.0).unwrap();
        assert_eq!(list.doc_ids().collect::<Vec<_>>(), ["z", "a"]);
    }

    #[test]
    fn dirichlet_worked_example() {
        let list = search_lm_dirichlet(&q("a"), &two_docs(), 10, 100.0).unwrap();
        assert_eq!(list.len(), 1, "d2 has no match and must not be scored");
        assert_eq!(list.entries[0].doc_id, "d1");
        assert!((list.entries[0].score - (42.0f64 / 103.0).ln()).abs() < 1e-12);
        assert!((list.entries[0].score + 0.897_059).abs() < 1e-6);
    }

    #[test]
    fn huge_mu_scores_approach_collection_likelihood() {
        let index = build_index(
            [("d1", "a a a b"), ("d2", "a c c"), ("d3", "b c d d d")],
            &TokenizerConfig::default(),
        )
        .unwrap();
        let query = q("a c");
        let list = search_lm_dirichlet(&query, &index, 10, 1e9).unwrap();
        let target = index.collection_prob("a").ln() + index.collection_prob("c").ln();
        assert_eq!(list.len(), 3);
        for e in &list.entries {
            assert!((e.score - target).abs() < 1e-6, "{} vs {target}", e.score);
        }
    }

    #[test]
    fn empty_query_and_bad_params_are_rejected() {
        let index = two_docs();
        let empty = Query::new("e", vec![]);
        assert!(matches!(search_bm25(&empty, &index, 5, Bm25Params::default()), Err(Error::EmptyQuery(_))));
        assert!(matches!(search_lm_dirichlet(&empty, &index, 5, 10.0), Err(Error::EmptyQuery(_))));
        assert!(search_lm_dirichlet(&q("a"), &index, 5, 0.0).is_err());
        assert!(search_bm25(&q("a"), &index, 0, Bm25Params::default()).is_err());
    }

    #[test]
    fn doc_model_examples() {
        let index = two_docs();
        let config = TokenizerConfig::default();
        let m = doc_model(&Document::new("x", "a b a", &config), &index).unwrap();
        assert!((m.prob("a") - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.prob("b") - 1.0 / 3.0).abs() < 1e-15);
        let m = doc_model(&Document::new("x", "a", &config), &index).unwrap();
        assert_eq!(m.prob("a"), 1.0);
        let m = doc_model(&Document::new("x", "a b", &config), &index).unwrap();
        assert_eq!((m.prob("a"), m.prob("b")), (0.5, 0.5));
        assert!(doc_model(&Document::new("x", "", &config), &index).is_err());
    }

    #[test]
    fn weighted_terms_default_to_counts() {
        let query = q("a b a");
        assert_eq!(query.weighted_terms(), [("a".to_string(), 2.0), ("b".to_string(), 1.0)]);
        assert!(Query::weighted("q", vec![("a".into(), 0.0)]).is_err());
        assert!(Query::weighted("q", vec![("a".into(), 1.0), ("a".into(), 1.0)]).is_err());
    }

    #[test]
    fn bm25_monotone_in_tf() {
        let base = build_index([("d1", "a b c"), ("d2", "b c d")], &TokenizerConfig::default()).unwrap();
        let more = build_index([("d1", "a a b c"), ("d2", "b c d")], &TokenizerConfig::default()).unwrap();
        // Raising tf also raises |D|, and the score still must not drop.
        let s0 = search_bm25(&q("a"), &base, 5, Bm25Params::default()).unwrap().entries[0].score;
        let s1 = search_bm25(&q("a"), &more, 5, Bm25Params::default()).unwrap().entries[0].score;
        assert!(s1 >= s0);
    }
}
