//! Brute-force reference implementations for testing `srf`.
//!
//! Everything here works on raw token lists and recomputes statistics from
//! scratch, without the inverted index.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use srf::RankedList;

/// A corpus of whitespace-tokenized lowercase words.
#[derive(Debug, Clone)]
pub struct RawCorpus {
    pub ids: Vec<String>,
    pub docs: Vec<Vec<String>>,
}

pub fn word(i: usize) -> String {
    format!("t{i}")
}

impl RawCorpus {
    /// Zipf-like word draws; roughly one document in twenty is empty.
    pub fn random(rng: &mut impl Rng, num_docs: usize, vocab: usize, max_len: usize) -> Self {
        let mut ids = Vec::with_capacity(num_docs);
        let mut docs = Vec::with_capacity(num_docs);
        for i in 0..num_docs {
            ids.push(format!("doc{:04}", (i * 7919) % 10_000));
            let len = if rng.gen_bool(0.05) { 0 } else { rng.gen_range(1..=max_len) };
            let doc = (0..len)
                .map(|_| word(((rng.gen::<f64>().powi(2)) * vocab as f64) as usize))
                .collect();
            docs.push(doc);
        }
        RawCorpus { ids, docs }
    }

    pub fn pairs(&self) -> Vec<(String, String)> {
        self.ids.iter().cloned().zip(self.docs.iter().map(|d| d.join(" "))).collect()
    }

    fn total_tokens(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    fn count(doc: &[String], term: &str) -> usize {
        doc.iter().filter(|w| *w == term).count()
    }

    fn cf(&self, term: &str) -> usize {
        self.docs.iter().map(|d| Self::count(d, term)).sum()
    }
}

/// Random query over the corpus vocabulary plus an occasional unseen term.
pub fn random_query(rng: &mut impl Rng, vocab: usize, max_len: usize) -> Vec<String> {
    let len = rng.gen_range(1..=max_len);
    (0..len)
        .map(|_| {
            if rng.gen_bool(0.1) {
                "unseen".to_owned()
            } else {
                word(rng.gen_range(0..vocab))
            }
        })
        .collect()
}

/// Distinct terms in first-occurrence order with their counts.
fn query_counts(query: &[String]) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = Vec::new();
    for t in query {
        match out.iter_mut().find(|(u, _)| u == t) {
            Some(e) => e.1 += 1.0,
            None => out.push((t.clone(), 1.0)),
        }
    }
    out
}

fn top_k(corpus: &RawCorpus, mut scored: Vec<(usize, f64)>, k: usize) -> Vec<(String, f64)> {
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.into_iter().take(k).map(|(i, s)| (corpus.ids[i].clone(), s)).collect()
}

pub fn brute_bm25(corpus: &RawCorpus, query: &[String], k1: f64, b: f64, k: usize) -> Vec<(String, f64)> {
    let n = corpus.docs.len() as f64;
    let avdl = corpus.total_tokens() as f64 / n;
    let terms = query_counts(query);
    let mut scored = Vec::new();
    for (i, doc) in corpus.docs.iter().enumerate() {
        let mut score = 0.0;
        let mut matched = false;
        for (t, w) in &terms {
            let tf = RawCorpus::count(doc, t) as f64;
            if tf == 0.0 {
                continue;
            }
            matched = true;
            let df = corpus.docs.iter().filter(|d| d.contains(t)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            let dl = doc.len() as f64;
            score += w * idf * (tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avdl)));
        }
        if matched {
            scored.push((i, score));
        }
    }
    top_k(corpus, scored, k)
}

pub fn brute_dirichlet(corpus: &RawCorpus, query: &[String], mu: f64, k: usize) -> Vec<(String, f64)> {
    let total = corpus.total_tokens() as f64;
    let terms: Vec<(String, f64, f64)> = query_counts(query)
        .into_iter()
        .filter_map(|(t, w)| {
            let cf = corpus.cf(&t);
            (cf > 0).then(|| {
                let pc = cf as f64 / total;
                (t, w, pc)
            })
        })
        .collect();
    let mut scored = Vec::new();
    for (i, doc) in corpus.docs.iter().enumerate() {
        if !terms.iter().any(|(t, _, _)| doc.contains(t)) {
            continue;
        }
        let dl = doc.len() as f64;
        let score = terms
            .iter()
            .map(|(t, w, pc)| w * ((RawCorpus::count(doc, t) as f64 + mu * pc) / (dl + mu)).ln())
            .sum();
        scored.push((i, score));
    }
    top_k(corpus, scored, k)
}

/// RM1 by the literal double sum Σ_D P(t|D)·P(Q|D) / Σ_D P(Q|D) over the
/// non-empty documents among the first `fb_docs` of `feedback`, truncated to
/// the `fb_terms` heaviest terms and renormalized.
pub fn brute_rm1(
    corpus: &RawCorpus,
    query: &[String],
    feedback: &[String],
    fb_docs: usize,
    fb_terms: usize,
    mu: f64,
) -> BTreeMap<String, f64> {
    let total = corpus.total_tokens() as f64;
    let terms: Vec<(String, f64)> = query_counts(query)
        .into_iter()
        .filter(|(t, _)| corpus.cf(t) > 0)
        .collect();
    let docs: Vec<&Vec<String>> = feedback
        .iter()
        .take(fb_docs)
        .filter_map(|id| corpus.ids.iter().position(|x| x == id))
        .map(|i| &corpus.docs[i])
        .filter(|d| !d.is_empty())
        .collect();
    let likelihood: Vec<f64> = docs
        .iter()
        .map(|d| {
            let dl = d.len() as f64;
            terms
                .iter()
                .map(|(t, w)| {
                    let pc = corpus.cf(t) as f64 / total;
                    ((RawCorpus::count(d, t) as f64 + mu * pc) / (dl + mu)).powf(*w)
                })
                .product()
        })
        .collect();
    let z: f64 = likelihood.iter().sum();
    let vocab: BTreeSet<&String> = docs.iter().flat_map(|d| d.iter()).collect();
    let mut weights: Vec<(String, f64)> = Vec::new();
    for t in vocab {
        let mut w = 0.0;
        for (d, l) in docs.iter().zip(&likelihood) {
            w += RawCorpus::count(d, t) as f64 / d.len() as f64 * (l / z);
        }
        weights.push((t.clone(), w));
    }
    // Weights equal up to rounding are ties, broken by term order.
    let key = |w: f64| (w * 1e12).round() as i64;
    weights.sort_by(|a, b| key(b.1).cmp(&key(a.1)).then(a.0.cmp(&b.0)));
    weights.truncate(fb_terms);
    let s: f64 = weights.iter().map(|(_, w)| w).sum();
    weights.into_iter().map(|(t, w)| (t, w / s)).collect()
}

/// AP as the mean over relevant documents of precision at their rank, with
/// precision recounted from the prefix each time.
pub fn reference_ap(ranking: &[String], grades: &HashMap<String, u32>, cutoff: usize) -> f64 {
    let relevant = grades.values().filter(|&&g| g > 0).count();
    if relevant == 0 {
        return 0.0;
    }
    let ranking = &ranking[..ranking.len().min(cutoff)];
    let is_rel = |d: &String| grades.get(d).is_some_and(|&g| g > 0);
    let mut total = 0.0;
    for (i, d) in ranking.iter().enumerate() {
        if is_rel(d) {
            let prefix_hits = ranking[..=i].iter().filter(|x| is_rel(x)).count();
            total += prefix_hits as f64 / (i + 1) as f64;
        }
    }
    total / relevant as f64
}

pub fn reference_ndcg(ranking: &[String], grades: &HashMap<String, u32>, depth: usize) -> f64 {
    let dcg = |gs: &[u32]| -> f64 {
        gs.iter()
            .take(depth)
            .enumerate()
            .map(|(i, &g)| (2f64.powf(f64::from(g)) - 1.0) / (i as f64 + 2.0).log2())
            .sum()
    };
    let got: Vec<u32> = ranking.iter().map(|d| grades.get(d).copied().unwrap_or(0)).collect();
    let mut ideal: Vec<u32> = grades.values().copied().collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let best = dcg(&ideal);
    if best == 0.0 {
        0.0
    } else {
        dcg(&got) / best
    }
}

/// A list of `len` distinct documents drawn from `d0..d{pool}` with strictly
/// decreasing scores.
pub fn random_list(rng: &mut impl Rng, query_id: &str, pool: usize, len: usize) -> RankedList {
    let mut docs: Vec<usize> = (0..pool).collect();
    docs.shuffle(rng);
    let entries = docs
        .into_iter()
        .take(len)
        .enumerate()
        .map(|(i, d)| (format!("d{d}"), (len - i) as f64))
        .collect();
    RankedList::from_entries(query_id, entries)
}

/// Largest relative error |a - n| / max(|a|, |n|, 1e-7) between the analytic
/// gradient and central differences with step `eps`, over every parameter,
/// under fixed branch masks.
pub fn decider_gradient_error(
    params: &srf::DeciderParams,
    data: &[srf::TrainingInstance],
    masks: &[bool],
    eps: f64,
) -> f64 {
    use srf::deep::{loss_and_gradient, masked_loss};
    let (_, grads) = loss_and_gradient(params, data, masks).expect("valid instances");
    let analytic = grads.tensors();
    let mut worst = 0.0f64;
    let mut probe = params.clone();
    for (t, tensor) in analytic.iter().enumerate() {
        for (i, &a) in tensor.iter().enumerate() {
            let orig = probe.tensors()[t][i];
            probe.tensors_mut()[t][i] = orig + eps;
            let up = masked_loss(&probe, data, masks).expect("valid instances");
            probe.tensors_mut()[t][i] = orig - eps;
            let down = masked_loss(&probe, data, masks).expect("valid instances");
            probe.tensors_mut()[t][i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-7);
            worst = worst.max(err);
        }
    }
    worst
}

/// Random instance over a fixed alphabet of `alphabet` words, `k` slots,
/// documents of 0 to 5 tokens.
pub fn random_instance(rng: &mut impl Rng, alphabet: usize, k: usize) -> srf::TrainingInstance {
    let mut words = |max: usize| -> Vec<String> {
        let len = rng.gen_range(0..=max);
        (0..len).map(|_| word(rng.gen_range(0..alphabet))).collect()
    };
    let query = words(3);
    let docs = (0..k).map(|_| words(5)).collect();
    let expanded = words(4);
    let expanded_docs = (0..k).map(|_| words(5)).collect();
    let label = u8::from(rng.gen_bool(0.5));
    srf::TrainingInstance::new(query, docs, expanded, expanded_docs, label, k)
}
