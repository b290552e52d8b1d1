//! Seeded synthetic data: the marker-token decider task, a separable feature
//! task for the logistic decider, and a small topical test collection.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::deep::TrainingInstance;
use crate::trec::Qrels;

/// Token whose presence in the top-ranked original-branch document sets the
/// label of a marker-task instance.
pub const MARKER: &str = "marker";

fn filler_words(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i}")).collect()
}

fn random_doc(rng: &mut ChaCha8Rng, filler: &[String], len: usize) -> Vec<String> {
    (0..len).map(|_| filler.choose(rng).expect("filler").clone()).collect()
}

/// Balanced instances where `label = 1` iff [`MARKER`] occurs in the first
/// original-branch document. The marker also appears at random in the other
/// slots and in the expanded branch, independent of the label.
pub fn marker_task(n: usize, k: usize, seed: u64) -> Vec<TrainingInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let filler = filler_words(30);
    let doc_len = 4;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as u8;
        let query = random_doc(&mut rng, &filler, 2);
        let mut docs: Vec<Vec<String>> = (0..k).map(|_| random_doc(&mut rng, &filler, doc_len)).collect();
        if label == 1 {
            let pos = rng.gen_range(0..doc_len);
            docs[0][pos] = MARKER.to_owned();
        }
        for doc in docs.iter_mut().skip(1) {
            if rng.gen_bool(0.3) {
                let pos = rng.gen_range(0..doc_len);
                doc[pos] = MARKER.to_owned();
            }
        }
        let mut expanded_query = query.clone();
        expanded_query.extend(random_doc(&mut rng, &filler, 2));
        let mut expanded_docs: Vec<Vec<String>> = (0..k).map(|_| random_doc(&mut rng, &filler, doc_len)).collect();
        for doc in expanded_docs.iter_mut() {
            if rng.gen_bool(0.3) {
                let pos = rng.gen_range(0..doc_len);
                doc[pos] = MARKER.to_owned();
            }
        }
        out.push(TrainingInstance::new(query, docs, expanded_query, expanded_docs, label, k));
    }
    out
}

/// Linearly separable examples: `y = 1` iff the first feature exceeds 0.5,
/// with no first-feature values inside the margin band (0.4, 0.6). The other
/// three features are uniform noise on [0, 1).
pub fn separable_features(n: usize, seed: u64) -> Vec<([f64; 4], u8)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x: [f64; 4] = std::array::from_fn(|_| rng.gen::<f64>());
        if (x[0] - 0.5).abs() < 0.1 {
            continue;
        }
        out.push((x, u8::from(x[0] > 0.5)));
    }
    out
}

/// A small topical collection: documents, queries and graded judgments.
#[derive(Debug, Clone)]
pub struct ToyCollection {
    pub docs: Vec<(String, String)>,
    pub queries: BTreeMap<String, String>,
    pub qrels: Qrels,
}

fn syllable_word(rng: &mut ChaCha8Rng, used: &mut std::collections::HashSet<String>) -> String {
    const ONSETS: [&str; 14] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
    const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
    loop {
        let syllables = rng.gen_range(2..=3);
        let w: String = (0..syllables)
            .map(|_| format!("{}{}", ONSETS.choose(rng).unwrap(), VOWELS.choose(rng).unwrap()))
            .collect();
        if used.insert(w.clone()) {
            return w;
        }
    }
}

/// `topics` topics with `docs_per_topic` documents each and `queries_per_topic`
/// queries each.
///
/// Each topic owns a set of words; neighbouring topics share a few of them so
/// some queries are ambiguous and expansion can drift. A document mixes words
/// of its topic with common background words. A document is relevant when it
/// belongs to the query's topic and contains a query word (grade 2 for two or
/// more occurrences, else 1).
pub fn toy_collection(topics: usize, docs_per_topic: usize, queries_per_topic: usize, seed: u64) -> ToyCollection {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used = std::collections::HashSet::new();
    let background: Vec<String> = (0..150).map(|_| syllable_word(&mut rng, &mut used)).collect();
    let mut topic_words: Vec<Vec<String>> = (0..topics)
        .map(|_| (0..14).map(|_| syllable_word(&mut rng, &mut used)).collect())
        .collect();
    for t in 0..topics {
        let next = (t + 1) % topics;
        if next != t {
            let shared: Vec<String> = topic_words[next][..3].to_vec();
            topic_words[t].extend(shared);
        }
    }

    let mut docs = Vec::with_capacity(topics * docs_per_topic);
    let mut doc_topic = Vec::with_capacity(topics * docs_per_topic);
    let mut doc_tokens = Vec::with_capacity(topics * docs_per_topic);
    for (t, words_of_topic) in topic_words.iter().enumerate() {
        for j in 0..docs_per_topic {
            let len = rng.gen_range(30..=80);
            let topical = rng.gen_range(0.15..0.45);
            let words: Vec<String> = (0..len)
                .map(|_| {
                    if rng.gen_bool(topical) {
                        words_of_topic.choose(&mut rng).unwrap().clone()
                    } else {
                        let i = (rng.gen::<f64>().powi(2) * background.len() as f64) as usize;
                        background[i].clone()
                    }
                })
                .collect();
            docs.push((format!("D{t:02}{j:03}"), words.join(" ")));
            doc_topic.push(t);
            doc_tokens.push(words);
        }
    }
    // Interleave topics so corpus order does not encode the topic.
    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.shuffle(&mut rng);
    let docs: Vec<(String, String)> = order.iter().map(|&i| docs[i].clone()).collect();
    let doc_topic: Vec<usize> = order.iter().map(|&i| doc_topic[i]).collect();
    let doc_tokens: Vec<Vec<String>> = order.iter().map(|&i| doc_tokens[i].clone()).collect();

    let mut queries = BTreeMap::new();
    let mut qrels = Qrels::default();
    let mut qn = 0;
    for (t, words_of_topic) in topic_words.iter().enumerate() {
        for _ in 0..queries_per_topic {
            qn += 1;
            let qid = format!("Q{qn:03}");
            let len = rng.gen_range(1..=3);
            let terms: Vec<String> = words_of_topic.choose_multiple(&mut rng, len).cloned().collect();
            for (i, (doc_id, _)) in docs.iter().enumerate() {
                if doc_topic[i] != t {
                    continue;
                }
                let hits = doc_tokens[i].iter().filter(|w| terms.contains(w)).count();
                if hits > 0 {
                    qrels.insert(&qid, doc_id, if hits > 1 { 2 } else { 1 });
                }
            }
            queries.insert(qid, terms.join(" "));
        }
    }
    ToyCollection { docs, queries, qrels }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marker_task_is_balanced_and_deterministic() {
        let a = marker_task(40, 3, 9);
        assert_eq!(a, marker_task(40, 3, 9));
        assert_eq!(a.iter().filter(|i| i.label == 1).count(), 20);
        for inst in &a {
            assert_eq!(inst.docs.len(), 3);
            assert_eq!(inst.docs[0].iter().any(|w| w == MARKER), inst.label == 1);
        }
    }

    #[test]
    fn separable_has_both_classes() {
        let s = separable_features(100, 1);
        let pos = s.iter().filter(|(_, y)| *y == 1).count();
        assert!(pos > 10 && pos < 90);
    }

    #[test]
    fn toy_collection_shape() {
        let c = toy_collection(3, 5, 2, 4);
        assert_eq!(c.docs.len(), 15);
        assert_eq!(c.queries.len(), 6);
        for q in c.queries.keys() {
            assert!(c.qrels.num_relevant(q) <= 5);
        }
    }
}
