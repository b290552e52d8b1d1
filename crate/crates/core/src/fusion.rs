//! Combining the pre- and post-feedback rankings.
//!
//! The confidence-weighted fusion scores every document that appears in
//! either list as
//!
//! ```text
//! score(D) = (1 - theta) / rank(D, pre) + theta / rank(D, post)
//! ```
//!
//! where a document missing from a list takes the rank `aleph`. Fixed-weight
//! fusion is the same formula with a constant `theta = alpha`, and hard
//! selection returns one of the two lists untouched.

use std::collections::HashMap;

use log::warn;

use crate::decision::DecisionOutcome;
use crate::error::{Error, Result};
use crate::retrieval::{RankedEntry, RankedList};

/// Rank given to documents absent from a list.
pub const DEFAULT_ALEPH: usize = 1000;
/// Output depth, matching the MAP cutoff.
pub const DEFAULT_FUSION_DEPTH: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    pub aleph: usize,
    pub alpha: f64,
    pub k: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            aleph: DEFAULT_ALEPH,
            alpha: 0.5,
            k: DEFAULT_FUSION_DEPTH,
        }
    }
}

impl FusionConfig {
    fn validate(&self) -> Result<()> {
        if self.aleph == 0 {
            return Err(Error::param("aleph", "must be positive"));
        }
        if self.k == 0 {
            return Err(Error::param("k", "depth must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::param("alpha", format!("must lie in [0,1], got {}", self.alpha)));
        }
        Ok(())
    }
}

/// 1-based rank of `doc_id` in `list`, or `aleph` if absent.
pub fn rank_of(doc_id: &str, list: &RankedList, aleph: usize) -> usize {
    list.doc_ids().position(|d| d == doc_id).map_or(aleph, |i| i + 1)
}

pub fn fuse_confidence(pre: &RankedList, post: &RankedList, theta: f64, config: &FusionConfig) -> Result<RankedList> {
    config.validate()?;
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::param("theta", format!("must lie in [0,1], got {theta}")));
    }
    if pre.query_id != post.query_id {
        return Err(Error::QueryMismatch(pre.query_id.clone(), post.query_id.clone()));
    }
    if pre.len().max(post.len()) >= config.aleph {
        warn!(
            "query `{}`: list depth {} reaches aleph {}; deep documents tie with missing ones",
            pre.query_id,
            pre.len().max(post.len()),
            config.aleph
        );
    }

    let pre_ranks = pre.rank_map();
    let post_ranks = post.rank_map();
    let aleph = config.aleph as f64;
    let rank = |m: &HashMap<&str, usize>, d: &str| m.get(d).map_or(aleph, |&r| r as f64);

    // Candidates: union of both lists, each document once.
    let mut candidates: Vec<&str> = pre.doc_ids().collect();
    candidates.extend(post.doc_ids().filter(|d| !pre_ranks.contains_key(d)));

    let mut scored: Vec<(&str, f64)> = candidates
        .into_iter()
        .map(|d| {
            let score = (1.0 - theta) / rank(&pre_ranks, d) + theta / rank(&post_ranks, d);
            (d, score)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    scored.truncate(config.k);

    Ok(RankedList {
        query_id: pre.query_id.clone(),
        entries: scored
            .into_iter()
            .map(|(d, score)| RankedEntry {
                doc_id: d.to_owned(),
                score,
            })
            .collect(),
        k: config.k,
    })
}

/// Fixed-weight reciprocal-rank fusion: `fuse_confidence` with `theta = alpha`.
pub fn fuse_fixed(pre: &RankedList, post: &RankedList, alpha: f64, config: &FusionConfig) -> Result<RankedList> {
    fuse_confidence(pre, post, alpha, &FusionConfig { alpha, ..*config })
}

pub fn select_hard(pre: &RankedList, post: &RankedList, decision: &DecisionOutcome) -> RankedList {
    if decision.apply_prf {
        post.clone()
    } else {
        pre.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::DecisionMethod;

    fn list(ids: &[&str]) -> RankedList {
        let n = ids.len();
        RankedList::from_entries("q", ids.iter().enumerate().map(|(i, d)| (*d, (n - i) as f64)).collect())
    }

    fn score(l: &RankedList, d: &str) -> f64 {
        l.entries.iter().find(|e| e.doc_id == d).unwrap().score
    }

    #[test]
    fn rank_of_examples() {
        let l = list(&["a", "b", "c"]);
        assert_eq!(rank_of("a", &l, 1000), 1);
        assert_eq!(rank_of("z", &l, 1000), 1000);
        assert_eq!(rank_of("c", &l, 1000), 3);
    }

    #[test]
    fn worked_scores() {
        let cfg = FusionConfig::default();
        let fused = fuse_confidence(&list(&["x", "d"]), &list(&["d", "y"]), 0.6, &cfg).unwrap();
        assert!((score(&fused, "d") - 0.8).abs() < 1e-15);

        let fused = fuse_confidence(&list(&["d"]), &list(&["y"]), 0.5, &cfg).unwrap();
        assert!((score(&fused, "d") - 0.5005).abs() < 1e-15);

        let fused = fuse_fixed(&list(&["x", "d"]), &list(&["y", "d"]), 0.5, &cfg).unwrap();
        assert_eq!(score(&fused, "d"), 0.5);
    }

    #[test]
    fn theta_zero_keeps_pre_order() {
        let pre = list(&["a", "b", "c"]);
        let post = list(&["z", "c", "y"]);
        let fused = fuse_confidence(&pre, &post, 0.0, &FusionConfig::default()).unwrap();
        let ids: Vec<&str> = fused.doc_ids().collect();
        assert_eq!(ids, ["a", "b", "c", "y", "z"]);
        assert_eq!(score(&fused, "z"), 0.001);
    }

    #[test]
    fn mismatched_queries_rejected() {
        let mut post = list(&["a"]);
        post.query_id = "other".into();
        assert!(matches!(
            fuse_confidence(&list(&["a"]), &post, 0.5, &FusionConfig::default()),
            Err(Error::QueryMismatch(..))
        ));
    }

    #[test]
    fn hard_selection_passes_through() {
        let pre = list(&["a", "b"]);
        let post = list(&["c"]);
        let mut d = DecisionOutcome {
            query_id: "q".into(),
            theta: 0.2,
            apply_prf: false,
            method: DecisionMethod::LrSrf,
        };
        assert_eq!(select_hard(&pre, &post, &d), pre);
        d.apply_prf = true;
        assert_eq!(select_hard(&pre, &post, &d), post);
    }
}
