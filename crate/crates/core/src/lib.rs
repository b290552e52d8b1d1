//! Selective pseudo-relevance feedback.
//!
//! Pseudo-relevance feedback (PRF) expands a query with terms from its
//! top-ranked documents. It helps many queries and hurts others. This crate
//! indexes a corpus, retrieves with BM25 or a Dirichlet language model,
//! expands queries with RM3, and then decides per query whether the expanded
//! run should replace the original one:
//!
//! * classic deciders: a clarity-based threshold, a divergence threshold
//!   between pre- and post-feedback result lists, and logistic regression over
//!   four query features;
//! * a neural twin-branch decider that sees only the original query at
//!   inference;
//! * confidence fusion of the two runs, weighted by the decider's `theta`;
//! * evaluation: MAP, nDCG@10, decision accuracy, oracle selection and a
//!   helped/hurt contingency table.
//!
//! ```
//! use srf::{build_index, search_bm25, Bm25Params, Query, TokenizerConfig};
//!
//! let corpus = [("d1", "cat sat"), ("d2", "dog sat sat")];
//! let index = build_index(corpus, &TokenizerConfig::default()).unwrap();
//! let query = Query::parse("q1", "cat", &index);
//! let run = search_bm25(&query, &index, 10, Bm25Params::default()).unwrap();
//! assert_eq!(run.doc_ids().collect::<Vec<_>>(), ["d1"]);
//! ```

pub mod decision;
pub mod deep;
pub mod distribution;
pub mod error;
pub mod eval;
pub mod feedback;
pub mod fusion;
pub mod index;
pub mod retrieval;
pub mod synthetic;
pub mod text;
pub mod trec;
pub mod tsv;

pub use decision::{
    calibrate_td2f_threshold, clarity, decide_lr, decide_qpp_srf, decide_td2f, extract_lr_features, label_query,
    normalize_scores, sigmoid, td2f_divergence, train_logistic, DecisionMethod, DecisionOutcome, FeatureVector,
    LogisticConfig, LogisticModel, QueryLabel,
};
pub use deep::{
    encode_branch, encode_pair, forward_infer, forward_train, load_decider, save_decider, train_decider, DeciderConfig,
    DeciderParams, TrainingInstance,
};
pub use distribution::TermDistribution;
pub use error::{Error, Result};
pub use eval::{average_precision, ndcg_at_10, oracle_run, ContingencyTable, EvalReport};
pub use feedback::{estimate_rm1, expand_rm3, interpolate_rm3, search_expanded, ExpandedQuery, FeedbackParams};
pub use fusion::{fuse_confidence, fuse_fixed, select_hard, FusionConfig};
pub use index::{build_index, collection_model, load_index, save_index, Document, InvertedIndex};
pub use retrieval::{search_bm25, search_lm_dirichlet, Bm25Params, Query, RankedEntry, RankedList, RetrievalModel};
pub use text::{tokenize, TokenizerConfig};
pub use trec::{Qrels, Runs};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/retrieval.md")]
    mod retrieval {}
    #[doc = include_str!("../../../book/src/feedback.md")]
    mod feedback {}
    #[doc = include_str!("../../../book/src/deciders.md")]
    mod deciders {}
    #[doc = include_str!("../../../book/src/deep.md")]
    mod deep {}
    #[doc = include_str!("../../../book/src/fusion.md")]
    mod fusion {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
