//! TREC run and qrels files.
//!
//! Run lines are `query_id Q0 doc_id rank score tag`, space separated, with a
//! 1-based rank and the score printed to six decimals. Qrels lines are
//! `query_id 0 doc_id grade`.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::retrieval::{RankedEntry, RankedList};

/// Ranked lists keyed by query id.
pub type Runs = BTreeMap<String, RankedList>;

pub fn format_trec_run(runs: &Runs, tag: &str) -> String {
    let mut out = String::new();
    for list in runs.values() {
        for (i, e) in list.entries.iter().enumerate() {
            writeln!(out, "{} Q0 {} {} {:.6} {}", list.query_id, e.doc_id, i + 1, e.score, tag)
                .expect("writing to a String cannot fail");
        }
    }
    out
}

pub fn write_trec_run(path: impl AsRef<Path>, runs: &Runs, tag: &str) -> Result<()> {
    fs::write(path, format_trec_run(runs, tag))?;
    Ok(())
}

pub fn read_trec_run(path: impl AsRef<Path>) -> Result<Runs> {
    let (runs, warnings) = parse_trec_run(&fs::read_to_string(path)?)?;
    for w in warnings {
        warn!("{w}");
    }
    Ok(runs)
}

/// Parses a run, returning it along with any non-fatal warnings (rank gaps).
///
/// Entries of each query are ordered by the rank field (file order breaks
/// ties) and then re-densified to ranks 1..n.
pub fn parse_trec_run(content: &str) -> Result<(Runs, Vec<String>)> {
    struct Line {
        doc: String,
        rank: u64,
        score: f64,
        order: usize,
    }
    let mut per_query: BTreeMap<String, Vec<Line>> = BTreeMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut warnings = Vec::new();
    for (i, raw) in content.lines().enumerate() {
        let line_no = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 6 fields, found {}", fields.len()),
            });
        }
        let rank: u64 = fields[3].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid rank `{}`", fields[3]),
        })?;
        if rank == 0 {
            return Err(Error::Parse {
                line: line_no,
                message: "rank must be 1-based".into(),
            });
        }
        let score: f64 = fields[4].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid score `{}`", fields[4]),
        })?;
        if !score.is_finite() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("non-finite score `{}`", fields[4]),
            });
        }
        let (qid, doc) = (fields[0].to_owned(), fields[2].to_owned());
        if !seen.insert((qid.clone(), doc.clone())) {
            return Err(Error::Duplicate {
                line: line_no,
                message: format!("document `{doc}` listed twice for query `{qid}`"),
            });
        }
        per_query.entry(qid).or_default().push(Line {
            doc,
            rank,
            score,
            order: i,
        });
    }
    if per_query.is_empty() {
        warnings.push("run file contains no entries".to_owned());
    }
    let mut runs = Runs::new();
    for (qid, mut lines) in per_query {
        lines.sort_by_key(|l| (l.rank, l.order));
        let dense = lines.iter().enumerate().all(|(i, l)| l.rank == i as u64 + 1);
        if !dense {
            warnings.push(format!("query `{qid}`: rank gaps or repeats; ranks re-densified"));
        }
        let entries: Vec<RankedEntry> = lines
            .into_iter()
            .map(|l| RankedEntry {
                doc_id: l.doc,
                score: l.score,
            })
            .collect();
        runs.insert(
            qid.clone(),
            RankedList {
                query_id: qid,
                k: entries.len(),
                entries,
            },
        );
    }
    Ok((runs, warnings))
}

/// Relevance judgments: query id → (doc id → grade).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a judgment; returns `false` (and leaves the existing grade) if
    /// the pair is already judged.
    pub fn insert(&mut self, query_id: impl Into<String>, doc_id: impl Into<String>, grade: u32) -> bool {
        let docs = self.judgments.entry(query_id.into()).or_default();
        let doc_id = doc_id.into();
        if docs.contains_key(&doc_id) {
            return false;
        }
        docs.insert(doc_id, grade);
        true
    }

    pub fn contains_query(&self, query_id: &str) -> bool {
        self.judgments.contains_key(query_id)
    }

    pub fn query(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(query_id)
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> u32 {
        self.judgments
            .get(query_id)
            .and_then(|d| d.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    /// Number of documents with grade >= 1.
    pub fn num_relevant(&self, query_id: &str) -> usize {
        self.judgments
            .get(query_id)
            .map(|d| d.values().filter(|&&g| g >= 1).count())
            .unwrap_or(0)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.judgments.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn parse_qrels(content: &str) -> Result<Qrels> {
    let mut qrels = Qrels::new();
    for (i, raw) in content.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let grade: i64 = fields[3].parse().map_err(|_| Error::Parse {
            line,
            message: format!("non-integer grade `{}`", fields[3]),
        })?;
        if grade < 0 || grade > i64::from(u32::MAX) {
            return Err(Error::Parse {
                line,
                message: format!("grade {grade} out of range"),
            });
        }
        if !qrels.insert(fields[0], fields[2], grade as u32) {
            return Err(Error::Duplicate {
                line,
                message: format!("({}, {}) judged twice", fields[0], fields[2]),
            });
        }
    }
    Ok(qrels)
}

pub fn read_qrels(path: impl AsRef<Path>) -> Result<Qrels> {
    parse_qrels(&fs::read_to_string(path)?)
}

pub fn format_qrels(qrels: &Qrels) -> String {
    let mut out = String::new();
    for (q, docs) in &qrels.judgments {
        for (d, g) in docs {
            writeln!(out, "{q} 0 {d} {g}").expect("writing to a String cannot fail");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_line_format() {
        let mut runs = Runs::new();
        runs.insert("q1".into(), RankedList::from_entries("q1", vec![("d7", 0.75)]));
        assert_eq!(format_trec_run(&runs, "bm25"), "q1 Q0 d7 1 0.750000 bm25\n");
    }

    #[test]
    fn parses_external_line() {
        let (runs, warnings) = parse_trec_run("q1 Q0 d7 1 12.3 grf\n").unwrap();
        assert!(warnings.is_empty());
        let list = &runs["q1"];
        assert_eq!(list.entries[0].doc_id, "d7");
        assert_eq!(list.entries[0].score, 12.3);
    }

    #[test]
    fn five_fields_is_a_parse_error_with_line() {
        let err = parse_trec_run("q1 Q0 d1 1 1.0 t\nq1 Q0 d2 2 0.5\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn duplicate_pair_is_rejected() {
        let err = parse_trec_run("q1 Q0 d7 1 1.0 t\nq1 Q0 d7 2 0.5 t\n").unwrap_err();
        assert!(matches!(err, Error::Duplicate { line: 2, .. }));
    }

    #[test]
    fn rank_gaps_warn_and_redensify() {
        let (runs, warnings) = parse_trec_run("q1 Q0 b 5 1.0 t\nq1 Q0 a 2 2.0 t\n").unwrap();
        assert_eq!(warnings.len(), 1);
        assert_eq!(runs["q1"].doc_ids().collect::<Vec<_>>(), ["a", "b"]);
    }

    #[test]
    fn empty_run_is_empty_map_with_warning() {
        let (runs, warnings) = parse_trec_run("").unwrap();
        assert!(runs.is_empty());
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn qrels_parsing() {
        let q = parse_qrels("q1 0 d3 1\n").unwrap();
        assert_eq!(q.grade("q1", "d3"), 1);
        assert!(matches!(parse_qrels("q1 0 d3 1\nq1 0 d3 1\n"), Err(Error::Duplicate { line: 2, .. })));
        assert!(matches!(parse_qrels("q1 0 d3 -1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_qrels("q1 0 d3 x\n"), Err(Error::Parse { line: 1, .. })));
    }
}
