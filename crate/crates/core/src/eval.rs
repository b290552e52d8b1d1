//! Effectiveness metrics, the per-query oracle and the ΔAP contingency table.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::decision::QueryLabel;
use crate::error::{Error, Result};
use crate::retrieval::RankedList;
use crate::trec::{Qrels, Runs};

/// Evaluation depth for average precision.
pub const MAP_CUTOFF: usize = 1000;

/// Average precision at `cutoff`. R counts every judged document with grade
/// >= 1, retrieved or not; AP is 0 when R is 0.
pub fn average_precision(run: &RankedList, qrels: &Qrels, cutoff: usize) -> Result<f64> {
    let judged = qrels
        .query(&run.query_id)
        .ok_or_else(|| Error::MissingQuery(run.query_id.clone()))?;
    let num_relevant = judged.values().filter(|&&g| g >= 1).count();
    if num_relevant == 0 {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, doc) in run.doc_ids().take(cutoff).enumerate() {
        if judged.get(doc).copied().unwrap_or(0) >= 1 {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(sum / num_relevant as f64)
}

/// nDCG at depth `n` with gain 2^grade - 1 and discount 1/log2(rank + 1).
pub fn ndcg_at(run: &RankedList, qrels: &Qrels, n: usize) -> Result<f64> {
    let judged = qrels
        .query(&run.query_id)
        .ok_or_else(|| Error::MissingQuery(run.query_id.clone()))?;
    let gain = |g: u32| 2f64.powi(g as i32) - 1.0;
    let discount = |rank: usize| 1.0 / ((rank + 1) as f64).log2();

    let dcg: f64 = run
        .doc_ids()
        .take(n)
        .enumerate()
        .map(|(i, d)| gain(judged.get(d).copied().unwrap_or(0)) * discount(i + 1))
        .sum();
    let mut grades: Vec<u32> = judged.values().copied().filter(|&g| g > 0).collect();
    grades.sort_unstable_by(|a, b| b.cmp(a));
    let ideal: f64 = grades
        .iter()
        .take(n)
        .enumerate()
        .map(|(i, &g)| gain(g) * discount(i + 1))
        .sum();
    if ideal == 0.0 {
        return Ok(0.0);
    }
    Ok(dcg / ideal)
}

pub fn ndcg_at_10(run: &RankedList, qrels: &Qrels) -> Result<f64> {
    ndcg_at(run, qrels, 10)
}

fn symmetric_difference<'a, A, B>(a: A, b: B) -> Vec<String>
where
    A: Iterator<Item = &'a String>,
    B: Iterator<Item = &'a String>,
{
    let a: BTreeSet<&String> = a.collect();
    let b: BTreeSet<&String> = b.collect();
    a.symmetric_difference(&b).map(|s| (*s).clone()).collect()
}

/// Fraction of queries whose decision bit matches the label (`y == 1`).
pub fn decision_accuracy(decisions: &BTreeMap<String, bool>, labels: &BTreeMap<String, u8>) -> Result<f64> {
    let diff = symmetric_difference(decisions.keys(), labels.keys());
    if !diff.is_empty() {
        return Err(Error::KeyMismatch(diff));
    }
    if decisions.is_empty() {
        return Err(Error::EmptyInput("no queries to score"));
    }
    let correct = decisions
        .iter()
        .filter(|(q, &apply)| apply == (labels[*q] == 1))
        .count();
    Ok(correct as f64 / decisions.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryMetrics {
    pub ap: f64,
    pub ndcg10: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_query: BTreeMap<String, QueryMetrics>,
    pub map: f64,
    pub mean_ndcg10: f64,
    pub accuracy: Option<f64>,
}

impl EvalReport {
    /// Evaluates `runs` over the given query ids. A query with no list in
    /// `runs` is scored as an empty ranking.
    pub fn over_queries<'a, I>(runs: &Runs, qrels: &Qrels, query_ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut per_query = BTreeMap::new();
        for qid in query_ids {
            let empty;
            let list = match runs.get(qid) {
                Some(l) => l,
                None => {
                    empty = RankedList::new(qid, 0);
                    &empty
                }
            };
            per_query.insert(
                qid.to_owned(),
                QueryMetrics {
                    ap: average_precision(list, qrels, MAP_CUTOFF)?,
                    ndcg10: ndcg_at_10(list, qrels)?,
                },
            );
        }
        if per_query.is_empty() {
            return Err(Error::EmptyInput("no queries to evaluate"));
        }
        let n = per_query.len() as f64;
        let map = per_query.values().map(|m| m.ap).sum::<f64>() / n;
        let mean_ndcg10 = per_query.values().map(|m| m.ndcg10).sum::<f64>() / n;
        Ok(EvalReport {
            per_query,
            map,
            mean_ndcg10,
            accuracy: None,
        })
    }

    /// Evaluates over every query that has judgments.
    pub fn evaluate(runs: &Runs, qrels: &Qrels) -> Result<Self> {
        Self::over_queries(runs, qrels, qrels.query_ids())
    }

    pub fn with_accuracy(mut self, accuracy: f64) -> Self {
        self.accuracy = Some(accuracy);
        self
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (q, m) in &self.per_query {
            writeln!(f, "{q}\tAP\t{:.4}\tnDCG@10\t{:.4}", m.ap, m.ndcg10)?;
        }
        writeln!(f, "all\tMAP\t{:.4}", self.map)?;
        writeln!(f, "all\tnDCG@10\t{:.4}", self.mean_ndcg10)?;
        if let Some(acc) = self.accuracy {
            writeln!(f, "all\tAccuracy\t{acc:.4}")?;
        }
        writeln!(f, "all\tnum_q\t{}", self.per_query.len())
    }
}

/// Per query, picks whichever list has the higher AP (the pre-feedback list on
/// ties).
pub fn oracle_run(pre: &Runs, post: &Runs, qrels: &Qrels) -> Result<(Runs, EvalReport)> {
    let ids: BTreeSet<&String> = pre.keys().chain(post.keys()).collect();
    let mut chosen = Runs::new();
    for qid in &ids {
        let (p, q) = match (pre.get(*qid), post.get(*qid)) {
            (Some(p), Some(q)) => (p, q),
            _ => {
                return Err(Error::param(
                    "runs",
                    format!("query `{qid}` lacks a pre- or post-feedback list"),
                ))
            }
        };
        let ap_pre = average_precision(p, qrels, MAP_CUTOFF)?;
        let ap_post = average_precision(q, qrels, MAP_CUTOFF)?;
        let pick = if ap_post > ap_pre { q } else { p };
        chosen.insert((*qid).clone(), pick.clone());
    }
    let report = EvalReport::over_queries(&chosen, qrels, ids.iter().map(|s| s.as_str()))?;
    Ok((chosen, report))
}

/// Relative AP change (AP(post) - AP(pre)) / AP(pre); `None` when AP(pre) is 0.
pub fn relative_ap_change(ap_pre: f64, ap_post: f64) -> Option<f64> {
    if ap_pre == 0.0 {
        None
    } else {
        Some((ap_post - ap_pre) / ap_pre)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ContingencyCell {
    pub count: usize,
    pub mean_abs_delta: f64,
}

/// Predicted {apply, skip} × actual {ΔAP > 0, ΔAP <= 0}.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    pub apply_improved: ContingencyCell,
    pub apply_hurt: ContingencyCell,
    pub skip_improved: ContingencyCell,
    pub skip_hurt: ContingencyCell,
    /// Queries left out because AP(pre) = 0.
    pub excluded: Vec<String>,
    /// Relative AP change for each query that has one.
    pub deltas: BTreeMap<String, f64>,
}

impl ContingencyTable {
    pub fn cell_total(&self) -> usize {
        self.apply_improved.count + self.apply_hurt.count + self.skip_improved.count + self.skip_hurt.count
    }
}

impl fmt::Display for ContingencyTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "predicted\tactual\tcount\tmean_abs_delta_ap")?;
        for (p, a, c) in [
            ("apply", "improved", &self.apply_improved),
            ("apply", "not_improved", &self.apply_hurt),
            ("skip", "improved", &self.skip_improved),
            ("skip", "not_improved", &self.skip_hurt),
        ] {
            writeln!(f, "{p}\t{a}\t{}\t{:.4}", c.count, c.mean_abs_delta)?;
        }
        writeln!(f, "excluded\t-\t{}\t-", self.excluded.len())
    }
}

pub fn contingency_report(
    decisions: &BTreeMap<String, bool>,
    labels: &BTreeMap<String, QueryLabel>,
) -> Result<ContingencyTable> {
    let diff = symmetric_difference(decisions.keys(), labels.keys());
    if !diff.is_empty() {
        return Err(Error::KeyMismatch(diff));
    }
    let mut sums = [(0usize, 0.0f64); 4];
    let mut excluded = Vec::new();
    let mut deltas = BTreeMap::new();
    for (qid, &apply) in decisions {
        let label = &labels[qid];
        let Some(delta) = relative_ap_change(label.ap_pre, label.ap_post) else {
            excluded.push(qid.clone());
            continue;
        };
        deltas.insert(qid.clone(), delta);
        let cell = match (apply, delta > 0.0) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        sums[cell].0 += 1;
        sums[cell].1 += delta.abs();
    }
    let cell = |(count, sum): (usize, f64)| ContingencyCell {
        count,
        mean_abs_delta: if count == 0 { 0.0 } else { sum / count as f64 },
    };
    Ok(ContingencyTable {
        apply_improved: cell(sums[0]),
        apply_hurt: cell(sums[1]),
        skip_improved: cell(sums[2]),
        skip_hurt: cell(sums[3]),
        excluded,
        deltas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trec::parse_qrels;

    fn list(ids: &[&str]) -> RankedList {
        let n = ids.len();
        RankedList::from_entries("q1", ids.iter().enumerate().map(|(i, d)| (*d, (n - i) as f64)).collect())
    }

    #[test]
    fn ap_worked_examples() {
        let qrels = parse_qrels("q1 0 d1 1\nq1 0 d3 1\nq1 0 d9 0\n").unwrap();
        let ap = average_precision(&list(&["d1", "d2", "d3"]), &qrels, 1000).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(average_precision(&list(&["d2", "d9"]), &qrels, 1000).unwrap(), 0.0);
        assert_eq!(average_precision(&list(&["d3", "d1", "d2"]), &qrels, 1000).unwrap(), 1.0);
        assert!(matches!(
            average_precision(&RankedList::new("zz", 1), &qrels, 1000),
            Err(Error::MissingQuery(_))
        ));
    }

    #[test]
    fn ap_respects_cutoff() {
        let qrels = parse_qrels("q1 0 d1 1\nq1 0 d3 1\n").unwrap();
        let ap = average_precision(&list(&["d1", "d2", "d3"]), &qrels, 2).unwrap();
        assert_eq!(ap, 0.5);
    }

    #[test]
    fn ndcg_worked_examples() {
        let qrels = parse_qrels("q1 0 r 1\n").unwrap();
        let v = ndcg_at_10(&list(&["x", "r"]), &qrels).unwrap();
        assert!((v - 1.0 / 3f64.log2()).abs() < 1e-15);
        assert!((v - 0.6309).abs() < 1e-4);
        assert_eq!(ndcg_at_10(&list(&["r"]), &qrels).unwrap(), 1.0);
        let none: Vec<String> = (0..10).map(|i| format!("n{i}")).collect();
        let refs: Vec<&str> = none.iter().map(String::as_str).collect();
        assert_eq!(ndcg_at_10(&list(&refs), &qrels).unwrap(), 0.0);
    }

    #[test]
    fn accuracy_examples() {
        let d: BTreeMap<String, bool> = [("q1".into(), true), ("q2".into(), true)].into();
        let l: BTreeMap<String, u8> = [("q1".into(), 1), ("q2".into(), 0)].into();
        assert_eq!(decision_accuracy(&d, &l).unwrap(), 0.5);
        let all: BTreeMap<String, u8> = [("q1".into(), 1), ("q2".into(), 1)].into();
        assert_eq!(decision_accuracy(&d, &all).unwrap(), 1.0);
        let other: BTreeMap<String, u8> = [("q3".into(), 1)].into();
        match decision_accuracy(&d, &other) {
            Err(Error::KeyMismatch(diff)) => assert_eq!(diff, ["q1", "q2", "q3"]),
            r => panic!("{r:?}"),
        }
        assert!(decision_accuracy(&BTreeMap::new(), &BTreeMap::new()).is_err());
    }

    #[test]
    fn oracle_picks_per_query_max() {
        let qrels = parse_qrels("q1 0 a 1\nq1 0 b 1\nq2 0 a 1\n").unwrap();
        let mut pre = Runs::new();
        let mut post = Runs::new();
        pre.insert("q1".into(), RankedList::from_entries("q1", vec![("x", 2.0), ("a", 1.0)]));
        post.insert("q1".into(), RankedList::from_entries("q1", vec![("a", 2.0), ("b", 1.0)]));
        pre.insert("q2".into(), RankedList::from_entries("q2", vec![("a", 1.0)]));
        post.insert("q2".into(), RankedList::from_entries("q2", vec![("a", 1.0)]));
        let (chosen, report) = oracle_run(&pre, &post, &qrels).unwrap();
        assert_eq!(chosen["q1"], post["q1"]);
        assert_eq!(chosen["q2"], pre["q2"]);
        assert_eq!(report.per_query["q1"].ap, 1.0);
        assert_eq!(report.map, 1.0);

        post.remove("q2");
        assert!(oracle_run(&pre, &post, &qrels).is_err());
    }

    fn label(id: &str, pre: f64, post: f64) -> (String, QueryLabel) {
        (
            id.to_owned(),
            QueryLabel {
                query_id: id.to_owned(),
                y: u8::from(post > pre),
                ap_pre: pre,
                ap_post: post,
            },
        )
    }

    #[test]
    fn contingency_cells() {
        let labels: BTreeMap<String, QueryLabel> =
            [label("q1", 0.4, 0.5), label("q2", 0.5, 0.25), label("q3", 0.0, 0.3)].into();
        let decisions: BTreeMap<String, bool> =
            [("q1".into(), true), ("q2".into(), true), ("q3".into(), false)].into();
        let table = contingency_report(&decisions, &labels).unwrap();
        assert_eq!(table.apply_improved.count, 1);
        assert!((table.apply_improved.mean_abs_delta - 0.25).abs() < 1e-12);
        assert_eq!(table.apply_hurt.count, 1);
        assert!((table.apply_hurt.mean_abs_delta - 0.5).abs() < 1e-12);
        assert_eq!(table.excluded, ["q3"]);
        assert_eq!(table.cell_total() + table.excluded.len(), 3);
        assert!((table.deltas["q1"] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn contingency_all_correct_has_empty_off_diagonal() {
        let labels: BTreeMap<String, QueryLabel> = [label("q1", 0.4, 0.5), label("q2", 0.2, 0.9)].into();
        let decisions: BTreeMap<String, bool> = [("q1".into(), true), ("q2".into(), true)].into();
        let table = contingency_report(&decisions, &labels).unwrap();
        assert_eq!(table.apply_hurt.count, 0);
        assert_eq!(table.skip_improved.count, 0);
        assert_eq!(table.apply_improved.count, 2);
    }
}
