//! Tab-separated files for corpora, queries, labels and decisions.
//!
//! | file      | columns                              |
//! |-----------|--------------------------------------|
//! | corpus    | `doc_id <TAB> text`                  |
//! | queries   | `qid <TAB> text`                     |
//! | labels    | `qid <TAB> y <TAB> ap_pre <TAB> ap_post` |
//! | decisions | `qid <TAB> theta <TAB> apply <TAB> method` |
//!
//! Blank lines and lines starting with `#` are skipped. Floats are written
//! with Rust's shortest round-trip formatting.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::decision::{DecisionOutcome, QueryLabel};
use crate::error::{Error, Result};

fn records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(field: &str, line: usize, what: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_error(line, format!("{what}: `{field}` is not a finite number")))
}

fn parse_pairs(text: &str, kind: &str) -> Result<Vec<(String, String)>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, record) in records(text) {
        let (id, body) = record
            .split_once('\t')
            .ok_or_else(|| parse_error(line, format!("{kind} line needs `id<TAB>text`")))?;
        let id = id.trim();
        if id.is_empty() {
            return Err(parse_error(line, format!("empty {kind} id")));
        }
        if !seen.insert(id.to_owned()) {
            return Err(Error::Duplicate {
                line,
                message: format!("{kind} id `{id}` repeated"),
            });
        }
        out.push((id.to_owned(), body.to_owned()));
    }
    Ok(out)
}

/// Documents in file order.
pub fn parse_corpus(text: &str) -> Result<Vec<(String, String)>> {
    parse_pairs(text, "document")
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    parse_corpus(&fs::read_to_string(path)?)
}

fn clean_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

pub fn format_corpus<'a, I>(docs: I) -> String
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut out = String::new();
    for (id, text) in docs {
        let _ = writeln!(out, "{id}\t{}", clean_field(text));
    }
    out
}

/// Query texts keyed by id.
pub fn parse_queries(text: &str) -> Result<BTreeMap<String, String>> {
    Ok(parse_pairs(text, "query")?.into_iter().collect())
}

pub fn read_queries(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    parse_queries(&fs::read_to_string(path)?)
}

pub fn format_queries(queries: &BTreeMap<String, String>) -> String {
    format_corpus(queries.iter().map(|(k, v)| (k.as_str(), v.as_str())))
}

fn fields(record: &str, line: usize, n: usize, kind: &str) -> Result<Vec<String>> {
    let f: Vec<String> = record.split('\t').map(|s| s.trim().to_owned()).collect();
    if f.len() != n {
        return Err(parse_error(line, format!("{kind} line needs {n} tab-separated fields, got {}", f.len())));
    }
    Ok(f)
}

pub fn parse_labels(text: &str) -> Result<BTreeMap<String, QueryLabel>> {
    let mut out = BTreeMap::new();
    for (line, record) in records(text) {
        let f = fields(record, line, 4, "label")?;
        let y = match f[1].as_str() {
            "0" => 0,
            "1" => 1,
            other => return Err(parse_error(line, format!("label must be 0 or 1, got `{other}`"))),
        };
        let label = QueryLabel {
            query_id: f[0].clone(),
            y,
            ap_pre: parse_f64(&f[2], line, "ap_pre")?,
            ap_post: parse_f64(&f[3], line, "ap_post")?,
        };
        if out.insert(f[0].clone(), label).is_some() {
            return Err(Error::Duplicate {
                line,
                message: format!("label for `{}` repeated", f[0]),
            });
        }
    }
    Ok(out)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<BTreeMap<String, QueryLabel>> {
    parse_labels(&fs::read_to_string(path)?)
}

pub fn format_labels<'a, I>(labels: I) -> String
where
    I: IntoIterator<Item = &'a QueryLabel>,
{
    let mut out = String::new();
    for l in labels {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", l.query_id, l.y, l.ap_pre, l.ap_post);
    }
    out
}

pub fn parse_decisions(text: &str) -> Result<BTreeMap<String, DecisionOutcome>> {
    let mut out = BTreeMap::new();
    for (line, record) in records(text) {
        let f = fields(record, line, 4, "decision")?;
        let theta = parse_f64(&f[1], line, "theta")?;
        if !(0.0..=1.0).contains(&theta) {
            return Err(parse_error(line, format!("theta {theta} outside [0,1]")));
        }
        let apply_prf = match f[2].as_str() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(parse_error(line, format!("apply flag must be 0 or 1, got `{other}`"))),
        };
        let method = f[3].parse().map_err(|e: Error| parse_error(line, e.to_string()))?;
        let outcome = DecisionOutcome {
            query_id: f[0].clone(),
            theta,
            apply_prf,
            method,
        };
        if out.insert(f[0].clone(), outcome).is_some() {
            return Err(Error::Duplicate {
                line,
                message: format!("decision for `{}` repeated", f[0]),
            });
        }
    }
    Ok(out)
}

pub fn read_decisions(path: impl AsRef<Path>) -> Result<BTreeMap<String, DecisionOutcome>> {
    parse_decisions(&fs::read_to_string(path)?)
}

pub fn format_decisions<'a, I>(decisions: I) -> String
where
    I: IntoIterator<Item = &'a DecisionOutcome>,
{
    let mut out = String::new();
    for d in decisions {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            d.query_id,
            d.theta,
            u8::from(d.apply_prf),
            d.method
        );
    }
    out
}
