//! Inverted index over a passage corpus.
//!
//! Terms are stored in lexicographic order and documents keep the internal id
//! given by their position in the input corpus. Alongside the postings the
//! index keeps a forward vector per document, which feedback estimation and
//! the divergence features read directly.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use crate::distribution::TermDistribution;
use crate::error::{Error, Result};
use crate::text::{tokenize, TokenizerConfig};

/// Magic bytes opening every persisted index.
pub const INDEX_MAGIC: &[u8; 4] = b"SRFX";
/// Current on-disk format version.
pub const INDEX_FORMAT_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub length: usize,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>, config: &TokenizerConfig) -> Self {
        let text = text.into();
        let length = tokenize(&text, config).len();
        Document {
            doc_id: doc_id.into(),
            text,
            length,
        }
    }

    pub fn tokens(&self, config: &TokenizerConfig) -> Vec<String> {
        tokenize(&self.text, config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocEntry {
    pub doc_id: String,
    pub length: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    tokenizer: TokenizerConfig,
    terms: Vec<String>,
    term_ids: HashMap<String, u32>,
    postings: Vec<Vec<Posting>>,
    cf: Vec<u64>,
    docs: Vec<DocEntry>,
    doc_ids: HashMap<String, u32>,
    /// Forward vectors: (term id, tf) sorted by term id.
    doc_terms: Vec<Vec<(u32, u32)>>,
    total_tokens: u64,
}

/// Builds an index from `(doc_id, text)` pairs. Internal ids follow input order.
pub fn build_index<I, S, T>(corpus: I, config: &TokenizerConfig) -> Result<InvertedIndex>
where
    I: IntoIterator<Item = (S, T)>,
    S: Into<String>,
    T: AsRef<str>,
{
    let mut docs = Vec::new();
    let mut doc_ids = HashMap::new();
    let mut raw_vectors: Vec<BTreeMap<String, u32>> = Vec::new();
    for (doc_id, text) in corpus {
        let doc_id: String = doc_id.into();
        if doc_ids.contains_key(&doc_id) {
            return Err(Error::DuplicateDocId(doc_id));
        }
        let tokens = tokenize(text.as_ref(), config);
        let mut counts = BTreeMap::new();
        for t in &tokens {
            *counts.entry(t.clone()).or_insert(0u32) += 1;
        }
        doc_ids.insert(doc_id.clone(), docs.len() as u32);
        docs.push(DocEntry {
            doc_id,
            length: tokens.len() as u32,
        });
        raw_vectors.push(counts);
    }
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let mut vocab: Vec<String> = raw_vectors
        .iter()
        .flat_map(|v| v.keys().cloned())
        .collect();
    vocab.sort();
    vocab.dedup();
    let term_ids: HashMap<String, u32> = vocab
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i as u32))
        .collect();

    let mut postings = vec![Vec::new(); vocab.len()];
    let mut doc_terms = Vec::with_capacity(docs.len());
    for (doc, counts) in raw_vectors.into_iter().enumerate() {
        // BTreeMap order over terms equals term-id order since ids are sorted.
        let vector: Vec<(u32, u32)> = counts
            .into_iter()
            .map(|(t, tf)| (term_ids[&t], tf))
            .collect();
        for &(tid, tf) in &vector {
            postings[tid as usize].push(Posting {
                doc: doc as u32,
                tf,
            });
        }
        doc_terms.push(vector);
    }

    Ok(InvertedIndex::assemble(
        config.clone(),
        vocab,
        postings,
        docs,
        doc_terms,
    ))
}

impl InvertedIndex {
    fn assemble(
        tokenizer: TokenizerConfig,
        terms: Vec<String>,
        postings: Vec<Vec<Posting>>,
        docs: Vec<DocEntry>,
        doc_terms: Vec<Vec<(u32, u32)>>,
    ) -> Self {
        let term_ids = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let doc_ids = docs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.doc_id.clone(), i as u32))
            .collect();
        let cf: Vec<u64> = postings
            .iter()
            .map(|p| p.iter().map(|x| u64::from(x.tf)).sum())
            .collect();
        let total_tokens = cf.iter().sum();
        InvertedIndex {
            tokenizer,
            terms,
            term_ids,
            postings,
            cf,
            docs,
            doc_ids,
            doc_terms,
            total_tokens,
        }
    }

    pub fn tokenizer(&self) -> &TokenizerConfig {
        &self.tokenizer
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        tokenize(text, &self.tokenizer)
    }

    /// Number of documents, N.
    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    /// Total token count |C|.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.total_tokens as f64 / self.docs.len() as f64
    }

    pub fn vocabulary_size(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term_id(&self, term: &str) -> Option<u32> {
        self.term_ids.get(term).copied()
    }

    pub fn term(&self, id: u32) -> &str {
        &self.terms[id as usize]
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.term_id(term)
            .map(|id| self.postings[id as usize].as_slice())
            .unwrap_or(&[])
    }

    pub fn postings_by_id(&self, id: u32) -> &[Posting] {
        &self.postings[id as usize]
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    pub fn cf(&self, term: &str) -> u64 {
        self.term_id(term).map(|id| self.cf[id as usize]).unwrap_or(0)
    }

    pub fn cf_by_id(&self, id: u32) -> u64 {
        self.cf[id as usize]
    }

    pub fn doc(&self, internal: u32) -> &DocEntry {
        &self.docs[internal as usize]
    }

    pub fn docs(&self) -> &[DocEntry] {
        &self.docs
    }

    pub fn internal_id(&self, doc_id: &str) -> Option<u32> {
        self.doc_ids.get(doc_id).copied()
    }

    pub fn doc_len(&self, internal: u32) -> u32 {
        self.docs[internal as usize].length
    }

    /// Forward vector of a document: `(term id, tf)` pairs sorted by term id.
    pub fn doc_vector(&self, internal: u32) -> &[(u32, u32)] {
        &self.doc_terms[internal as usize]
    }

    /// Term frequency of `term_id` in a document (binary search on the forward vector).
    pub fn tf(&self, internal: u32, term_id: u32) -> u32 {
        let v = self.doc_vector(internal);
        v.binary_search_by_key(&term_id, |&(t, _)| t)
            .map(|i| v[i].1)
            .unwrap_or(0)
    }

    /// P(t|C) = cf(t) / |C| for a single term.
    pub fn collection_prob(&self, term: &str) -> f64 {
        if self.total_tokens == 0 {
            return 0.0;
        }
        self.cf(term) as f64 / self.total_tokens as f64
    }

    /// Maximum-likelihood model of an indexed document, looked up by external id.
    pub fn doc_model_by_id(&self, doc_id: &str) -> Option<TermDistribution> {
        let internal = self.internal_id(doc_id)?;
        self.doc_model_internal(internal)
    }

    pub(crate) fn doc_model_internal(&self, internal: u32) -> Option<TermDistribution> {
        let len = self.doc_len(internal);
        if len == 0 {
            return None;
        }
        let len = f64::from(len);
        let mass = self
            .doc_vector(internal)
            .iter()
            .map(|&(t, tf)| (self.term(t).to_owned(), f64::from(tf) / len))
            .collect();
        Some(TermDistribution::from_normalized(mass))
    }
}

/// Collection language model P(t|C) = cf(t)/|C|.
pub fn collection_model(index: &InvertedIndex) -> Result<TermDistribution> {
    if index.total_tokens() == 0 {
        return Err(Error::EmptyIndex);
    }
    let total = index.total_tokens() as f64;
    let mass = index
        .terms()
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), index.cf_by_id(i as u32) as f64 / total))
        .collect();
    Ok(TermDistribution::from_normalized(mass))
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

pub fn save_index(index: &InvertedIndex, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_index(index))?;
    Ok(())
}

pub fn load_index(path: impl AsRef<Path>) -> Result<InvertedIndex> {
    decode_index(&fs::read(path)?)
}

pub fn encode_index(index: &InvertedIndex) -> Vec<u8> {
    let mut w = ByteWriter::default();
    w.bytes(INDEX_MAGIC);
    w.u8(INDEX_FORMAT_VERSION);
    w.u32(index.tokenizer.stopwords.len() as u32);
    for s in &index.tokenizer.stopwords {
        w.string(s);
    }
    w.u32(index.docs.len() as u32);
    for (doc, vector) in index.docs.iter().zip(&index.doc_terms) {
        w.string(&doc.doc_id);
        w.u32(doc.length);
        w.u32(vector.len() as u32);
        for &(t, tf) in vector {
            w.u32(t);
            w.u32(tf);
        }
    }
    w.u32(index.terms.len() as u32);
    for (term, list) in index.terms.iter().zip(&index.postings) {
        w.string(term);
        w.u32(list.len() as u32);
        for p in list {
            w.u32(p.doc);
            w.u32(p.tf);
        }
    }
    w.buf
}

pub fn decode_index(bytes: &[u8]) -> Result<InvertedIndex> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(4, "magic header")?;
    if magic != INDEX_MAGIC {
        return Err(Error::Format(format!(
            "bad magic: expected {:?}, found {:?}",
            String::from_utf8_lossy(INDEX_MAGIC),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = r.u8("format version")?;
    if version != INDEX_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: INDEX_FORMAT_VERSION,
            found: version,
        });
    }

    let n_stop = r.u32("stopword count")?;
    let mut tokenizer = TokenizerConfig::default();
    for _ in 0..n_stop {
        tokenizer.stopwords.insert(r.string("stopword")?);
    }

    let n_docs = r.u32("document count")? as usize;
    let mut docs = Vec::with_capacity(n_docs.min(1 << 20));
    let mut doc_terms = Vec::with_capacity(n_docs.min(1 << 20));
    for _ in 0..n_docs {
        let doc_id = r.string("doc id")?;
        let length = r.u32("doc length")?;
        let n = r.u32("doc vector length")? as usize;
        let mut vector = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            vector.push((r.u32("term id")?, r.u32("tf")?));
        }
        docs.push(DocEntry { doc_id, length });
        doc_terms.push(vector);
    }

    let n_terms = r.u32("term count")? as usize;
    let mut terms = Vec::with_capacity(n_terms.min(1 << 20));
    let mut postings = Vec::with_capacity(n_terms.min(1 << 20));
    for _ in 0..n_terms {
        terms.push(r.string("term")?);
        let n = r.u32("postings length")? as usize;
        let mut list = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            list.push(Posting {
                doc: r.u32("posting doc")?,
                tf: r.u32("posting tf")?,
            });
        }
        postings.push(list);
    }
    if !r.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes", r.remaining())));
    }

    validate_structure(&terms, &postings, &docs, &doc_terms)?;
    Ok(InvertedIndex::assemble(tokenizer, terms, postings, docs, doc_terms))
}

fn validate_structure(
    terms: &[String],
    postings: &[Vec<Posting>],
    docs: &[DocEntry],
    doc_terms: &[Vec<(u32, u32)>],
) -> Result<()> {
    if docs.is_empty() {
        return Err(Error::Format("index has no documents".into()));
    }
    if terms.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Format("term dictionary not strictly sorted".into()));
    }
    for (term, list) in terms.iter().zip(postings) {
        if list.windows(2).any(|w| w[0].doc >= w[1].doc) {
            return Err(Error::Format(format!("postings for `{term}` not strictly sorted")));
        }
        if list.iter().any(|p| p.doc as usize >= docs.len() || p.tf == 0) {
            return Err(Error::Format(format!("invalid posting for `{term}`")));
        }
    }
    for (doc, vector) in docs.iter().zip(doc_terms) {
        if vector.iter().any(|&(t, _)| t as usize >= terms.len()) {
            return Err(Error::Format(format!("term id out of range in `{}`", doc.doc_id)));
        }
        let len: u64 = vector.iter().map(|&(_, tf)| u64::from(tf)).sum();
        if len != u64::from(doc.length) {
            return Err(Error::Format(format!("length mismatch for `{}`", doc.doc_id)));
        }
    }
    Ok(())
}

#[derive(Default)]
pub(crate) struct ByteWriter {
    pub(crate) buf: Vec<u8>,
}

impl ByteWriter {
    pub(crate) fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub(crate) fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub(crate) fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn string(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }
}

pub(crate) struct ByteReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(data: &'a [u8]) -> Self {
        ByteReader { data, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(Error::Truncated(format!(
                "unexpected end of data reading {what} at byte {}",
                self.pos
            )));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    pub(crate) fn f64(&mut self, what: &str) -> Result<f64> {
        let b = self.take(8, what)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    pub(crate) fn string(&mut self, what: &str) -> Result<String> {
        let n = self.u32(what)? as usize;
        let b = self.take(n, what)?;
        String::from_utf8(b.to_vec()).map_err(|_| Error::Format(format!("{what} is not UTF-8")))
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.pos == self.data.len()
    }

    pub(crate) fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_docs() -> InvertedIndex {
        build_index([("d1", "a b a"), ("d2", "b c")], &TokenizerConfig::default()).unwrap()
    }

    fn postings_of(index: &InvertedIndex, t: &str) -> Vec<(String, u32)> {
        index
            .postings(t)
            .iter()
            .map(|p| (index.doc(p.doc).doc_id.clone(), p.tf))
            .collect()
    }

    #[test]
    fn two_doc_postings_and_stats() {
        let index = two_docs();
        assert_eq!(postings_of(&index, "a"), [("d1".to_string(), 2)]);
        assert_eq!(
            postings_of(&index, "b"),
            [("d1".to_string(), 1), ("d2".to_string(), 1)]
        );
        assert_eq!(postings_of(&index, "c"), [("d2".to_string(), 1)]);
        assert_eq!(index.total_tokens(), 5);
        assert_eq!(index.num_docs(), 2);
        assert_eq!(index.df("b"), 2);
        assert_eq!(index.cf("a"), 2);
    }

    #[test]
    fn singleton() {
        let index = build_index([("d", "x")], &TokenizerConfig::default()).unwrap();
        assert_eq!(index.df("x"), 1);
        assert_eq!(index.cf("x"), 1);
        assert_eq!(index.num_docs(), 1);
    }

    #[test]
    fn duplicate_doc_id_is_rejected() {
        let err = build_index([("d1", "a"), ("d1", "b")], &TokenizerConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DuplicateDocId(ref id) if id == "d1"), "{err}");
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let corpus: Vec<(String, String)> = Vec::new();
        assert!(matches!(
            build_index(corpus, &TokenizerConfig::default()),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn collection_model_examples() {
        let cm = collection_model(&two_docs()).unwrap();
        assert!((cm.prob("a") - 0.4).abs() < 1e-15);
        assert!((cm.prob("b") - 0.4).abs() < 1e-15);
        assert!((cm.prob("c") - 0.2).abs() < 1e-15);

        let single = build_index([("d", "a a")], &TokenizerConfig::default()).unwrap();
        assert_eq!(collection_model(&single).unwrap().prob("a"), 1.0);

        let uniform = build_index([("d", "a b")], &TokenizerConfig::default()).unwrap();
        let cm = collection_model(&uniform).unwrap();
        assert_eq!(cm.prob("a"), 0.5);
        assert_eq!(cm.prob("b"), 0.5);
    }

    #[test]
    fn collection_model_of_empty_index_fails() {
        let index = build_index([("d", "   ")], &TokenizerConfig::default()).unwrap();
        assert!(matches!(collection_model(&index), Err(Error::EmptyIndex)));
    }

    #[test]
    fn round_trip_in_memory() {
        let index = two_docs();
        let decoded = decode_index(&encode_index(&index)).unwrap();
        assert_eq!(decoded, index);
    }

    #[test]
    fn bad_magic_and_truncation() {
        let mut bytes = encode_index(&two_docs());
        assert!(matches!(decode_index(&[]), Err(Error::Truncated(_))));
        assert!(matches!(
            decode_index(&bytes[..bytes.len() - 3]),
            Err(Error::Truncated(_))
        ));
        bytes[4] = 9;
        match decode_index(&bytes) {
            Err(Error::VersionMismatch { expected, found }) => {
                assert_eq!((expected, found), (INDEX_FORMAT_VERSION, 9));
            }
            other => panic!("expected version mismatch, got {other:?}"),
        }
        bytes[0] = b'X';
        assert!(matches!(decode_index(&bytes), Err(Error::Format(_))));
    }
}
