//! Writes the toy collection used by the smoke pipeline.
//!
//! cargo run -p srf --example make_toy -- data/toy

use std::fs;
use std::path::PathBuf;

use srf::synthetic::toy_collection;
use srf::tsv;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/toy".to_owned()));
    fs::create_dir_all(&dir)?;
    let toy = toy_collection(20, 25, 3, 2024);
    fs::write(dir.join("corpus.tsv"), tsv::format_corpus(toy.docs.iter().map(|(a, b)| (a.as_str(), b.as_str()))))?;
    fs::write(dir.join("queries.tsv"), tsv::format_queries(&toy.queries))?;
    fs::write(dir.join("qrels.txt"), srf::trec::format_qrels(&toy.qrels))?;
    eprintln!("{} documents, {} queries", toy.docs.len(), toy.queries.len());
    Ok(())
}
