use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

#[derive(Parser, Debug)]
#[command(name = "srf", version, about = "Selective pseudo-relevance feedback toolkit")]
struct Cli {
    /// TOML file with default parameters; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
pub struct RetrievalArgs {
    /// Retrieval model: bm25 or lm (Dirichlet).
    #[arg(long = "retrieval")]
    pub retrieval_model: Option<String>,
    /// Result depth per query.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub k1: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    /// Dirichlet prior, also used for P(Q|D) in feedback.
    #[arg(long)]
    pub mu: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct FeedbackArgs {
    #[arg(long)]
    pub fb_docs: Option<usize>,
    #[arg(long)]
    pub fb_terms: Option<usize>,
    /// Weight of the original query in RM3.
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct DeepArgs {
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub pair_dim: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// Documents per branch.
    #[arg(long)]
    pub deep_k: Option<usize>,
    #[arg(long)]
    pub branch_dropout: Option<f64>,
    #[arg(long)]
    pub init_scale: Option<f64>,
    #[arg(long)]
    pub max_vocab: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum TrainMethod {
    Lr,
    Deep,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum DecideMethod {
    Qpp,
    Td2f,
    Lr,
    Deep,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum FuseMode {
    /// theta-weighted reciprocal-rank fusion.
    Confidence,
    /// Reciprocal-rank fusion with a fixed alpha.
    Fixed,
    /// Pick the decided list unchanged.
    Hard,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build an index directory from a `doc_id<TAB>text` corpus.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Newline-separated stopword list.
        #[arg(long)]
        stopwords: Option<PathBuf>,
    },
    /// Retrieve a TREC run for a `qid<TAB>text` query file.
    Search {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "srf")]
        tag: String,
        #[command(flatten)]
        retrieval: RetrievalArgs,
    },
    /// RM3-expand queries from an initial run and retrieve again.
    Expand {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        /// Initial (pre-feedback) run.
        #[arg(long)]
        run: PathBuf,
        /// Post-feedback run to write.
        #[arg(long)]
        out: PathBuf,
        /// Also write the expanded queries as `qid<TAB>term:weight,...`.
        #[arg(long)]
        expansions: Option<PathBuf>,
        #[arg(long, default_value = "srf-rm3")]
        tag: String,
        #[command(flatten)]
        retrieval: RetrievalArgs,
        #[command(flatten)]
        feedback: FeedbackArgs,
    },
    /// Label each judged query 1 when feedback improves its AP.
    Label {
        #[arg(long)]
        pre: PathBuf,
        #[arg(long)]
        post: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the logistic or neural decider from labels.
    Train {
        #[arg(long, value_enum)]
        method: TrainMethod,
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        pre: PathBuf,
        #[arg(long)]
        post: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
        /// Expanded queries from `expand`; recomputed from --pre if absent.
        #[arg(long)]
        expansions: Option<PathBuf>,
        /// Top documents read by features.
        #[arg(long)]
        top_n: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        l2: Option<f64>,
        #[command(flatten)]
        deep: DeepArgs,
        #[command(flatten)]
        retrieval: RetrievalArgs,
        #[command(flatten)]
        feedback: FeedbackArgs,
    },
    /// Decide per query whether to apply feedback.
    Decide {
        #[arg(long, value_enum)]
        method: DecideMethod,
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        pre: PathBuf,
        /// Post-feedback run (td2f, lr).
        #[arg(long)]
        post: Option<PathBuf>,
        /// Trained model (lr, deep).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        expansions: Option<PathBuf>,
        /// Threshold (qpp: on normalized clarity; td2f: calibrated on the batch if absent).
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        top_n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        retrieval: RetrievalArgs,
        #[command(flatten)]
        feedback: FeedbackArgs,
    },
    /// Combine pre- and post-feedback runs.
    Fuse {
        #[arg(long)]
        pre: PathBuf,
        #[arg(long)]
        post: PathBuf,
        /// Decisions TSV (confidence, hard).
        #[arg(long)]
        decisions: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "confidence")]
        mode: FuseMode,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        aleph: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value = "srf-fused")]
        tag: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// MAP and nDCG@10 of a run, plus decision accuracy if given.
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long, requires = "labels")]
        decisions: Option<PathBuf>,
        #[arg(long, requires = "decisions")]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-query best of pre and post by AP.
    Oracle {
        #[arg(long)]
        pre: PathBuf,
        #[arg(long)]
        post: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        /// Oracle run to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Decision vs outcome contingency table.
    Report {
        #[arg(long)]
        decisions: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    if let Some(e) = err.downcast_ref::<srf::Error>() {
        return e.kind();
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return "io";
    }
    if err.downcast_ref::<toml::de::Error>().is_some() {
        return "config";
    }
    err.chain()
        .find_map(|c| c.downcast_ref::<srf::Error>().map(srf::Error::kind))
        .unwrap_or("invalid_input")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match config::Config::load(cli.config.as_deref()).and_then(|cfg| commands::run(cli.command, &cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let message = format!("{err:#}").replace(['\n', '\r'], " ");
            eprintln!("error[{}]: {message}", error_kind(&err));
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        super::Cli::command().debug_assert();
    }
}
