use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use srf::deep::{forward_infer, pad_slots, TrainingInstance};
use srf::eval::{contingency_report, decision_accuracy};
use srf::feedback::{format_expanded_queries, parse_expanded_queries};
use srf::trec::{read_qrels, read_trec_run, write_trec_run};
use srf::tsv;
use srf::{
    build_index, calibrate_td2f_threshold, clarity, decide_lr, decide_qpp_srf, decide_td2f, expand_rm3,
    extract_lr_features, fuse_confidence, fuse_fixed, label_query, load_decider, load_index, normalize_scores,
    oracle_run, save_decider, save_index, search_expanded, select_hard, td2f_divergence, train_decider,
    train_logistic, Bm25Params, DeciderConfig, DecisionMethod, DecisionOutcome, EvalReport, ExpandedQuery,
    FeedbackParams, FeatureVector, FusionConfig, InvertedIndex, LogisticConfig, LogisticModel, Query, RankedList,
    RetrievalModel, Runs, TokenizerConfig,
};

use crate::config::{pick, Config};
use crate::{Command, DecideMethod, DeepArgs, FeedbackArgs, FuseMode, RetrievalArgs, TrainMethod};

const INDEX_FILE: &str = "index.srfx";
const DOCS_FILE: &str = "docs.tsv";

pub fn run(command: Command, cfg: &Config) -> Result<()> {
    match command {
        Command::Index { corpus, out, stopwords } => index(&corpus, &out, stopwords.as_deref()),
        Command::Search {
            index,
            queries,
            out,
            tag,
            retrieval,
        } => search(&index, &queries, &out, &tag, &resolve_retrieval(&retrieval, cfg)?),
        Command::Expand {
            index,
            queries,
            run,
            out,
            expansions,
            tag,
            retrieval,
            feedback,
        } => {
            let r = resolve_retrieval(&retrieval, cfg)?;
            let fb = resolve_feedback(&feedback, &r, cfg);
            expand(&index, &queries, &run, &out, expansions.as_deref(), &tag, &r, &fb)
        }
        Command::Label { pre, post, qrels, out } => label(&pre, &post, &qrels, &out),
        Command::Train {
            method,
            index,
            queries,
            pre,
            post,
            labels,
            out,
            expansions,
            top_n,
            learning_rate,
            epochs,
            l2,
            deep,
            retrieval,
            feedback,
        } => {
            let r = resolve_retrieval(&retrieval, cfg)?;
            let inputs = Inputs::load(&index, &queries, &pre, Some(&post), expansions.as_deref())?;
            let fb = resolve_feedback(&feedback, &r, cfg);
            let labels = tsv::read_labels(&labels)?;
            match method {
                TrainMethod::Lr => {
                    let top_n = pick(top_n, cfg.decision.top_n, 10);
                    let config = LogisticConfig {
                        learning_rate: pick(learning_rate, cfg.logistic.learning_rate, 0.1),
                        l2: pick(l2, cfg.logistic.l2, 1e-4),
                        epochs: pick(epochs, cfg.logistic.epochs, 2000),
                    };
                    train_lr(&inputs, &fb, &labels, top_n, &config, &out)
                }
                TrainMethod::Deep => {
                    let config = resolve_deep(&deep, learning_rate, epochs, cfg);
                    train_deep(&inputs, &fb, &labels, &config, &out)
                }
            }
        }
        Command::Decide {
            method,
            index,
            queries,
            pre,
            post,
            model,
            expansions,
            tau,
            top_n,
            out,
            retrieval,
            feedback,
        } => {
            let r = resolve_retrieval(&retrieval, cfg)?;
            let fb = resolve_feedback(&feedback, &r, cfg);
            let needs_post = matches!(method, DecideMethod::Td2f | DecideMethod::Lr);
            if needs_post && post.is_none() {
                bail!(srf::Error::param("post", "this method needs --post"));
            }
            let inputs = Inputs::load(&index, &queries, &pre, post.as_deref(), expansions.as_deref())?;
            let top_n = pick(top_n, cfg.decision.top_n, 10);
            let decisions = match method {
                DecideMethod::Qpp => decide_qpp(&inputs, top_n, pick(tau, cfg.decision.tau, 0.5))?,
                DecideMethod::Td2f => decide_td2f_batch(&inputs, top_n, tau.or(cfg.decision.tau))?,
                DecideMethod::Lr => decide_lr_batch(&inputs, &fb, top_n, &required(model.as_deref(), "model")?)?,
                DecideMethod::Deep => decide_deep(&inputs, &required(model.as_deref(), "model")?)?,
            };
            let applied = decisions.iter().filter(|d| d.apply_prf).count();
            fs::write(&out, tsv::format_decisions(&decisions))?;
            println!("decided {} queries, feedback applied to {applied}", decisions.len());
            Ok(())
        }
        Command::Fuse {
            pre,
            post,
            decisions,
            mode,
            alpha,
            aleph,
            k,
            tag,
            out,
        } => {
            let config = FusionConfig {
                aleph: pick(aleph, cfg.fusion.aleph, srf::fusion::DEFAULT_ALEPH),
                alpha: pick(alpha, cfg.fusion.alpha, 0.5),
                k: pick(k, cfg.fusion.k, srf::fusion::DEFAULT_FUSION_DEPTH),
            };
            fuse(&pre, &post, decisions.as_deref(), mode, &config, &tag, &out)
        }
        Command::Eval {
            run,
            qrels,
            decisions,
            labels,
            out,
        } => eval(&run, &qrels, decisions.as_deref(), labels.as_deref(), out.as_deref()),
        Command::Oracle {
            pre,
            post,
            qrels,
            out,
            report,
        } => oracle(&pre, &post, &qrels, &out, report.as_deref()),
        Command::Report { decisions, labels, out } => report(&decisions, &labels, out.as_deref()),
    }
}

fn required(path: Option<&Path>, name: &'static str) -> Result<PathBuf> {
    path.map(Path::to_path_buf)
        .ok_or_else(|| srf::Error::param(name, format!("this method needs --{name}")).into())
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Parameter resolution
// ---------------------------------------------------------------------------

struct Retrieval {
    model: RetrievalModel,
    k: usize,
    mu: f64,
}

fn resolve_retrieval(a: &RetrievalArgs, cfg: &Config) -> Result<Retrieval> {
    let c = &cfg.retrieval;
    let mu = pick(a.mu, c.mu, srf::retrieval::DEFAULT_MU);
    let defaults = Bm25Params::default();
    let name = pick(a.retrieval_model.clone(), c.model.clone(), "bm25".to_owned());
    let model = match name.as_str() {
        "bm25" => RetrievalModel::Bm25(Bm25Params {
            k1: pick(a.k1, c.k1, defaults.k1),
            b: pick(a.b, c.b, defaults.b),
        }),
        "lm" | "dirichlet" => RetrievalModel::Dirichlet { mu },
        other => bail!(srf::Error::param("model", format!("unknown retrieval model `{other}` (bm25, lm)"))),
    };
    Ok(Retrieval {
        model,
        k: pick(a.k, c.k, 1000),
        mu,
    })
}

fn resolve_feedback(a: &FeedbackArgs, r: &Retrieval, cfg: &Config) -> FeedbackParams {
    let c = &cfg.feedback;
    let d = FeedbackParams::default();
    FeedbackParams {
        fb_docs: pick(a.fb_docs, c.fb_docs, d.fb_docs),
        fb_terms: pick(a.fb_terms, c.fb_terms, d.fb_terms),
        lambda: pick(a.lambda, c.lambda, d.lambda),
        mu: r.mu,
    }
}

fn resolve_deep(a: &DeepArgs, learning_rate: Option<f64>, epochs: Option<usize>, cfg: &Config) -> DeciderConfig {
    let c = &cfg.deep;
    let d = DeciderConfig::default();
    DeciderConfig {
        embed_dim: pick(a.embed_dim, c.embed_dim, d.embed_dim),
        pair_dim: pick(a.pair_dim, c.pair_dim, d.pair_dim),
        hidden_dim: pick(a.hidden_dim, c.hidden_dim, d.hidden_dim),
        k: pick(a.deep_k, c.k, d.k),
        branch_dropout: pick(a.branch_dropout, c.branch_dropout, d.branch_dropout),
        learning_rate: pick(learning_rate, c.learning_rate, d.learning_rate),
        epochs: pick(epochs, c.epochs, d.epochs),
        init_scale: pick(a.init_scale, c.init_scale, d.init_scale),
        max_vocab: pick(a.max_vocab, c.max_vocab, d.max_vocab),
        seed: pick(a.seed, c.seed, d.seed),
    }
}

// ---------------------------------------------------------------------------
// Index and retrieval
// ---------------------------------------------------------------------------

fn index(corpus: &Path, out: &Path, stopwords: Option<&Path>) -> Result<()> {
    let docs = tsv::read_corpus(corpus)?;
    let tokenizer = match stopwords {
        Some(p) => TokenizerConfig::with_stopword_list(&fs::read_to_string(p)?),
        None => TokenizerConfig::default(),
    };
    let index = build_index(docs.iter().map(|(a, b)| (a.as_str(), b.as_str())), &tokenizer)?;
    fs::create_dir_all(out)?;
    save_index(&index, out.join(INDEX_FILE))?;
    fs::write(
        out.join(DOCS_FILE),
        tsv::format_corpus(docs.iter().map(|(a, b)| (a.as_str(), b.as_str()))),
    )?;
    println!(
        "indexed {} documents, {} terms, {} tokens",
        index.num_docs(),
        index.vocabulary_size(),
        index.total_tokens()
    );
    Ok(())
}

fn open_index(dir: &Path) -> Result<InvertedIndex> {
    load_index(dir.join(INDEX_FILE)).with_context(|| format!("loading index from {}", dir.display()))
}

fn parse_queries(path: &Path, index: &InvertedIndex) -> Result<Vec<Query>> {
    Ok(tsv::read_queries(path)?
        .into_iter()
        .map(|(id, text)| Query::parse(id, &text, index))
        .collect())
}

fn search(index_dir: &Path, queries: &Path, out: &Path, tag: &str, r: &Retrieval) -> Result<()> {
    let index = open_index(index_dir)?;
    let mut runs = Runs::new();
    for query in parse_queries(queries, &index)? {
        if query.is_empty() {
            warn!("query `{}` has no terms after tokenization; skipped", query.query_id);
            continue;
        }
        runs.insert(query.query_id.clone(), r.model.search(&query, &index, r.k)?);
    }
    write_trec_run(out, &runs, tag)?;
    println!("retrieved {} queries", runs.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn expand(
    index_dir: &Path,
    queries: &Path,
    run: &Path,
    out: &Path,
    expansions_out: Option<&Path>,
    tag: &str,
    r: &Retrieval,
    fb: &FeedbackParams,
) -> Result<()> {
    let index = open_index(index_dir)?;
    let pre = read_trec_run(run)?;
    let mut post = Runs::new();
    let mut expanded = Vec::new();
    for query in parse_queries(queries, &index)? {
        let Some(initial) = pre.get(&query.query_id).filter(|l| !l.is_empty()) else {
            warn!("query `{}` has no initial results; not expanded", query.query_id);
            continue;
        };
        let e = expand_rm3(&query, initial, &index, fb)?;
        post.insert(query.query_id.clone(), search_expanded(&e, &index, r.k, r.model)?);
        expanded.push(e);
    }
    write_trec_run(out, &post, tag)?;
    if let Some(path) = expansions_out {
        fs::write(path, format_expanded_queries(&expanded))?;
    }
    println!("expanded {} queries", expanded.len());
    Ok(())
}

// ---------------------------------------------------------------------------
// Labels and training
// ---------------------------------------------------------------------------

fn list_or_empty(runs: &Runs, qid: &str) -> RankedList {
    runs.get(qid).cloned().unwrap_or_else(|| RankedList::new(qid, 0))
}

fn label(pre: &Path, post: &Path, qrels: &Path, out: &Path) -> Result<()> {
    let pre = read_trec_run(pre)?;
    let post = read_trec_run(post)?;
    let qrels = read_qrels(qrels)?;
    let ids: BTreeSet<&String> = pre.keys().chain(post.keys()).collect();
    let mut labels = Vec::new();
    for qid in ids {
        if !qrels.contains_query(qid) {
            warn!("query `{qid}` has no judgments; not labeled");
            continue;
        }
        labels.push(label_query(qid, &list_or_empty(&pre, qid), &list_or_empty(&post, qid), &qrels)?);
    }
    fs::write(out, tsv::format_labels(&labels))?;
    let positive = labels.iter().filter(|l| l.y == 1).count();
    println!("labeled {} queries, {positive} helped by feedback", labels.len());
    Ok(())
}

/// Everything the deciders read, keyed by query id.
struct Inputs {
    index: InvertedIndex,
    index_dir: PathBuf,
    queries: Vec<Query>,
    pre: Runs,
    post: Runs,
    expansions: Option<BTreeMap<String, ExpandedQuery>>,
}

impl Inputs {
    fn load(
        index_dir: &Path,
        queries: &Path,
        pre: &Path,
        post: Option<&Path>,
        expansions: Option<&Path>,
    ) -> Result<Self> {
        let index = open_index(index_dir)?;
        let queries = parse_queries(queries, &index)?;
        let pre = read_trec_run(pre)?;
        let post = match post {
            Some(p) => read_trec_run(p)?,
            None => Runs::new(),
        };
        let expansions = match expansions {
            Some(p) => Some(parse_expanded_queries(&fs::read_to_string(p)?)?),
            None => None,
        };
        Ok(Inputs {
            index,
            index_dir: index_dir.to_path_buf(),
            queries,
            pre,
            post,
            expansions,
        })
    }

    fn expansion(&self, query: &Query, fb: &FeedbackParams) -> srf::Result<ExpandedQuery> {
        if let Some(e) = self.expansions.as_ref().and_then(|m| m.get(&query.query_id)) {
            return Ok(e.clone());
        }
        expand_rm3(query, &list_or_empty(&self.pre, &query.query_id), &self.index, fb)
    }

    fn features(&self, query: &Query, fb: &FeedbackParams, top_n: usize) -> srf::Result<FeatureVector> {
        let qid = &query.query_id;
        let expanded = self.expansion(query, fb)?;
        extract_lr_features(
            query,
            &list_or_empty(&self.pre, qid),
            &expanded,
            &list_or_empty(&self.post, qid),
            &self.index,
            top_n,
        )
    }

    fn doc_texts(&self) -> Result<HashMap<String, String>> {
        let path = self.index_dir.join(DOCS_FILE);
        let docs = tsv::read_corpus(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(docs.into_iter().collect())
    }
}

fn branch_docs(list: &RankedList, texts: &HashMap<String, String>, index: &InvertedIndex, k: usize) -> Vec<Vec<String>> {
    let docs = list
        .top_docs(k)
        .map(|d| texts.get(d).map(|t| index.tokenize(t)).unwrap_or_default())
        .collect();
    pad_slots(docs, k)
}

fn train_lr(
    inputs: &Inputs,
    fb: &FeedbackParams,
    labels: &BTreeMap<String, srf::QueryLabel>,
    top_n: usize,
    config: &LogisticConfig,
    out: &Path,
) -> Result<()> {
    let mut examples = Vec::new();
    for query in &inputs.queries {
        let Some(label) = labels.get(&query.query_id) else { continue };
        match inputs.features(query, fb, top_n) {
            Ok(f) => examples.push((f, label.y)),
            Err(e) => warn!("query `{}` skipped: {e}", query.query_id),
        }
    }
    let fit = train_logistic(&examples, config)?;
    fs::write(out, fit.model.to_text())?;
    println!(
        "trained lr-srf on {} queries, loss {:.6} -> {:.6}",
        examples.len(),
        fit.initial_loss,
        fit.final_loss
    );
    Ok(())
}

fn train_deep(
    inputs: &Inputs,
    fb: &FeedbackParams,
    labels: &BTreeMap<String, srf::QueryLabel>,
    config: &DeciderConfig,
    out: &Path,
) -> Result<()> {
    let texts = inputs.doc_texts()?;
    let mut dataset = Vec::new();
    for query in &inputs.queries {
        let qid = &query.query_id;
        let Some(label) = labels.get(qid) else { continue };
        let expanded_terms: Vec<String> = match inputs.expansion(query, fb) {
            Ok(e) => e.ranked_terms().into_iter().map(|(t, _)| t.to_owned()).collect(),
            Err(e) => {
                warn!("query `{qid}` skipped: {e}");
                continue;
            }
        };
        let k = config.k;
        dataset.push(TrainingInstance::new(
            query.terms.clone(),
            branch_docs(&list_or_empty(&inputs.pre, qid), &texts, &inputs.index, k),
            expanded_terms,
            branch_docs(&list_or_empty(&inputs.post, qid), &texts, &inputs.index, k),
            label.y,
            k,
        ));
    }
    let fit = train_decider(&dataset, config)?;
    save_decider(&fit.params, out)?;
    info!("loss curve: {:?}", fit.loss_curve);
    println!(
        "trained deep-srf on {} queries ({} parameters), loss {:.6} -> {:.6}",
        dataset.len(),
        fit.params.param_count(),
        fit.initial_loss,
        fit.final_loss
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// Decisions
// ---------------------------------------------------------------------------

/// Keeps the original run for queries whose inputs are unusable.
fn keep_original(query_id: &str, method: DecisionMethod, reason: &dyn std::fmt::Display) -> DecisionOutcome {
    warn!("query `{query_id}`: {reason}; feedback not applied");
    DecisionOutcome {
        query_id: query_id.to_owned(),
        theta: 0.0,
        apply_prf: false,
        method,
    }
}

fn decide_qpp(inputs: &Inputs, top_n: usize, tau: f64) -> Result<Vec<DecisionOutcome>> {
    let mut scores = BTreeMap::new();
    let mut failed = BTreeMap::new();
    for q in &inputs.queries {
        match clarity(&list_or_empty(&inputs.pre, &q.query_id), &inputs.index, top_n) {
            Ok(s) => {
                scores.insert(q.query_id.clone(), s);
            }
            Err(e) => {
                failed.insert(q.query_id.clone(), e);
            }
        }
    }
    let normalized = if scores.is_empty() {
        BTreeMap::new()
    } else {
        normalize_scores(&scores)?
    };
    inputs
        .queries
        .iter()
        .map(|q| match normalized.get(&q.query_id) {
            Some(&s) => Ok(decide_qpp_srf(&q.query_id, s, tau)?),
            None => Ok(keep_original(&q.query_id, DecisionMethod::QppSrf, &failed[&q.query_id])),
        })
        .collect()
}

fn decide_td2f_batch(inputs: &Inputs, top_n: usize, tau: Option<f64>) -> Result<Vec<DecisionOutcome>> {
    let mut scores = BTreeMap::new();
    let mut failed = BTreeMap::new();
    for q in &inputs.queries {
        let qid = &q.query_id;
        match td2f_divergence(&list_or_empty(&inputs.pre, qid), &list_or_empty(&inputs.post, qid), &inputs.index, top_n)
        {
            Ok(s) => {
                scores.insert(qid.clone(), s);
            }
            Err(e) => {
                failed.insert(qid.clone(), e);
            }
        }
    }
    let tau = match tau {
        Some(t) => t,
        None => {
            let batch: Vec<f64> = scores.values().copied().collect();
            let t = calibrate_td2f_threshold(&batch)?;
            info!("td2f threshold calibrated on {} queries: {t}", batch.len());
            t
        }
    };
    Ok(inputs
        .queries
        .iter()
        .map(|q| match scores.get(&q.query_id) {
            Some(&s) => decide_td2f(&q.query_id, s, tau),
            None => keep_original(&q.query_id, DecisionMethod::Td2f, &failed[&q.query_id]),
        })
        .collect())
}

fn decide_lr_batch(inputs: &Inputs, fb: &FeedbackParams, top_n: usize, model: &Path) -> Result<Vec<DecisionOutcome>> {
    let model = LogisticModel::from_text(&fs::read_to_string(model)?)?;
    if model.weights.len() != FeatureVector::LEN {
        bail!(srf::Error::Format(format!(
            "logistic model has {} weights, expected {}",
            model.weights.len(),
            FeatureVector::LEN
        )));
    }
    Ok(inputs
        .queries
        .iter()
        .map(|q| match inputs.features(q, fb, top_n) {
            Ok(f) => decide_lr(&q.query_id, &model, &f),
            Err(e) => keep_original(&q.query_id, DecisionMethod::LrSrf, &e),
        })
        .collect())
}

fn decide_deep(inputs: &Inputs, model: &Path) -> Result<Vec<DecisionOutcome>> {
    let params = load_decider(model)?;
    let texts = inputs.doc_texts()?;
    let k = params.dims.k;
    inputs
        .queries
        .iter()
        .map(|q| {
            let docs = branch_docs(&list_or_empty(&inputs.pre, &q.query_id), &texts, &inputs.index, k);
            Ok(forward_infer(&q.query_id, &q.terms, &docs, &params)?)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Fusion and evaluation
// ---------------------------------------------------------------------------

fn fuse(
    pre: &Path,
    post: &Path,
    decisions: Option<&Path>,
    mode: FuseMode,
    config: &FusionConfig,
    tag: &str,
    out: &Path,
) -> Result<()> {
    let pre = read_trec_run(pre)?;
    let post = read_trec_run(post)?;
    let decisions = match decisions {
        Some(p) => Some(tsv::read_decisions(p)?),
        None if matches!(mode, FuseMode::Fixed) => None,
        None => bail!(srf::Error::param("decisions", "confidence and hard fusion need --decisions")),
    };
    let ids: Vec<String> = match &decisions {
        Some(d) => d.keys().cloned().collect(),
        None => pre.keys().chain(post.keys()).collect::<BTreeSet<_>>().into_iter().cloned().collect(),
    };
    let mut fused = Runs::new();
    for qid in ids {
        let (p, q) = (list_or_empty(&pre, &qid), list_or_empty(&post, &qid));
        let decision = decisions.as_ref().map(|d| &d[&qid]);
        let list = match (mode, decision) {
            (FuseMode::Fixed, _) => fuse_fixed(&p, &q, config.alpha, config)?,
            (FuseMode::Confidence, Some(d)) => fuse_confidence(&p, &q, d.theta, config)?,
            (FuseMode::Hard, Some(d)) => select_hard(&p, &q, d),
            (_, None) => unreachable!("decisions checked above"),
        };
        fused.insert(qid, list);
    }
    write_trec_run(out, &fused, tag)?;
    println!("fused {} queries", fused.len());
    Ok(())
}

fn eval(run: &Path, qrels: &Path, decisions: Option<&Path>, labels: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let runs = read_trec_run(run)?;
    let qrels = read_qrels(qrels)?;
    let mut report = EvalReport::evaluate(&runs, &qrels)?;
    if let (Some(d), Some(l)) = (decisions, labels) {
        let decisions: BTreeMap<String, bool> = tsv::read_decisions(d)?
            .into_iter()
            .map(|(q, d)| (q, d.apply_prf))
            .collect();
        let labels: BTreeMap<String, u8> = tsv::read_labels(l)?.into_iter().map(|(q, l)| (q, l.y)).collect();
        report = report.with_accuracy(decision_accuracy(&decisions, &labels)?);
    }
    emit(&report.to_string(), out)
}

fn oracle(pre: &Path, post: &Path, qrels: &Path, out: &Path, report_out: Option<&Path>) -> Result<()> {
    let pre = read_trec_run(pre)?;
    let post = read_trec_run(post)?;
    let qrels = read_qrels(qrels)?;
    let (chosen, report) = oracle_run(&pre, &post, &qrels)?;
    write_trec_run(out, &chosen, "srf-oracle")?;
    emit(&report.to_string(), report_out)
}

fn report(decisions: &Path, labels: &Path, out: Option<&Path>) -> Result<()> {
    let decisions: BTreeMap<String, bool> = tsv::read_decisions(decisions)?
        .into_iter()
        .map(|(q, d)| (q, d.apply_prf))
        .collect();
    let labels = tsv::read_labels(labels)?;
    let table = contingency_report(&decisions, &labels)?;
    emit(&table.to_string(), out)
}
