use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use wikilink_core::baseline::{predict_all, train as train_model};
use wikilink_core::dataset::{
    join_pairs, label_stats_streaming, parse_nodes, write_nodes, NodeRecord, PairReader,
};
use wikilink_core::eval::{emit_submission, evaluate, read_predictions, write_predictions};
use wikilink_core::pairs::{build_joined, write_prepared};
use wikilink_core::synthetic::{generate, SyntheticConfig};
use wikilink_core::textclean::clean;
use wikilink_core::{
    BaselineModel, CleanConfig, CleanReport, EvalReport, JoinMode, LabelStats, NodeTable, PairConfig,
    PairRecord, Prediction, SentencePair,
};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::output::{open, open_or_stdin, require_inputs, write_atomic, write_to};

pub const CLEANED_NODES: &str = "nodes.clean.tsv";
pub const PREPARED_TRAIN: &str = "train.prepared.tsv";
pub const PREDICTIONS: &str = "predictions.csv";
pub const SUBMISSION: &str = "submission.csv";

fn required(path: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    path.ok_or_else(|| CliError::Config(format!("no {what} path given (flag or config file)")))
}

fn join_mode(config: &PipelineConfig) -> JoinMode {
    if config.strict_join {
        JoinMode::Strict
    } else {
        JoinMode::Lenient
    }
}

fn load_nodes(path: &Path) -> Result<NodeTable> {
    let mut reader = parse_nodes(open(path)?);
    let table = NodeTable::from_records(reader.by_ref())?;
    if reader.missing_text_count() > 0 {
        warn!("{}: {} nodes had no text column", path.display(), reader.missing_text_count());
    }
    info!("read {} nodes from {}", table.len(), path.display());
    Ok(table)
}

/// Cleans every node text; output order follows the input.
pub fn clean_nodes(nodes: &NodeTable, config: &CleanConfig) -> (NodeTable, CleanReport) {
    let cleaned: Vec<(NodeRecord, CleanReport)> = nodes
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|node| {
            let (text, report) = clean(&node.text, config);
            (NodeRecord { id: node.id, text }, report)
        })
        .collect();
    let mut total = CleanReport::default();
    for (_, report) in &cleaned {
        total += *report;
    }
    let table = NodeTable::from_records(cleaned.into_iter().map(|(n, _)| Ok(n)))
        .expect("ids were unique in the source table");
    (table, total)
}

fn load_pairs(path: &Path, labeled: Option<bool>) -> Result<(Vec<PairRecord>, bool)> {
    let reader = match labeled {
        Some(l) => PairReader::new(open(path)?, l)?,
        None => PairReader::detect(open(path)?)?,
    };
    let labeled = reader.is_labeled();
    let pairs = reader.collect::<wikilink_core::Result<Vec<_>>>()?;
    info!(
        "read {} {} pairs from {}",
        pairs.len(),
        if labeled { "labeled" } else { "unlabeled" },
        path.display()
    );
    Ok((pairs, labeled))
}

fn sentence_pairs(
    pairs: Vec<PairRecord>,
    nodes: &NodeTable,
    pair_config: &PairConfig,
    mode: JoinMode,
) -> Result<Vec<SentencePair>> {
    let joined = join_pairs(pairs, nodes, mode)?;
    if joined.skipped > 0 {
        warn!("skipped {} pairs referencing unknown nodes", joined.skipped);
    }
    Ok(joined.pairs.par_iter().map(|j| build_joined(j, pair_config)).collect())
}

fn emit_report_line(report: &CleanReport, documents: usize) {
    let line = serde_json::json!({
        "documents": documents,
        "input_length": report.input_length,
        "output_length": report.output_length,
        "braces_removed_balance": report.braces_removed_balance,
        "chars_removed_debrace": report.chars_removed_debrace,
    });
    eprintln!("clean_report {line}");
}

pub fn clean_cmd(config: &PipelineConfig, input: Option<&Path>, output: Option<&Path>, report: bool) -> Result<()> {
    if let Some(p) = input {
        require_inputs([p])?;
    }
    let mut reader = parse_nodes(open_or_stdin(input)?);
    let table = NodeTable::from_records(reader.by_ref())?;
    info!("clean: read {} nodes", table.len());
    let (cleaned, totals) = clean_nodes(&table, &config.clean);
    write_to(output, |w| Ok(write_nodes(w, cleaned.iter())?))?;
    info!("clean: wrote {} nodes", cleaned.len());
    if report {
        emit_report_line(&totals, cleaned.len());
    }
    Ok(())
}

pub fn format_stats(stats: &LabelStats) -> String {
    let mut out = String::new();
    out.push_str("label      count  percent\n");
    out.push_str(&format!("0     {:>10}  {:>7.2}\n", stats.count_0, stats.pct_0));
    out.push_str(&format!("1     {:>10}  {:>7.2}\n", stats.count_1, stats.pct_1));
    let line = serde_json::json!({
        "count_0": stats.count_0,
        "count_1": stats.count_1,
        "pct_0": stats.pct_0,
        "pct_1": stats.pct_1,
        "total": stats.total(),
    });
    out.push_str(&format!("stats {line}\n"));
    out
}

pub fn stats_cmd(pairs: &Path) -> Result<LabelStats> {
    require_inputs([pairs])?;
    let stats = label_stats_streaming(PairReader::new(open(pairs)?, true)?)?;
    info!("stats: read {} labeled pairs", stats.total());
    print!("{}", format_stats(&stats));
    std::io::stdout().flush()?;
    Ok(stats)
}

pub fn prepare_cmd(config: &PipelineConfig, pairs: &Path, nodes: &Path, output: Option<&Path>) -> Result<()> {
    require_inputs([pairs, nodes])?;
    let (cleaned, _) = clean_nodes(&load_nodes(nodes)?, &config.clean);
    let (records, _) = load_pairs(pairs, None)?;
    let prepared = sentence_pairs(records, &cleaned, &config.pairs, join_mode(config))?;
    write_to(output, |w| Ok(write_prepared(w, &prepared)?))?;
    info!("prepare: wrote {} pairs", prepared.len());
    Ok(())
}

fn save_model(model: &BaselineModel, path: &Path) -> Result<()> {
    write_atomic(path, |w| Ok(model.save(w)?))?;
    info!("wrote model to {}", path.display());
    Ok(())
}

fn fit(config: &PipelineConfig, examples: &[SentencePair]) -> Result<BaselineModel> {
    let (model, log) = train_model(examples, &config.train)?;
    for (epoch, loss) in log.epoch_losses.iter().enumerate() {
        info!("train: epoch {} mean loss {:.6}", epoch + 1, loss);
    }
    info!("train: {} examples, {} updates", examples.len(), model.step());
    Ok(model)
}

pub fn train_cmd(config: &PipelineConfig, pairs: &Path, nodes: &Path, model_path: &Path) -> Result<()> {
    require_inputs([pairs, nodes])?;
    let (cleaned, _) = clean_nodes(&load_nodes(nodes)?, &config.clean);
    let (records, _) = load_pairs(pairs, Some(true))?;
    let examples = sentence_pairs(records, &cleaned, &config.pairs, join_mode(config))?;
    let model = fit(config, &examples)?;
    save_model(&model, model_path)
}

fn load_model(path: &Path, threshold: Option<f64>) -> Result<BaselineModel> {
    let mut model = BaselineModel::load(open(path)?)?;
    if let Some(t) = threshold {
        model.set_threshold(t)?;
    }
    info!("read model from {} ({} weights)", path.display(), model.weights().len());
    Ok(model)
}

fn score(model: &BaselineModel, config: &PipelineConfig, pairs: Vec<PairRecord>, nodes: &NodeTable) -> Result<Vec<Prediction>> {
    // The token budget is the one the model was trained with.
    let pair_config = PairConfig {
        max_tokens: model.config().max_tokens,
        ..config.pairs
    };
    let examples = sentence_pairs(pairs, nodes, &pair_config, join_mode(config))?;
    Ok(predict_all(model, &examples))
}

pub fn predict_cmd(
    config: &PipelineConfig,
    model_path: &Path,
    pairs: &Path,
    nodes: &Path,
    output: Option<&Path>,
    threshold: Option<f64>,
) -> Result<()> {
    require_inputs([model_path, pairs, nodes])?;
    let model = load_model(model_path, threshold)?;
    let (cleaned, _) = clean_nodes(&load_nodes(nodes)?, &config.clean);
    let (records, _) = load_pairs(pairs, None)?;
    let predictions = score(&model, config, records, &cleaned)?;
    write_to(output, |w| Ok(write_predictions(&predictions, w)?))?;
    info!("predict: wrote {} predictions", predictions.len());
    Ok(())
}

pub fn format_report(report: &EvalReport) -> String {
    let m = report.matrix;
    let mut out = String::new();
    out.push_str(&format!("pairs      {}\n", m.total()));
    out.push_str(&format!("confusion  tp={} fp={} tn={} fn={}\n", m.tp, m.fp, m.tn, m.fn_));
    out.push_str("class  precision    recall        f1\n");
    out.push_str(&format!(
        "0      {:>9.5} {:>9.5} {:>9.5}\n",
        report.precision_0, report.recall_0, report.f1_0
    ));
    out.push_str(&format!(
        "1      {:>9.5} {:>9.5} {:>9.5}\n",
        report.precision_1, report.recall_1, report.f1_1
    ));
    out.push_str(&format!("macro_f1   {:.5}\n", report.macro_f1));
    let line = serde_json::to_string(report).expect("report serializes");
    out.push_str(&format!("eval {line}\n"));
    out
}

pub fn eval_cmd(predictions: &Path, gold: &Path) -> Result<EvalReport> {
    require_inputs([predictions, gold])?;
    let preds = read_predictions(open(predictions)?)?;
    let (gold, _) = load_pairs(gold, Some(true))?;
    let report = evaluate(&preds, &gold)?;
    info!("eval: scored {} predictions", preds.len());
    print!("{}", format_report(&report));
    std::io::stdout().flush()?;
    Ok(report)
}

pub fn submit_cmd(predictions: &Path, output: Option<&Path>) -> Result<()> {
    require_inputs([predictions])?;
    let preds = read_predictions(open(predictions)?)?;
    write_to(output, |w| Ok(emit_submission(&preds, w)?))?;
    info!("submit: wrote {} rows", preds.len());
    Ok(())
}

/// clean -> prepare -> train -> predict -> submit, all outputs under the
/// configured output directory (model path may be set separately).
pub fn pipeline_cmd(config: &PipelineConfig) -> Result<()> {
    let nodes_path = required(config.paths.nodes.clone(), "nodes")?;
    let train_path = required(config.paths.train_pairs.clone(), "train pairs")?;
    let test_path = required(config.paths.test_pairs.clone(), "test pairs")?;
    require_inputs([nodes_path.as_path(), train_path.as_path(), test_path.as_path()])?;
    let out_dir = config.output_dir();
    std::fs::create_dir_all(&out_dir).map_err(|source| CliError::Io {
        path: out_dir.clone(),
        source,
    })?;

    let (cleaned, totals) = clean_nodes(&load_nodes(&nodes_path)?, &config.clean);
    write_atomic(&out_dir.join(CLEANED_NODES), |w| Ok(write_nodes(w, cleaned.iter())?))?;
    info!(
        "clean: {} nodes, {} -> {} characters",
        cleaned.len(),
        totals.input_length,
        totals.output_length
    );

    let (train_pairs, _) = load_pairs(&train_path, Some(true))?;
    let examples = sentence_pairs(train_pairs, &cleaned, &config.pairs, join_mode(config))?;
    write_atomic(&out_dir.join(PREPARED_TRAIN), |w| Ok(write_prepared(w, &examples)?))?;
    info!("prepare: wrote {} pairs", examples.len());

    let model = fit(config, &examples)?;
    save_model(&model, &config.model_path())?;

    let (test_pairs, test_labeled) = load_pairs(&test_path, None)?;
    let gold = test_labeled.then(|| test_pairs.clone());
    let predictions = score(&model, config, test_pairs, &cleaned)?;
    write_atomic(&out_dir.join(PREDICTIONS), |w| Ok(write_predictions(&predictions, w)?))?;
    info!("predict: wrote {} predictions", predictions.len());

    write_atomic(&out_dir.join(SUBMISSION), |w| Ok(emit_submission(&predictions, w)?))?;
    info!("submit: wrote {} rows", predictions.len());

    if let Some(gold) = gold {
        let report = evaluate(&predictions, &gold)?;
        print!("{}", format_report(&report));
    }
    Ok(())
}

pub fn synth_cmd(dir: &Path, pairs: usize, seed: u64) -> Result<()> {
    let data = generate(&SyntheticConfig {
        pairs,
        seed,
        ..SyntheticConfig::default()
    });
    data.write_to(dir)?;
    info!(
        "synth: wrote {} nodes and {} pairs to {}",
        data.nodes.len(),
        data.pairs.len(),
        dir.display()
    );
    Ok(())
}
