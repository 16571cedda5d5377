mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use crate::config::{ConfigFile, Overrides, PipelineConfig, Threads, THREADS_ENV};
use crate::error::{CliError, Result};

/// Wikipedia link prediction as sentence-pair classification.
#[derive(Debug, Parser)]
#[command(name = "wikilink", version, about)]
struct Cli {
    /// TOML configuration file (flags take precedence over it).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads: a positive integer or "auto".
    #[arg(long, global = true)]
    threads: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
struct CleanFlags {
    /// Skip brace balancing.
    #[arg(long)]
    no_balance: bool,
    /// Skip brace-span removal.
    #[arg(long)]
    no_debrace: bool,
    /// Skip punctuation removal.
    #[arg(long)]
    no_depunct: bool,
    /// Skip whitespace normalization.
    #[arg(long)]
    no_despace: bool,
}

#[derive(Debug, Args, Default)]
struct TrainFlags {
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    adamw_eps: Option<f64>,
    #[arg(long)]
    adamw_beta1: Option<f64>,
    #[arg(long)]
    adamw_beta2: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    hash_bits: Option<u32>,
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Debug, Args, Default)]
struct JoinFlags {
    /// Skip pairs that reference unknown node ids instead of failing.
    #[arg(long)]
    lenient: bool,
    /// Per-side token budget.
    #[arg(long)]
    max_tokens: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean a nodes TSV (stdin/stdout when paths are omitted or `-`).
    Clean {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Print aggregate cleaning counters as a JSON line on stderr.
        #[arg(long)]
        report: bool,
        #[command(flatten)]
        clean: CleanFlags,
    },
    /// Label counts and percentages of a labeled pairs CSV.
    Stats {
        /// Defaults to the configured train pairs.
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Write premise/hypothesis token lines for a pairs CSV.
    Prepare {
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long)]
        nodes: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        join: JoinFlags,
        #[command(flatten)]
        clean: CleanFlags,
    },
    /// Train the baseline classifier.
    Train {
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long)]
        nodes: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        join: JoinFlags,
        #[command(flatten)]
        clean: CleanFlags,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Score pairs with a trained model.
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Defaults to the configured test pairs.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long)]
        nodes: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Overrides the threshold stored in the model.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        lenient: bool,
        #[command(flatten)]
        clean: CleanFlags,
    },
    /// Macro F1 of a predictions (or submission) file against labeled pairs.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        gold: PathBuf,
    },
    /// Convert predictions to the `id,label` submission format.
    Submit {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// clean, prepare, train, predict and submit in one run.
    Pipeline {
        #[arg(long)]
        nodes: Option<PathBuf>,
        #[arg(long)]
        train_pairs: Option<PathBuf>,
        #[arg(long)]
        test_pairs: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        join: JoinFlags,
        #[command(flatten)]
        clean: CleanFlags,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Generate the synthetic overlap-separable dataset.
    Synth {
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long, default_value_t = 200)]
        pairs: usize,
        #[arg(long, default_value_t = 2023)]
        seed: u64,
    },
}

fn apply_clean(o: &mut Overrides, c: &CleanFlags) {
    o.no_balance = c.no_balance;
    o.no_debrace = c.no_debrace;
    o.no_depunct = c.no_depunct;
    o.no_despace = c.no_despace;
}

fn apply_join(o: &mut Overrides, j: &JoinFlags) {
    o.lenient = j.lenient;
    o.max_tokens = j.max_tokens;
}

fn apply_train(o: &mut Overrides, t: &TrainFlags) {
    o.batch_size = t.batch_size;
    o.learning_rate = t.learning_rate;
    o.adamw_eps = t.adamw_eps;
    o.adamw_beta1 = t.adamw_beta1;
    o.adamw_beta2 = t.adamw_beta2;
    o.weight_decay = t.weight_decay;
    o.epochs = t.epochs;
    o.seed = t.seed;
    o.hash_bits = t.hash_bits;
    o.decision_threshold = t.threshold;
}

fn overrides(cli: &Cli) -> Overrides {
    let mut o = Overrides {
        threads: cli.threads.clone(),
        ..Overrides::default()
    };
    match &cli.command {
        Command::Clean { clean, .. } => apply_clean(&mut o, clean),
        Command::Prepare {
            pairs, nodes, join, clean, ..
        } => {
            o.train_pairs = pairs.clone();
            o.nodes = nodes.clone();
            apply_join(&mut o, join);
            apply_clean(&mut o, clean);
        }
        Command::Train {
            pairs,
            nodes,
            model,
            join,
            clean,
            train,
        } => {
            o.train_pairs = pairs.clone();
            o.nodes = nodes.clone();
            o.model = model.clone();
            apply_join(&mut o, join);
            apply_clean(&mut o, clean);
            apply_train(&mut o, train);
        }
        Command::Predict {
            model,
            pairs,
            nodes,
            lenient,
            clean,
            ..
        } => {
            o.model = model.clone();
            o.test_pairs = pairs.clone();
            o.nodes = nodes.clone();
            o.lenient = *lenient;
            apply_clean(&mut o, clean);
        }
        Command::Stats { pairs } => o.train_pairs = pairs.clone(),
        Command::Pipeline {
            nodes,
            train_pairs,
            test_pairs,
            output_dir,
            model,
            join,
            clean,
            train,
        } => {
            o.nodes = nodes.clone();
            o.train_pairs = train_pairs.clone();
            o.test_pairs = test_pairs.clone();
            o.output_dir = output_dir.clone();
            o.model = model.clone();
            apply_join(&mut o, join);
            apply_clean(&mut o, clean);
            apply_train(&mut o, train);
        }
        Command::Eval { .. } | Command::Submit { .. } | Command::Synth { .. } => {}
    }
    o
}

fn resolve_config(cli: &Cli) -> Result<PipelineConfig> {
    let (file, base) = match &cli.config {
        Some(path) => {
            let base = path
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or(Path::new("."))
                .to_owned();
            (Some(ConfigFile::load(path)?), base)
        }
        None => (None, PathBuf::from(".")),
    };
    let env_threads = std::env::var(THREADS_ENV).ok();
    PipelineConfig::resolve(file.as_ref(), &base, &overrides(cli), env_threads.as_deref())
}

fn need(path: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    path.ok_or_else(|| CliError::Config(format!("missing --{what} (or its config file entry)")))
}

fn run(cli: Cli) -> Result<()> {
    let config = resolve_config(&cli)?;
    let threads = match config.threads {
        Threads::Auto => 0,
        Threads::Count(n) => n,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))?;

    let paths = config.paths.clone();
    match cli.command {
        Command::Clean {
            input, output, report, ..
        } => commands::clean_cmd(&config, input.as_deref(), output.as_deref(), report),
        Command::Stats { .. } => commands::stats_cmd(&need(paths.train_pairs, "pairs")?).map(drop),
        Command::Prepare { output, .. } => commands::prepare_cmd(
            &config,
            &need(paths.train_pairs, "pairs")?,
            &need(paths.nodes, "nodes")?,
            output.as_deref(),
        ),
        Command::Train { .. } => commands::train_cmd(
            &config,
            &need(paths.train_pairs, "pairs")?,
            &need(paths.nodes, "nodes")?,
            &config.model_path(),
        ),
        Command::Predict { output, threshold, .. } => commands::predict_cmd(
            &config,
            &config.model_path(),
            &need(paths.test_pairs, "pairs")?,
            &need(paths.nodes, "nodes")?,
            output.as_deref(),
            threshold,
        ),
        Command::Eval { predictions, gold } => commands::eval_cmd(&predictions, &gold).map(drop),
        Command::Submit { predictions, output } => commands::submit_cmd(&predictions, output.as_deref()),
        Command::Pipeline { .. } => commands::pipeline_cmd(&config),
        Command::Synth {
            output_dir,
            pairs,
            seed,
        } => commands::synth_cmd(&output_dir, pairs, seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .format_target(false)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{} error: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
