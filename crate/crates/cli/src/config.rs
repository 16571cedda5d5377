//! Pipeline configuration: built-in defaults, then the TOML file, then
//! command-line flags. `WIKILINK_THREADS` overrides only the thread count.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use wikilink_core::{CleanConfig, PairConfig, StageMask, TrainConfig};

use crate::error::CliError;

pub const THREADS_ENV: &str = "WIKILINK_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Threads {
    #[default]
    Auto,
    Count(usize),
}

impl Threads {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let text = text.trim();
        if text.eq_ignore_ascii_case("auto") {
            return Ok(Threads::Auto);
        }
        match text.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Threads::Count(n)),
            _ => Err(CliError::Config(format!("thread count must be a positive integer or \"auto\", got {text:?}"))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ThreadsValue {
    Count(usize),
    Word(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    threads: Option<ThreadsValue>,
    strict_join: Option<bool>,
    #[serde(default)]
    paths: PathsSection,
    #[serde(default)]
    clean: CleanSection,
    #[serde(default)]
    pairs: PairsSection,
    #[serde(default)]
    train: TrainSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathsSection {
    nodes: Option<PathBuf>,
    train_pairs: Option<PathBuf>,
    test_pairs: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    model: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CleanSection {
    balance: Option<bool>,
    debrace: Option<bool>,
    depunct: Option<bool>,
    despace: Option<bool>,
    collapse_whitespace: Option<bool>,
    punctuation: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairsSection {
    max_tokens: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainSection {
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    adamw_eps: Option<f64>,
    adamw_beta1: Option<f64>,
    adamw_beta2: Option<f64>,
    weight_decay: Option<f64>,
    epochs: Option<usize>,
    seed: Option<u64>,
    hash_bits: Option<u32>,
    decision_threshold: Option<f64>,
}

/// Values given on the command line. `None` means "not given".
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub nodes: Option<PathBuf>,
    pub train_pairs: Option<PathBuf>,
    pub test_pairs: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub threads: Option<String>,
    pub lenient: bool,
    pub no_balance: bool,
    pub no_debrace: bool,
    pub no_depunct: bool,
    pub no_despace: bool,
    pub max_tokens: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub adamw_eps: Option<f64>,
    pub adamw_beta1: Option<f64>,
    pub adamw_beta2: Option<f64>,
    pub weight_decay: Option<f64>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub hash_bits: Option<u32>,
    pub decision_threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Paths {
    pub nodes: Option<PathBuf>,
    pub train_pairs: Option<PathBuf>,
    pub test_pairs: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub clean: CleanConfig,
    pub pairs: PairConfig,
    pub train: TrainConfig,
    pub strict_join: bool,
    pub threads: Threads,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            paths: Paths::default(),
            clean: CleanConfig::default(),
            pairs: PairConfig::default(),
            train: TrainConfig::default(),
            strict_join: true,
            threads: Threads::Auto,
        }
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

impl PipelineConfig {
    /// Relative paths in `file` are taken relative to `base_dir` (the config
    /// file's directory); flag paths are used as given.
    pub fn resolve(
        file: Option<&ConfigFile>,
        base_dir: &Path,
        flags: &Overrides,
        env_threads: Option<&str>,
    ) -> Result<Self, CliError> {
        let empty = ConfigFile::default();
        let file = file.unwrap_or(&empty);
        let rebase = |p: &Option<PathBuf>| p.as_ref().map(|p| base_dir.join(p));

        let paths = Paths {
            nodes: flags.nodes.clone().or_else(|| rebase(&file.paths.nodes)),
            train_pairs: flags.train_pairs.clone().or_else(|| rebase(&file.paths.train_pairs)),
            test_pairs: flags.test_pairs.clone().or_else(|| rebase(&file.paths.test_pairs)),
            output_dir: flags.output_dir.clone().or_else(|| rebase(&file.paths.output_dir)),
            model: flags.model.clone().or_else(|| rebase(&file.paths.model)),
        };

        let c = &file.clean;
        let stages = StageMask {
            balance: !flags.no_balance && c.balance.unwrap_or(true),
            debrace: !flags.no_debrace && c.debrace.unwrap_or(true),
            depunct: !flags.no_depunct && c.depunct.unwrap_or(true),
            despace: !flags.no_despace && c.despace.unwrap_or(true),
        };
        let mut clean = CleanConfig::default().with_stages(stages);
        clean.collapse_whitespace = c.collapse_whitespace.unwrap_or(true);
        if let Some(punct) = &c.punctuation {
            clean = clean.with_punctuation(punct.chars())?;
        }

        let max_tokens = pick(flags.max_tokens, file.pairs.max_tokens, PairConfig::default().max_tokens);
        let pairs = PairConfig {
            max_tokens,
            ..PairConfig::default()
        };
        pairs.validate()?;

        let t = &file.train;
        let d = TrainConfig::default();
        let train = TrainConfig {
            batch_size: pick(flags.batch_size, t.batch_size, d.batch_size),
            max_tokens,
            learning_rate: pick(flags.learning_rate, t.learning_rate, d.learning_rate),
            adamw_eps: pick(flags.adamw_eps, t.adamw_eps, d.adamw_eps),
            adamw_beta1: pick(flags.adamw_beta1, t.adamw_beta1, d.adamw_beta1),
            adamw_beta2: pick(flags.adamw_beta2, t.adamw_beta2, d.adamw_beta2),
            weight_decay: pick(flags.weight_decay, t.weight_decay, d.weight_decay),
            epochs: pick(flags.epochs, t.epochs, d.epochs),
            seed: pick(flags.seed, t.seed, d.seed),
            hash_bits: pick(flags.hash_bits, t.hash_bits, d.hash_bits),
            decision_threshold: pick(flags.decision_threshold, t.decision_threshold, d.decision_threshold),
        };
        train.validate()?;

        let threads = if let Some(text) = flags.threads.as_deref().or(env_threads) {
            Threads::parse(text)?
        } else {
            match &file.threads {
                None => Threads::Auto,
                Some(ThreadsValue::Count(0)) => {
                    return Err(CliError::Config("threads must be positive".into()))
                }
                Some(ThreadsValue::Count(n)) => Threads::Count(*n),
                Some(ThreadsValue::Word(w)) => Threads::parse(w)?,
            }
        };

        Ok(PipelineConfig {
            paths,
            clean,
            pairs,
            train,
            strict_join: !flags.lenient && file.strict_join.unwrap_or(true),
            threads,
        })
    }

    pub fn output_dir(&self) -> PathBuf {
        self.paths.output_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn model_path(&self) -> PathBuf {
        self.paths
            .model
            .clone()
            .unwrap_or_else(|| self.output_dir().join("model.json"))
    }
}
