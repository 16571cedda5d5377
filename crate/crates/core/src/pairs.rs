//! Premise/hypothesis construction.
//!
//! The article behind `id1` becomes the premise and the one behind `id2` the
//! hypothesis. Each side is tokenized on whitespace and head-truncated to its
//! own `max_tokens` budget.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dataset::{JoinedPair, PairRecord};
use crate::error::{Error, Result};
use crate::textclean::is_whitespace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tokenizer {
    #[default]
    Whitespace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairConfig {
    pub max_tokens: usize,
    #[serde(default)]
    pub tokenizer: Tokenizer,
}

impl Default for PairConfig {
    fn default() -> Self {
        PairConfig {
            max_tokens: 128,
            tokenizer: Tokenizer::Whitespace,
        }
    }
}

impl PairConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_tokens == 0 {
            return Err(Error::Config("max_tokens must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub pair_id: String,
    pub premise: Vec<String>,
    pub hypothesis: Vec<String>,
    pub label: Option<u8>,
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(is_whitespace)
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

fn tokenize_truncated(text: &str, max_tokens: usize) -> Vec<String> {
    text.split(is_whitespace)
        .filter(|t| !t.is_empty())
        .take(max_tokens)
        .map(str::to_owned)
        .collect()
}

pub fn build_pair(
    pair: &PairRecord,
    premise_text: &str,
    hypothesis_text: &str,
    config: &PairConfig,
) -> SentencePair {
    let Tokenizer::Whitespace = config.tokenizer;
    SentencePair {
        pair_id: pair.pair_id.clone(),
        premise: tokenize_truncated(premise_text, config.max_tokens),
        hypothesis: tokenize_truncated(hypothesis_text, config.max_tokens),
        label: pair.label,
    }
}

pub fn build_joined(joined: &JoinedPair<'_>, config: &PairConfig) -> SentencePair {
    build_pair(&joined.pair, &joined.premise.text, &joined.hypothesis.text, config)
}

/// Writes one line per pair: `pair_id<TAB>label-or-dash<TAB>premise<TAB>hypothesis`,
/// tokens joined by single spaces.
pub fn write_prepared<'a, W, I>(mut out: W, pairs: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a SentencePair>,
{
    for pair in pairs {
        if pair.pair_id.contains(['\t', '\n', '\r']) {
            return Err(Error::Config(format!(
                "pair id {:?} cannot be written to a prepared file",
                pair.pair_id
            )));
        }
        let label = match pair.label {
            Some(l) => l.to_string(),
            None => "-".to_owned(),
        };
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            pair.pair_id,
            label,
            pair.premise.join(" "),
            pair.hypothesis.join(" ")
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_prepared<R: BufRead>(input: R) -> Result<Vec<SentencePair>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let label = match fields[1] {
            "-" => None,
            "0" => Some(0),
            "1" => Some(1),
            other => {
                return Err(Error::LabelDomain {
                    line: line_no,
                    value: other.to_owned(),
                })
            }
        };
        out.push(SentencePair {
            pair_id: fields[0].to_owned(),
            premise: tokenize(fields[2]),
            hypothesis: tokenize(fields[3]),
            label,
        });
    }
    Ok(out)
}
