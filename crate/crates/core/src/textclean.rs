//! Wikitext noise removal.
//!
//! Four deletion-only stages run in a fixed order: brace balancing, brace-span
//! removal, punctuation removal and whitespace normalization. Every function
//! here operates on Unicode scalar values and is pure.

use std::collections::BTreeSet;
use std::ops::AddAssign;

use serde::Serialize;

use crate::error::{Error, Result};

/// ASCII punctuation removed by default. `{` and `}` are handled by the brace
/// stages and are never part of a punctuation set.
pub const DEFAULT_PUNCTUATION: &str = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`|~";

/// Space, tab, carriage return, line feed, form feed and vertical tab.
pub fn is_whitespace(c: char) -> bool {
    matches!(c, ' ' | '\t' | '\r' | '\n' | '\x0c' | '\x0b')
}

/// A cleaning stage. Enabled stages always run in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Balance,
    Debrace,
    Depunct,
    Despace,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Balance, Stage::Debrace, Stage::Depunct, Stage::Despace];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Balance => "balance",
            Stage::Debrace => "debrace",
            Stage::Depunct => "depunct",
            Stage::Despace => "despace",
        }
    }
}

/// Which stages run. Order is not configurable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageMask {
    pub balance: bool,
    pub debrace: bool,
    pub depunct: bool,
    pub despace: bool,
}

impl Default for StageMask {
    fn default() -> Self {
        StageMask {
            balance: true,
            debrace: true,
            depunct: true,
            despace: true,
        }
    }
}

impl StageMask {
    pub fn contains(&self, stage: Stage) -> bool {
        match stage {
            Stage::Balance => self.balance,
            Stage::Debrace => self.debrace,
            Stage::Depunct => self.depunct,
            Stage::Despace => self.despace,
        }
    }

    /// Enabled stages in execution order.
    pub fn enabled(&self) -> impl Iterator<Item = Stage> + '_ {
        Stage::ALL.into_iter().filter(move |s| self.contains(*s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanConfig {
    punctuation: BTreeSet<char>,
    /// When false the despace stage only trims the ends and leaves interior
    /// whitespace runs alone.
    pub collapse_whitespace: bool,
    pub stages: StageMask,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            punctuation: DEFAULT_PUNCTUATION.chars().collect(),
            collapse_whitespace: true,
            stages: StageMask::default(),
        }
    }
}

impl CleanConfig {
    /// Replaces the punctuation set. Braces and whitespace are rejected.
    pub fn with_punctuation<I: IntoIterator<Item = char>>(mut self, chars: I) -> Result<Self> {
        let set: BTreeSet<char> = chars.into_iter().collect();
        if let Some(bad) = set.iter().find(|&&c| c == '{' || c == '}' || is_whitespace(c)) {
            return Err(Error::Config(format!(
                "punctuation set may not contain {bad:?}"
            )));
        }
        self.punctuation = set;
        Ok(self)
    }

    pub fn with_stages(mut self, stages: StageMask) -> Self {
        self.stages = stages;
        self
    }

    pub fn punctuation(&self) -> &BTreeSet<char> {
        &self.punctuation
    }

    pub fn is_punctuation(&self, c: char) -> bool {
        self.punctuation.contains(&c)
    }
}

/// Per-document (or, after `+=`, aggregate) cleaning counters. Lengths are in
/// characters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CleanReport {
    pub input_length: usize,
    pub output_length: usize,
    pub braces_removed_balance: usize,
    pub chars_removed_debrace: usize,
}

impl AddAssign for CleanReport {
    fn add_assign(&mut self, rhs: Self) {
        self.input_length += rhs.input_length;
        self.output_length += rhs.output_length;
        self.braces_removed_balance += rhs.braces_removed_balance;
        self.chars_removed_debrace += rhs.chars_removed_debrace;
    }
}

/// Deletes surplus braces so that `{` and `}` counts match, then trims.
///
/// Surplus `{` are taken from the left, surplus `}` from the right. The trim
/// happens even when the counts were already equal.
pub fn balance_curly_braces(text: &str) -> String {
    balance_counting(text).0
}

fn balance_counting(text: &str) -> (String, usize) {
    let opening = text.chars().filter(|&c| c == '{').count();
    let closing = text.chars().filter(|&c| c == '}').count();

    let balanced: String = if opening > closing {
        let mut surplus = opening - closing;
        text.chars()
            .filter(|&c| {
                if c == '{' && surplus > 0 {
                    surplus -= 1;
                    false
                } else {
                    true
                }
            })
            .collect()
    } else if closing > opening {
        let mut surplus = closing - opening;
        let mut kept: Vec<char> = text
            .chars()
            .rev()
            .filter(|&c| {
                if c == '}' && surplus > 0 {
                    surplus -= 1;
                    false
                } else {
                    true
                }
            })
            .collect();
        kept.reverse();
        kept.into_iter().collect()
    } else {
        text.to_owned()
    };

    let removed = opening.abs_diff(closing);
    (balanced.trim_matches(is_whitespace).to_owned(), removed)
}

/// Drops every character inside a brace span, at any depth.
///
/// `{` opens a level, `}` closes one if any is open and is otherwise ignored.
/// Other characters survive only at depth zero, so braces never appear in the
/// output and everything after an unmatched `{` is lost.
pub fn remove_brace_spans(text: &str) -> String {
    // The stack only ever holds `{`, so its height is all that matters.
    let mut depth = 0usize;
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '{' => depth += 1,
            '}' => depth = depth.saturating_sub(1),
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out
}

pub fn strip_punctuation(text: &str, config: &CleanConfig) -> String {
    text.chars().filter(|&c| !config.is_punctuation(c)).collect()
}

/// Collapses whitespace runs to one space and trims both ends.
pub fn normalize_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split(is_whitespace).filter(|w| !w.is_empty()) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Runs the enabled stages in order.
pub fn clean(text: &str, config: &CleanConfig) -> (String, CleanReport) {
    let mut report = CleanReport {
        input_length: text.chars().count(),
        ..CleanReport::default()
    };
    let mut current = text.to_owned();
    for stage in config.stages.enabled() {
        current = match stage {
            Stage::Balance => {
                let (out, removed) = balance_counting(&current);
                report.braces_removed_balance = removed;
                out
            }
            Stage::Debrace => {
                let before = current.chars().count();
                let out = remove_brace_spans(&current);
                report.chars_removed_debrace = before - out.chars().count();
                out
            }
            Stage::Depunct => strip_punctuation(&current, config),
            Stage::Despace if config.collapse_whitespace => normalize_whitespace(&current),
            Stage::Despace => current.trim_matches(is_whitespace).to_owned(),
        };
    }
    report.output_length = current.chars().count();
    (current, report)
}

/// Convenience wrapper when the report is not needed.
pub fn clean_text(text: &str, config: &CleanConfig) -> String {
    clean(text, config).0
}
