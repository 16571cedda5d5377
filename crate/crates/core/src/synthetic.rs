//! Seeded generator for small overlap-separable datasets.
//!
//! Each pair gets two fresh nodes. A pair is labeled 1 exactly when the
//! cleaned texts share at least one token. Raw texts carry wikitext noise:
//! templates whose contents would create false overlap, punctuation glued to
//! words, and stray closing braces.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{write_nodes, write_pairs, NodeRecord, PairRecord};
use crate::error::Result;

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ne", "su", "ta", "ri", "po", "ve", "da", "go", "zu", "he", "bi", "fa", "wy",
];
const PUNCTUATION: [char; 6] = [',', '.', ';', ':', '!', '?'];
const NODE_ID_BASE: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub pairs: usize,
    pub seed: u64,
    pub vocabulary: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            pairs: 200,
            seed: 2023,
            vocabulary: 4096,
        }
    }
}

/// Counts a consumer can check generated files against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub pairs: usize,
    pub nodes: usize,
    pub count_0: u64,
    pub count_1: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub nodes: Vec<NodeRecord>,
    /// Labeled pairs.
    pub pairs: Vec<PairRecord>,
    pub manifest: Manifest,
}

/// Pronounceable word for a vocabulary index; distinct indices give distinct
/// words.
pub fn word(index: usize) -> String {
    let mut n = index;
    let mut out = String::new();
    for _ in 0..3 {
        out.push_str(SYLLABLES[n % SYLLABLES.len()]);
        n /= SYLLABLES.len();
    }
    while n > 0 {
        out.push_str(SYLLABLES[n % SYLLABLES.len()]);
        n /= SYLLABLES.len();
    }
    out
}

fn sample_excluding(rng: &mut ChaCha8Rng, vocabulary: usize, count: usize, exclude: &BTreeSet<usize>) -> Vec<usize> {
    let mut picked = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let w = rng.gen_range(0..vocabulary);
        if !exclude.contains(&w) && picked.insert(w) {
            out.push(w);
        }
    }
    out
}

fn render(rng: &mut ChaCha8Rng, words: &[usize], decoy: Option<usize>) -> String {
    let mut parts: Vec<String> = words
        .iter()
        .map(|&w| {
            let mut token = word(w);
            if rng.gen_bool(0.3) {
                token.push(PUNCTUATION[rng.gen_range(0..PUNCTUATION.len())]);
            }
            if rng.gen_bool(0.1) {
                token = format!("'''{token}'''");
            }
            token
        })
        .collect();
    if let Some(decoy) = decoy {
        let at = rng.gen_range(0..=parts.len());
        parts.insert(at, format!("{{{{Infobox entry | name={} | {{{{lang|x}}}}}}}}", word(decoy)));
    }
    let mut text = parts.join(if rng.gen_bool(0.2) { "  " } else { " " });
    if rng.gen_bool(0.15) {
        text.push_str(" }");
    }
    text
}

pub fn generate(config: &SyntheticConfig) -> SyntheticData {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut nodes = Vec::with_capacity(config.pairs * 2);
    let mut pairs = Vec::with_capacity(config.pairs);
    let (mut zeros, mut ones) = (0u64, 0u64);

    for i in 0..config.pairs {
        let positive = rng.gen_bool(0.5);
        let premise_len = rng.gen_range(6..=14);
        let premise = sample_excluding(&mut rng, config.vocabulary, premise_len, &BTreeSet::new());
        let premise_set: BTreeSet<usize> = premise.iter().copied().collect();

        let extra = rng.gen_range(5..=12);
        let mut hypothesis = sample_excluding(&mut rng, config.vocabulary, extra, &premise_set);
        if positive {
            let shared = rng.gen_range(1..=3);
            hypothesis.extend(premise.choose_multiple(&mut rng, shared).copied());
            hypothesis.shuffle(&mut rng);
        }

        // Negatives sometimes hide a premise word inside a template so only
        // cleaned text is separable.
        let decoy = if rng.gen_bool(0.5) {
            Some(if positive { hypothesis[0] } else { *premise.choose(&mut rng).unwrap() })
        } else {
            None
        };

        let id1 = NODE_ID_BASE + 2 * i as u64;
        let id2 = id1 + 1;
        nodes.push(NodeRecord {
            id: id1,
            text: render(&mut rng, &premise, None),
        });
        nodes.push(NodeRecord {
            id: id2,
            text: render(&mut rng, &hypothesis, decoy),
        });
        let label = u8::from(positive);
        if positive {
            ones += 1;
        } else {
            zeros += 1;
        }
        pairs.push(PairRecord {
            pair_id: format!("p{i:04}"),
            id1,
            id2,
            label: Some(label),
        });
    }

    SyntheticData {
        manifest: Manifest {
            seed: config.seed,
            pairs: pairs.len(),
            nodes: nodes.len(),
            count_0: zeros,
            count_1: ones,
        },
        nodes,
        pairs,
    }
}

impl SyntheticData {
    /// Same pairs without labels.
    pub fn unlabeled_pairs(&self) -> Vec<PairRecord> {
        self.pairs
            .iter()
            .map(|p| PairRecord { label: None, ..p.clone() })
            .collect()
    }

    /// Writes `nodes.tsv`, `train.csv`, `test.csv` (unlabeled copy of the
    /// training pairs) and `manifest.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_nodes(BufWriter::new(File::create(dir.join("nodes.tsv"))?), &self.nodes)?;
        write_pairs(BufWriter::new(File::create(dir.join("train.csv"))?), &self.pairs, true)?;
        write_pairs(
            BufWriter::new(File::create(dir.join("test.csv"))?),
            &self.unlabeled_pairs(),
            false,
        )?;
        let manifest = serde_json::to_string_pretty(&self.manifest).map_err(std::io::Error::other)?;
        std::fs::write(dir.join("manifest.json"), manifest + "\n")?;
        Ok(())
    }
}
