//! Link prediction between Wikipedia articles framed as sentence-pair
//! classification.
//!
//! The pipeline cleans wikitext ([`textclean`]), reads the competition files
//! ([`dataset`]), turns each candidate edge into a premise/hypothesis pair
//! ([`pairs`]), scores it with a hashed-feature logistic model
//! ([`baseline`]) and reports macro F1 ([`eval`]).

pub mod baseline;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod pairs;
pub mod synthetic;
pub mod textclean;

pub use baseline::{BaselineModel, FeatureVector, Gradient, PairClassifier, Prediction, TrainConfig, TrainLog};
pub use dataset::{JoinMode, LabelStats, NodeRecord, NodeTable, PairRecord};
pub use error::{Error, ErrorCategory, Result};
pub use eval::{ConfusionMatrix, EvalReport};
pub use pairs::{PairConfig, SentencePair};
pub use textclean::{CleanConfig, CleanReport, StageMask};
