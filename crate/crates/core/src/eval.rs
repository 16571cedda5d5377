//! Binary confusion counts, macro F1 and the submission/prediction files.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::ops::AddAssign;

use serde::Serialize;

use crate::baseline::Prediction;
use crate::dataset::PairRecord;
use crate::error::{Error, Result};

pub const SUBMISSION_HEADER: [&str; 2] = ["id", "label"];
pub const PREDICTIONS_HEADER: [&str; 3] = ["id", "label", "probability"];

/// Ids listed per side in a coverage error.
const COVERAGE_LISTING_CAP: usize = 10;

/// Class 1 is the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn record(&mut self, predicted: u8, gold: u8) {
        match (predicted, gold) {
            (1, 1) => self.tp += 1,
            (1, _) => self.fp += 1,
            (_, 1) => self.fn_ += 1,
            _ => self.tn += 1,
        }
    }

    pub fn from_labels<I: IntoIterator<Item = (u8, u8)>>(pairs: I) -> Self {
        let mut m = ConfusionMatrix::default();
        for (p, g) in pairs {
            m.record(p, g);
        }
        m
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Same counts with classes 0 and 1 exchanged.
    pub fn swapped(&self) -> Self {
        ConfusionMatrix {
            tp: self.tn,
            tn: self.tp,
            fp: self.fn_,
            fn_: self.fp,
        }
    }
}

impl AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.tn += rhs.tn;
        self.fn_ += rhs.fn_;
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalReport {
    pub matrix: ConfusionMatrix,
    pub precision_0: f64,
    pub recall_0: f64,
    pub f1_0: f64,
    pub precision_1: f64,
    pub recall_1: f64,
    pub f1_1: f64,
    pub macro_f1: f64,
}

impl EvalReport {
    pub fn from_matrix(matrix: ConfusionMatrix) -> Self {
        let ConfusionMatrix { tp, fp, tn, fn_ } = matrix;
        let precision_1 = ratio(tp, tp + fp);
        let recall_1 = ratio(tp, tp + fn_);
        let precision_0 = ratio(tn, tn + fn_);
        let recall_0 = ratio(tn, tn + fp);
        let f1_0 = f1(precision_0, recall_0);
        let f1_1 = f1(precision_1, recall_1);
        EvalReport {
            matrix,
            precision_0,
            recall_0,
            f1_0,
            precision_1,
            recall_1,
            f1_1,
            macro_f1: (f1_0 + f1_1) / 2.0,
        }
    }
}

/// Unweighted mean of the class-0 and class-1 F1 scores. Undefined
/// precision, recall or F1 count as zero.
pub fn macro_f1(matrix: &ConfusionMatrix) -> f64 {
    EvalReport::from_matrix(*matrix).macro_f1
}

fn capped(ids: BTreeSet<&str>) -> Vec<String> {
    ids.into_iter().take(COVERAGE_LISTING_CAP).map(str::to_owned).collect()
}

/// Matches predictions to gold labels by pair id.
pub fn confusion(predictions: &[Prediction], gold: &[PairRecord]) -> Result<ConfusionMatrix> {
    let mut gold_labels: HashMap<&str, u8> = HashMap::with_capacity(gold.len());
    for pair in gold {
        let label = pair.label.ok_or_else(|| Error::Unlabeled {
            pair_id: pair.pair_id.clone(),
        })?;
        if gold_labels.insert(&pair.pair_id, label).is_some() {
            return Err(Error::DuplicatePair {
                pair_id: pair.pair_id.clone(),
            });
        }
    }

    let mut seen: HashMap<&str, u8> = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if seen.insert(&p.pair_id, p.label).is_some() {
            return Err(Error::DuplicatePair {
                pair_id: p.pair_id.clone(),
            });
        }
    }

    let only_predictions: BTreeSet<&str> = seen.keys().filter(|id| !gold_labels.contains_key(*id)).copied().collect();
    let only_gold: BTreeSet<&str> = gold_labels.keys().filter(|id| !seen.contains_key(*id)).copied().collect();
    if !only_predictions.is_empty() || !only_gold.is_empty() {
        return Err(Error::Coverage {
            total: only_predictions.len() + only_gold.len(),
            only_predictions: capped(only_predictions),
            only_gold: capped(only_gold),
        });
    }

    Ok(ConfusionMatrix::from_labels(
        predictions.iter().map(|p| (p.label, gold_labels[p.pair_id.as_str()])),
    ))
}

pub fn evaluate(predictions: &[Prediction], gold: &[PairRecord]) -> Result<EvalReport> {
    confusion(predictions, gold).map(EvalReport::from_matrix)
}

/// Writes `id,label` then one row per prediction, LF terminated.
pub fn emit_submission<W: Write>(predictions: &[Prediction], mut sink: W) -> Result<()> {
    let mut out = String::with_capacity(16 * (predictions.len() + 1));
    out.push_str("id,label\n");
    for p in predictions {
        check_id(&p.pair_id)?;
        out.push_str(&p.pair_id);
        out.push(',');
        out.push(if p.label == 1 { '1' } else { '0' });
        out.push('\n');
    }
    sink.write_all(out.as_bytes())?;
    sink.flush()?;
    Ok(())
}

fn check_id(id: &str) -> Result<()> {
    if id.contains([',', '"', '\n', '\r']) {
        return Err(Error::Config(format!("pair id {id:?} cannot be written unquoted")));
    }
    Ok(())
}

/// Writes `id,label,probability`. Probabilities use the shortest decimal
/// that round-trips.
pub fn write_predictions<W: Write>(predictions: &[Prediction], mut sink: W) -> Result<()> {
    writeln!(sink, "{}", PREDICTIONS_HEADER.join(","))?;
    for p in predictions {
        check_id(&p.pair_id)?;
        writeln!(sink, "{},{},{:?}", p.pair_id, p.label, p.probability)?;
    }
    sink.flush()?;
    Ok(())
}

/// Reads a predictions file or a submission file. Submission rows get the
/// label as their probability.
pub fn read_predictions<R: Read>(input: R) -> Result<Vec<Prediction>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();
    let header = records
        .next()
        .transpose()?
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: "missing header row".into(),
        })?;
    let header: Vec<&str> = header.iter().collect();
    let with_probability = if header == PREDICTIONS_HEADER {
        true
    } else if header == SUBMISSION_HEADER {
        false
    } else {
        return Err(Error::Parse {
            line: 1,
            message: format!("unrecognized predictions header {:?}", header.join(",")),
        });
    };
    let width = header.len();

    let mut out = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} columns, found {}", record.len()),
            });
        }
        let label = match &record[1] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::LabelDomain {
                    line,
                    value: other.to_owned(),
                })
            }
        };
        let probability = if with_probability {
            let p: f64 = record[2].parse().map_err(|_| Error::Parse {
                line,
                message: format!("probability {:?} is not a number", &record[2]),
            })?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Parse {
                    line,
                    message: format!("probability {p} outside [0, 1]"),
                });
            }
            p
        } else {
            f64::from(label)
        };
        out.push(Prediction {
            pair_id: record[0].to_owned(),
            probability,
            label,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gold(labels: &[u8]) -> Vec<PairRecord> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &l)| PairRecord {
                pair_id: format!("p{i}"),
                id1: 0,
                id2: 1,
                label: Some(l),
            })
            .collect()
    }

    fn preds(labels: &[u8]) -> Vec<Prediction> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &l)| Prediction {
                pair_id: format!("p{i}"),
                probability: f64::from(l),
                label: l,
            })
            .collect()
    }

    #[test]
    fn all_correct() {
        let m = confusion(&preds(&[0, 1, 1, 0]), &gold(&[0, 1, 1, 0])).unwrap();
        assert_eq!((m.fp, m.fn_), (0, 0));
        assert_eq!(macro_f1(&m), 1.0);
    }

    #[test]
    fn one_flipped_positive() {
        let m = confusion(&preds(&[0, 0, 1]), &gold(&[0, 1, 1])).unwrap();
        assert_eq!(m.fn_, 1);
        assert_eq!(m.total(), 3);
    }

    #[test]
    fn disjoint_ids() {
        let mut p = preds(&[1]);
        p[0].pair_id = "other".into();
        match confusion(&p, &gold(&[1])) {
            Err(Error::Coverage {
                only_predictions,
                only_gold,
                total,
            }) => {
                assert_eq!(only_predictions, ["other"]);
                assert_eq!(only_gold, ["p0"]);
                assert_eq!(total, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn coverage_listing_is_capped() {
        let p = preds(&[1; 30]);
        match confusion(&p, &[]) {
            Err(Error::Coverage {
                only_predictions,
                total,
                ..
            }) => {
                assert_eq!(only_predictions.len(), COVERAGE_LISTING_CAP);
                assert_eq!(total, 30);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_prediction_id() {
        let mut p = preds(&[1, 0]);
        p[1].pair_id = "p0".into();
        assert!(matches!(
            confusion(&p, &gold(&[1, 0])),
            Err(Error::DuplicatePair { .. })
        ));
    }

    #[test]
    fn all_zero_predictions() {
        let m = confusion(&preds(&[0, 0, 0, 0]), &gold(&[0, 0, 0, 1])).unwrap();
        let r = EvalReport::from_matrix(m);
        assert_eq!(r.precision_0, 0.75);
        assert_eq!(r.recall_0, 1.0);
        assert!((r.f1_0 - 6.0 / 7.0).abs() < 1e-15);
        assert_eq!(r.f1_1, 0.0);
        assert!((r.macro_f1 - 3.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn empty_matrix() {
        let r = EvalReport::from_matrix(ConfusionMatrix::default());
        assert_eq!((r.f1_0, r.f1_1, r.macro_f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn submission_format() {
        let mut out = Vec::new();
        emit_submission(&preds(&[1]), &mut out).unwrap();
        assert_eq!(out, b"id,label\np0,1\n");
        let mut out = Vec::new();
        emit_submission(&[], &mut out).unwrap();
        assert_eq!(out, b"id,label\n");
    }

    #[test]
    fn predictions_round_trip() {
        let p = vec![
            Prediction::new("a", 0.123456789, 0.5),
            Prediction::new("b", 0.5, 0.5),
            Prediction::new("c", 1e-300, 0.5),
        ];
        let mut out = Vec::new();
        write_predictions(&p, &mut out).unwrap();
        assert_eq!(read_predictions(&out[..]).unwrap(), p);
    }

    #[test]
    fn submission_readable_as_predictions() {
        let got = read_predictions("id,label\nx,1\ny,0\n".as_bytes()).unwrap();
        assert_eq!(got, vec![Prediction::new("x", 1.0, 0.5), Prediction::new("y", 0.0, 0.5)]);
        assert!(read_predictions("id,label\nx,2\n".as_bytes()).is_err());
    }

    #[test]
    fn failing_sink_propagates() {
        struct Broken;
        impl Write for Broken {
            fn write(&mut self, _: &[u8]) -> std::io::Result<usize> {
                Err(std::io::Error::other("disk full"))
            }
            fn flush(&mut self) -> std::io::Result<()> {
                Ok(())
            }
        }
        assert!(matches!(emit_submission(&preds(&[1]), Broken), Err(Error::Io(_))));
    }
}
