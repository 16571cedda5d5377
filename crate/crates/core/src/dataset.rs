//! Readers and writers for the competition files, the pair/node join and label
//! statistics.
//!
//! * nodes: tab-separated `id<TAB>text`, no quoting; an optional `id<TAB>text`
//!   header line is skipped.
//! * pairs: comma-separated with header `id,id1,id2,label` (labeled) or
//!   `id,id1,id2` (unlabeled).
//!
//! Both readers accept LF and CRLF line endings and stream one record at a
//! time. Writers always emit LF.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};

pub const LABELED_HEADER: [&str; 4] = ["id", "id1", "id2", "label"];
pub const UNLABELED_HEADER: [&str; 3] = ["id", "id1", "id2"];
const NODES_HEADER: &str = "id\ttext";

pub type NodeId = u64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeRecord {
    pub id: NodeId,
    pub text: String,
}

/// A candidate edge `(id1, id2)`. `label` is `None` for test pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRecord {
    pub pair_id: String,
    pub id1: NodeId,
    pub id2: NodeId,
    pub label: Option<u8>,
}

fn strip_eol(line: &mut Vec<u8>) {
    if line.last() == Some(&b'\n') {
        line.pop();
        if line.last() == Some(&b'\r') {
            line.pop();
        }
    }
}

/// Streaming reader over a nodes TSV. Duplicate ids are detected as records
/// are yielded.
pub struct NodeReader<R> {
    input: R,
    line: u64,
    seen: HashSet<NodeId>,
    missing_text: u64,
    buf: Vec<u8>,
    failed: bool,
}

impl<R: BufRead> NodeReader<R> {
    pub fn new(input: R) -> Self {
        NodeReader {
            input,
            line: 0,
            seen: HashSet::new(),
            missing_text: 0,
            buf: Vec::new(),
            failed: false,
        }
    }

    /// Records that had no text column and were given empty text.
    pub fn missing_text_count(&self) -> u64 {
        self.missing_text
    }

    fn read_record(&mut self) -> Result<Option<NodeRecord>> {
        loop {
            self.buf.clear();
            if self.input.read_until(b'\n', &mut self.buf)? == 0 {
                return Ok(None);
            }
            self.line += 1;
            strip_eol(&mut self.buf);
            let line = self.line;
            let text = std::str::from_utf8(&self.buf)
                .map_err(|e| Error::parse(line, format!("invalid UTF-8: {e}")))?;
            if line == 1 && text == NODES_HEADER {
                continue;
            }
            let mut fields = text.split('\t');
            let id_field = fields.next().unwrap_or_default();
            let body = fields.next();
            if fields.next().is_some() {
                return Err(Error::parse(line, "expected 2 tab-separated fields, found more"));
            }
            let id: NodeId = id_field
                .parse()
                .map_err(|_| Error::parse(line, format!("node id {id_field:?} is not an unsigned integer")))?;
            if !self.seen.insert(id) {
                return Err(Error::DuplicateNode { id, line });
            }
            let text = match body {
                Some(t) => t.to_owned(),
                None => {
                    self.missing_text += 1;
                    String::new()
                }
            };
            return Ok(Some(NodeRecord { id, text }));
        }
    }
}

impl<R: BufRead> Iterator for NodeReader<R> {
    type Item = Result<NodeRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let item = self.read_record().transpose();
        if matches!(item, Some(Err(_))) {
            self.failed = true;
        }
        item
    }
}

pub fn parse_nodes<R: BufRead>(input: R) -> NodeReader<R> {
    NodeReader::new(input)
}

pub fn write_nodes<'a, W, I>(mut out: W, nodes: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a NodeRecord>,
{
    for node in nodes {
        if node.text.contains(['\t', '\n']) {
            return Err(Error::Config(format!(
                "node {} text contains a tab or newline and cannot be written as TSV",
                node.id
            )));
        }
        writeln!(out, "{}\t{}", node.id, node.text)?;
    }
    out.flush()?;
    Ok(())
}

/// Node texts keyed by id, in file order. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct NodeTable {
    records: Vec<NodeRecord>,
    index: HashMap<NodeId, usize>,
}

impl NodeTable {
    pub fn from_records<I>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = Result<NodeRecord>>,
    {
        let mut table = NodeTable::default();
        for (i, record) in records.into_iter().enumerate() {
            let record = record?;
            if table.index.insert(record.id, table.records.len()).is_some() {
                return Err(Error::DuplicateNode {
                    id: record.id,
                    line: i as u64 + 1,
                });
            }
            table.records.push(record);
        }
        Ok(table)
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        Self::from_records(parse_nodes(input))
    }

    pub fn get(&self, id: NodeId) -> Option<&NodeRecord> {
        self.index.get(&id).map(|&i| &self.records[i])
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, NodeRecord> {
        self.records.iter()
    }

    /// Applies `f` to every text, keeping ids and order.
    pub fn map_texts<F: Fn(&str) -> String>(&self, f: F) -> NodeTable {
        NodeTable {
            records: self
                .records
                .iter()
                .map(|r| NodeRecord {
                    id: r.id,
                    text: f(&r.text),
                })
                .collect(),
            index: self.index.clone(),
        }
    }

    pub fn into_records(self) -> Vec<NodeRecord> {
        self.records
    }
}

/// Streaming reader over a pairs CSV.
pub struct PairReader<R> {
    records: csv::StringRecordsIntoIter<R>,
    labeled: bool,
    failed: bool,
}

fn csv_reader<R: std::io::Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input)
}

fn header_matches(record: &csv::StringRecord, expected: &[&str]) -> bool {
    record.len() == expected.len() && record.iter().zip(expected).all(|(a, b)| a == *b)
}

impl<R: std::io::Read> PairReader<R> {
    /// Reads the header and checks it against the expected layout.
    pub fn new(input: R, labeled: bool) -> Result<Self> {
        let mut records = csv_reader(input).into_records();
        let header = records
            .next()
            .transpose()?
            .ok_or_else(|| Error::parse(1, "missing header row"))?;
        let expected: &[&str] = if labeled { &LABELED_HEADER } else { &UNLABELED_HEADER };
        if !header_matches(&header, expected) {
            return Err(Error::parse(
                1,
                format!("expected header {:?}, found {:?}", expected.join(","), header.iter().collect::<Vec<_>>().join(",")),
            ));
        }
        Ok(PairReader {
            records,
            labeled,
            failed: false,
        })
    }

    /// Accepts either header and reports which one it found.
    pub fn detect(input: R) -> Result<Self> {
        let mut records = csv_reader(input).into_records();
        let header = records
            .next()
            .transpose()?
            .ok_or_else(|| Error::parse(1, "missing header row"))?;
        let labeled = if header_matches(&header, &LABELED_HEADER) {
            true
        } else if header_matches(&header, &UNLABELED_HEADER) {
            false
        } else {
            return Err(Error::parse(
                1,
                format!("unrecognized pairs header {:?}", header.iter().collect::<Vec<_>>().join(",")),
            ));
        };
        Ok(PairReader {
            records,
            labeled,
            failed: false,
        })
    }

    pub fn is_labeled(&self) -> bool {
        self.labeled
    }

    fn convert(&self, record: csv::StringRecord) -> Result<PairRecord> {
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let width = if self.labeled { 4 } else { 3 };
        if record.len() != width {
            return Err(Error::parse(
                line,
                format!("expected {width} columns, found {}", record.len()),
            ));
        }
        let node = |i: usize| -> Result<NodeId> {
            record[i]
                .parse()
                .map_err(|_| Error::parse(line, format!("node id {:?} is not an unsigned integer", &record[i])))
        };
        let label = if self.labeled {
            Some(match &record[3] {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::LabelDomain {
                        line,
                        value: other.to_owned(),
                    })
                }
            })
        } else {
            None
        };
        Ok(PairRecord {
            pair_id: record[0].to_owned(),
            id1: node(1)?,
            id2: node(2)?,
            label,
        })
    }
}

impl<R: std::io::Read> Iterator for PairReader<R> {
    type Item = Result<PairRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let item = self
            .records
            .next()
            .map(|r| r.map_err(Error::from).and_then(|r| self.convert(r)));
        if matches!(item, Some(Err(_))) {
            self.failed = true;
        }
        item
    }
}

pub fn parse_pairs<R: std::io::Read>(input: R, labeled: bool) -> Result<PairReader<R>> {
    PairReader::new(input, labeled)
}

/// Writes pairs with the labeled header when `labeled`, otherwise the
/// unlabeled header (labels are then omitted).
pub fn write_pairs<'a, W, I>(out: W, pairs: I, labeled: bool) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a PairRecord>,
{
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    if labeled {
        writer.write_record(LABELED_HEADER)?;
    } else {
        writer.write_record(UNLABELED_HEADER)?;
    }
    for pair in pairs {
        let id1 = pair.id1.to_string();
        let id2 = pair.id2.to_string();
        if labeled {
            let label = pair.label.ok_or_else(|| Error::Unlabeled {
                pair_id: pair.pair_id.clone(),
            })?;
            writer.write_record([pair.pair_id.as_str(), &id1, &id2, &label.to_string()])?;
        } else {
            writer.write_record([pair.pair_id.as_str(), &id1, &id2])?;
        }
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JoinMode {
    #[default]
    Strict,
    /// Pairs naming an unknown node are dropped and counted.
    Lenient,
}

/// A pair with its two node texts: `premise` from `id1`, `hypothesis` from
/// `id2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinedPair<'a> {
    pub pair: PairRecord,
    pub premise: &'a NodeRecord,
    pub hypothesis: &'a NodeRecord,
}

#[derive(Debug, Default)]
pub struct Joined<'a> {
    pub pairs: Vec<JoinedPair<'a>>,
    pub skipped: usize,
}

pub fn join_pairs<'a, I>(pairs: I, nodes: &'a NodeTable, mode: JoinMode) -> Result<Joined<'a>>
where
    I: IntoIterator<Item = PairRecord>,
{
    let mut joined = Joined::default();
    for pair in pairs {
        let resolved = (nodes.get(pair.id1).ok_or(pair.id1), nodes.get(pair.id2).ok_or(pair.id2));
        match resolved {
            (Ok(premise), Ok(hypothesis)) => joined.pairs.push(JoinedPair {
                pair,
                premise,
                hypothesis,
            }),
            (Err(missing), _) | (_, Err(missing)) => match mode {
                JoinMode::Strict => {
                    return Err(Error::MissingNode {
                        pair_id: pair.pair_id,
                        node_id: missing,
                    })
                }
                JoinMode::Lenient => joined.skipped += 1,
            },
        }
    }
    Ok(joined)
}

/// Label counts with percentages rounded to two decimals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LabelStats {
    pub count_0: u64,
    pub count_1: u64,
    pub pct_0: f64,
    pub pct_1: f64,
}

impl LabelStats {
    pub fn total(&self) -> u64 {
        self.count_0 + self.count_1
    }

    /// Counts only; percentages are derived.
    pub fn from_counts(count_0: u64, count_1: u64) -> Self {
        let total = count_0 + count_1;
        let pct = |n: u64| {
            if total == 0 {
                0.0
            } else {
                round2(n as f64 * 100.0 / total as f64)
            }
        };
        LabelStats {
            count_0,
            count_1,
            pct_0: pct(count_0),
            pct_1: pct(count_1),
        }
    }
}

/// Rounds half away from zero at the second decimal.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

pub fn label_stats<'a, I>(pairs: I) -> Result<LabelStats>
where
    I: IntoIterator<Item = &'a PairRecord>,
{
    let (mut zeros, mut ones) = (0u64, 0u64);
    for pair in pairs {
        match pair.label {
            Some(0) => zeros += 1,
            Some(_) => ones += 1,
            None => {
                return Err(Error::Unlabeled {
                    pair_id: pair.pair_id.clone(),
                })
            }
        }
    }
    Ok(LabelStats::from_counts(zeros, ones))
}

/// Streaming variant that never holds more than one record.
pub fn label_stats_streaming<I>(pairs: I) -> Result<LabelStats>
where
    I: IntoIterator<Item = Result<PairRecord>>,
{
    let (mut zeros, mut ones) = (0u64, 0u64);
    for pair in pairs {
        let pair = pair?;
        match pair.label {
            Some(0) => zeros += 1,
            Some(_) => ones += 1,
            None => return Err(Error::Unlabeled { pair_id: pair.pair_id }),
        }
    }
    Ok(LabelStats::from_counts(zeros, ones))
}
