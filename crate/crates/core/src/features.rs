//! Frame attributes to fixed-length vectors: deltas, 18 statistical
//! functionals per stream, and fusion with externally computed features.
//!
//! Layout of an RQA vector (432 values): for each of the 12 measures, then
//! for each of their 12 deltas, the 18 functionals in [`FUNCTIONAL_NAMES`]
//! order. Column names are `rqa.<measure>.<functional>` and
//! `rqa.<measure>.delta.<functional>`.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rqa::RqaVector;

pub const NUM_FUNCTIONALS: usize = 18;
pub const NUM_STREAMS: usize = 2 * RqaVector::LEN;
pub const RQA_FEATURE_LEN: usize = NUM_STREAMS * NUM_FUNCTIONALS;
/// Width of the conventional external feature set the fusion expects.
pub const EXTERNAL_FEATURE_LEN: usize = 1582;

pub const FUNCTIONAL_NAMES: [&str; NUM_FUNCTIONALS] = [
    "min", "max", "mean", "median", "var", "skew", "kurt", "range", "p1", "p5", "p25", "p50",
    "p75", "p95", "p99", "iqr", "qr_low", "qr_high",
];

/// Metadata columns leading every feature row.
pub const META_COLUMNS: [&str; 5] = [
    "utterance_id",
    "segment_index",
    "speaker_id",
    "session_id",
    "label",
];

/// Per-frame measure rows in frame order.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameAttributeSequence {
    rows: Vec<[f64; RqaVector::LEN]>,
}

impl FrameAttributeSequence {
    pub fn new(rows: Vec<[f64; RqaVector::LEN]>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("attribute sequence has no frames".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("attribute sequence has non-finite values".into()));
        }
        Ok(FrameAttributeSequence { rows })
    }

    pub fn from_rqa(vectors: &[RqaVector]) -> Result<Self> {
        Self::new(vectors.iter().map(RqaVector::to_array).collect())
    }

    pub fn rows(&self) -> &[[f64; RqaVector::LEN]] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[k]).collect()
    }
}

/// First differences with a zero first row.
pub fn deltas(seq: &FrameAttributeSequence) -> FrameAttributeSequence {
    let mut rows = Vec::with_capacity(seq.len());
    rows.push([0.0; RqaVector::LEN]);
    for w in seq.rows.windows(2) {
        let mut d = [0.0; RqaVector::LEN];
        for k in 0..RqaVector::LEN {
            d[k] = w[1][k] - w[0][k];
        }
        rows.push(d);
    }
    FrameAttributeSequence { rows }
}

/// Linear interpolation between order statistics (inclusive method).
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// The 18 functionals of one stream, in [`FUNCTIONAL_NAMES`] order.
///
/// Variance is the population variance; kurtosis is excess kurtosis; skewness
/// and kurtosis are 0 for a constant stream.
pub fn functionals(stream: &[f64]) -> Result<[f64; NUM_FUNCTIONALS]> {
    if stream.is_empty() {
        return Err(Error::EmptyInput("functionals need at least one value".into()));
    }
    let mut sorted = stream.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let min = sorted[0];
    let max = sorted[sorted.len() - 1];

    let (mean, var, skew, kurt) = if min == max {
        (min, 0.0, 0.0, 0.0)
    } else {
        let mean = stream.iter().sum::<f64>() / n;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for &x in stream {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        m2 /= n;
        m3 /= n;
        m4 /= n;
        if m2 > 0.0 {
            (mean, m2, m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
        } else {
            (mean, 0.0, 0.0, 0.0)
        }
    };

    let p = |q: f64| percentile(&sorted, q);
    let (p25, p50, p75) = (p(25.0), p(50.0), p(75.0));
    Ok([
        min,
        max,
        mean,
        p50,
        var,
        skew,
        kurt,
        max - min,
        p(1.0),
        p(5.0),
        p25,
        p50,
        p75,
        p(95.0),
        p(99.0),
        p75 - p25,
        p50 - p25,
        p75 - p50,
    ])
}

/// Canonical names of the 432 RQA feature columns.
pub fn rqa_feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(RQA_FEATURE_LEN);
    for delta in [false, true] {
        for attr in RqaVector::NAMES {
            for f in FUNCTIONAL_NAMES {
                names.push(if delta {
                    format!("rqa.{attr}.delta.{f}")
                } else {
                    format!("rqa.{attr}.{f}")
                });
            }
        }
    }
    names
}

/// Row identity and labels carried with every feature vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub utterance_id: String,
    pub segment_index: Option<usize>,
    pub speaker_id: String,
    pub session_id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    #[serde(flatten)]
    pub meta: FeatureMeta,
    pub values: Vec<f64>,
}

/// The 432-value vector of a frame sequence.
pub fn aggregate(seq: &FrameAttributeSequence, meta: FeatureMeta) -> Result<FeatureVector> {
    let d = deltas(seq);
    let mut values = Vec::with_capacity(RQA_FEATURE_LEN);
    for source in [seq, &d] {
        for k in 0..RqaVector::LEN {
            values.extend_from_slice(&functionals(&source.column(k))?);
        }
    }
    debug_assert_eq!(values.len(), RQA_FEATURE_LEN);
    Ok(FeatureVector { meta, values })
}

/// `[external || rqa]`; widths other than [`EXTERNAL_FEATURE_LEN`] are accepted with a warning.
pub fn fuse(rqa: &FeatureVector, external: &[f64]) -> FeatureVector {
    if external.len() != EXTERNAL_FEATURE_LEN {
        log::warn!(
            "external feature width is {}, expected {EXTERNAL_FEATURE_LEN}; fused width will be {}",
            external.len(),
            external.len() + rqa.values.len()
        );
    }
    let mut values = Vec::with_capacity(external.len() + rqa.values.len());
    values.extend_from_slice(external);
    values.extend_from_slice(&rqa.values);
    FeatureVector {
        meta: rqa.meta.clone(),
        values,
    }
}

/// Named feature rows, as read from or written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Vec<FeatureVector>,
}

impl FeatureTable {
    pub fn width(&self) -> usize {
        self.names.len()
    }
}

/// External features keyed by utterance id and optional segment index.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalFeatures {
    pub names: Vec<String>,
    rows: HashMap<(String, Option<usize>), Vec<f64>>,
}

impl ExternalFeatures {
    pub fn get(&self, utterance_id: &str, segment_index: Option<usize>) -> Option<&[f64]> {
        self.rows
            .get(&(utterance_id.to_string(), segment_index))
            .map(Vec::as_slice)
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    pub fn from_reader(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr.headers().map_err(|e| Error::parse("external feature header", e))?.clone();
        if header.get(0) != Some("utterance_id") {
            return Err(Error::parse(
                "external feature header",
                "first column must be utterance_id",
            ));
        }
        let seg_col = header.get(1) == Some("segment_index");
        let skip = if seg_col { 2 } else { 1 };
        let names: Vec<String> = header.iter().skip(skip).map(str::to_string).collect();
        let mut rows = HashMap::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::parse("external feature row", e))?;
            let id = rec.get(0).unwrap_or_default().to_string();
            let seg = if seg_col {
                parse_segment_index(rec.get(1).unwrap_or_default())?
            } else {
                None
            };
            let values = rec
                .iter()
                .skip(skip)
                .map(|v| parse_value(v, line + 2))
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != names.len() {
                return Err(Error::parse(
                    "external feature row",
                    format!("line {} has {} values, header has {}", line + 2, values.len(), names.len()),
                ));
            }
            rows.insert((id, seg), values);
        }
        Ok(ExternalFeatures { names, rows })
    }
}

fn parse_value(v: &str, line: usize) -> Result<f64> {
    let x: f64 = v
        .trim()
        .parse()
        .map_err(|_| Error::parse("feature value", format!("'{v}' on line {line}")))?;
    if !x.is_finite() {
        return Err(Error::parse("feature value", format!("non-finite '{v}' on line {line}")));
    }
    Ok(x)
}

fn parse_segment_index(v: &str) -> Result<Option<usize>> {
    if v.trim().is_empty() {
        return Ok(None);
    }
    v.trim()
        .parse()
        .map(Some)
        .map_err(|_| Error::parse("segment_index", v))
}

/// Prepends the matching external row to every RQA row.
///
/// Rows with a segment index fall back to the utterance-level external row
/// when no segment-level row exists. Any row left unmatched is a join error.
pub fn fuse_table(rqa: &FeatureTable, external: &ExternalFeatures) -> Result<FeatureTable> {
    let mut missing = BTreeSet::new();
    let mut rows = Vec::with_capacity(rqa.rows.len());
    for row in &rqa.rows {
        let id = &row.meta.utterance_id;
        let ext = external
            .get(id, row.meta.segment_index)
            .or_else(|| external.get(id, None));
        match ext {
            Some(e) => rows.push(fuse(row, e)),
            None => {
                missing.insert(match row.meta.segment_index {
                    Some(s) => format!("{id}#{s}"),
                    None => id.clone(),
                });
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Join {
            missing: missing.into_iter().collect(),
        });
    }
    if external.width() != EXTERNAL_FEATURE_LEN {
        log::warn!(
            "external feature width is {}, expected {EXTERNAL_FEATURE_LEN}",
            external.width()
        );
    }
    let mut names = external.names.clone();
    names.extend(rqa.names.iter().cloned());
    Ok(FeatureTable { names, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" => Ok(OutputFormat::Jsonl),
            other => Err(Error::Config(format!("unknown output format '{other}'"))),
        }
    }
}

fn fmt_value(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_table(table: &FeatureTable, format: OutputFormat, out: impl Write) -> Result<()> {
    let io = |e: std::io::Error| Error::io("<feature output>", e);
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let header = META_COLUMNS
                .iter()
                .map(|s| s.to_string())
                .chain(table.names.iter().cloned());
            w.write_record(header).map_err(|e| Error::parse("csv output", e))?;
            for row in &table.rows {
                let m = &row.meta;
                let meta = [
                    m.utterance_id.clone(),
                    m.segment_index.map(|s| s.to_string()).unwrap_or_default(),
                    m.speaker_id.clone(),
                    m.session_id.clone(),
                    m.label.clone(),
                ];
                let rec = meta.into_iter().chain(row.values.iter().map(|&v| fmt_value(v)));
                w.write_record(rec).map_err(|e| Error::parse("csv output", e))?;
            }
            w.flush().map_err(io)
        }
        OutputFormat::Jsonl => {
            let mut out = std::io::BufWriter::new(out);
            for row in &table.rows {
                serde_json::to_writer(&mut out, row).map_err(|e| Error::parse("jsonl output", e))?;
                out.write_all(b"\n").map_err(io)?;
            }
            out.flush().map_err(io)
        }
    }
}

/// Reads a feature CSV written by [`write_table`].
pub fn read_table_csv(path: impl AsRef<Path>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_table_csv_from(file)
}

pub fn read_table_csv_from(reader: impl std::io::Read) -> Result<FeatureTable> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::parse("feature header", e))?.clone();
    if header.iter().take(META_COLUMNS.len()).ne(META_COLUMNS.iter().copied()) {
        return Err(Error::parse(
            "feature header",
            format!("expected leading columns {}", META_COLUMNS.join(",")),
        ));
    }
    let names: Vec<String> = header.iter().skip(META_COLUMNS.len()).map(str::to_string).collect();
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse("feature row", e))?;
        let get = |i: usize| rec.get(i).unwrap_or_default().to_string();
        let meta = FeatureMeta {
            utterance_id: get(0),
            segment_index: parse_segment_index(&get(1))?,
            speaker_id: get(2),
            session_id: get(3),
            label: get(4),
        };
        let values = rec
            .iter()
            .skip(META_COLUMNS.len())
            .map(|v| parse_value(v, line + 2))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != names.len() {
            return Err(Error::parse("feature row", format!("line {} width mismatch", line + 2)));
        }
        rows.push(FeatureVector { meta, values });
    }
    Ok(FeatureTable { names, rows })
}

/// Reads JSONL feature rows; names are the canonical RQA names when the width matches.
pub fn read_table_jsonl(reader: impl BufRead) -> Result<Vec<FeatureVector>> {
    reader
        .lines()
        .filter(|l| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true))
        .map(|l| {
            let l = l.map_err(|e| Error::io("<jsonl input>", e))?;
            serde_json::from_str(&l).map_err(|e| Error::parse("jsonl row", e))
        })
        .collect()
}
