//! Reading and writing samples and class-labeled datasets as delimited text.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statistic::LabeledSample;

fn reader<R: Read>(input: R, delimiter: u8) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input)
}

fn parse_value(field: &str, line: usize, column: usize) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("field {} is not numeric: '{field}'", column + 1) })?;
    if !v.is_finite() {
        return Err(Error::Parse { line, msg: format!("field {} is not finite: '{field}'", column + 1) });
    }
    Ok(v)
}

fn record_line(rec: &csv::StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

/// Reads headerless comma-separated rows of numbers; the first `n` rows form
/// the first group. Lines starting with `#` are skipped.
pub fn read_sample<R: Read>(input: R, n: usize) -> Result<LabeledSample> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for rec in reader(input, b',').records() {
        let rec = rec?;
        let line = record_line(&rec);
        let row = rec.iter().enumerate().map(|(c, f)| parse_value(f, line, c)).collect::<Result<Vec<_>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse { line, msg: format!("expected {w} fields, found {}", row.len()) })
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 1, msg: "no data rows".into() });
    }
    if n >= rows.len() {
        return Err(Error::arg(format!("--n {n} leaves no rows for the second group ({} rows read)", rows.len())));
    }
    LabeledSample::from_rows(&rows, n)
}

pub fn read_sample_file(path: impl AsRef<Path>, n: usize) -> Result<LabeledSample> {
    read_sample(std::fs::File::open(path)?, n)
}

/// Writes one row per observation, first group first, without a header.
pub fn write_sample<W: Write>(sample: &LabeledSample, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for row in sample.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelimitedFormat {
    /// Comma-separated, class label in the first field.
    Csv,
    /// Tab-separated, class label in the first field (UCR archive layout).
    UcrTsv,
}

impl DelimitedFormat {
    fn delimiter(self) -> u8 {
        match self {
            DelimitedFormat::Csv => b',',
            DelimitedFormat::UcrTsv => b'\t',
        }
    }
}

impl fmt::Display for DelimitedFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DelimitedFormat::Csv => "csv",
            DelimitedFormat::UcrTsv => "ucr-tsv",
        })
    }
}

impl FromStr for DelimitedFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(DelimitedFormat::Csv),
            "ucr-tsv" | "tsv" | "ucr" => Ok(DelimitedFormat::UcrTsv),
            _ => Err(Error::arg(format!("unknown format '{s}' (expected csv or ucr-tsv)"))),
        }
    }
}

/// Class-labeled series of a common length, classes in order of first
/// appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct RealDataset {
    labels: Vec<String>,
    classes: Vec<Vec<Vec<f64>>>,
    p: usize,
}

impl RealDataset {
    pub fn new(labels: Vec<String>, classes: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if labels.len() != classes.len() || labels.is_empty() {
            return Err(Error::arg("need one label per class and at least one class"));
        }
        let p = classes[0].first().map_or(0, |r| r.len());
        if p == 0 {
            return Err(Error::Data("series have length zero".into()));
        }
        for (label, rows) in labels.iter().zip(&classes) {
            if rows.len() < 2 {
                return Err(Error::Data(format!("class '{label}' has {} row(s); need at least 2", rows.len())));
            }
            if rows.iter().any(|r| r.len() != p) {
                return Err(Error::Data(format!("class '{label}' has rows of length other than {p}")));
            }
        }
        Ok(RealDataset { labels, classes, p })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn class(&self, label: &str) -> Result<&[Vec<f64>]> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|k| self.classes[k].as_slice())
            .ok_or_else(|| Error::arg(format!("unknown class label '{label}' (known: {})", self.labels.join(", "))))
    }

    /// The two classes compared by default: the first two labels seen.
    pub fn default_pair(&self) -> Result<(&str, &str)> {
        match self.labels.as_slice() {
            [a, b, ..] => Ok((a, b)),
            _ => Err(Error::Data("dataset has a single class".into())),
        }
    }
}

pub fn parse_delimited<R: Read>(input: R, format: DelimitedFormat) -> Result<RealDataset> {
    let mut order: Vec<String> = Vec::new();
    let mut by_label: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    let mut width = None;
    for rec in reader(input, format.delimiter()).records() {
        let rec = rec?;
        let line = record_line(&rec);
        let mut fields = rec.iter();
        let label = fields.next().unwrap_or("");
        if label.is_empty() {
            return Err(Error::Parse { line, msg: "missing class label".into() });
        }
        // UCR files write integer labels as floats on occasion ("1.0000")
        let label = match label.parse::<f64>() {
            Ok(v) if v.fract() == 0.0 && v.abs() < 1e15 => format!("{}", v as i64),
            _ => label.to_string(),
        };
        let row = fields.enumerate().map(|(c, f)| parse_value(f, line, c + 1)).collect::<Result<Vec<_>>>()?;
        if row.is_empty() {
            return Err(Error::Parse { line, msg: "row has a label but no values".into() });
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse { line, msg: format!("ragged row: expected {w} values, found {}", row.len()) })
            }
            _ => {}
        }
        if !by_label.contains_key(&label) {
            order.push(label.clone());
        }
        by_label.entry(label).or_default().push(row);
    }
    if order.is_empty() {
        return Err(Error::Parse { line: 1, msg: "file contains no data rows".into() });
    }
    let classes = order.iter().map(|l| by_label.remove(l).unwrap_or_default()).collect();
    RealDataset::new(order, classes)
}

pub fn load_delimited(path: impl AsRef<Path>, format: DelimitedFormat) -> Result<RealDataset> {
    parse_delimited(std::fs::File::open(path)?, format)
}
