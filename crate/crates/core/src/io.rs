//! Delimited data files, JSON configs, and table/curve output.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::SpectralPath;
use crate::harness::PowerTable;
use crate::sample::{equidistant, Comparison, LowerSet, TimedObservation};

/// Column selected by 0-based position or by header name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for Column {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(s.parse().map(Column::Index).unwrap_or_else(|_| Column::Name(s.to_owned())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowFilter {
    /// Keep rows whose component sum exceeds the threshold.
    Total { threshold: f64 },
    /// Keep rows where every component exceeds the threshold.
    AllComponents { threshold: f64 },
}

impl RowFilter {
    pub fn keeps(&self, x: &[f64]) -> bool {
        match *self {
            RowFilter::Total { threshold } => x.iter().sum::<f64>() > threshold,
            RowFilter::AllComponents { threshold } => x.iter().all(|&v| v > threshold),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub path: PathBuf,
    /// Value columns; empty means every column except the time column.
    pub columns: Vec<Column>,
    /// Only used to order the rows; times are then equidistant.
    pub time_column: Option<Column>,
    pub filters: Vec<RowFilter>,
    pub delimiter: u8,
    pub has_header: bool,
}

impl DatasetSpec {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            columns: Vec::new(),
            time_column: None,
            filters: Vec::new(),
            delimiter: b',',
            has_header: true,
        }
    }
}

fn resolve(column: &Column, headers: Option<&csv::StringRecord>) -> Result<usize> {
    match column {
        Column::Index(i) => Ok(*i),
        Column::Name(name) => headers
            .and_then(|h| h.iter().position(|x| x.trim() == name))
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("no column named `{name}`"),
            }),
    }
}

fn parse_field(record: &csv::StringRecord, col: usize, line: u64) -> Result<f64> {
    let raw = record.get(col).ok_or_else(|| Error::Parse {
        line,
        message: format!("missing column {col} (row has {} fields)", record.len()),
    })?;
    raw.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("column {col}: `{raw}` is not a number"),
    })
}

/// Reads, orders and filters a dataset from any reader.
pub fn read_dataset_from<R: Read>(reader: R, spec: &DatasetSpec) -> Result<Vec<TimedObservation>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter)
        .has_headers(spec.has_header)
        .flexible(true)
        .from_reader(reader);
    let headers = if spec.has_header {
        Some(rdr.headers()?.clone())
    } else {
        None
    };
    let time = spec
        .time_column
        .as_ref()
        .map(|c| resolve(c, headers.as_ref()))
        .transpose()?;
    let explicit = spec
        .columns
        .iter()
        .map(|c| resolve(c, headers.as_ref()))
        .collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut columns = explicit;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if columns.is_empty() {
            columns = (0..record.len()).filter(|&c| Some(c) != time).collect();
        }
        let x = columns
            .iter()
            .map(|&c| parse_field(&record, c, line))
            .collect::<Result<Vec<_>>>()?;
        let t = time.map(|c| parse_field(&record, c, line)).transpose()?.unwrap_or(0.0);
        rows.push((t, x));
    }
    if columns.len() < 2 && !rows.is_empty() {
        return Err(Error::DimensionTooSmall(columns.len()));
    }
    if time.is_some() {
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let kept: Vec<Vec<f64>> = rows
        .into_iter()
        .map(|(_, x)| x)
        .filter(|x| spec.filters.iter().all(|f| f.keeps(x)))
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(equidistant(kept))
}

pub fn read_dataset(spec: &DatasetSpec) -> Result<Vec<TimedObservation>> {
    read_dataset_from(std::fs::File::open(&spec.path)?, spec)
}

/// Comma-separated, header `x1,…,xd`, shortest round-trip float formatting.
pub fn write_dataset<W: Write>(writer: W, sample: &[TimedObservation]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let d = sample.first().map_or(0, |o| o.x.len());
    wtr.write_record((1..=d).map(|j| format!("x{j}")))?;
    for obs in sample {
        wtr.write_record(obs.x.iter().map(|v| format!("{v}")))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Parses a JSON document, reporting the path of the offending field.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    parse_json(&std::fs::read_to_string(path)?)
}

pub fn write_json<W: Write, T: Serialize>(mut writer: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, value)?;
    writeln!(writer)?;
    Ok(())
}

/// One row per (scenario, b, k, test, size).
pub fn write_power_csv<W: Write>(writer: W, table: &PowerTable) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for row in &table.rows {
        wtr.serialize(row)?;
    }
    if table.rows.is_empty() {
        wtr.write_record([
            "scenario", "parameter", "b", "k", "test", "size", "rejections", "replications",
            "frequency", "mc_se", "seed",
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Power against the model parameter, one curve per (scenario, b, k, test,
/// size), points ordered by parameter.
pub fn write_power_curves<W: Write>(writer: W, table: &PowerTable) -> Result<()> {
    let mut rows: Vec<_> = table.rows.iter().filter(|r| r.parameter.is_some()).collect();
    rows.sort_by(|a, b| {
        (&a.scenario, a.b, a.k, a.test)
            .cmp(&(&b.scenario, b.b, b.k, b.test))
            .then(a.size.total_cmp(&b.size))
            .then(a.parameter.unwrap().total_cmp(&b.parameter.unwrap()))
    });
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["scenario", "b", "k", "test", "size", "parameter", "frequency", "mc_se"])?;
    for r in rows {
        wtr.write_record([
            r.scenario.clone(),
            r.b.to_string(),
            r.k.to_string(),
            match r.test {
                crate::harness::TestKind::Ks => "ks".into(),
                crate::harness::TestKind::Cm => "cm".into(),
            },
            r.size.to_string(),
            r.parameter.unwrap().to_string(),
            r.frequency.to_string(),
            r.mc_se.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// The cdf `y ↦ ÎS({θ₁ ≤ y})` of the spectral measure integrated over
/// blocks `first..=last` (1-based), normalized to total mass one. Returned
/// as the step points `(y, F(y))` at every atom plus `0` and `1`.
pub fn integrated_cdf(path: &SpectralPath, first: usize, last: usize) -> Result<Vec<(f64, f64)>> {
    let blocks = path.estimates().len();
    if path.dimension() != 2 {
        return Err(Error::InvalidParameter(
            "integrated cdf curves need bivariate data".into(),
        ));
    }
    if first == 0 || first > last || last > blocks {
        return Err(Error::InvalidParameter(format!(
            "block range {first}..={last} outside 1..={blocks}"
        )));
    }
    let range = first - 1..last;
    let mut ys: Vec<f64> = path
        .estimates()[range.clone()]
        .iter()
        .flat_map(|e| e.angles().map(|a| a[0]))
        .chain([0.0, 1.0])
        .filter(|y| *y <= 1.0)
        .collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let total: f64 = range.clone().map(|j| path.weight(j)).sum();
    Ok(ys
        .into_iter()
        .map(|y| {
            let set = LowerSet {
                corner: vec![y],
                mode: Comparison::Closed,
            };
            let mass: f64 = range
                .clone()
                .map(|j| path.weight(j) * path.estimates()[j].measure(&set))
                .sum();
            (y, mass / total)
        })
        .collect())
}

pub fn write_curve<W: Write>(writer: W, points: &[(f64, f64)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["x", "y"])?;
    for (x, y) in points {
        wtr.write_record([x.to_string(), y.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
