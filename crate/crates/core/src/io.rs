//! Dataset CSV input and the versioned JSON analysis report.
//!
//! Dataset CSV: a header row naming at least a group column and a response
//! column (default `group` and `response`), optionally a block column.
//! Groups are ordered numerically when every label is a number and
//! lexicographically otherwise; the control label, if given, moves to the
//! front, else the first label in that order is the control.

use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::closure::ClosureResult;
use crate::design::{Dataset, FitModel, ModelFit, Record};
use crate::error::{Error, Result};
use crate::marginal::{ElementaryMode, FDenominator, Sidedness};
use crate::simulation::round_significant;

/// Column names and control choice for [`read_dataset`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub group_column: String,
    pub response_column: String,
    pub block_column: Option<String>,
    pub control_label: Option<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            group_column: "group".into(),
            response_column: "response".into(),
            block_column: None,
            control_label: None,
        }
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::InvalidData(format!("missing column `{name}`")))
}

/// Parses a dataset from CSV text.
pub fn parse_dataset<R: Read>(input: R, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(|e| Error::InvalidData(e.to_string()))?.clone();
    let gcol = column(&headers, &schema.group_column)?;
    let ycol = column(&headers, &schema.response_column)?;
    let bcol = schema.block_column.as_deref().map(|b| column(&headers, b)).transpose()?;

    let mut raw = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::InvalidData(format!("line {line}: {e}")))?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let label = field(gcol).to_string();
        if label.is_empty() {
            return Err(Error::InvalidData(format!("line {line}: empty group")));
        }
        let y: f64 = field(ycol)
            .parse()
            .map_err(|_| Error::InvalidData(format!("line {line}: response `{}` is not a number", field(ycol))))?;
        if !y.is_finite() {
            return Err(Error::InvalidData(format!("line {line}: response is not finite")));
        }
        let block = match bcol {
            Some(c) if field(c).is_empty() => {
                return Err(Error::InvalidData(format!("line {line}: empty block level")));
            }
            Some(c) => Some(field(c).to_string()),
            None => None,
        };
        raw.push((label, y, block));
    }

    let distinct: BTreeSet<&str> = raw.iter().map(|(l, _, _)| l.as_str()).collect();
    let mut labels: Vec<String> = distinct.into_iter().map(str::to_string).collect();
    if labels.iter().all(|l| l.parse::<f64>().is_ok_and(f64::is_finite)) {
        labels.sort_by(|a, b| a.parse::<f64>().unwrap_or(0.0).total_cmp(&b.parse::<f64>().unwrap_or(0.0)));
    }
    if let Some(control) = &schema.control_label {
        let pos = labels
            .iter()
            .position(|l| l == control)
            .ok_or_else(|| Error::InvalidData(format!("control label `{control}` not found in column `{}`", schema.group_column)))?;
        let c = labels.remove(pos);
        labels.insert(0, c);
    }
    let records = raw
        .into_iter()
        .map(|(label, y, block)| {
            let g = labels.iter().position(|l| *l == label).unwrap_or(0);
            Record { group: g, response: y, block }
        })
        .collect();
    Dataset::with_labels(records, labels)
}

/// Reads a dataset CSV file.
pub fn read_dataset(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::InvalidData(format!("{}: {e}", path.display())))?;
    parse_dataset(file, schema)
}

pub const REPORT_SCHEMA: &str = "dunnett-ctp/analysis";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: FitModel,
    /// Group labels, control first.
    pub groups: Vec<String>,
    pub n: Vec<usize>,
    pub means: Vec<f64>,
    pub s2: f64,
    pub df: usize,
}

impl ModelSummary {
    pub fn from_fit(fit: &ModelFit) -> Self {
        Self {
            model: fit.model,
            groups: fit.labels().to_vec(),
            n: fit.n.clone(),
            means: fit.means.clone(),
            s2: fit.s2,
            df: fit.df,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSettings {
    pub alpha: f64,
    pub side: Sidedness,
    pub seed: u64,
    pub accuracy: f64,
    pub f_elementary: ElementaryMode,
    pub f_denominator: FDenominator,
}

/// The analysis report written by `analyze`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema: String,
    pub version: u32,
    pub model: ModelSummary,
    pub settings: ReportSettings,
    pub results: Vec<ClosureResult>,
}

impl AnalysisReport {
    pub fn new(fit: &ModelFit, settings: ReportSettings, results: Vec<ClosureResult>) -> Self {
        Self {
            schema: REPORT_SCHEMA.into(),
            version: REPORT_VERSION,
            model: ModelSummary::from_fit(fit),
            settings,
            results,
        }
    }

    /// JSON with keys in declaration order. Unless `full_precision`, every
    /// non-integer number is rounded to six significant digits.
    pub fn to_json(&self, full_precision: bool) -> Result<String> {
        let mut value = serde_json::to_value(self).map_err(|e| Error::Parse(e.to_string()))?;
        if !full_precision {
            round_json_numbers(&mut value);
        }
        let mut s = serde_json::to_string_pretty(&value).map_err(|e| Error::Parse(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// Parses a report, checking schema name and version.
    pub fn from_json(src: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(src).map_err(|e| Error::Parse(format!("report: {e}")))?;
        let schema = value.get("schema").and_then(Value::as_str).unwrap_or_default();
        let version = value.get("version").and_then(Value::as_u64).unwrap_or_default();
        if schema != REPORT_SCHEMA || version != u64::from(REPORT_VERSION) {
            return Err(Error::Parse(format!(
                "not a version {REPORT_VERSION} `{REPORT_SCHEMA}` report (found `{schema}` version {version})"
            )));
        }
        serde_json::from_value(value).map_err(|e| Error::Parse(format!("report: {e}")))
    }

    /// The report as it reads back after serialization, so trees drawn from
    /// it match trees drawn from the written file.
    pub fn reparsed(&self, full_precision: bool) -> Result<Self> {
        Self::from_json(&self.to_json(full_precision)?)
    }
}

/// Rounds every non-integer number in `v` to six significant digits.
pub fn round_json_numbers(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round_significant(x, 6)) {
                    *n = r;
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_json_numbers),
        Value::Object(o) => o.values_mut().for_each(round_json_numbers),
        _ => {}
    }
}
