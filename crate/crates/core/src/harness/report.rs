use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::io::{format_float, to_json_string, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub n: usize,
    pub trials: usize,
    pub max_ratio: Option<f64>,
    pub min_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
    /// Experiment-specific columns.
    pub extra: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub version: String,
    pub params: Value,
    pub input_hashes: BTreeMap<String, String>,
    pub per_trial: Vec<Value>,
    pub max_ratio: Option<f64>,
    pub min_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
    pub ladder: Vec<LadderRow>,
    pub flags: Vec<String>,
}

/// Wall-clock per rung, kept apart from the numeric payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub experiment: String,
    pub total_seconds: f64,
    pub rungs: Vec<RungTiming>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RungTiming {
    pub n: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(Error::Parameter(format!("unknown report format `{other}`"))),
        }
    }
}

/// Max, min and median of the finite entries.
pub fn summarize(ratios: &[f64]) -> (Option<f64>, Option<f64>, Option<f64>) {
    let mut v: Vec<f64> = ratios.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return (None, None, None);
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len();
    let median = if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    };
    (Some(v[k - 1]), Some(v[0]), Some(median))
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        to_json_string(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn row(&self, n: usize) -> Option<&LadderRow> {
        self.ladder.iter().find(|r| r.n == n)
    }

    pub fn to_csv(&self) -> Result<String> {
        let keys: BTreeSet<&String> = self.ladder.iter().flat_map(|r| r.extra.keys()).collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = ["n", "trials", "max_ratio", "min_ratio", "median_ratio"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(keys.iter().map(|k| k.to_string()));
        w.write_record(&header).map_err(csv_error)?;
        let cell = |x: Option<f64>| x.map(format_float).unwrap_or_default();
        for row in &self.ladder {
            let mut rec = vec![
                row.n.to_string(),
                row.trials.to_string(),
                cell(row.max_ratio),
                cell(row.min_ratio),
                cell(row.median_ratio),
            ];
            rec.extend(keys.iter().map(|k| cell(row.extra.get(*k).copied().flatten())));
            w.write_record(&rec).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Writes `<base>.json` and/or `<base>.csv`, plus `<base>.timing.json` when
/// timing is given. Returns the written paths.
pub fn emit_report(
    report: &Report,
    timing: Option<&Timing>,
    base: &Path,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>> {
    if let Some(dir) = base.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let with_ext = |ext: &str| {
        let mut name = base.file_name().unwrap_or_default().to_os_string();
        name.push(ext);
        base.with_file_name(name)
    };
    let mut written = Vec::new();
    for format in formats {
        match format {
            ReportFormat::Json => {
                let path = with_ext(".json");
                write_json(&path, report)?;
                written.push(path);
            }
            ReportFormat::Csv => {
                let path = with_ext(".csv");
                std::fs::write(&path, report.to_csv()?)?;
                written.push(path);
            }
        }
    }
    if let Some(t) = timing {
        let path = with_ext(".timing.json");
        write_json(&path, t)?;
        written.push(path);
    }
    Ok(written)
}
