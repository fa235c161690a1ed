//! Long-format CSV rows, per-parameter summaries and file output.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::{Error, Result};

pub const HEADER: &str = "study,trial,seed,param,metric,value";
pub const SUMMARY_HEADER: &str = "study,param,metric,n,mean,std,rms,excluded";

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    /// A failed trial, recorded by error code.
    Failed(&'static str),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(v) => write!(f, "{v}"),
            Value::Failed(code) => f.write_str(code),
        }
    }
}

/// One `study,trial,seed,param,metric,value` line. A failed trial is a single
/// row with metric `error` and the error code as its value.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub study: &'static str,
    pub trial: usize,
    pub seed: u64,
    pub param: String,
    pub metric: String,
    pub value: Value,
}

impl fmt::Display for Row {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{}",
            self.study, self.trial, self.seed, self.param, self.metric, self.value
        )
    }
}

/// Result of one trial: named metrics or the error that stopped it.
pub type TrialResult = std::result::Result<Vec<(&'static str, f64)>, corrmatch_core::Error>;

/// Rows for one trial.
pub fn trial_rows(
    study: &'static str,
    trial: usize,
    seed: u64,
    param: &str,
    result: TrialResult,
) -> Vec<Row> {
    let row = |metric: &str, value| Row {
        study,
        trial,
        seed,
        param: param.to_string(),
        metric: metric.to_string(),
        value,
    };
    match result {
        Ok(metrics) => metrics
            .into_iter()
            .map(|(m, v)| row(m, Value::Number(v)))
            .collect(),
        Err(e) => vec![row("error", Value::Failed(e.code()))],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub param: String,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for fewer than two values.
    pub std: f64,
    /// Failed trials at this parameter, left out of the statistics.
    pub excluded: usize,
}

impl SummaryRow {
    /// Root mean square recovered from mean and sample deviation.
    pub fn rms(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        let n = self.n as f64;
        let var = if self.n > 1 {
            self.std * self.std * (n - 1.0) / n
        } else {
            0.0
        };
        (var + self.mean * self.mean).sqrt()
    }
}

/// Groups numeric rows by `(param, metric)` in order of first appearance.
pub fn summarize(rows: &[Row]) -> Vec<SummaryRow> {
    let mut groups: Vec<(String, String, Vec<f64>)> = Vec::new();
    let mut failures: Vec<(String, usize)> = Vec::new();
    for r in rows {
        match r.value {
            Value::Number(v) => match groups
                .iter_mut()
                .find(|(p, m, _)| *p == r.param && *m == r.metric)
            {
                Some(g) => g.2.push(v),
                None => groups.push((r.param.clone(), r.metric.clone(), vec![v])),
            },
            Value::Failed(_) => match failures.iter_mut().find(|(p, _)| *p == r.param) {
                Some(f) => f.1 += 1,
                None => failures.push((r.param.clone(), 1)),
            },
        }
    }
    let excluded = |param: &str| failures.iter().find(|(p, _)| p == param).map_or(0, |f| f.1);
    let mut out: Vec<SummaryRow> = groups
        .into_iter()
        .map(|(param, metric, values)| {
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                excluded: excluded(&param),
                param,
                metric,
                n,
                mean,
                std,
            }
        })
        .collect();
    // Parameters where every trial failed still report their exclusions.
    for (param, count) in &failures {
        if !out.iter().any(|s| s.param == *param) {
            out.push(SummaryRow {
                param: param.clone(),
                metric: "error".into(),
                n: 0,
                mean: f64::NAN,
                std: f64::NAN,
                excluded: *count,
            });
        }
    }
    out
}

/// Rows and summary of one study run.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutput {
    pub study: &'static str,
    /// Extra `# key: value` lines describing conventions.
    pub notes: Vec<(String, String)>,
    pub rows: Vec<Row>,
    pub summary: Vec<SummaryRow>,
}

impl StudyOutput {
    pub fn new(study: &'static str, rows: Vec<Row>) -> Self {
        let summary = summarize(&rows);
        Self {
            study,
            notes: Vec::new(),
            rows,
            summary,
        }
    }

    pub fn with_note(mut self, key: &str, value: impl Into<String>) -> Self {
        self.notes.push((key.to_string(), value.into()));
        self
    }

    pub fn summary_for(&self, param: &str, metric: &str) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.param == param && s.metric == metric)
    }

    fn metadata(&self, config: &ExperimentConfig) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# corrmatch {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "# study: {}", self.study);
        for (k, v) in config.entries() {
            let _ = writeln!(out, "# {k} = {v}");
        }
        for (k, v) in &self.notes {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out
    }

    /// Metadata block, header and data rows.
    pub fn to_csv(&self, config: &ExperimentConfig) -> String {
        let mut out = self.metadata(config);
        out.push_str(HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{r}");
        }
        out
    }

    pub fn summary_csv(&self, config: &ExperimentConfig) -> String {
        let mut out = self.metadata(config);
        out.push_str(SUMMARY_HEADER);
        out.push('\n');
        for s in &self.summary {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.study,
                s.param,
                s.metric,
                s.n,
                s.mean,
                s.std,
                s.rms(),
                s.excluded
            );
        }
        out
    }

    /// Writes `<study>.csv` and `<study>_summary.csv` into `dir`.
    pub fn write(&self, config: &ExperimentConfig, dir: &Path) -> Result<[PathBuf; 2]> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let data = dir.join(format!("{}.csv", self.study));
        let summary = dir.join(format!("{}_summary.csv", self.study));
        fs::write(&data, self.to_csv(config)).map_err(|e| Error::io(&data, e))?;
        fs::write(&summary, self.summary_csv(config)).map_err(|e| Error::io(&summary, e))?;
        Ok([data, summary])
    }
}

/// Data lines of a CSV file: everything after the metadata block and header.
pub fn data_lines(csv: &str) -> Vec<&str> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .collect()
}
