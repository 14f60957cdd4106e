//! Matrix CSV, JSON reports and tabular exports.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::simbench::{CurvePoint, ReplicateRecord, SummaryRow, SurfaceRow};
use crate::spectral::RealMatrix;

/// Shortest format that still carries 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads a header-less numeric CSV into a row-major matrix.
pub fn parse_matrix_csv(path: &Path) -> Result<RealMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_str(&text, path)
}

/// Parses CSV text; `origin` only labels error messages.
pub fn parse_matrix_str(text: &str, origin: &Path) -> Result<RealMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut cols = None;
    let mut rows = 0;
    let mut data = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(origin, line, e.to_string())
        })?;
        let line = record.position().map_or(rows + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(parse_error(
                    origin,
                    line,
                    format!("expected {c} fields, found {}", record.len()),
                ))
            }
            Some(_) => {}
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_error(origin, line, format!("column {}: '{cell}' is not a number", j + 1)))?;
            if !v.is_finite() {
                return Err(parse_error(origin, line, format!("column {}: non-finite value '{cell}'", j + 1)));
            }
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| parse_error(origin, 1, "empty matrix file"))?;
    RealMatrix::new(rows, cols, data)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, mut w: BufWriter<fs::File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Computation(format!("{}: {other:?}", path.display())),
    }
}

pub fn write_matrix_csv(path: &Path, m: &RealMatrix) -> Result<()> {
    let mut w = create(path)?;
    for i in 0..m.rows() {
        let line = m.row(i).iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(",");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    finish(path, w)
}

/// Where the noise level in a report came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum SigmaSource {
    #[serde(rename = "given")]
    Given,
    #[serde(rename = "estimated")]
    Estimated,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl SigmaSource {
    pub fn as_str(self) -> &'static str {
        match self {
            SigmaSource::Given => "given",
            SigmaSource::Estimated => "estimated",
            SigmaSource::NotApplicable => "n/a",
        }
    }
}

/// Summary of one `denoise` run.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct DenoiseReport {
    pub n_rows: usize,
    pub n_cols: usize,
    pub method: String,
    pub selection: String,
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
    pub rank: Option<usize>,
    pub sigma: Option<f64>,
    pub sigma_source: SigmaSource,
    pub centered: bool,
    pub criterion: Option<f64>,
    pub estimated_rank: usize,
    pub singular_values: Vec<f64>,
    pub shrunk_singular_values: Vec<f64>,
    pub output: String,
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn json_num(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => fmt_f64(x),
        _ => "null".to_string(),
    }
}

fn json_vec(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|&v| json_num(Some(v))).collect();
    format!("[{}]", items.join(", "))
}

impl DenoiseReport {
    /// JSON text with keys in declaration order.
    pub fn to_json(&self) -> String {
        let fields = [
            ("n_rows", self.n_rows.to_string()),
            ("n_cols", self.n_cols.to_string()),
            ("method", json_str(&self.method)),
            ("selection", json_str(&self.selection)),
            ("tau", json_num(self.tau)),
            ("gamma", json_num(self.gamma)),
            ("rank", self.rank.map_or("null".into(), |r| r.to_string())),
            ("sigma", json_num(self.sigma)),
            ("sigma_source", json_str(self.sigma_source.as_str())),
            ("centered", self.centered.to_string()),
            ("criterion", json_num(self.criterion)),
            ("estimated_rank", self.estimated_rank.to_string()),
            ("singular_values", json_vec(&self.singular_values)),
            ("shrunk_singular_values", json_vec(&self.shrunk_singular_values)),
            ("output", json_str(&self.output)),
        ];
        let mut out = String::from("{\n");
        for (k, (key, value)) in fields.iter().enumerate() {
            let sep = if k + 1 < fields.len() { "," } else { "" };
            let _ = writeln!(out, "  \"{key}\": {value}{sep}");
        }
        out.push_str("}\n");
        out
    }
}

pub fn write_report(report: &DenoiseReport, path: &Path) -> Result<()> {
    fs::write(path, report.to_json()).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<DenoiseReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_error(path, e.line(), e.to_string()))
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let header = ["estimator", "R", "SNR", "mean_mse", "sd_mse", "mean_rank", "sd_rank"];
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([
            r.estimator.name().to_string(),
            r.true_rank.to_string(),
            r.snr.to_string(),
            fmt_f64(r.mean_mse),
            fmt_f64(r.sd_mse),
            fmt_f64(r.mean_rank),
            fmt_f64(r.sd_rank),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// One row per replicate and estimator; failures keep their message.
pub fn write_records_csv(path: &Path, records: &[ReplicateRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "estimator",
        "R",
        "SNR",
        "noise",
        "replicate",
        "relative_mse",
        "estimated_rank",
        "tau",
        "gamma",
        "wall_time_s",
        "error",
    ])
    .map_err(|e| csv_error(path, e))?;
    for r in records {
        let (mse, rank, tau, gamma, err) = match &r.outcome {
            Ok(f) => (fmt_f64(f.relative_mse), f.estimated_rank.to_string(), opt(f.tau), opt(f.gamma), String::new()),
            Err(msg) => (String::new(), String::new(), String::new(), String::new(), msg.clone()),
        };
        w.write_record([
            r.estimator.name().to_string(),
            r.true_rank.to_string(),
            r.snr.to_string(),
            r.noise.to_string(),
            r.replicate.to_string(),
            mse,
            rank,
            tau,
            gamma,
            format!("{:.6}", r.wall_time.as_secs_f64()),
            err,
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_surface_csv(path: &Path, rows: &[SurfaceRow]) -> Result<()> {
    let with_loss = rows.iter().any(|r| r.loss.is_some());
    let mut w = csv_writer(path)?;
    let mut header = vec!["tau", "gamma", "criterion"];
    if with_loss {
        header.push("loss");
    }
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        let mut rec = vec![fmt_f64(r.tau), fmt_f64(r.gamma), fmt_f64(r.criterion)];
        if with_loss {
            rec.push(opt(r.loss));
        }
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_curves_csv(path: &Path, points: &[CurvePoint]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["lambda", "spec", "d_hat"]).map_err(|e| csv_error(path, e))?;
    for p in points {
        w.write_record([fmt_f64(p.lambda), p.label.clone(), fmt_f64(p.d_hat)])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
