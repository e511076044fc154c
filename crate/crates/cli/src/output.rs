//! Report envelopes: pretty JSON with a `meta` header, or CSV with `#` header lines.

use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::ValueEnum;
use serde_json::{json, Value};

use dispbound::convexity::PdScanReport;
use dispbound::dispfun::{FunctionFamily, FunctionTag};
use dispbound::hyperbolic::TrialRecord;
use dispbound::minimax::MinimaxResult;
use dispbound::relations::RelationCensus;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

pub struct Report {
    pub result: Value,
    pub csv: String,
    /// One human-readable line, written to standard error.
    pub summary: Option<String>,
    pub failed: bool,
}

impl Report {
    pub fn new(result: Value) -> Self {
        Report {
            result,
            csv: String::new(),
            summary: None,
            failed: false,
        }
    }
}

pub fn meta(subcommand: &str, config: Value, seed: Option<u64>, threads: Option<usize>) -> Value {
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    json!({
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": subcommand,
        "config": config,
        "seed": seed,
        "threads": threads,
        "timestamp": timestamp,
    })
}

fn csv_header(meta: &Value) -> String {
    let mut out = String::new();
    for key in ["version", "subcommand", "config", "seed", "threads", "timestamp"] {
        out.push_str(&format!("# {key}: {}\n", meta[key]));
    }
    out
}

pub fn emit(report: &Report, meta: &Value, format: Format, path: Option<&Path>) -> anyhow::Result<()> {
    let body = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&json!({ "meta": meta, "result": report.result }))?;
            s.push('\n');
            s
        }
        Format::Csv => csv_header(meta) + &report.csv,
    };
    match path {
        Some(p) => std::fs::write(p, body)?,
        None => std::io::stdout().lock().write_all(body.as_bytes())?,
    }
    if let Some(s) = &report.summary {
        eprintln!("{s}");
    }
    Ok(())
}

pub fn write_csv(path: &Path, csv: &str) -> std::io::Result<()> {
    std::fs::write(path, csv)
}

fn to_csv<R: IntoIterator<Item = Vec<String>>>(header: &[&str], rows: R) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 fields")
}

fn join(indices: &[usize]) -> String {
    indices.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

pub fn relations_csv(c: &RelationCensus) -> String {
    to_csv(
        &["gamma", "s", "j", "S"],
        c.relations
            .iter()
            .map(|r| vec![r.gamma.to_string(), r.s.to_string(), r.product_length.to_string(), join(&r.s_set)]),
    )
}

pub fn family_csv(fam: &FunctionFamily) -> String {
    to_csv(
        &["position", "family", "product_length", "gamma", "target", "numerator"],
        fam.functions().iter().enumerate().map(|(i, f)| {
            let (family, j) = match f.tag() {
                FunctionTag::F => ("f", 0),
                FunctionTag::G { product_length } => ("g", product_length),
            };
            let ranges: Vec<String> = f
                .numerator_ranges()
                .iter()
                .map(|&(lo, hi)| if lo == hi { lo.to_string() } else { format!("{lo}-{hi}") })
                .collect();
            vec![
                (i + 1).to_string(),
                family.into(),
                j.to_string(),
                f.gamma().into(),
                f.target().to_string(),
                ranges.join(";"),
            ]
        }),
    )
}

pub fn point_csv(x: &[f64]) -> String {
    to_csv(&["i", "x_i"], x.iter().enumerate().map(|(i, v)| vec![(i + 1).to_string(), format!("{v:e}")]))
}

pub fn restarts_csv(r: &MinimaxResult) -> String {
    to_csv(
        &["id", "start", "alpha", "iterations", "converged", "max_deviation_from_uniform"],
        r.per_restart.iter().map(|s| {
            vec![
                s.id.to_string(),
                s.start.clone(),
                format!("{:.12}", s.alpha),
                s.iterations.to_string(),
                s.converged.to_string(),
                format!("{:e}", s.max_deviation_from_uniform),
            ]
        }),
    )
}

pub fn scans_csv(scans: &[&PdScanReport]) -> String {
    to_csv(
        &["region", "samples", "positive_definite", "not_positive_definite", "indeterminate", "min_margin"],
        scans.iter().map(|s| {
            vec![
                serde_json::to_value(s.region).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                s.samples.to_string(),
                s.positive_definite.to_string(),
                s.not_positive_definite.to_string(),
                s.indeterminate.to_string(),
                format!("{:e}", s.min_margin),
            ]
        }),
    )
}

pub fn margins_csv(trials: &[TrialRecord]) -> String {
    to_csv(
        &["seed", "z0", "D", "bound", "margin", "argmax_word"],
        trials.iter().map(|t| {
            let r = &t.report;
            vec![
                t.seed.to_string(),
                r.z0.to_string(),
                format!("{:.12}", r.displacement),
                format!("{:.12}", r.bound),
                format!("{:.12}", r.margin),
                r.argmax_word.clone(),
            ]
        }),
    )
}
