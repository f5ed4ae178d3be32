//! Per-step records, the summary block, and their JSONL/CSV encodings.

use std::io::Write;

use serde::Serialize;

use super::config::Format;
use crate::error::LaxError;
use crate::matcore::C64;

/// One row of output.
pub trait Record: Serialize {
    fn csv_header(&self) -> Vec<String>;
    fn csv_fields(&self) -> Vec<String>;
}

#[derive(Debug, Clone, Serialize)]
pub struct Metric {
    pub name: &'static str,
    pub value: f64,
    pub bound: f64,
    /// `true` when the value must exceed the bound instead.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub at_least: bool,
}

impl Metric {
    pub fn below(name: &'static str, value: f64, bound: f64) -> Self {
        Self {
            name,
            value,
            bound,
            at_least: false,
        }
    }

    pub fn above(name: &'static str, value: f64, bound: f64) -> Self {
        Self {
            name,
            value,
            bound,
            at_least: true,
        }
    }

    pub fn ok(&self) -> bool {
        if self.at_least {
            self.value > self.bound
        } else {
            self.value <= self.bound
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub summary: bool,
    pub mode: &'static str,
    pub records: usize,
    pub tol: f64,
    pub metrics: Vec<Metric>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct Report<R> {
    pub mode: &'static str,
    pub tol: f64,
    pub records: Vec<R>,
    pub metrics: Vec<Metric>,
    pub failure: Option<LaxError>,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_RESIDUAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

impl<R: Record> Report<R> {
    pub fn new(mode: &'static str, tol: f64) -> Self {
        Self {
            mode,
            tol,
            records: Vec::new(),
            metrics: Vec::new(),
            failure: None,
        }
    }

    pub fn summary(&self) -> Summary {
        Summary {
            summary: true,
            mode: self.mode,
            records: self.records.len(),
            tol: self.tol,
            metrics: self.metrics.clone(),
            pass: self.failure.is_none() && self.metrics.iter().all(Metric::ok),
            error: self.failure.as_ref().map(|e| e.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.failure.is_some() {
            EXIT_DEGENERATE
        } else if self.metrics.iter().all(Metric::ok) {
            EXIT_OK
        } else {
            EXIT_RESIDUAL
        }
    }

    /// Writes all records. JSONL output ends with the summary line; CSV
    /// output carries records only and the summary goes to `summary_out`.
    pub fn write(
        &self,
        format: Format,
        out: &mut dyn Write,
        summary_out: &mut dyn Write,
    ) -> std::io::Result<()> {
        let summary = serde_json::to_string(&self.summary()).map_err(std::io::Error::other)?;
        match format {
            Format::Jsonl => {
                for r in &self.records {
                    serde_json::to_writer(&mut *out, r).map_err(std::io::Error::other)?;
                    out.write_all(b"\n")?;
                }
                writeln!(out, "{summary}")?;
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(&mut *out);
                if let Some(first) = self.records.first() {
                    w.write_record(first.csv_header())?;
                }
                for r in &self.records {
                    w.write_record(r.csv_fields())?;
                }
                w.flush()?;
                writeln!(summary_out, "{summary}")?;
            }
        }
        out.flush()
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Header names `{prefix}{i}_re`, `{prefix}{i}_im`.
pub fn complex_header(prefix: &str, n: usize) -> Vec<String> {
    (0..n)
        .flat_map(|i| [format!("{prefix}{i}_re"), format!("{prefix}{i}_im")])
        .collect()
}

pub fn complex_fields<'a>(values: impl IntoIterator<Item = &'a C64>) -> Vec<String> {
    values
        .into_iter()
        .flat_map(|z| [fmt_f64(z.re), fmt_f64(z.im)])
        .collect()
}
