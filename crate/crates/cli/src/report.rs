//! Report rows and their CSV/JSON encodings.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

/// Bumped whenever the column set changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// No MC comparison was made; the analytic value stands alone.
    Analytic,
    /// The analytic evaluation failed; see `note`.
    Error,
}

impl Status {
    pub fn failed(self) -> bool {
        matches!(self, Status::Fail | Status::Error)
    }

    pub fn marker(self) -> &'static str {
        match self {
            Status::Pass => "ok",
            Status::Fail => "FAIL",
            Status::Analytic => "-",
            Status::Error => "ERROR",
        }
    }
}

/// One (experiment, query point, target) result. Column order is the CSV
/// column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub schema_version: u32,
    pub experiment: String,
    pub model: String,
    pub boundary: String,
    pub tax: String,
    pub target: String,
    pub q: f64,
    pub s: f64,
    pub x: f64,
    pub k: f64,
    pub analytic: Option<f64>,
    pub analytic_err: Option<f64>,
    pub mc: Option<f64>,
    pub mc_se: Option<f64>,
    pub mc_n: Option<usize>,
    pub mc_dt: Option<f64>,
    pub seed: Option<u64>,
    pub abs_diff: Option<f64>,
    pub rel_diff: Option<f64>,
    pub tolerance: Option<f64>,
    pub status: Status,
    pub note: String,
}

impl ReportRow {
    /// Fills the comparison columns. Passes iff `|analytic - mc| <= max(3 SE, allowance)`.
    pub fn compare(&mut self, allowance: f64) {
        let (Some(a), Some(m), Some(se)) = (self.analytic, self.mc, self.mc_se) else {
            return;
        };
        let diff = (a - m).abs();
        let tol = (3.0 * se).max(allowance);
        self.abs_diff = Some(diff);
        self.rel_diff = Some(if a != 0.0 { diff / a.abs() } else { diff });
        self.tolerance = Some(tol);
        self.status = if diff <= tol { Status::Pass } else { Status::Fail };
    }
}

pub fn write_csv<W: Write>(rows: &[ReportRow], out: W) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub const HEADER: [&str; 22] = [
    "schema_version",
    "experiment",
    "model",
    "boundary",
    "tax",
    "target",
    "q",
    "s",
    "x",
    "k",
    "analytic",
    "analytic_err",
    "mc",
    "mc_se",
    "mc_n",
    "mc_dt",
    "seed",
    "abs_diff",
    "rel_diff",
    "tolerance",
    "status",
    "note",
];

pub fn read_csv<R: Read>(input: R) -> anyhow::Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if !header.is_empty() && header.iter().ne(HEADER.iter().copied()) {
        anyhow::bail!("unexpected report header: {}", header.iter().collect::<Vec<_>>().join(","));
    }
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        let row: ReportRow = rec?;
        if row.schema_version != SCHEMA_VERSION {
            anyhow::bail!("report schema version {} (this build reads {SCHEMA_VERSION})", row.schema_version);
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_json<W: Write>(rows: &[ReportRow], mut out: W) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut out, rows)?;
    writeln!(out)?;
    Ok(())
}
