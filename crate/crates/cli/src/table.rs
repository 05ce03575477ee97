//! Aligned text tables of report rows.

use std::fmt::Write;

use crate::report::ReportRow;

const COLUMNS: [&str; 12] = [
    "experiment", "target", "x", "k", "q", "s", "analytic", "mc", "mc_se", "abs_diff", "tolerance", "status",
];

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"))
}

fn cells(row: &ReportRow) -> [String; 12] {
    [
        row.experiment.clone(),
        row.target.clone(),
        row.x.to_string(),
        row.k.to_string(),
        row.q.to_string(),
        row.s.to_string(),
        num(row.analytic),
        num(row.mc),
        num(row.mc_se),
        num(row.abs_diff),
        num(row.tolerance),
        row.status.marker().to_string(),
    ]
}

/// Renders `rows` with a header line; every column is padded to its widest cell.
pub fn render(rows: &[ReportRow]) -> String {
    let body: Vec<[String; 12]> = rows.iter().map(cells).collect();
    let mut width = COLUMNS.map(str::len);
    for r in &body {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells.zip(&width).map(|(c, w)| format!("{c:<w$}")).collect();
        writeln!(out, "{}", parts.join("  ").trim_end()).unwrap();
    };
    line(&mut COLUMNS.iter().copied());
    for r in &body {
        line(&mut r.iter().map(String::as_str));
    }
    out
}
