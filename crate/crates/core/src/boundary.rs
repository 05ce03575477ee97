//! Drawdown boundaries `f` with `f(m) < m`, and the gap `m - f(m)`.

use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::validation::{ValidationReport, Violation};

/// Anything usable as a drawdown boundary by the exit-parameter families.
pub trait Boundary: Debug + Send + Sync {
    /// `f(m)`.
    fn level(&self, m: f64) -> Result<f64>;

    /// `m - f(m)`, which must be positive. Implementations may override this
    /// to avoid cancellation.
    fn gap(&self, m: f64) -> Result<f64> {
        Ok(m - self.level(m)?)
    }
}

/// The boundary families accepted in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DrawdownBoundary {
    /// `f(m) = 0`: ruin below zero.
    Ruin,
    /// `f(m) = m - d`.
    Classic { d: f64 },
    /// `f(m) = xi m`.
    Proportional { xi: f64 },
    /// `f(m) = xi m - d`.
    Affine { xi: f64, d: f64 },
    /// Piecewise-linear through `(levels[i], values[i])`; undefined outside the grid.
    Tabulated { levels: Vec<f64>, values: Vec<f64> },
}

impl DrawdownBoundary {
    pub fn affine(xi: f64, d: f64) -> Self {
        DrawdownBoundary::Affine { xi, d }
    }

    pub fn classic(d: f64) -> Self {
        DrawdownBoundary::Classic { d }
    }

    pub fn tabulated(points: &[(f64, f64)]) -> Self {
        DrawdownBoundary::Tabulated {
            levels: points.iter().map(|p| p.0).collect(),
            values: points.iter().map(|p| p.1).collect(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            DrawdownBoundary::Ruin => "ruin".to_string(),
            DrawdownBoundary::Classic { d } => format!("classic(d={d})"),
            DrawdownBoundary::Proportional { xi } => format!("proportional(xi={xi})"),
            DrawdownBoundary::Affine { xi, d } => format!("affine(xi={xi};d={d})"),
            DrawdownBoundary::Tabulated { levels, .. } => format!("tabulated(n={})", levels.len()),
        }
    }

    /// `(slope, offset)` of the gap `m - f(m)` when it is affine in `m`.
    fn affine_gap(&self) -> Option<(f64, f64)> {
        match *self {
            DrawdownBoundary::Ruin => Some((1.0, 0.0)),
            DrawdownBoundary::Classic { d } => Some((0.0, d)),
            DrawdownBoundary::Proportional { xi } => Some((1.0 - xi, 0.0)),
            DrawdownBoundary::Affine { xi, d } => Some((1.0 - xi, d)),
            DrawdownBoundary::Tabulated { .. } => None,
        }
    }

    fn raw_level(&self, m: f64) -> Result<f64> {
        Ok(match *self {
            DrawdownBoundary::Ruin => 0.0,
            DrawdownBoundary::Classic { d } => m - d,
            DrawdownBoundary::Proportional { xi } => xi * m,
            DrawdownBoundary::Affine { xi, d } => xi * m - d,
            DrawdownBoundary::Tabulated {
                ref levels,
                ref values,
            } => interpolate(levels, values, m)?,
        })
    }

    fn raw_gap(&self, m: f64) -> Result<f64> {
        match self.affine_gap() {
            Some((slope, offset)) => Ok(slope * m + offset),
            None => Ok(m - self.raw_level(m)?),
        }
    }

    /// Checks every constraint on `[lo, hi]` and lists each violation with a
    /// witnessing level.
    pub fn validate(&self, domain: (f64, f64)) -> ValidationReport {
        validate_boundary(self, domain)
    }
}

fn interpolate(levels: &[f64], values: &[f64], m: f64) -> Result<f64> {
    if levels.is_empty() || levels.len() != values.len() {
        return Err(Error::Domain {
            level: m,
            reason: "tabulated boundary needs matching, non-empty levels and values".into(),
        });
    }
    let first = levels[0];
    let last = *levels.last().unwrap();
    if !(m >= first && m <= last) {
        return Err(Error::Domain {
            level: m,
            reason: format!("outside tabulated range [{first}, {last}]"),
        });
    }
    if levels.len() == 1 {
        return Ok(values[0]);
    }
    let i = match levels.partition_point(|&l| l <= m) {
        0 => 0,
        k if k >= levels.len() => levels.len() - 2,
        k => k - 1,
    };
    let (m0, m1) = (levels[i], levels[i + 1]);
    let w = (m - m0) / (m1 - m0);
    Ok(values[i] + w * (values[i + 1] - values[i]))
}

impl Boundary for DrawdownBoundary {
    fn level(&self, m: f64) -> Result<f64> {
        let (level, _) = boundary_eval(self, m)?;
        Ok(level)
    }

    fn gap(&self, m: f64) -> Result<f64> {
        let (_, gap) = boundary_eval(self, m)?;
        Ok(gap)
    }
}

/// Returns `(f(m), m - f(m))`, failing when the gap is not positive.
pub fn boundary_eval(f: &DrawdownBoundary, m: f64) -> Result<(f64, f64)> {
    let level = f.raw_level(m)?;
    let gap = f.raw_gap(m)?;
    if !(gap > 0.0) {
        return Err(Error::Domain {
            level: m,
            reason: format!("{} has non-positive gap {gap} here", f.describe()),
        });
    }
    Ok((level, gap))
}

pub fn validate_boundary(f: &DrawdownBoundary, domain: (f64, f64)) -> ValidationReport {
    let (lo, hi) = domain;
    let mut report = ValidationReport::default();
    if !(lo < hi) {
        report.violations.push(Violation::new("domain", lo, format!("empty interval [{lo}, {hi}]")));
        return report;
    }
    match *f {
        DrawdownBoundary::Tabulated {
            ref levels,
            ref values,
        } => validate_tabulated(levels, values, domain, &mut report),
        _ => {
            let (slope, _) = f.affine_gap().expect("closed-form variant");
            let level_slope = 1.0 - slope;
            if level_slope < 0.0 {
                report.violations.push(Violation::new(
                    "nondecreasing",
                    lo,
                    format!("slope {level_slope} of f is negative"),
                ));
            }
            // The gap is affine, so its minimum over the interval sits at an endpoint.
            for m in [lo, hi] {
                let gap = f.raw_gap(m).unwrap_or(f64::NAN);
                if !(gap > 0.0) {
                    report.violations.push(Violation::new(
                        "below-diagonal",
                        m,
                        format!("f(m) = {} is not below m", m - gap),
                    ));
                }
            }
        }
    }
    report
}

fn validate_tabulated(levels: &[f64], values: &[f64], (lo, hi): (f64, f64), report: &mut ValidationReport) {
    if levels.is_empty() || levels.len() != values.len() {
        report.violations.push(Violation::new(
            "grid",
            lo,
            format!("{} levels vs {} values", levels.len(), values.len()),
        ));
        return;
    }
    if let Some(w) = levels.windows(2).find(|w| !(w[1] > w[0])) {
        report
            .violations
            .push(Violation::new("grid", w[1], "levels must be strictly increasing"));
    }
    if let Some(i) = (1..values.len()).find(|&i| values[i] < values[i - 1]) {
        report.violations.push(Violation::new(
            "nondecreasing",
            levels[i],
            format!("f drops from {} to {}", values[i - 1], values[i]),
        ));
    }
    if let Some(i) = (0..values.len()).find(|&i| !(values[i] < levels[i])) {
        report.violations.push(Violation::new(
            "below-diagonal",
            levels[i],
            format!("f(m) = {} is not below m", values[i]),
        ));
    }
    if lo < levels[0] || hi > *levels.last().unwrap() {
        report.violations.push(Violation::new(
            "coverage",
            if lo < levels[0] { lo } else { hi },
            format!("domain [{lo}, {hi}] exceeds tabulated range"),
        ));
    }
}
