//! Loss-carry-forward tax-rate schedules `gamma(m)` in `[0, 1)`.

use serde::{Deserialize, Serialize};

use crate::validation::{ValidationReport, Violation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaxSchedule {
    Constant { rate: f64 },
    /// `rates[i]` applies on `[breakpoints[i-1], breakpoints[i])`, with
    /// `rates[0]` below the first breakpoint and the last rate above the last.
    PiecewiseConstant { breakpoints: Vec<f64>, rates: Vec<f64> },
    /// Piecewise-linear through `(levels[i], rates[i])`, flat outside.
    Tabulated { levels: Vec<f64>, rates: Vec<f64> },
}

impl Default for TaxSchedule {
    fn default() -> Self {
        TaxSchedule::Constant { rate: 0.0 }
    }
}

impl TaxSchedule {
    pub fn constant(rate: f64) -> Self {
        TaxSchedule::Constant { rate }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TaxSchedule::Constant { rate } => *rate == 0.0,
            TaxSchedule::PiecewiseConstant { rates, .. } | TaxSchedule::Tabulated { rates, .. } => {
                rates.iter().all(|&r| r == 0.0)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            TaxSchedule::Constant { rate } => format!("constant({rate})"),
            TaxSchedule::PiecewiseConstant { rates, .. } => format!("piecewise(n={})", rates.len()),
            TaxSchedule::Tabulated { levels, .. } => format!("tabulated(n={})", levels.len()),
        }
    }

    pub fn rate(&self, z: f64) -> f64 {
        match self {
            TaxSchedule::Constant { rate } => *rate,
            TaxSchedule::PiecewiseConstant { breakpoints, rates } => {
                rates[breakpoints.partition_point(|&b| b <= z).min(rates.len() - 1)]
            }
            TaxSchedule::Tabulated { levels, rates } => {
                if z <= levels[0] {
                    return rates[0];
                }
                let n = levels.len();
                if z >= levels[n - 1] {
                    return rates[n - 1];
                }
                let i = levels.partition_point(|&l| l <= z) - 1;
                let w = (z - levels[i]) / (levels[i + 1] - levels[i]);
                rates[i] + w * (rates[i + 1] - rates[i])
            }
        }
    }

    pub fn max_rate(&self) -> f64 {
        match self {
            TaxSchedule::Constant { rate } => *rate,
            TaxSchedule::PiecewiseConstant { rates, .. } | TaxSchedule::Tabulated { rates, .. } => {
                rates.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    /// `∫_a^b gamma(z) dz` for `a <= b`, exact for every variant.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match self {
            TaxSchedule::Constant { rate } => rate * (b - a),
            TaxSchedule::PiecewiseConstant { breakpoints, .. } => {
                let mut total = 0.0;
                let mut left = a;
                for &bp in breakpoints.iter().filter(|&&bp| bp > a && bp < b) {
                    total += self.rate(left) * (bp - left);
                    left = bp;
                }
                total + self.rate(left) * (b - left)
            }
            TaxSchedule::Tabulated { levels, .. } => {
                // Trapezoid on each linear piece is exact.
                let mut knots = vec![a];
                knots.extend(levels.iter().copied().filter(|&l| l > a && l < b));
                knots.push(b);
                knots
                    .windows(2)
                    .map(|w| 0.5 * (w[1] - w[0]) * (self.rate(w[0]) + self.rate(w[1])))
                    .sum()
            }
        }
    }

    fn shape_ok(&self) -> Result<(), String> {
        match self {
            TaxSchedule::Constant { .. } => Ok(()),
            TaxSchedule::PiecewiseConstant { breakpoints, rates } => {
                if rates.len() != breakpoints.len() + 1 {
                    return Err(format!(
                        "{} rates for {} breakpoints (need one more rate)",
                        rates.len(),
                        breakpoints.len()
                    ));
                }
                if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err("breakpoints must be strictly increasing".into());
                }
                Ok(())
            }
            TaxSchedule::Tabulated { levels, rates } => {
                if levels.is_empty() || levels.len() != rates.len() {
                    return Err("levels and rates must be non-empty and of equal length".into());
                }
                if levels.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err("levels must be strictly increasing".into());
                }
                Ok(())
            }
        }
    }

    /// `(level, rate)` pairs at which the schedule is inspected.
    fn knots(&self, (lo, hi): (f64, f64)) -> Vec<(f64, f64)> {
        match self {
            TaxSchedule::Constant { rate } => vec![(lo, *rate)],
            TaxSchedule::PiecewiseConstant { breakpoints, rates } => {
                let mut v = vec![(lo.min(breakpoints.first().copied().unwrap_or(lo)), rates[0])];
                v.extend(breakpoints.iter().zip(&rates[1..]).map(|(&b, &r)| (b, r)));
                if hi > v.last().unwrap().0 {
                    v.push((hi, self.rate(hi)));
                }
                v
            }
            TaxSchedule::Tabulated { levels, rates } => levels.iter().copied().zip(rates.iter().copied()).collect(),
        }
    }
}

/// Accepts iff every rate lies in `[0, 1)` and the schedule is nondecreasing.
/// The divergence of `∫(1 - gamma)` can only be checked on the truncated
/// domain; a note records that.
pub fn validate_tax(schedule: &TaxSchedule, domain: (f64, f64)) -> ValidationReport {
    let mut report = ValidationReport::default();
    let (lo, hi) = domain;
    if let Err(reason) = schedule.shape_ok() {
        report.violations.push(Violation::new("grid", lo, reason));
        return report;
    }
    let knots = schedule.knots(domain);
    if let Some(&(level, rate)) = knots.iter().find(|(_, r)| !(*r >= 0.0 && *r < 1.0)) {
        report.violations.push(Violation::new(
            "light-perturbation",
            level,
            format!("rate {rate} outside [0, 1)"),
        ));
    }
    if let Some(w) = knots.windows(2).find(|w| w[1].1 < w[0].1) {
        report.violations.push(Violation::new(
            "nondecreasing",
            w[1].0,
            format!("rate drops from {} to {}", w[0].1, w[1].1),
        ));
    }
    if report.accepted() && !matches!(schedule, TaxSchedule::Constant { .. }) {
        let mass = (hi - lo) - schedule.integral(lo, hi);
        report.notes.push(format!(
            "divergence of the untaxed-fraction integral holds on the truncated domain [{lo}, {hi}] only (mass {mass:.6e})"
        ));
    }
    report
}
