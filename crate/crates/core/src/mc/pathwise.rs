use std::sync::Arc;

use serde::Serialize;

use super::path::SimPath;
use crate::boundary::Boundary;
use crate::error::Result;
use crate::schedule::TaxSchedule;
use crate::tax::{TaxAdjustedBoundary, TaxContext};

/// Slack on payoff comparisons; the grid versions of the inequalities hold
/// exactly, so this only absorbs rounding.
const PAYOFF_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathwiseViolation {
    pub check: &'static str,
    pub stream: u64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PathwiseReport {
    pub checks: usize,
    pub violations: Vec<PathwiseViolation>,
}

impl PathwiseReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, other: PathwiseReport) {
        self.checks += other.checks;
        self.violations.extend(other.violations);
    }

    fn le(&mut self, check: &'static str, stream: u64, lhs: f64, rhs: f64) {
        self.checks += 1;
        if lhs > rhs + PAYOFF_SLACK * (1.0 + rhs.abs()) {
            self.violations.push(PathwiseViolation { check, stream, lhs, rhs });
        }
    }

    /// `|a - b| <= steps` for grid indices, `None` meaning never.
    fn within(&mut self, check: &'static str, stream: u64, a: Option<usize>, b: Option<usize>, steps: usize) {
        self.checks += 1;
        let ok = match (a, b) {
            (Some(a), Some(b)) => a.abs_diff(b) <= steps,
            (None, None) => true,
            _ => false,
        };
        if !ok {
            let v = |i: Option<usize>| i.map_or(f64::INFINITY, |i| i as f64);
            self.violations.push(PathwiseViolation {
                check,
                stream,
                lhs: v(a),
                rhs: v(b),
            });
        }
    }
}

fn before(a: Option<usize>, b: Option<usize>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => a < b,
        (Some(_), None) => true,
        _ => false,
    }
}

/// First-passage quantities of one path for a given `ε`.
struct Passages {
    up: Option<usize>,
    below_fx: Option<usize>,
    below_fxe: Option<usize>,
    drawdown: Option<usize>,
    fx: f64,
    fxe: f64,
    /// `f(X̄) - X` at the drawdown time.
    overshoot: f64,
}

impl Passages {
    fn new(path: &SimPath, f: &dyn Boundary, eps: f64) -> Result<Self> {
        let x = path.values[0];
        let fx = f.level(x)?;
        let fxe = f.level(x + eps)?;
        let mut drawdown = None;
        let mut overshoot = 0.0;
        for i in 0..path.len() {
            let level = f.level(path.running_max[i])?;
            if path.values[i] < level {
                drawdown = Some(i);
                overshoot = level - path.values[i];
                break;
            }
        }
        Ok(Self {
            up: path.first(|i| path.values[i] >= x + eps),
            below_fx: path.first(|i| path.values[i] < fx),
            below_fxe: path.first(|i| path.values[i] < fxe),
            drawdown,
            fx,
            fxe,
            overshoot,
        })
    }
}

fn discount(path: &SimPath, q: f64, i: usize) -> f64 {
    (-q * path.time(i)).exp()
}

/// Checks the three sandwich inequalities between `τ_f` and the first
/// passages below `f(x)` and `f(x + ε)`, plus `τ_f <= τ_{f(x)}^-`, with all
/// passage times read on the grid.
pub fn check_pathwise(path: &SimPath, f: &dyn Boundary, eps: f64, q: f64, s: f64) -> Result<PathwiseReport> {
    let p = Passages::new(path, f, eps)?;
    let id = path.stream;
    let mut report = PathwiseReport::default();
    let ind = |b: bool| if b { 1.0 } else { 0.0 };

    report.le("up-lower", id, ind(before(p.up, p.below_fxe)), ind(before(p.up, p.drawdown)));
    report.le("up-upper", id, ind(before(p.up, p.drawdown)), ind(before(p.up, p.below_fx)));

    let middle = match p.drawdown {
        Some(i) if before(p.drawdown, p.up) => (-q * path.time(i) - s * p.overshoot).exp(),
        _ => 0.0,
    };
    let down1 = match p.below_fx {
        Some(i) if before(p.below_fx, p.up) => (-q * path.time(i) - s * (p.fxe - path.values[i])).exp(),
        _ => 0.0,
    };
    let down2 = match p.below_fxe {
        Some(i) if before(p.below_fxe, p.up) => (-q * path.time(i) - s * (p.fx - path.values[i])).exp(),
        _ => 0.0,
    };
    report.le("down-lower", id, down1, middle);
    report.le("down-upper", id, middle, down2);

    report.checks += 1;
    if let Some(j) = p.below_fx {
        if !matches!(p.drawdown, Some(i) if i <= j) {
            report.violations.push(PathwiseViolation {
                check: "drawdown-before-level",
                stream: id,
                lhs: p.drawdown.map_or(f64::INFINITY, |i| i as f64),
                rhs: j as f64,
            });
        }
    }
    Ok(report)
}

/// Batch means of the quantities in the aggregate sandwich bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichReport {
    pub eps: f64,
    /// `B(x; f(x+ε), x+ε)`, `E[e^{-qτ⁺}; τ⁺ < τ_f]`, `B(x; f(x), x+ε)`.
    pub exit: [f64; 3],
    /// `e^{-sΔ} C(x; f(x), x+ε)`, `E[e^{-qτ_f - sY}; τ_f < τ⁺]`,
    /// `e^{sΔ} C(x; f(x+ε), x+ε)` with `Δ = f(x+ε) - f(x)`.
    pub drawdown: [f64; 3],
    pub holds: bool,
}

pub fn check_sandwich(paths: &[SimPath], f: &dyn Boundary, eps: f64, q: f64, s: f64) -> Result<SandwichReport> {
    let mut exit = [0.0; 3];
    let mut drawdown = [0.0; 3];
    for path in paths {
        let p = Passages::new(path, f, eps)?;
        let delta = p.fxe - p.fx;
        if let Some(u) = p.up {
            let d = discount(path, q, u);
            exit[0] += d * ind(before(p.up, p.below_fxe));
            exit[1] += d * ind(before(p.up, p.drawdown));
            exit[2] += d * ind(before(p.up, p.below_fx));
        }
        if let (Some(i), true) = (p.below_fx, before(p.below_fx, p.up)) {
            drawdown[0] += (-s * delta).exp() * discount(path, q, i) * (-s * (p.fx - path.values[i])).exp();
        }
        if let (Some(i), true) = (p.drawdown, before(p.drawdown, p.up)) {
            drawdown[1] += discount(path, q, i) * (-s * p.overshoot).exp();
        }
        if let (Some(i), true) = (p.below_fxe, before(p.below_fxe, p.up)) {
            drawdown[2] += (s * delta).exp() * discount(path, q, i) * (-s * (p.fxe - path.values[i])).exp();
        }
    }
    let n = paths.len().max(1) as f64;
    exit.iter_mut().chain(drawdown.iter_mut()).for_each(|v| *v /= n);
    let ordered = |v: [f64; 3]| v[0] <= v[1] + PAYOFF_SLACK && v[1] <= v[2] + PAYOFF_SLACK;
    Ok(SandwichReport {
        eps,
        exit,
        drawdown,
        holds: ordered(exit) && ordered(drawdown),
    })
}

fn ind(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// `U = X - T` with `T` the tax paid on running-maximum increments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaxedPath {
    pub values: Vec<f64>,
    pub running_max: Vec<f64>,
    /// `f(Ū) - U`; positive once `U` is below the boundary.
    pub drawdown: Vec<f64>,
}

/// Builds the taxed path and checks the time correspondences: `Ū = γ̄_x(X̄)`
/// at every grid point, upper passages of `U` match those of `X` at
/// `γ̄_x^{-1}(b)`, ruin of `U` matches `X < γ_x(X̄)`, and the taxed drawdown
/// time matches the untaxed one for `f*`.
pub fn apply_tax_and_check(
    path: &SimPath,
    schedule: &TaxSchedule,
    f: Arc<dyn Boundary>,
) -> Result<(TaxedPath, PathwiseReport)> {
    let x = path.values[0];
    let ctx = TaxContext::new(schedule.clone(), x)?;
    let star = TaxAdjustedBoundary::new(f.clone(), ctx.clone());
    let n = path.len();
    let id = path.stream;
    let mut values = Vec::with_capacity(n);
    let mut running_max = Vec::with_capacity(n);
    let mut drawdown = Vec::with_capacity(n);
    let mut tax = Vec::with_capacity(n);
    let mut paid = 0.0;
    let mut top = f64::NEG_INFINITY;
    for i in 0..n {
        if i > 0 {
            paid += schedule.integral(path.running_max[i - 1], path.running_max[i]);
        }
        let u = path.values[i] - paid;
        top = top.max(u);
        values.push(u);
        running_max.push(top);
        drawdown.push(f.level(top)? - u);
        tax.push(paid);
    }

    let mut report = PathwiseReport::default();
    for i in 0..n {
        let expected = ctx.gamma_bar(path.running_max[i])?;
        report.checks += 1;
        if (running_max[i] - expected).abs() > 1e-9 * (1.0 + expected.abs()) {
            report.violations.push(PathwiseViolation {
                check: "taxed-maximum",
                stream: id,
                lhs: running_max[i],
                rhs: expected,
            });
        }
    }

    let top = running_max[n - 1];
    for frac in [0.25, 0.5, 0.75, 1.0] {
        let b = x + frac * (top - x);
        let in_u = (0..n).find(|&i| values[i] >= b);
        let level = ctx.gamma_bar_inv(b)?;
        // Rounding in the inverse can push the matching X level a hair above
        // the realized maximum when frac = 1.
        let in_x = (0..n).find(|&i| path.values[i] >= level - 1e-12 * (1.0 + level.abs()));
        report.within("upper-passage", id, in_u, in_x, 1);
    }

    let ruin_u = (0..n).find(|&i| values[i] < 0.0);
    let ruin_x = (0..n).find(|&i| path.values[i] < tax[i]);
    report.within("ruin", id, ruin_u, ruin_x, 1);

    let sigma = (0..n).find(|&i| drawdown[i] > 0.0);
    let mut tau_star = None;
    for i in 0..n {
        if path.values[i] < star.level(path.running_max[i])? {
            tau_star = Some(i);
            break;
        }
    }
    report.within("drawdown-time", id, sigma, tau_star, 1);

    Ok((
        TaxedPath {
            values,
            running_max,
            drawdown,
        },
        report,
    ))
}
