//! Upward-exit transform and general-drawdown law from differential exit
//! parameters:
//!
//! `g = exp(-∫_x^K b)` and `h = ∫_x^K exp(-∫_x^y b) c(y) dy`.
//!
//! Both are instances of the weighted prefix integral
//! `(∫_a^b β, ∫_a^b exp(-∫_a^y β) w(y) dy)`, evaluated in one adaptive
//! pass: each Gauss-Kronrod panel reuses its 15 values of `β` to integrate
//! the degree-14 interpolant up to every node, so the inner integral costs
//! no extra model evaluations.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::quad::{kronrod_nodes, rule_from_values};
use crate::numerics::sum::NeumaierSum;
use crate::params::DifferentialExitParams;
use crate::query::FunctionalQuery;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSettings {
    /// Absolute tolerance on both the exponent integral and the weighted integral.
    pub abs_tol: f64,
    pub max_panels: usize,
    pub initial_panels: usize,
    /// Tail increment of `h` below which an unbounded-`K` query stops.
    pub tail_tol: f64,
    /// Upper limit on the level reached while extending `K`.
    pub max_level: f64,
}

impl Default for EngineSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_panels: 4000,
            initial_panels: 4,
            tail_tol: 1e-10,
            max_level: 1e6,
        }
    }
}

/// Result of one weighted prefix integral over `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrefixIntegral {
    /// `∫_a^b β`
    pub exponent: f64,
    pub exponent_error: f64,
    /// `∫_a^b exp(-∫_a^y β) w(y) dy`
    pub weighted: f64,
    pub weighted_error: f64,
    pub panels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub g: f64,
    pub h: f64,
    pub g_error: f64,
    pub h_error: f64,
    pub panels: usize,
}

/// `M[j][k] = ∫_{-1}^{t_j} L_k(t) dt` for the Lagrange basis on the Kronrod nodes.
fn prefix_matrix() -> &'static [[f64; 15]; 15] {
    static M: OnceLock<[[f64; 15]; 15]> = OnceLock::new();
    M.get_or_init(|| {
        let nodes = kronrod_nodes(-1.0, 1.0);
        let t: Vec<f64> = nodes.iter().map(|n| n.0).collect();
        let lagrange = |k: usize, s: f64| -> f64 {
            (0..15)
                .filter(|&m| m != k)
                .map(|m| (s - t[m]) / (t[k] - t[m]))
                .product()
        };
        let mut out = [[0.0; 15]; 15];
        for (j, row) in out.iter_mut().enumerate() {
            let sub = kronrod_nodes(-1.0, t[j]);
            for (k, cell) in row.iter_mut().enumerate() {
                *cell = sub.iter().map(|&(s, w)| w * lagrange(k, s)).sum();
            }
        }
        out
    })
}

#[derive(Debug, Clone, Copy)]
struct PanelState {
    a: f64,
    b: f64,
    exponent: f64,
    exponent_error: f64,
    /// Weighted integral relative to the panel's left end.
    local: f64,
    local_error: f64,
}

struct Memo<'a> {
    beta: &'a mut dyn FnMut(f64) -> Result<f64>,
    w: &'a mut dyn FnMut(f64) -> Result<f64>,
    seen: HashMap<u64, (f64, f64)>,
}

impl Memo<'_> {
    fn eval(&mut self, z: f64) -> Result<(f64, f64)> {
        if let Some(&v) = self.seen.get(&z.to_bits()) {
            return Ok(v);
        }
        let b = (self.beta)(z)?;
        let w = (self.w)(z)?;
        if !(b.is_finite() && w.is_finite()) {
            return Err(Error::Divergent(z));
        }
        self.seen.insert(z.to_bits(), (b, w));
        Ok((b, w))
    }

    fn panel(&mut self, a: f64, b: f64) -> Result<PanelState> {
        let nodes = kronrod_nodes(a, b);
        let half = 0.5 * (b - a);
        let mut beta = [0.0; 15];
        let mut w = [0.0; 15];
        for (j, &(z, _)) in nodes.iter().enumerate() {
            (beta[j], w[j]) = self.eval(z)?;
        }
        let (exponent, exponent_error) = rule_from_values(&beta, half);
        let m = prefix_matrix();
        let mut inner = [0.0; 15];
        for j in 0..15 {
            let prefix: f64 = half * m[j].iter().zip(&beta).map(|(c, v)| c * v).sum::<f64>();
            inner[j] = (-prefix).exp() * w[j];
        }
        let (local, local_error) = rule_from_values(&inner, half);
        Ok(PanelState {
            a,
            b,
            exponent,
            exponent_error,
            local,
            local_error,
        })
    }
}

/// `(∫_a^b β, ∫_a^b exp(-∫_a^y β) w(y) dy)` by adaptive bisection until both
/// error estimates are below `settings.abs_tol`.
pub fn weighted_prefix_integral(
    beta: &mut dyn FnMut(f64) -> Result<f64>,
    w: &mut dyn FnMut(f64) -> Result<f64>,
    a: f64,
    b: f64,
    settings: &EngineSettings,
) -> Result<PrefixIntegral> {
    if !(a <= b) {
        return Err(Error::Query(format!("empty interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(PrefixIntegral {
            exponent: 0.0,
            exponent_error: 0.0,
            weighted: 0.0,
            weighted_error: 0.0,
            panels: 0,
        });
    }
    let mut memo = Memo {
        beta,
        w,
        seen: HashMap::new(),
    };
    let n0 = settings.initial_panels.max(1);
    let width = (b - a) / n0 as f64;
    let mut panels = Vec::with_capacity(n0);
    for i in 0..n0 {
        let lo = a + width * i as f64;
        let hi = if i + 1 == n0 { b } else { lo + width };
        panels.push(memo.panel(lo, hi)?);
    }
    loop {
        // Panels stay sorted; accumulate prefixes in order.
        let mut exponent = NeumaierSum::default();
        let mut exponent_error = NeumaierSum::default();
        let mut weighted = NeumaierSum::default();
        let mut weighted_error = NeumaierSum::default();
        let mut worst = (0usize, -1.0);
        for (i, p) in panels.iter().enumerate() {
            let discount = (-exponent.total()).exp();
            weighted.add(discount * p.local);
            let scaled_error = discount * p.local_error;
            weighted_error.add(scaled_error);
            exponent.add(p.exponent);
            exponent_error.add(p.exponent_error);
            let score = p.exponent_error.max(scaled_error);
            if score > worst.1 {
                worst = (i, score);
            }
        }
        let result = PrefixIntegral {
            exponent: exponent.total(),
            exponent_error: exponent_error.total(),
            weighted: weighted.total(),
            weighted_error: weighted_error.total(),
            panels: panels.len(),
        };
        if !(result.exponent.is_finite() && result.weighted.is_finite()) {
            return Err(Error::Divergent(b));
        }
        let exponent_tol = settings.abs_tol.max(1e-13 * result.exponent.abs());
        if result.exponent_error <= exponent_tol && result.weighted_error <= settings.abs_tol {
            return Ok(result);
        }
        let target = &panels[worst.0];
        let mid = 0.5 * (target.a + target.b);
        if panels.len() >= settings.max_panels || mid <= target.a || mid >= target.b {
            // A non-integrable singularity shows up as an exponent that keeps growing.
            if result.exponent_error > settings.abs_tol && result.exponent > 50.0 {
                return Err(Error::Divergent(target.a));
            }
            return Err(Error::Quadrature {
                a,
                b,
                error: result.exponent_error.max(result.weighted_error),
            });
        }
        let (lo, hi) = (target.a, target.b);
        let left = memo.panel(lo, mid)?;
        let right = memo.panel(mid, hi)?;
        panels.splice(worst.0..=worst.0, [left, right]);
    }
}

fn check_query(params: &dyn DifferentialExitParams, query: &FunctionalQuery) -> Result<()> {
    query.validate()?;
    let prov = params.provenance();
    if prov.q != query.q || prov.s != query.s {
        return Err(Error::Query(format!(
            "parameters built for (q={}, s={}) but queried at (q={}, s={})",
            prov.q, prov.s, query.q, query.s
        )));
    }
    Ok(())
}

/// Both `g` and `h` for one query.
pub fn evaluate(params: &dyn DifferentialExitParams, query: &FunctionalQuery, settings: &EngineSettings) -> Result<Evaluation> {
    check_query(params, query)?;
    let r = weighted_prefix_integral(&mut |z| params.b(z), &mut |z| params.c(z), query.x, query.k, settings)?;
    let g = (-r.exponent).exp();
    Ok(Evaluation {
        g,
        h: r.weighted,
        g_error: g * r.exponent_error,
        h_error: r.weighted_error,
        panels: r.panels,
    })
}

/// `E_x[e^{-q τ_K^+} 1{τ_K^+ < τ_f}] = exp(-∫_x^K b)`.
pub fn exit_transform(params: &dyn DifferentialExitParams, query: &FunctionalQuery) -> Result<f64> {
    check_query(params, query)?;
    let r = weighted_prefix_integral(&mut |z| params.b(z), &mut |_| Ok(0.0), query.x, query.k, &EngineSettings::default())?;
    Ok((-r.exponent).exp())
}

/// `E_x[e^{-q τ_f - s Y} 1{running max at τ_f <= K}]`.
pub fn drawdown_law(params: &dyn DifferentialExitParams, query: &FunctionalQuery) -> Result<f64> {
    Ok(evaluate(params, query, &EngineSettings::default())?.h)
}

/// `exp(-∫_x^y b) c(y)`: transform density of the running maximum at the
/// drawdown time, at level `y`.
pub fn max_at_drawdown_density(params: &dyn DifferentialExitParams, query: &FunctionalQuery, y: f64) -> Result<f64> {
    check_query(params, query)?;
    if y < query.x || y > query.k {
        return Err(Error::Query(format!("density level {y} outside [{}, {}]", query.x, query.k)));
    }
    let r = weighted_prefix_integral(&mut |z| params.b(z), &mut |_| Ok(0.0), query.x, y, &EngineSettings::default())?;
    Ok((-r.exponent).exp() * params.c(y)?)
}

/// `h` with `K = ∞`: the upper limit is pushed out by doubling the segment
/// length until the tail increment falls below `settings.tail_tol`.
pub fn total_drawdown_law(
    params: &dyn DifferentialExitParams,
    x: f64,
    q: f64,
    s: f64,
    settings: &EngineSettings,
) -> Result<Evaluation> {
    let probe = FunctionalQuery { x, k: x, q, s };
    check_query(params, &probe)?;
    let mut exponent: f64 = 0.0;
    let mut h = NeumaierSum::default();
    let mut h_error = 0.0;
    let mut panels = 0;
    let mut left = x;
    let mut length = 1.0;
    loop {
        let right = left + length;
        if right > settings.max_level {
            return Err(Error::Divergent(left));
        }
        let r = weighted_prefix_integral(&mut |z| params.b(z), &mut |z| params.c(z), left, right, settings)?;
        let increment = (-exponent).exp() * r.weighted;
        h.add(increment);
        h_error += (-exponent).exp() * r.weighted_error;
        exponent += r.exponent;
        panels += r.panels;
        left = right;
        length *= 2.0;
        let g = (-exponent).exp();
        if increment.abs() < settings.tail_tol && g < settings.tail_tol {
            return Ok(Evaluation {
                g,
                h: h.total(),
                g_error: 0.0,
                h_error,
                panels,
            });
        }
    }
}
