//! Increasing/decreasing solutions `phi_q^±` of `(sigma^2/2) phi'' + mu phi' = q phi`
//! and the diffusion exit parameters built from them.
//!
//! The solutions are carried in log form, `phi = e^y`, `p = y'`, which turns
//! the linear equation into the Riccati equation
//! `p' = 2 (q - mu p) / sigma^2 - p^2`. Forward integration is stable for the
//! increasing solution and backward integration for the decreasing one, so
//! truncating the domain only perturbs the solutions near the far endpoint.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::boundary::Boundary;
use crate::error::{invalid, Error, Result};
use crate::model::DiffusionParams;
use crate::numerics::ode::{dopri5, OdeOptions};
use crate::numerics::quad::{gauss_kronrod_15, integrate, QuadTolerance};
use crate::params::{DifferentialExitParams, ExitParamFactory, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub domain: (f64, f64),
    /// Initial number of grid intervals; doubled until converged.
    pub intervals: usize,
    /// Max relative change of `p^±` between successive grids.
    pub refine_tol: f64,
    /// Residual tolerance of the log-form equation, relative to its scale.
    pub residual_tol: f64,
    pub max_refinements: u32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            domain: (-10.0, 10.0),
            intervals: 1024,
            refine_tol: 1e-8,
            residual_tol: 1e-8,
            max_refinements: 5,
        }
    }
}

/// One log-form solution tabulated at the grid nodes.
#[derive(Debug, Clone, Serialize)]
struct LogSolution {
    y: Vec<f64>,
    p: Vec<f64>,
    dp: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SturmLiouvilleSolution {
    pub q: f64,
    pub lo: f64,
    pub hi: f64,
    step: f64,
    plus: LogSolution,
    minus: LogSolution,
    /// Largest residual seen at interval midpoints.
    pub max_residual: f64,
    /// At `q = 0`: log scale density `ℓ = log s'` and `ℓ' = -2μ/σ²` at the
    /// nodes, `ℓ(mid) = 0`. Exit quantities then come from `s` directly,
    /// since `φ^+ = const + s` is too close to constant when `s'` varies by
    /// many orders of magnitude across the domain.
    log_scale: Option<(Vec<f64>, Vec<f64>)>,
}

fn riccati(params: &DiffusionParams, q: f64, x: f64, p: f64) -> f64 {
    let sig = params.volatility.eval(x);
    2.0 * (q - params.drift.eval(x) * p) / (sig * sig) - p * p
}

/// Positive (`sign = 1`) or negative root of `p^2 + a p - c = 0`, computed
/// without cancellation. `c >= 0`.
fn characteristic_root(a: f64, c: f64, sign: f64) -> f64 {
    let disc = (a * a + 4.0 * c).sqrt();
    if sign > 0.0 {
        if a > 0.0 {
            2.0 * c / (a + disc)
        } else {
            0.5 * (disc - a)
        }
    } else if a < 0.0 {
        -2.0 * c / (disc - a)
    } else {
        -0.5 * (a + disc)
    }
}

fn integrate_log(
    params: &DiffusionParams,
    q: f64,
    nodes: &[f64],
    start_p: f64,
    forward: bool,
) -> Result<LogSolution> {
    let n = nodes.len();
    let mut y = vec![0.0; n];
    let mut p = vec![0.0; n];
    let opts = OdeOptions {
        rel_tol: 1e-13,
        abs_tol: 1e-13,
        ..OdeOptions::default()
    };
    let order: Vec<usize> = if forward {
        (0..n).collect()
    } else {
        (0..n).rev().collect()
    };
    p[order[0]] = start_p;
    for w in order.windows(2) {
        let (i, j) = (w[0], w[1]);
        let out = dopri5(
            |x, s: &[f64; 2]| [s[1], riccati(params, q, x, s[1])],
            nodes[i],
            [y[i], p[i]],
            nodes[j],
            opts,
        )?;
        if !(out[0].is_finite() && out[1].is_finite()) {
            return Err(Error::Ode(format!("non-finite log-solution at {}", nodes[j])));
        }
        y[j] = out[0];
        p[j] = out[1];
    }
    let dp = nodes
        .iter()
        .zip(&p)
        .map(|(&x, &pi)| riccati(params, q, x, pi))
        .collect();
    Ok(LogSolution { y, p, dp })
}

/// Cubic Hermite on `[0, 1]`: value and derivative (w.r.t. `t`).
fn hermite(t: f64, f0: f64, f1: f64, d0: f64, d1: f64) -> (f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let v = h00 * f0 + h10 * d0 + h01 * f1 + h11 * d1;
    let dv = (6.0 * t2 - 6.0 * t) * f0 + (3.0 * t2 - 4.0 * t + 1.0) * d0 + (6.0 * t - 6.0 * t2) * f1 + (3.0 * t2 - 2.0 * t) * d1;
    (v, dv)
}

impl LogSolution {
    /// `(y, p, p')` at `x` by Hermite interpolation between nodes.
    fn eval(&self, lo: f64, step: f64, x: f64) -> (f64, f64, f64) {
        let n = self.y.len();
        let pos = (x - lo) / step;
        let i = (pos.floor().max(0.0) as usize).min(n - 2);
        let t = pos - i as f64;
        let (y, _) = hermite(t, self.y[i], self.y[i + 1], step * self.p[i], step * self.p[i + 1]);
        let (p, dp) = hermite(t, self.p[i], self.p[i + 1], step * self.dp[i], step * self.dp[i + 1]);
        (y, p, dp / step)
    }

    fn shift(&mut self, by: f64) {
        for v in &mut self.y {
            *v -= by;
        }
    }
}

fn solve_on_grid(params: &DiffusionParams, q: f64, lo: f64, hi: f64, intervals: usize) -> Result<SturmLiouvilleSolution> {
    let step = (hi - lo) / intervals as f64;
    let nodes: Vec<f64> = (0..=intervals).map(|i| lo + step * i as f64).collect();
    let coef = |x: f64| {
        let s = params.volatility.eval(x);
        (2.0 * params.drift.eval(x) / (s * s), 2.0 * q / (s * s))
    };
    let (a_lo, c_lo) = coef(lo);
    let (a_hi, c_hi) = coef(hi);
    let mid = 0.5 * (lo + hi);

    let (plus, minus) = if q == 0.0 {
        // phi^- is constant; phi^+ = const + scale function, any positive start slope.
        let start = (-a_lo).max(1.0 / (hi - lo));
        let plus = integrate_log(params, 0.0, &nodes, start, true)?;
        let minus = LogSolution {
            y: vec![0.0; nodes.len()],
            p: vec![0.0; nodes.len()],
            dp: vec![0.0; nodes.len()],
        };
        (plus, minus)
    } else {
        let plus = integrate_log(params, q, &nodes, characteristic_root(a_lo, c_lo, 1.0), true)?;
        let minus = integrate_log(params, q, &nodes, characteristic_root(a_hi, c_hi, -1.0), false)?;
        (plus, minus)
    };
    let mut sol = SturmLiouvilleSolution {
        q,
        lo,
        hi,
        step,
        plus,
        minus,
        max_residual: 0.0,
        log_scale: None,
    };
    if q == 0.0 {
        sol.log_scale = Some(log_scale_density(params, &nodes, mid)?);
    }
    let anchor_plus = sol.plus.eval(lo, step, mid).0;
    let anchor_minus = sol.minus.eval(lo, step, mid).0;
    sol.plus.shift(anchor_plus);
    sol.minus.shift(anchor_minus);
    sol.max_residual = sol.residual(params);
    Ok(sol)
}

fn log_scale_density(params: &DiffusionParams, nodes: &[f64], mid: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let slope = |x: f64| {
        let sig = params.volatility.eval(x);
        -2.0 * params.drift.eval(x) / (sig * sig)
    };
    let mut ell = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    ell.push(0.0);
    for w in nodes.windows(2) {
        acc += gauss_kronrod_15(&mut |x| Ok(slope(x)), w[0], w[1])?.value;
        ell.push(acc);
    }
    let d: Vec<f64> = nodes.iter().map(|&x| slope(x)).collect();
    let step = nodes[1] - nodes[0];
    let shift = LogSolution {
        y: ell.clone(),
        p: d.clone(),
        dp: vec![0.0; nodes.len()],
    }
    .eval(nodes[0], step, mid)
    .0;
    Ok((ell.into_iter().map(|v| v - shift).collect(), d))
}

/// Solves for `phi_q^±` on `settings.domain`, doubling the grid until `p^±`
/// stabilise and the midpoint residual meets tolerance.
pub fn solve_phi(params: &DiffusionParams, q: f64, settings: &SolverSettings) -> Result<SturmLiouvilleSolution> {
    if !(q >= 0.0) {
        return Err(invalid("q", "must be >= 0"));
    }
    params.validate_on(settings.domain)?;
    let (lo, hi) = settings.domain;
    let mut intervals = settings.intervals.max(8);
    let mut current = solve_on_grid(params, q, lo, hi, intervals)?;
    for _ in 0..settings.max_refinements {
        intervals *= 2;
        let finer = solve_on_grid(params, q, lo, hi, intervals)?;
        let change = current.max_change(&finer);
        let residual_ok = finer.max_residual <= settings.residual_tol;
        current = finer;
        if change <= settings.refine_tol && residual_ok {
            return Ok(current);
        }
    }
    if current.max_residual > settings.residual_tol {
        return Err(Error::Residual {
            residual: current.max_residual,
            tolerance: settings.residual_tol,
        });
    }
    Ok(current)
}

impl SturmLiouvilleSolution {
    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn nodes(&self) -> usize {
        self.plus.y.len()
    }

    fn check(&self, x: f64) -> Result<()> {
        let slack = 1e-12 * (self.hi - self.lo);
        if x < self.lo - slack || x > self.hi + slack || !x.is_finite() {
            return Err(Error::Domain {
                level: x,
                reason: format!("outside the solver domain [{}, {}]", self.lo, self.hi),
            });
        }
        Ok(())
    }

    /// `(y^+, p^+, y^-, p^-)` at `x`.
    fn logs(&self, x: f64) -> Result<(f64, f64, f64, f64)> {
        self.check(x)?;
        let (yp, pp, _) = self.plus.eval(self.lo, self.step, x);
        let (ym, pm, _) = self.minus.eval(self.lo, self.step, x);
        Ok((yp, pp, ym, pm))
    }

    /// `(phi^+, phi^+', phi^-, phi^-')` at `x`.
    pub fn phi(&self, x: f64) -> Result<(f64, f64, f64, f64)> {
        let (yp, pp, ym, pm) = self.logs(x)?;
        let (ep, em) = (yp.exp(), ym.exp());
        Ok((ep, pp * ep, em, pm * em))
    }

    /// Relative residual of the log-form equation at interval midpoints.
    fn residual(&self, params: &DiffusionParams) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nodes() - 1 {
            let x = self.lo + self.step * (i as f64 + 0.5);
            let sig = params.volatility.eval(x);
            let mu = params.drift.eval(x);
            for sol in [&self.plus, &self.minus] {
                let (_, p, dp) = sol.eval(self.lo, self.step, x);
                let a = 0.5 * sig * sig * (dp + p * p);
                let r = a + mu * p - self.q;
                let scale = 1.0 + (0.5 * sig * sig * p * p).abs() + (mu * p).abs() + self.q;
                worst = worst.max(r.abs() / scale);
            }
        }
        worst
    }

    /// Largest relative difference in `p^±` against a finer solution.
    fn max_change(&self, finer: &SturmLiouvilleSolution) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nodes() - 1 {
            let x = self.lo + self.step * (i as f64 + 0.5);
            for (a, b) in [(&self.plus, &finer.plus), (&self.minus, &finer.minus)] {
                let pa = a.eval(self.lo, self.step, x).1;
                let pb = b.eval(finer.lo, finer.step, x).1;
                worst = worst.max((pa - pb).abs() / (1.0 + pb.abs()));
            }
        }
        worst
    }

    /// `(Phi_q(x, y), d/dx Phi_q, d/dy Phi_q)`.
    pub fn phi_big(&self, x: f64, y: f64) -> Result<(f64, f64, f64)> {
        let (px, dpx, mx, dmx) = self.phi(x)?;
        let (py, dpy, my, dmy) = self.phi(y)?;
        let v = (px * my - py * mx, dpx * my - py * dmx, px * dmy - dpy * mx);
        if !(v.0.is_finite() && v.1.is_finite() && v.2.is_finite()) {
            return Err(Error::Overflow("Phi_q".into()));
        }
        Ok(v)
    }

    /// `D = log(phi^+(x) phi^-(u) / (phi^+(u) phi^-(x))) > 0` for `u < x`,
    /// plus the logs at `x` and the `phi^-` log at `u`.
    fn gap_log(&self, u: f64, x: f64) -> Result<(f64, f64, f64, f64)> {
        if !(u < x) {
            return Err(Error::Domain {
                level: u,
                reason: format!("boundary level {u} not below {x}"),
            });
        }
        let (ypu, _, ymu, _) = self.logs(u)?;
        let (ypx, ppx, ymx, pmx) = self.logs(x)?;
        let d = ypx - ypu + ymu - ymx;
        if !(d > 0.0) {
            return Err(Error::Ode(format!("solutions not separated on [{u}, {x}] (log gap {d})")));
        }
        Ok((d, ppx, pmx, ymx - ymu))
    }

    /// `ℓ(x)` by Hermite interpolation with exact node derivatives.
    fn ell(&self, x: f64) -> f64 {
        let (ell, d) = self.log_scale.as_ref().expect("q = 0 solution");
        let n = ell.len();
        let pos = (x - self.lo) / self.step;
        let i = (pos.floor().max(0.0) as usize).min(n - 2);
        hermite(pos - i as f64, ell[i], ell[i + 1], self.step * d[i], self.step * d[i + 1]).0
    }

    /// `∫_a^b e^{ℓ(y) - shift} dy`.
    fn scale_increment(&self, a: f64, b: f64, shift: f64) -> Result<f64> {
        let tol = QuadTolerance {
            abs_tol: 0.0,
            rel_tol: 1e-13,
            max_panels: 4000,
        };
        Ok(integrate(|y| Ok((self.ell(y) - shift).exp()), a, b, tol)?.value)
    }

    /// Largest `ℓ` on `[a, b]`, read at the nodes and endpoints.
    fn ell_max(&self, a: f64, b: f64) -> f64 {
        let (ell, _) = self.log_scale.as_ref().expect("q = 0 solution");
        let first = ((a - self.lo) / self.step).ceil().max(0.0) as usize;
        let last = (((b - self.lo) / self.step).floor().max(0.0) as usize).min(ell.len() - 1);
        let inner = (first..=last).map(|i| ell[i]).fold(f64::NEG_INFINITY, f64::max);
        inner.max(self.ell(a)).max(self.ell(b))
    }

    /// `s'(x) / (s(x) - s(u))`, the `q = 0` value of both `b` and `c`.
    fn scale_ratio(&self, u: f64, x: f64) -> Result<f64> {
        self.check(u)?;
        self.check(x)?;
        if !(u < x) {
            return Err(Error::Domain {
                level: u,
                reason: format!("boundary level {u} not below {x}"),
            });
        }
        let lx = self.ell(x);
        let m = self.ell_max(u, x);
        Ok((lx - m).exp() / self.scale_increment(u, x, m)?)
    }

    /// `Phi_{q,2}(u, x) / Phi_q(u, x)`.
    pub fn b_pair(&self, u: f64, x: f64) -> Result<f64> {
        if self.log_scale.is_some() {
            return self.scale_ratio(u, x);
        }
        let (d, pp, pm, _) = self.gap_log(u, x)?;
        Ok((pp - pm * (-d).exp()) / -(-d).exp_m1())
    }

    /// `Phi_{q,2}(x, x) / Phi_q(u, x)`.
    pub fn c_pair(&self, u: f64, x: f64) -> Result<f64> {
        if self.log_scale.is_some() {
            return self.scale_ratio(u, x);
        }
        let (d, pp, pm, dym) = self.gap_log(u, x)?;
        Ok((pp - pm) * dym.exp() / -(-d).exp_m1())
    }

    /// `B^(q)(x; u, v) = Phi_q(u, x) / Phi_q(u, v)`.
    pub fn two_sided_b(&self, x: f64, u: f64, v: f64) -> Result<f64> {
        if !(u < v) || x > v {
            return Err(invalid("u/v", format!("need u < v and x <= v (u={u}, x={x}, v={v})")));
        }
        if x <= u {
            return Ok(if x == u { 0.0 } else { f64::NAN });
        }
        if x == v {
            return Ok(1.0);
        }
        if self.log_scale.is_some() {
            self.check(u)?;
            self.check(v)?;
            let m = self.ell_max(u, v);
            return Ok(self.scale_increment(u, x, m)? / self.scale_increment(u, v, m)?);
        }
        // Phi(u, w) = -e^{y+(u) + y-(w)} expm1(D_w); the u-prefactor cancels.
        let (dx, _, _, ymx) = self.gap_log(u, x)?;
        let (dv, _, _, ymv) = self.gap_log(u, v)?;
        Ok((ymx - ymv).exp() * dx.exp_m1() / dv.exp_m1())
    }

    /// Writes `x, phi+, phi+', phi-, phi-'` at every node.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,phi_plus,phi_plus_prime,phi_minus,phi_minus_prime")?;
        for i in 0..self.nodes() {
            let x = self.lo + self.step * i as f64;
            let (a, b, c, d) = self.phi(x).map_err(|e| std::io::Error::other(e.to_string()))?;
            writeln!(out, "{x:.17e},{a:.17e},{b:.17e},{c:.17e},{d:.17e}")?;
        }
        Ok(())
    }
}

pub fn diffusion_b(sol: &SturmLiouvilleSolution, f: &dyn Boundary, x: f64) -> Result<f64> {
    sol.b_pair(f.level(x)?, x)
}

/// `s` plays no role: a diffusion creeps over every lower level.
pub fn diffusion_c(sol: &SturmLiouvilleSolution, f: &dyn Boundary, x: f64) -> Result<f64> {
    sol.c_pair(f.level(x)?, x)
}

pub struct DiffusionExitParams {
    sol: Arc<SturmLiouvilleSolution>,
    boundary: Arc<dyn Boundary>,
    s: f64,
}

impl DiffusionExitParams {
    pub fn new(sol: Arc<SturmLiouvilleSolution>, boundary: Arc<dyn Boundary>, s: f64) -> Self {
        Self { sol, boundary, s }
    }

    pub fn solution(&self) -> &SturmLiouvilleSolution {
        &self.sol
    }
}

impl DifferentialExitParams for DiffusionExitParams {
    fn b(&self, z: f64) -> Result<f64> {
        diffusion_b(&self.sol, self.boundary.as_ref(), z)
    }

    fn c(&self, z: f64) -> Result<f64> {
        diffusion_c(&self.sol, self.boundary.as_ref(), z)
    }

    fn provenance(&self) -> Provenance {
        Provenance {
            family: "diffusion",
            q: self.sol.q,
            s: self.s,
            extrapolated: false,
        }
    }
}

/// Factory with a per-`q` cache of solved equations.
pub struct DiffusionFamily {
    params: DiffusionParams,
    settings: SolverSettings,
    cache: Mutex<HashMap<u64, Arc<SturmLiouvilleSolution>>>,
}

impl DiffusionFamily {
    pub fn new(params: DiffusionParams, settings: SolverSettings) -> Self {
        Self {
            params,
            settings,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn solution(&self, q: f64) -> Result<Arc<SturmLiouvilleSolution>> {
        let key = q.to_bits();
        if let Some(sol) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Ok(sol.clone());
        }
        let sol = Arc::new(solve_phi(&self.params, q, &self.settings)?);
        self.cache.lock().expect("cache poisoned").insert(key, sol.clone());
        Ok(sol)
    }
}

impl ExitParamFactory for DiffusionFamily {
    fn exit_params(
        &self,
        boundary: Arc<dyn Boundary>,
        q: f64,
        s: f64,
    ) -> Result<Arc<dyn DifferentialExitParams>> {
        Ok(Arc::new(DiffusionExitParams::new(self.solution(q)?, boundary, s)))
    }
}
