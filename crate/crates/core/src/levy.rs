//! Scale functions of spectrally negative Lévy processes with rational
//! Laplace exponents (Brownian motion with drift, Cramér-Lundberg with
//! exponential claims, and the Brownian-perturbed combination) and the
//! differential exit parameters they induce.
//!
//! For these families `1 / (psi(s) - q)` is rational, so
//! `W^(q)(x) = sum_i e^{r_i x} / psi'(r_i)` over the (at most three) real
//! roots of `psi(s) = q`, with the usual modification at a double root.

use std::sync::Arc;

use serde::Serialize;

use crate::boundary::Boundary;
use crate::error::{invalid, Error, Result};
use crate::model::LevyParams;
use crate::numerics::roots::real_roots;
use crate::params::{DifferentialExitParams, ExitParamFactory, Provenance};

/// `psi(s) = drift s + sigma^2 s^2 / 2 + lambda (eta / (eta + s) - 1)`.
pub fn laplace_exponent(p: &LevyParams, s: f64) -> Result<f64> {
    Ok(psi_derivatives(p, s)?[0])
}

/// `[psi, psi', psi'', psi''']` at `s`.
fn psi_derivatives(p: &LevyParams, s: f64) -> Result<[f64; 4]> {
    let sig2 = p.sigma * p.sigma;
    let mut out = [
        p.drift * s + 0.5 * sig2 * s * s,
        p.drift + sig2 * s,
        sig2,
        0.0,
    ];
    if p.has_jumps() {
        let e = p.jump_rate;
        let den = e + s;
        if den == 0.0 {
            return Err(Error::Pole(s));
        }
        let l = p.jump_intensity;
        out[0] += l * (e / den - 1.0);
        out[1] -= l * e / (den * den);
        out[2] += 2.0 * l * e / (den * den * den);
        out[3] -= 6.0 * l * e / (den * den * den * den);
    }
    Ok(out)
}

/// Rejects triplets without a closed-form scale function in this crate.
pub fn check_supported(p: &LevyParams) -> Result<()> {
    p.validate()?;
    if p.sigma > 0.0 {
        return Ok(());
    }
    if !p.has_jumps() {
        return Err(Error::UnsupportedModel(
            "pure-drift Lévy process has no scale-function family here".into(),
        ));
    }
    if !(p.drift > 0.0) {
        return Err(Error::UnsupportedModel(format!(
            "bounded-variation spectrally negative process needs positive drift, got {}",
            p.drift
        )));
    }
    Ok(())
}

/// `(c0 + c1 x) e^{rate x}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct ExpTerm {
    rate: f64,
    c0: f64,
    c1: f64,
}

/// `W^(q)` as a finite exponential sum.
#[derive(Debug, Clone, Serialize)]
pub struct ScaleFunction {
    params: LevyParams,
    q: f64,
    terms: Vec<ExpTerm>,
    /// Largest root of `psi(s) = q` (the right inverse `Phi(q)`).
    phi: f64,
}

impl ScaleFunction {
    pub fn new(params: LevyParams, q: f64) -> Result<Self> {
        if !(q >= 0.0) {
            return Err(invalid("q", "must be >= 0"));
        }
        Self::for_rate(params, q)
    }

    /// Like [`ScaleFunction::new`] but allows a negative rate, as needed
    /// for tilted scale functions `W_s^(p)` with `p = q - psi(s) < 0`.
    pub fn for_rate(params: LevyParams, q: f64) -> Result<Self> {
        check_supported(&params)?;
        let sig2 = params.sigma * params.sigma;
        // psi(s) - q, times (eta + s) when jumps are present, in increasing degree.
        let coeffs: Vec<f64> = if params.has_jumps() {
            let e = params.jump_rate;
            let l = params.jump_intensity;
            let m = params.drift;
            vec![-q * e, m * e - l - q, 0.5 * sig2 * e + m, 0.5 * sig2]
        } else {
            vec![-q, params.drift, 0.5 * sig2]
        };
        let roots = real_roots(&coeffs, 1e-9)?;
        let mut terms = Vec::with_capacity(roots.len());
        for root in &roots {
            let d = psi_derivatives(&params, root.value)?;
            if root.multiplicity == 1 {
                terms.push(ExpTerm {
                    rate: root.value,
                    c0: 1.0 / d[1],
                    c1: 0.0,
                });
            } else {
                terms.push(ExpTerm {
                    rate: root.value,
                    c0: -2.0 * d[3] / (3.0 * d[2] * d[2]),
                    c1: 2.0 / d[2],
                });
            }
        }
        let phi = roots.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            params,
            q,
            terms,
            phi,
        })
    }

    pub fn params(&self) -> &LevyParams {
        &self.params
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Right inverse `Phi(q)`.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Roots of `psi(s) = q`, ascending.
    pub fn roots(&self) -> Vec<f64> {
        let mut r: Vec<f64> = self.terms.iter().map(|t| t.rate).collect();
        r.sort_by(f64::total_cmp);
        r
    }

    /// `(e^{-Phi x} W(x), e^{-Phi x} W'(x))` for `x >= 0`.
    pub fn scaled(&self, x: f64) -> (f64, f64) {
        let mut w = 0.0;
        let mut dw = 0.0;
        for t in &self.terms {
            let e = ((t.rate - self.phi) * x).exp();
            w += (t.c0 + t.c1 * x) * e;
            dw += (t.c0 * t.rate + t.c1 + t.c1 * t.rate * x) * e;
        }
        (w, dw)
    }

    pub fn w(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Ok(0.0);
        }
        let (w, _) = self.scaled(x);
        finite((self.phi * x).exp() * w, "W")
    }

    /// Right derivative `W'(x)` for `x >= 0`; zero for `x < 0`.
    pub fn w_prime(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Ok(0.0);
        }
        let (_, dw) = self.scaled(x);
        finite((self.phi * x).exp() * dw, "W'")
    }

    /// `W'(x) / W(x)` for `x > 0`, computed without overflow.
    pub fn log_derivative(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain {
                level: x,
                reason: "scale-function log-derivative needs a positive argument".into(),
            });
        }
        let (w, dw) = self.scaled(x);
        if !(w > 0.0) {
            return Err(Error::Overflow(format!("W underflow at {x}")));
        }
        Ok(dw / w)
    }

    /// `e^{-Phi y} e^{s y} Z_s^(p)(y)` for `y >= 0`, with `p = q - psi(s)`.
    ///
    /// Partial fractions of `1 / (psi - q)` make the `e^{sy}` parts of
    /// `e^{sy} (1 + p ∫ W_s)` cancel exactly, leaving
    /// `sum_k e^{r_k y} p (c0_k / (r_k - s) + c1_k (y / (r_k - s) - 1 / (r_k - s)^2))`.
    /// `p / (r_k - s)` is evaluated as a divided difference of `psi`, so
    /// nothing cancels when `p` is large.
    fn deficit_z_scaled(&self, s: f64, p: f64, y: f64) -> f64 {
        if p == 0.0 {
            return ((s - self.phi) * y).exp();
        }
        self.terms
            .iter()
            .map(|t| {
                let k = t.rate - s;
                let d = psi_divided_difference(&self.params, t.rate, s);
                let coeff = if t.c1 == 0.0 {
                    t.c0 * d
                } else {
                    t.c0 * d + t.c1 * (y * d - d / k)
                };
                coeff * ((t.rate - self.phi) * y).exp()
            })
            .sum()
    }

    /// `e^{-2 Phi y} c(y) W(y)` when every root is simple.
    ///
    /// With `psi(r_k) = q` the diagonal terms of `Z W' - Z' W` vanish
    /// identically and each pair leaves
    /// `-c_j c_k (r_j - r_k)^2 psi[r_j, r_k, s] e^{(r_j + r_k) y}`, so the
    /// `e^{2 Phi y}` parts never meet a subtraction.
    fn deficit_c_scaled(&self, s: f64, y: f64) -> Option<f64> {
        if self.terms.iter().any(|t| t.c1 != 0.0) {
            return None;
        }
        let mut total = 0.0;
        for (j, a) in self.terms.iter().enumerate() {
            for b in &self.terms[j + 1..] {
                let gap = a.rate - b.rate;
                let e = ((a.rate + b.rate - 2.0 * self.phi) * y).exp();
                total -= a.c0 * b.c0 * gap * gap * psi_second_divided_difference(&self.params, a.rate, b.rate, s) * e;
            }
        }
        Some(total)
    }

    /// `∫_0^x e^{-s y} W(y) dy` in closed form.
    fn tilted_primitive(&self, s: f64, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let k = t.rate - s;
                t.c0 * exp_moment0(k, x) + t.c1 * exp_moment1(k, x)
            })
            .sum()
    }
}

/// `(psi(a) - psi(b)) / (a - b)`, or `psi'(a)` when `a == b`.
fn psi_divided_difference(p: &LevyParams, a: f64, b: f64) -> f64 {
    let mut d = p.drift + 0.5 * p.sigma * p.sigma * (a + b);
    if p.has_jumps() {
        let e = p.jump_rate;
        d -= p.jump_intensity * e / ((e + a) * (e + b));
    }
    d
}

/// `psi[a, b, c]`: second divided difference of the Laplace exponent.
fn psi_second_divided_difference(p: &LevyParams, a: f64, b: f64, c: f64) -> f64 {
    let mut d = 0.5 * p.sigma * p.sigma;
    if p.has_jumps() {
        let e = p.jump_rate;
        d += p.jump_intensity * e / ((e + a) * (e + b) * (e + c));
    }
    d
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow(what.to_string()))
    }
}

/// `∫_0^x e^{k t} dt`.
fn exp_moment0(k: f64, x: f64) -> f64 {
    if k == 0.0 {
        x
    } else {
        (k * x).exp_m1() / k
    }
}

/// `∫_0^x t e^{k t} dt`.
fn exp_moment1(k: f64, x: f64) -> f64 {
    let kx = k * x;
    if kx.abs() < 1e-2 {
        // sum_n k^n x^{n+2} / (n! (n + 2))
        let mut term = x * x;
        let mut total = 0.0;
        for n in 0..12 {
            total += term / (n as f64 + 2.0);
            term *= kx / (n as f64 + 1.0);
        }
        total
    } else {
        (x * kx.exp()) / k - kx.exp_m1() / (k * k)
    }
}

/// Everything needed to evaluate `W^(q)`, `W_s^(p)`, `Z_s^(p)` for one `(q, s)`.
#[derive(Debug, Clone, Serialize)]
pub struct LevyScaleContext {
    pub q: f64,
    pub s: f64,
    /// Tilted discount `p = q - psi(s)`.
    pub p: f64,
    scale: ScaleFunction,
}

impl LevyScaleContext {
    pub fn new(params: LevyParams, q: f64, s: f64) -> Result<Self> {
        if !(s >= 0.0) {
            return Err(invalid("s", "must be >= 0"));
        }
        let scale = ScaleFunction::new(params, q)?;
        let p = q - laplace_exponent(&params, s)?;
        Ok(Self { q, s, p, scale })
    }

    pub fn scale(&self) -> &ScaleFunction {
        &self.scale
    }

    pub fn params(&self) -> &LevyParams {
        &self.scale.params
    }

    pub fn w(&self, x: f64) -> Result<f64> {
        self.scale.w(x)
    }

    /// `W_s^(p)(x) = e^{-s x} W^(q)(x)`.
    pub fn w_tilted(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Ok(0.0);
        }
        let (w, _) = self.scale.scaled(x);
        finite(((self.scale.phi - self.s) * x).exp() * w, "W_s")
    }

    /// `Z_s^(p)(x) = 1 + p ∫_0^x W_s^(p)(y) dy`, equal to 1 for `x <= 0`.
    pub fn z_tilted(&self, x: f64) -> Result<f64> {
        if x <= 0.0 || self.p == 0.0 {
            return Ok(1.0);
        }
        finite(1.0 + self.p * self.scale.tilted_primitive(self.s, x), "Z_s")
    }

    pub fn z_tilted_prime(&self, x: f64) -> Result<f64> {
        Ok(self.p * self.w_tilted(x)?)
    }

    /// `b` at gap `y`: `W^(q)'(y) / W^(q)(y)`.
    pub fn b_at_gap(&self, y: f64) -> Result<f64> {
        self.scale.log_derivative(y)
    }

    /// `e^{sy} Z_s(y)`; the deficit transform's analogue of `Z^(q)`.
    pub fn deficit_z(&self, y: f64) -> Result<f64> {
        if y <= 0.0 {
            return Ok((self.s * y).exp());
        }
        let z = self.scale.deficit_z_scaled(self.s, self.p, y);
        finite((self.scale.phi * y).exp() * z, "e^{sy} Z_s")
    }

    /// `c` at gap `y`: `e^{sy} (Z_s(y) W_s'(y) / W_s(y) - Z_s'(y))`. The
    /// factor `e^{sy}` turns the tilted measure's `e^{s X}` into the deficit
    /// `e^{-s(u - X)}`; without it `c` would depend on `s` even for
    /// continuous paths.
    pub fn c_at_gap(&self, y: f64) -> Result<f64> {
        let (w, dw) = self.scale.scaled(y);
        if !(y > 0.0 && w > 0.0) {
            return Err(Error::Domain {
                level: y,
                reason: "c needs a positive gap".into(),
            });
        }
        // Everything below carries the common factor e^{-Phi y}, which
        // cancels against the division by the scaled W.
        let c = match self.scale.deficit_c_scaled(self.s, y) {
            Some(cw) => cw / w,
            None => {
                let z = self.scale.deficit_z_scaled(self.s, self.p, y);
                z * (dw / w - self.s) - self.p * w
            }
        };
        finite((self.scale.phi * y).exp() * c, "c")
    }

    /// `B^(q)(x; u, v) = W(x - u) / W(v - u)`.
    pub fn two_sided_b(&self, x: f64, u: f64, v: f64) -> Result<f64> {
        check_order(x, u, v)?;
        let (num, _) = self.scale.scaled(x - u);
        let (den, _) = self.scale.scaled(v - u);
        if x < u {
            return Ok(0.0);
        }
        Ok((self.scale.phi * (x - v)).exp() * num / den)
    }

    /// `C^(q,s)(x; u, v) = e^{s(x-u)} Z_s(x - u) - e^{s(v-u)} Z_s(v - u) W(x - u) / W(v - u)`.
    pub fn two_sided_c(&self, x: f64, u: f64, v: f64) -> Result<f64> {
        check_order(x, u, v)?;
        let (y, a) = (x - u, v - u);
        if y < 0.0 {
            return Ok((self.s * y).exp());
        }
        let ratio = self.scale.scaled(y).0 / self.scale.scaled(a).0;
        let phi = self.scale.phi;
        let za = self.scale.deficit_z_scaled(self.s, self.p, a);
        let zy = self.scale.deficit_z_scaled(self.s, self.p, y);
        finite((phi * y).exp() * (zy - za * ratio), "C")
    }
}

fn check_order(x: f64, u: f64, v: f64) -> Result<()> {
    if !(u < v) {
        return Err(invalid("u/v", format!("need u < v, got u={u}, v={v}")));
    }
    if x > v {
        return Err(invalid("x", format!("x={x} above v={v}")));
    }
    Ok(())
}

/// Lévy triplet of the process under the exponential tilt indexed by `s`:
/// drift `mu + sigma^2 s`, jump intensity `lambda eta / (eta + s)`, jump rate `eta + s`.
pub fn tilted_params(p: &LevyParams, s: f64) -> LevyParams {
    let sig2 = p.sigma * p.sigma;
    if p.has_jumps() {
        LevyParams::perturbed(
            p.drift + sig2 * s,
            p.sigma,
            p.jump_intensity * p.jump_rate / (p.jump_rate + s),
            p.jump_rate + s,
        )
    } else {
        LevyParams::brownian(p.drift + sig2 * s, p.sigma)
    }
}

pub fn scale_w(params: &LevyParams, q: f64, x: f64) -> Result<f64> {
    ScaleFunction::new(*params, q)?.w(x)
}

pub fn scale_z(params: &LevyParams, q: f64, s: f64, x: f64) -> Result<f64> {
    LevyScaleContext::new(*params, q, s)?.z_tilted(x)
}

pub fn levy_b(params: &LevyParams, q: f64, f: &dyn Boundary, x: f64) -> Result<f64> {
    ScaleFunction::new(*params, q)?.log_derivative(f.gap(x)?)
}

pub fn levy_c(params: &LevyParams, q: f64, s: f64, f: &dyn Boundary, x: f64) -> Result<f64> {
    LevyScaleContext::new(*params, q, s)?.c_at_gap(f.gap(x)?)
}

pub struct LevyExitParams {
    ctx: Arc<LevyScaleContext>,
    boundary: Arc<dyn Boundary>,
    family: &'static str,
}

impl LevyExitParams {
    pub fn new(params: LevyParams, boundary: Arc<dyn Boundary>, q: f64, s: f64) -> Result<Self> {
        let family = crate::model::ProcessModel::Levy(params).family_name();
        Ok(Self {
            ctx: Arc::new(LevyScaleContext::new(params, q, s)?),
            boundary,
            family,
        })
    }

    pub fn context(&self) -> &LevyScaleContext {
        &self.ctx
    }
}

impl DifferentialExitParams for LevyExitParams {
    fn b(&self, z: f64) -> Result<f64> {
        self.ctx.b_at_gap(self.boundary.gap(z)?)
    }

    fn c(&self, z: f64) -> Result<f64> {
        self.ctx.c_at_gap(self.boundary.gap(z)?)
    }

    fn provenance(&self) -> Provenance {
        Provenance {
            family: self.family,
            q: self.ctx.q,
            s: self.ctx.s,
            extrapolated: false,
        }
    }
}

/// Factory for Lévy exit parameters.
#[derive(Debug, Clone, Copy)]
pub struct LevyFamily(pub LevyParams);

impl ExitParamFactory for LevyFamily {
    fn exit_params(
        &self,
        boundary: Arc<dyn Boundary>,
        q: f64,
        s: f64,
    ) -> Result<Arc<dyn DifferentialExitParams>> {
        Ok(Arc::new(LevyExitParams::new(self.0, boundary, q, s)?))
    }
}
