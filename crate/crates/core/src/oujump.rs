//! First-passage functionals of the Ornstein-Uhlenbeck process with
//! exponential downward jumps, via the integral representation
//! `F_i(x) = ∫_{Γ_i} φ_q(z) e^{-xz} dz` over `Γ_1 = (0, η)`, `Γ_2 = (η, ∞)`,
//! `Γ_3 = (-∞, 0)` with
//! `φ_q(z) = |z|^{q/θ-1} exp(-σ²z²/(4θ) + μz) |z-η|^{λ/θ}`.
//!
//! The weight has integrable power singularities at `0` and `η`. Each is
//! handled by splitting off `G(0) b^{β+1} / (β+1)` exactly and integrating
//! the bounded remainder `w^β (G(w) - G(0))` adaptively.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::boundary::Boundary;
use crate::error::{Error, Result};
use crate::model::OuJumpParams;
use crate::numerics::quad::{integrate, QuadTolerance};
use crate::params::{DifferentialExitParams, ExitParamFactory, Provenance};

/// Smallest admissible `q / θ`; below it the weight's endpoint exponent is
/// too close to non-integrable.
pub const Q_MIN_FACTOR: f64 = 1e-3;

const REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `(0, η)`
    Inner,
    /// `(η, ∞)`
    Outer,
    /// `(-∞, 0)`
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    /// plain weight
    F,
    /// weight times `-η / (z - η)`
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FIntegrals {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstPassage {
    pub i1: f64,
    pub i2: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OuExitDerivatives {
    pub b: f64,
    pub c: f64,
    /// Relative gap between the `h/2` difference quotient and the extrapolated value.
    pub disagreement: f64,
    /// A slightly negative value was clamped to zero.
    pub clamped: bool,
}

/// Quantities depending only on the lower level `u`.
#[derive(Debug, Clone, Copy)]
struct LowerLevel {
    at_u: FIntegrals,
    conv: f64,
    den: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OuJumpKernel {
    pub params: OuJumpParams,
    pub q: f64,
    alpha: f64,
    kappa: f64,
    /// Log-units below the local peak at which Gaussian tails are cut.
    pub tail_drop: f64,
}

impl OuJumpKernel {
    pub fn new(params: OuJumpParams, q: f64) -> Result<Self> {
        params.validate()?;
        if !(params.lambda > 0.0) {
            return Err(Error::UnsupportedModel(
                "ou-jump needs a positive jump intensity; use the diffusion family without jumps".into(),
            ));
        }
        let q_min = Q_MIN_FACTOR * params.theta;
        if !(q >= q_min) {
            return Err(Error::SmallDiscount { q, q_min });
        }
        Ok(Self {
            params,
            q,
            alpha: q / params.theta,
            kappa: params.lambda / params.theta,
            tail_drop: 40.0,
        })
    }

    pub fn with_tail_drop(mut self, drop: f64) -> Self {
        self.tail_drop = drop;
        self
    }

    /// `φ_q(z)`.
    pub fn weight(&self, z: f64) -> f64 {
        let p = &self.params;
        z.abs().powf(self.alpha - 1.0)
            * (-p.sigma * p.sigma * z * z / (4.0 * p.theta) + p.mu * z).exp()
            * (z - p.eta).abs().powf(self.kappa)
    }

    fn quadratic(&self, z: f64, x: f64) -> f64 {
        let p = &self.params;
        -p.sigma * p.sigma * z * z / (4.0 * p.theta) + (p.mu - x) * z
    }

    /// Unconstrained maximiser of the quadratic part.
    fn peak(&self, x: f64) -> f64 {
        let p = &self.params;
        2.0 * p.theta * (p.mu - x) / (p.sigma * p.sigma)
    }

    /// `∫_0^b w^β G(w) dw` for `β > -1` and smooth `G`.
    fn singular_power(&self, beta: f64, b: f64, g: &dyn Fn(f64) -> f64) -> Result<f64> {
        let g0 = g(0.0);
        let lead = g0 * b.powf(beta + 1.0) / (beta + 1.0);
        let rest = integrate(
            |w| {
                if w == 0.0 {
                    return Ok(0.0);
                }
                Ok(w.powf(beta) * (g(w) - g0))
            },
            0.0,
            b,
            QuadTolerance {
                abs_tol: (1e-15 * lead.abs()).max(1e-300),
                rel_tol: REL_TOL,
                max_panels: 4000,
            },
        )?;
        Ok(lead + rest.value)
    }

    /// `∫_a^∞ f` for an integrand with a Gaussian tail, cut where the log of
    /// the integrand falls `tail_drop` below its value near the local peak.
    fn tail(&self, a: f64, sign: f64, x: f64, f: &dyn Fn(f64) -> f64, floor: f64) -> Result<f64> {
        let p = &self.params;
        let log_f = |w: f64| f(w).abs().ln();
        let width = (2.0 * p.theta).sqrt() / p.sigma;
        let start = a.max(sign * self.peak(x));
        let reference = log_f(start).max(log_f(a));
        let mut end = start + width;
        let mut step = width;
        while log_f(end) > reference - self.tail_drop {
            end += step;
            step *= 1.5;
            if !end.is_finite() || step > 1e6 {
                return Err(Error::Divergent(end));
            }
        }
        let pieces = 8;
        let h = (end - a) / pieces as f64;
        let mut total = 0.0;
        for i in 0..pieces {
            let lo = a + h * i as f64;
            let r = integrate(
                |w| Ok(f(w)),
                lo,
                lo + h,
                QuadTolerance {
                    abs_tol: (1e-16 * floor.abs()).max(1e-300),
                    rel_tol: REL_TOL,
                    max_panels: 4000,
                },
            )?;
            total += r.value;
        }
        Ok(total)
    }

    /// `∫_{Γ} φ_q(z) e^{-xz} m(z) k(z) dz` where `k` is 1 (F) or
    /// `-η/(z-η)` (C) and `m` is an extra smooth factor.
    fn region_integral(&self, region: Region, x: f64, kind: Kind, extra: &dyn Fn(f64) -> f64) -> Result<f64> {
        let eta = self.params.eta;
        let am1 = self.alpha - 1.0;
        let (pe, coef_inner, coef_outer) = match kind {
            Kind::F => (self.kappa, 1.0, 1.0),
            Kind::C => (self.kappa - 1.0, eta, -eta),
        };
        let smooth = |z: f64| self.quadratic(z, x).exp() * extra(z);
        let value = match region {
            Region::Inner => {
                let half = 0.5 * eta;
                let left = self.singular_power(am1, half, &|z| coef_inner * (eta - z).powf(pe) * smooth(z))?;
                let right = self.singular_power(pe, half, &|w| {
                    let z = eta - w;
                    coef_inner * z.powf(am1) * smooth(z)
                })?;
                left + right
            }
            Region::Outer => {
                let near = self.singular_power(pe, eta, &|w| {
                    let z = eta + w;
                    coef_outer * z.powf(am1) * smooth(z)
                })?;
                let far = self.tail(
                    2.0 * eta,
                    1.0,
                    x,
                    &|z| coef_outer * z.powf(am1) * (z - eta).powf(pe) * smooth(z),
                    near,
                )?;
                near + far
            }
            Region::Negative => {
                let split = eta.min(1.0);
                let near = self.singular_power(am1, split, &|w| (eta + w).powf(pe) * smooth(-w))?;
                let far = self.tail(split, -1.0, x, &|w| w.powf(am1) * (eta + w).powf(pe) * smooth(-w), near)?;
                near + far
            }
        };
        if !value.is_finite() {
            return Err(Error::Overflow(format!("weight integral at x = {x}")));
        }
        Ok(value)
    }

    pub fn f_integrals(&self, x: f64) -> Result<FIntegrals> {
        let one = |_: f64| 1.0;
        Ok(FIntegrals {
            f1: self.region_integral(Region::Inner, x, Kind::F, &one)?,
            f2: self.region_integral(Region::Outer, x, Kind::F, &one)?,
            f3: self.region_integral(Region::Negative, x, Kind::F, &one)?,
            c1: self.region_integral(Region::Inner, x, Kind::C, &one)?,
            c2: self.region_integral(Region::Outer, x, Kind::C, &one)?,
        })
    }

    /// `(F_1, F_2, F_3)` only.
    fn f_only(&self, x: f64) -> Result<[f64; 3]> {
        let one = |_: f64| 1.0;
        Ok([
            self.region_integral(Region::Inner, x, Kind::F, &one)?,
            self.region_integral(Region::Outer, x, Kind::F, &one)?,
            self.region_integral(Region::Negative, x, Kind::F, &one)?,
        ])
    }

    /// `(F_1', F_2', F_3')`, i.e. the integrals with an extra factor `-z`.
    fn f_prime(&self, x: f64) -> Result<[f64; 3]> {
        let minus_z = |z: f64| -z;
        Ok([
            self.region_integral(Region::Inner, x, Kind::F, &minus_z)?,
            self.region_integral(Region::Outer, x, Kind::F, &minus_z)?,
            self.region_integral(Region::Negative, x, Kind::F, &minus_z)?,
        ])
    }

    pub fn f3(&self, x: f64) -> Result<f64> {
        self.region_integral(Region::Negative, x, Kind::F, &|_| 1.0)
    }

    /// `E_x[e^{-q τ_v^+}] = F_3(x) / F_3(v)`.
    pub fn upward_passage(&self, x: f64, v: f64) -> Result<f64> {
        Ok(self.f3(x)? / self.f3(v)?)
    }

    /// `∫_0^∞ η e^{-ηy} F_3(u - y) dy` reduced by Fubini to a single
    /// integral over `Γ_3` with weight `η / (η - z)`.
    pub fn convolution(&self, u: f64) -> Result<f64> {
        let eta = self.params.eta;
        self.region_integral(Region::Negative, u, Kind::F, &|z| eta / (eta - z))
    }

    /// Same quantity by nested quadrature; slow, kept as a cross-check.
    pub fn convolution_nested(&self, u: f64) -> Result<f64> {
        let eta = self.params.eta;
        let end = 45.0 / eta;
        let r = integrate(
            |y| Ok(eta * (-eta * y).exp() * self.f3(u - y)?),
            0.0,
            end,
            QuadTolerance {
                abs_tol: 0.0,
                rel_tol: 1e-11,
                max_panels: 2000,
            },
        )?;
        Ok(r.value)
    }

    fn lower(&self, u: f64) -> Result<LowerLevel> {
        let at_u = self.f_integrals(u)?;
        let den = at_u.c2 * at_u.f1 - at_u.c1 * at_u.f2;
        let scale = (at_u.c2 * at_u.f1).abs() + (at_u.c1 * at_u.f2).abs();
        if !(den.abs() > 1e-12 * scale) {
            return Err(Error::IllConditioned { u, det: den });
        }
        Ok(LowerLevel {
            at_u,
            conv: self.convolution(u)?,
            den,
        })
    }

    /// `(I_1(y, u), I_2(y, u))` from `F_1(y), F_2(y)`.
    fn i12(lower: &LowerLevel, f: [f64; 3]) -> (f64, f64) {
        let a = &lower.at_u;
        (
            (a.c2 * f[0] - a.c1 * f[1]) / lower.den,
            (a.f1 * f[1] - a.f2 * f[0]) / lower.den,
        )
    }

    /// `(N(y), J(y))`: numerator of `B` and the bracket of `C` at level `y`.
    fn n_j(&self, lower: &LowerLevel, f: [f64; 3], s: f64) -> (f64, f64) {
        let (i1, i2) = Self::i12(lower, f);
        let deficit = self.params.eta / (self.params.eta + s);
        (f[2] - i1 * lower.at_u.f3 - i2 * lower.conv, i1 + i2 * deficit)
    }

    pub fn first_passage(&self, s: f64, x: f64, u: f64, v: f64) -> Result<FirstPassage> {
        check_levels(x, u, v)?;
        let lower = self.lower(u)?;
        let fx = self.f_only(x)?;
        let fv = self.f_only(v)?;
        let (i1, i2) = Self::i12(&lower, fx);
        let (nx, jx) = self.n_j(&lower, fx, s);
        let (nv, jv) = self.n_j(&lower, fv, s);
        let b = nx / nv;
        Ok(FirstPassage {
            i1,
            i2,
            b,
            c: jx - b * jv,
        })
    }

    /// `b` and `c` at `x` with lower level `u`, by central differences in
    /// `v` and one Richardson step.
    pub fn exit_derivatives(&self, s: f64, u: f64, x: f64) -> Result<OuExitDerivatives> {
        check_levels(x, u, x)?;
        let lower = self.lower(u)?;
        let (nx, jx) = self.n_j(&lower, self.f_only(x)?, s);
        let h = 1e-4_f64.max(1e-4 * x.abs());
        let quotient = |h: f64| -> Result<(f64, f64)> {
            let (np, jp) = self.n_j(&lower, self.f_only(x + h)?, s);
            let (nm, jm) = self.n_j(&lower, self.f_only(x - h)?, s);
            let (bp, bm) = (nx / np, nx / nm);
            let (cp, cm) = (jx - bp * jp, jx - bm * jm);
            Ok(((bp - bm) / (2.0 * h), (cp - cm) / (2.0 * h)))
        };
        let (db1, dc1) = quotient(h)?;
        let (db2, dc2) = quotient(0.5 * h)?;
        let db = (4.0 * db2 - db1) / 3.0;
        let dc = (4.0 * dc2 - dc1) / 3.0;
        let rel = |r: f64, d2: f64| (r - d2).abs() / r.abs().max(1e-6);
        let disagreement = rel(db, db2).max(rel(dc, dc2));
        if disagreement > 1e-5 {
            return Err(Error::StepSize { x, disagreement });
        }
        finish_derivatives(-db, dc, disagreement)
    }

    /// Same quantities from the analytic `x`-derivatives of the integrals:
    /// `b = N'(x)/N(x)`, `c = b J(x) - J'(x)`.
    pub fn exit_derivatives_semi_analytic(&self, s: f64, u: f64, x: f64) -> Result<OuExitDerivatives> {
        check_levels(x, u, x)?;
        let lower = self.lower(u)?;
        let fx = self.f_only(x)?;
        let dfx = self.f_prime(x)?;
        let (nx, jx) = self.n_j(&lower, fx, s);
        let (di1, di2) = Self::i12(&lower, dfx);
        let dn = dfx[2] - di1 * lower.at_u.f3 - di2 * lower.conv;
        let dj = di1 + di2 * self.params.eta / (self.params.eta + s);
        let b = dn / nx;
        finish_derivatives(b, b * jx - dj, 0.0)
    }

    /// Writes `x, F1, F2, F3, C1, C2` at each level.
    pub fn write_table_csv<W: Write>(&self, levels: &[f64], mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,f1,f2,f3,c1,c2")?;
        for &x in levels {
            let v = self.f_integrals(x).map_err(|e| std::io::Error::other(e.to_string()))?;
            writeln!(out, "{x:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}", v.f1, v.f2, v.f3, v.c1, v.c2)?;
        }
        Ok(())
    }
}

fn check_levels(x: f64, u: f64, v: f64) -> Result<()> {
    if !(u < v) || x < u || x > v {
        return Err(crate::error::invalid(
            "u/x/v",
            format!("need u <= x <= v and u < v (u={u}, x={x}, v={v})"),
        ));
    }
    Ok(())
}

const SIGN_TOL: f64 = 1e-6;

fn finish_derivatives(b: f64, c: f64, disagreement: f64) -> Result<OuExitDerivatives> {
    let mut clamped = false;
    let mut fix = |v: f64, name: &str| -> Result<f64> {
        if v >= 0.0 {
            Ok(v)
        } else if v >= -SIGN_TOL {
            clamped = true;
            Ok(0.0)
        } else {
            Err(Error::Domain {
                level: v,
                reason: format!("negative exit parameter {name}"),
            })
        }
    };
    let b = fix(b, "b")?;
    let c = fix(c, "c")?;
    Ok(OuExitDerivatives {
        b,
        c,
        disagreement,
        clamped,
    })
}

pub fn f_integrals(kernel: &OuJumpKernel, x: f64) -> Result<FIntegrals> {
    kernel.f_integrals(x)
}

pub fn ou_first_passage(kernel: &OuJumpKernel, s: f64, x: f64, u: f64, v: f64) -> Result<FirstPassage> {
    kernel.first_passage(s, x, u, v)
}

pub fn ou_b_c(kernel: &OuJumpKernel, s: f64, f: &dyn Boundary, x: f64) -> Result<OuExitDerivatives> {
    kernel.exit_derivatives(s, f.level(x)?, x)
}

/// Exit parameters for one `(q, s)`. At `q = 0` the values are linearly
/// extrapolated from `q_min` and `2 q_min`.
pub struct OuJumpExitParams {
    kernels: Vec<(f64, OuJumpKernel)>,
    boundary: Arc<dyn Boundary>,
    q: f64,
    s: f64,
    cache: Mutex<HashMap<u64, (f64, f64)>>,
}

impl OuJumpExitParams {
    pub fn new(params: OuJumpParams, boundary: Arc<dyn Boundary>, q: f64, s: f64) -> Result<Self> {
        if !(s >= 0.0) {
            return Err(crate::error::invalid("s", "must be >= 0"));
        }
        let kernels = if q == 0.0 {
            let q_min = Q_MIN_FACTOR * params.theta;
            vec![
                (2.0, OuJumpKernel::new(params, q_min)?),
                (-1.0, OuJumpKernel::new(params, 2.0 * q_min)?),
            ]
        } else {
            vec![(1.0, OuJumpKernel::new(params, q)?)]
        };
        Ok(Self {
            kernels,
            boundary,
            q,
            s,
            cache: Mutex::new(HashMap::new()),
        })
    }

    fn both(&self, z: f64) -> Result<(f64, f64)> {
        if let Some(&v) = self.cache.lock().expect("cache poisoned").get(&z.to_bits()) {
            return Ok(v);
        }
        let u = self.boundary.level(z)?;
        let mut b = 0.0;
        let mut c = 0.0;
        for (w, k) in &self.kernels {
            let d = k.exit_derivatives(self.s, u, z)?;
            b += w * d.b;
            c += w * d.c;
        }
        let v = (b.max(0.0), c.max(0.0));
        self.cache.lock().expect("cache poisoned").insert(z.to_bits(), v);
        Ok(v)
    }
}

impl DifferentialExitParams for OuJumpExitParams {
    fn b(&self, z: f64) -> Result<f64> {
        Ok(self.both(z)?.0)
    }

    fn c(&self, z: f64) -> Result<f64> {
        Ok(self.both(z)?.1)
    }

    fn provenance(&self) -> Provenance {
        Provenance {
            family: "ou-jump",
            q: self.q,
            s: self.s,
            extrapolated: self.q == 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OuJumpFamily(pub OuJumpParams);

impl ExitParamFactory for OuJumpFamily {
    fn exit_params(
        &self,
        boundary: Arc<dyn Boundary>,
        q: f64,
        s: f64,
    ) -> Result<Arc<dyn DifferentialExitParams>> {
        Ok(Arc::new(OuJumpExitParams::new(self.0, boundary, q, s)?))
    }
}
