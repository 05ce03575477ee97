//! Loss-carry-forward taxation. With tax paid at rate `γ(X̄)` on increments
//! of the running maximum, the taxed process is `U = X - γ_x(X̄)` where
//! `γ̄_x(y) = x + ∫_x^y (1 - γ)` and `γ_x(y) = y - γ̄_x(y)`. Tax functionals
//! reduce to untaxed ones for the boundary
//! `f*(z) = f(γ̄_x(z)) + γ_x(z)` and upper level `γ̄_x^{-1}(K)`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::boundary::{Boundary, DrawdownBoundary};
use crate::engine::{evaluate, weighted_prefix_integral, EngineSettings, Evaluation};
use crate::error::{invalid, Error, Result};
use crate::numerics::roots::{safeguarded_newton, RootOptions};
use crate::params::ExitParamFactory;
use crate::query::FunctionalQuery;
use crate::schedule::{validate_tax, TaxSchedule};

#[derive(Debug, Clone, PartialEq)]
pub struct TaxContext {
    schedule: TaxSchedule,
    x: f64,
}

impl TaxContext {
    pub fn new(schedule: TaxSchedule, x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(invalid("x", "must be finite"));
        }
        let report = validate_tax(&schedule, (x, x + 1.0));
        if let Some(v) = report.violations.first() {
            return Err(invalid("tax", format!("{}: {}", v.constraint, v.detail)));
        }
        Ok(Self { schedule, x })
    }

    pub fn schedule(&self) -> &TaxSchedule {
        &self.schedule
    }

    pub fn start(&self) -> f64 {
        self.x
    }

    fn check(&self, y: f64) -> Result<()> {
        if !(y >= self.x) {
            return Err(Error::Domain {
                level: y,
                reason: format!("below the start level {}", self.x),
            });
        }
        Ok(())
    }

    /// `γ̄_x(y) = x + ∫_x^y (1 - γ(z)) dz` for `y >= x`.
    pub fn gamma_bar(&self, y: f64) -> Result<f64> {
        self.check(y)?;
        Ok(y - self.schedule.integral(self.x, y))
    }

    /// Cumulative tax `γ_x(y) = y - γ̄_x(y)`.
    pub fn gamma_x(&self, y: f64) -> Result<f64> {
        self.check(y)?;
        Ok(self.schedule.integral(self.x, y))
    }

    /// Inverse of `γ̄_x` on `[x, ∞)`.
    pub fn gamma_bar_inv(&self, b: f64) -> Result<f64> {
        self.check(b)?;
        if b == self.x {
            return Ok(b);
        }
        if let TaxSchedule::Constant { rate } = self.schedule {
            return Ok((b - rate * self.x) / (1.0 - rate));
        }
        // widened so rounding cannot leave the root just outside the bracket
        let span = (b - self.x) / (1.0 - self.schedule.max_rate());
        let hi = self.x + span * (1.0 + 1e-9) + 1e-12 * b.abs().max(1.0);
        safeguarded_newton(
            |y| Ok((self.gamma_bar(y)? - b, 1.0 - self.schedule.rate(y))),
            self.x,
            hi,
            RootOptions {
                rel_tol: 1e-15,
                residual_tol: 1e-13 * b.abs().max(1.0),
                max_iter: 200,
            },
        )
    }

    pub fn f_star(&self, f: &dyn Boundary, z: f64) -> Result<f64> {
        Ok(f.level(self.gamma_bar(z)?)? + self.gamma_x(z)?)
    }
}

/// `f*` as a boundary. Evaluated exactly rather than tabulated, so no
/// interpolation error enters the exit parameters.
#[derive(Debug, Clone)]
pub struct TaxAdjustedBoundary {
    base: Arc<dyn Boundary>,
    ctx: TaxContext,
}

impl TaxAdjustedBoundary {
    pub fn new(base: Arc<dyn Boundary>, ctx: TaxContext) -> Self {
        Self { base, ctx }
    }

    /// Piecewise-linear copy on `levels`, for export.
    pub fn materialize(&self, levels: &[f64]) -> Result<DrawdownBoundary> {
        let points = levels
            .iter()
            .map(|&z| Ok((z, self.level(z)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(DrawdownBoundary::tabulated(&points))
    }
}

impl Boundary for TaxAdjustedBoundary {
    fn level(&self, z: f64) -> Result<f64> {
        self.ctx.f_star(self.base.as_ref(), z)
    }

    /// `z - f*(z) = γ̄_x(z) - f(γ̄_x(z))`.
    fn gap(&self, z: f64) -> Result<f64> {
        self.base.gap(self.ctx.gamma_bar(z)?)
    }
}

/// Tax payment weight `w(X̄)` multiplying `dX̄`.
#[derive(Clone)]
pub enum PayoutWeight {
    Constant(f64),
    /// `w = γ(X̄)`: the tax actually paid.
    TaxRate,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for PayoutWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PayoutWeight::Constant(v) => write!(f, "Constant({v})"),
            PayoutWeight::TaxRate => write!(f, "TaxRate"),
            PayoutWeight::Custom(_) => write!(f, "Custom(<fn>)"),
        }
    }
}

impl PayoutWeight {
    pub fn eval(&self, y: f64, schedule: &TaxSchedule) -> Result<f64> {
        let v = match self {
            PayoutWeight::Constant(v) => *v,
            PayoutWeight::TaxRate => schedule.rate(y),
            PayoutWeight::Custom(f) => f(y),
        };
        if !(v >= 0.0) || !v.is_finite() {
            return Err(invalid("payout", format!("weight {v} at {y} must be finite and >= 0")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpvMode {
    /// Until the drawdown time or the taxed process reaching `K`, whichever is first.
    UntilEither,
    /// Until reaching `K`, counted only on paths that do so before drawdown.
    OnUpperExit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaxEvaluation {
    pub g: f64,
    pub h: f64,
    pub g_error: f64,
    pub h_error: f64,
    /// `γ̄_x^{-1}(K)`: the pre-tax level matching the taxed target.
    pub upper: f64,
    pub extrapolated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpvResult {
    pub value: f64,
    pub error: f64,
    pub upper: f64,
    pub extrapolated: bool,
}

fn upper_level(ctx: &TaxContext, query: &FunctionalQuery) -> Result<f64> {
    query.validate()?;
    if query.x != ctx.start() {
        return Err(Error::Query(format!(
            "tax context starts at {} but the query starts at {}",
            ctx.start(),
            query.x
        )));
    }
    ctx.gamma_bar_inv(query.k)
}

/// Exit transform and drawdown law of the taxed process.
pub fn tax_evaluate(
    factory: &dyn ExitParamFactory,
    ctx: &TaxContext,
    f: Arc<dyn Boundary>,
    query: &FunctionalQuery,
    settings: &EngineSettings,
) -> Result<TaxEvaluation> {
    let upper = upper_level(ctx, query)?;
    let star: Arc<dyn Boundary> = Arc::new(TaxAdjustedBoundary::new(f, ctx.clone()));
    let params = factory.exit_params(star, query.q, query.s)?;
    let inner = FunctionalQuery { k: upper, ..*query };
    let Evaluation { g, h, g_error, h_error, .. } = evaluate(params.as_ref(), &inner, settings)?;
    Ok(TaxEvaluation {
        g,
        h,
        g_error,
        h_error,
        upper,
        extrapolated: params.provenance().extrapolated,
    })
}

pub fn tax_exit(factory: &dyn ExitParamFactory, ctx: &TaxContext, f: Arc<dyn Boundary>, query: &FunctionalQuery) -> Result<f64> {
    Ok(tax_evaluate(factory, ctx, f, query, &EngineSettings::default())?.g)
}

pub fn tax_drawdown_law(
    factory: &dyn ExitParamFactory,
    ctx: &TaxContext,
    f: Arc<dyn Boundary>,
    query: &FunctionalQuery,
) -> Result<f64> {
    Ok(tax_evaluate(factory, ctx, f, query, &EngineSettings::default())?.h)
}

/// Expected present value of `∫ e^{-qu} w(X̄_u) dX̄_u` in either mode.
pub fn tax_epv(
    factory: &dyn ExitParamFactory,
    ctx: &TaxContext,
    f: Arc<dyn Boundary>,
    weight: &PayoutWeight,
    query: &FunctionalQuery,
    mode: EpvMode,
    settings: &EngineSettings,
) -> Result<EpvResult> {
    let upper = upper_level(ctx, query)?;
    let star: Arc<dyn Boundary> = Arc::new(TaxAdjustedBoundary::new(f, ctx.clone()));
    let at_q = factory.exit_params(star.clone(), query.q, query.s)?;
    let schedule = ctx.schedule();
    let mut w = |y: f64| weight.eval(y, schedule);
    match mode {
        EpvMode::UntilEither => {
            let r = weighted_prefix_integral(&mut |z| at_q.b(z), &mut w, query.x, upper, settings)?;
            Ok(EpvResult {
                value: r.weighted,
                error: r.weighted_error,
                upper,
                extrapolated: at_q.provenance().extrapolated,
            })
        }
        EpvMode::OnUpperExit => {
            // exp(-∫_x^y b^q - ∫_y^U b^0) = exp(-∫_x^U b^0) exp(-∫_x^y (b^q - b^0))
            let at_zero = factory.exit_params(star, 0.0, query.s)?;
            let r = weighted_prefix_integral(
                &mut |z| Ok(at_q.b(z)? - at_zero.b(z)?),
                &mut w,
                query.x,
                upper,
                settings,
            )?;
            let total = weighted_prefix_integral(&mut |z| at_zero.b(z), &mut |_| Ok(0.0), query.x, upper, settings)?;
            let factor = (-total.exponent).exp();
            Ok(EpvResult {
                value: factor * r.weighted,
                error: factor * (r.weighted_error + r.weighted * total.exponent_error),
                upper,
                extrapolated: at_q.provenance().extrapolated || at_zero.provenance().extrapolated,
            })
        }
    }
}

/// Closed forms for a spectrally negative Lévy process, constant tax rate
/// and an affine boundary `f(s) = ξ s - d`.
pub mod closed_form {
    use crate::error::Result;
    use crate::levy::ScaleFunction;
    use crate::model::LevyParams;
    use crate::numerics::quad::{integrate, QuadTolerance};

    #[derive(Debug, Clone, Copy)]
    pub struct AffineTaxSetup {
        pub params: LevyParams,
        pub q: f64,
        pub xi: f64,
        pub d: f64,
        pub gamma: f64,
    }

    impl AffineTaxSetup {
        fn gap(&self, z: f64) -> f64 {
            (1.0 - self.xi) * z + self.d
        }

        fn power(&self) -> f64 {
            1.0 / ((1.0 - self.xi) * (1.0 - self.gamma))
        }

        /// `(W^(q)(f̄(x)) / W^(q)(f̄(K)))^{1/((1-ξ)(1-γ))}`
        pub fn exit(&self, x: f64, k: f64) -> Result<f64> {
            let w = ScaleFunction::new(self.params, self.q)?;
            Ok((w.w(self.gap(x))? / w.w(self.gap(k))?).powf(self.power()))
        }

        /// `(1/(1-γ)) ∫_x^K (W^(q)(f̄(x)) / W^(q)(f̄(z)))^p dz` (unit payout).
        pub fn epv_until_either(&self, x: f64, k: f64) -> Result<f64> {
            let w = ScaleFunction::new(self.params, self.q)?;
            let wx = w.w(self.gap(x))?;
            let p = self.power();
            let r = integrate(|z| Ok((wx / w.w(self.gap(z))?).powf(p)), x, k, tol())?;
            Ok(r.value / (1.0 - self.gamma))
        }

        /// `(1/(1-γ)) ∫_x^K (W^(q)(f̄(x)) W(f̄(z)) / (W^(q)(f̄(z)) W(f̄(K))))^p dz` (unit payout).
        pub fn epv_on_upper_exit(&self, x: f64, k: f64) -> Result<f64> {
            let wq = ScaleFunction::new(self.params, self.q)?;
            let w0 = ScaleFunction::new(self.params, 0.0)?;
            let wx = wq.w(self.gap(x))?;
            let wk = w0.w(self.gap(k))?;
            let p = self.power();
            let r = integrate(
                |z| {
                    let y = self.gap(z);
                    Ok((wx / wq.w(y)? * w0.w(y)? / wk).powf(p))
                },
                x,
                k,
                tol(),
            )?;
            Ok(r.value / (1.0 - self.gamma))
        }
    }

    fn tol() -> QuadTolerance {
        QuadTolerance {
            abs_tol: 1e-14,
            rel_tol: 1e-13,
            max_panels: 2000,
        }
    }
}
