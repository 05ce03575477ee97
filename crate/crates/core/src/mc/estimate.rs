use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::path::check_grid;
use super::path_rng;
use super::step::{bridge_dips, bridge_max, Stepper};
use crate::boundary::Boundary;
use crate::error::{invalid, Result};
use crate::model::ProcessModel;
use crate::numerics::NeumaierSum;
use crate::query::FunctionalQuery;
use crate::schedule::TaxSchedule;
use crate::tax::PayoutWeight;

/// Discount factors below `e^{-DISCOUNT_CUT}` end a path early.
const DISCOUNT_CUT: f64 = 27.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSettings {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    /// Paths still running at this time are counted as exhausted.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Worker threads; 0 uses the ambient rayon pool.
    #[serde(default, skip_serializing)]
    pub jobs: usize,
}

fn default_horizon() -> f64 {
    200.0
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            dt: 1e-3,
            seed: 1,
            horizon: default_horizon(),
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub horizon_exhausted: usize,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Upper exit before drawdown, untaxed.
    G,
    /// Discounted drawdown law, untaxed.
    H,
    GU,
    HU,
    EpvUntilEither,
    EpvOnUpperExit,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::G => "g",
            Target::H => "h",
            Target::GU => "g_u",
            Target::HU => "h_u",
            Target::EpvUntilEither => "epv_until_either",
            Target::EpvOnUpperExit => "epv_on_upper_exit",
        }
    }

    pub fn is_taxed(self) -> bool {
        !matches!(self, Target::G | Target::H)
    }
}

/// All four per-path payoffs share the same simulated paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalEstimates {
    pub exit: Estimate,
    pub drawdown: Estimate,
    pub epv_until_either: Estimate,
    pub epv_on_upper_exit: Estimate,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Outcome {
    exit: f64,
    drawdown: f64,
    epv_either: f64,
    epv_upper: f64,
    exhausted: bool,
}

struct PathJob<'a> {
    stepper: Stepper,
    f: &'a dyn Boundary,
    schedule: &'a TaxSchedule,
    weight: &'a PayoutWeight,
    query: FunctionalQuery,
    dt: f64,
    steps: usize,
    seed: u64,
}

impl PathJob<'_> {
    fn run(&self, index: u64) -> Result<Outcome> {
        let mut rng = path_rng(self.seed, index);
        self.run_with(&mut rng)
    }

    /// Simulates `X` and tracks the taxed running maximum `Ū = X̄ - T`, where
    /// `T` is the tax paid on running-maximum increments. The lower level is
    /// `f(Ū) + T` in `X` units. Crossing times are step end times.
    fn run_with<R: Rng>(&self, rng: &mut R) -> Result<Outcome> {
        let FunctionalQuery { x, k, q, s } = self.query;
        let mut out = Outcome::default();
        if x >= k {
            out.exit = 1.0;
            return Ok(out);
        }
        let kill = if q > 0.0 { DISCOUNT_CUT / q } else { f64::INFINITY };
        let mut state = x;
        let mut xbar = x;
        let mut ubar = x;
        let mut tax = 0.0;
        let mut lower = self.f.level(ubar)?;
        let mut epv = NeumaierSum::default();
        let mut clock = self.stepper.jump_clock(rng);

        for i in 1..=self.steps {
            let mut t = (i - 1) as f64 * self.dt;
            let mut remaining = self.dt;
            while remaining > 0.0 {
                let jump = clock <= remaining;
                let len = if jump { clock } else { remaining };
                let a = state;
                let (b, var) = self.stepper.advance(a, len, rng)?;
                t += len;
                let lower_start = lower;
                let top = bridge_max(a, b, var, xbar, rng);
                if top > xbar {
                    let disc = (-q * t).exp();
                    let dtax = self.schedule.integral(xbar, top);
                    let next_ubar = ubar + (top - xbar) - dtax;
                    if next_ubar >= k {
                        let frac = ((k - ubar) / (next_ubar - ubar)).clamp(0.0, 1.0);
                        let y = xbar + frac * (top - xbar);
                        epv.add(disc * self.weight.eval(0.5 * (xbar + y), self.schedule)? * (y - xbar));
                        out.exit = disc;
                        out.epv_either = epv.total();
                        out.epv_upper = out.epv_either;
                        return Ok(out);
                    }
                    epv.add(disc * self.weight.eval(0.5 * (xbar + top), self.schedule)? * (top - xbar));
                    xbar = top;
                    tax += dtax;
                    ubar = next_ubar;
                    lower = self.f.level(ubar)? + tax;
                }
                if b < lower || bridge_dips(a, b, var, lower_start, rng) {
                    out.drawdown = (-q * t).exp();
                    out.epv_either = epv.total();
                    return Ok(out);
                }
                state = b;
                remaining -= len;
                if jump {
                    state -= self.stepper.jump_size(rng);
                    clock = self.stepper.jump_clock(rng);
                    if state < lower {
                        out.drawdown = (-q * t - s * (lower - state)).exp();
                        out.epv_either = epv.total();
                        return Ok(out);
                    }
                } else {
                    clock -= len;
                }
            }
            if t >= kill {
                out.epv_either = epv.total();
                return Ok(out);
            }
        }
        out.epv_either = epv.total();
        out.exhausted = true;
        Ok(out)
    }
}

fn summarize(values: impl Iterator<Item = f64> + Clone, n: usize, settings: &McSettings, exhausted: usize) -> Estimate {
    let mean = values.clone().collect::<NeumaierSum>().total() / n as f64;
    let ss = values.map(|v| (v - mean) * (v - mean)).collect::<NeumaierSum>().total();
    let sd = (ss / (n - 1) as f64).sqrt();
    let warning = (exhausted * 1000 > n).then(|| {
        format!(
            "horizon-too-short: {exhausted} of {n} paths still running at t = {}",
            settings.horizon
        )
    });
    Estimate {
        value: mean,
        std_error: sd / (n as f64).sqrt(),
        n_paths: n,
        dt: settings.dt,
        seed: settings.seed,
        horizon_exhausted: exhausted,
        warning,
    }
}

/// Estimates the exit transform, drawdown law and both tax EPVs of the
/// process taxed by `tax` (untaxed when `None`). The upper target `query.k`
/// applies to the taxed running maximum.
pub fn estimate_functionals(
    model: &ProcessModel,
    f: &dyn Boundary,
    tax: Option<&TaxSchedule>,
    weight: &PayoutWeight,
    query: &FunctionalQuery,
    settings: &McSettings,
) -> Result<FunctionalEstimates> {
    query.validate()?;
    if settings.n_paths < 100 {
        return Err(invalid("n_paths", "need at least 100 paths"));
    }
    let zero = TaxSchedule::default();
    let job = PathJob {
        stepper: Stepper::new(model)?,
        f,
        schedule: tax.unwrap_or(&zero),
        weight,
        query: *query,
        dt: settings.dt,
        steps: check_grid(settings.dt, settings.horizon)?,
        seed: settings.seed,
    };
    let n = settings.n_paths;
    let simulate = || (0..n as u64).into_par_iter().map(|i| job.run(i)).collect::<Result<Vec<_>>>();
    let outcomes = if settings.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(settings.jobs)
            .build()
            .map_err(|e| invalid("jobs", e.to_string()))?
            .install(simulate)?
    } else {
        simulate()?
    };
    let exhausted = outcomes.iter().filter(|o| o.exhausted).count();
    let est = |pick: fn(&Outcome) -> f64| summarize(outcomes.iter().map(pick), n, settings, exhausted);
    Ok(FunctionalEstimates {
        exit: est(|o| o.exit),
        drawdown: est(|o| o.drawdown),
        epv_until_either: est(|o| o.epv_either),
        epv_on_upper_exit: est(|o| o.epv_upper),
    })
}

/// One target. `G` and `H` ignore `tax`; the taxed targets use it (a missing
/// schedule means no tax, which gives exactly the untaxed paths).
pub fn estimate_functional(
    model: &ProcessModel,
    f: &dyn Boundary,
    tax: Option<&TaxSchedule>,
    weight: &PayoutWeight,
    query: &FunctionalQuery,
    target: Target,
    settings: &McSettings,
) -> Result<Estimate> {
    let tax = if target.is_taxed() { tax } else { None };
    let all = estimate_functionals(model, f, tax, weight, query, settings)?;
    Ok(match target {
        Target::G | Target::GU => all.exit,
        Target::H | Target::HU => all.drawdown,
        Target::EpvUntilEither => all.epv_until_either,
        Target::EpvOnUpperExit => all.epv_on_upper_exit,
    })
}
