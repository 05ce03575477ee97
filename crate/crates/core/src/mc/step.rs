use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{invalid, Result};
use crate::model::{DiffusionParams, ProcessModel};

#[derive(Debug, Clone)]
enum Continuous {
    Brownian { drift: f64, sigma: f64 },
    Ou { theta: f64, mu: f64, sigma: f64 },
    Euler(DiffusionParams),
}

/// One-step transition of a model: a continuous part advanced over a
/// segment, plus an exponential jump clock.
#[derive(Debug, Clone)]
pub(crate) struct Stepper {
    continuous: Continuous,
    lambda: f64,
    eta: f64,
}

impl Stepper {
    pub fn new(model: &ProcessModel) -> Result<Self> {
        model.validate()?;
        Ok(match model {
            // Pure drift has no scale function but simulates fine.
            ProcessModel::Levy(p) => Self {
                continuous: Continuous::Brownian {
                    drift: p.drift,
                    sigma: p.sigma,
                },
                lambda: p.jump_intensity,
                eta: p.jump_rate,
            },
            ProcessModel::OuJump(p) => Self {
                continuous: Continuous::Ou {
                    theta: p.theta,
                    mu: p.mu,
                    sigma: p.sigma,
                },
                lambda: p.lambda,
                eta: p.eta,
            },
            ProcessModel::Diffusion(p) => Self {
                continuous: Continuous::Euler(p.clone()),
                lambda: 0.0,
                eta: 1.0,
            },
        })
    }

    /// End value and local Brownian-bridge variance of a continuous segment
    /// of length `len` started at `a`.
    #[inline]
    pub fn advance<R: Rng>(&self, a: f64, len: f64, rng: &mut R) -> Result<(f64, f64)> {
        let z: f64 = rng.sample(StandardNormal);
        Ok(match self.continuous {
            Continuous::Brownian { drift, sigma } => (a + drift * len + sigma * len.sqrt() * z, sigma * sigma * len),
            Continuous::Ou { theta, mu, sigma } => {
                let decay = (-theta * len).exp();
                let var = sigma * sigma * -(-2.0 * theta * len).exp_m1() / (2.0 * theta);
                (mu + (a - mu) * decay + var.sqrt() * z, sigma * sigma * len)
            }
            Continuous::Euler(ref p) => {
                let vol = p.volatility.eval(a);
                let drift = p.drift.eval(a);
                if !(vol >= 0.0 && vol.is_finite() && drift.is_finite()) {
                    return Err(invalid("volatility", format!("bad coefficients at state {a}")));
                }
                (a + drift * len + vol * len.sqrt() * z, vol * vol * len)
            }
        })
    }

    /// Time to the next jump; infinite without jumps.
    #[inline]
    pub fn jump_clock<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.lambda > 0.0 {
            let e: f64 = rng.sample(Exp1);
            e / self.lambda
        } else {
            f64::INFINITY
        }
    }

    #[inline]
    pub fn jump_size<R: Rng>(&self, rng: &mut R) -> f64 {
        let e: f64 = rng.sample(Exp1);
        e / self.eta
    }
}

/// Log-probability cut below which a bridge event is treated as impossible
/// and no uniform is drawn.
pub(crate) const BRIDGE_CUT: f64 = 40.0;

/// Maximum of a Brownian bridge from `a` to `b` with variance `var`, sampled
/// only when it could exceed `level`; otherwise `max(a, b)`.
#[inline]
pub(crate) fn bridge_max<R: Rng>(a: f64, b: f64, var: f64, level: f64, rng: &mut R) -> f64 {
    let top = a.max(b);
    if var <= 0.0 {
        return top;
    }
    if top < level && 2.0 * (level - a) * (level - b) / var > BRIDGE_CUT {
        return top;
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    0.5 * (a + b + ((b - a) * (b - a) - 2.0 * var * u.ln()).sqrt())
}

/// Whether a bridge from `a` to `b` (both above `level`) dips below it.
#[inline]
pub(crate) fn bridge_dips<R: Rng>(a: f64, b: f64, var: f64, level: f64, rng: &mut R) -> bool {
    if var <= 0.0 {
        return false;
    }
    let e = 2.0 * (a - level) * (b - level) / var;
    if e > BRIDGE_CUT {
        return false;
    }
    rng.random::<f64>() < (-e).exp()
}
