//! Process models: spectrally negative Lévy, one-dimensional diffusions and
//! Ornstein-Uhlenbeck with exponential downward jumps.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Lévy triplet restricted to Brownian motion with drift plus compound
/// Poisson downward jumps with exponential sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyParams {
    pub drift: f64,
    pub sigma: f64,
    #[serde(default)]
    pub jump_intensity: f64,
    /// Rate of the exponential jump-size law (mean jump size is its inverse).
    #[serde(default = "one")]
    pub jump_rate: f64,
}

fn one() -> f64 {
    1.0
}

impl LevyParams {
    pub fn brownian(drift: f64, sigma: f64) -> Self {
        Self {
            drift,
            sigma,
            jump_intensity: 0.0,
            jump_rate: 1.0,
        }
    }

    pub fn cramer_lundberg(premium: f64, intensity: f64, claim_rate: f64) -> Self {
        Self {
            drift: premium,
            sigma: 0.0,
            jump_intensity: intensity,
            jump_rate: claim_rate,
        }
    }

    pub fn perturbed(drift: f64, sigma: f64, intensity: f64, claim_rate: f64) -> Self {
        Self {
            drift,
            sigma,
            jump_intensity: intensity,
            jump_rate: claim_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.drift.is_finite() {
            return Err(invalid("drift", "must be finite"));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(invalid("sigma", "must be finite and >= 0"));
        }
        if !(self.jump_intensity >= 0.0) || !self.jump_intensity.is_finite() {
            return Err(invalid("jump_intensity", "must be finite and >= 0"));
        }
        if self.jump_intensity > 0.0 && !(self.jump_rate > 0.0) {
            return Err(invalid("jump_rate", "must be > 0"));
        }
        Ok(())
    }

    pub fn has_jumps(&self) -> bool {
        self.jump_intensity > 0.0
    }
}

/// A coefficient function of the diffusion SDE.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coefficient {
    Constant { value: f64 },
    Affine { intercept: f64, slope: f64 },
    #[serde(skip)]
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Coefficient {
    pub fn constant(value: f64) -> Self {
        Coefficient::Constant { value }
    }

    pub fn affine(intercept: f64, slope: f64) -> Self {
        Coefficient::Affine { intercept, slope }
    }

    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Coefficient::Custom(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Coefficient::Constant { value } => *value,
            Coefficient::Affine { intercept, slope } => intercept + slope * x,
            Coefficient::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant { value } => write!(f, "Constant({value})"),
            Coefficient::Affine { intercept, slope } => write!(f, "Affine({intercept} + {slope}x)"),
            Coefficient::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// `dX = drift(X) dt + volatility(X) dB`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiffusionParams {
    pub drift: Coefficient,
    pub volatility: Coefficient,
}

impl DiffusionParams {
    pub fn new(drift: Coefficient, volatility: Coefficient) -> Self {
        Self { drift, volatility }
    }

    /// Brownian motion with constant drift and volatility.
    pub fn brownian(drift: f64, sigma: f64) -> Self {
        Self::new(Coefficient::constant(drift), Coefficient::constant(sigma))
    }

    /// Ornstein-Uhlenbeck diffusion `dX = theta (mu - X) dt + sigma dB`.
    pub fn ornstein_uhlenbeck(theta: f64, mu: f64, sigma: f64) -> Self {
        Self::new(Coefficient::affine(theta * mu, -theta), Coefficient::constant(sigma))
    }

    /// Checks `volatility > 0` on a sample of `domain`.
    pub fn validate_on(&self, domain: (f64, f64)) -> Result<()> {
        let (lo, hi) = domain;
        if !(lo < hi) {
            return Err(invalid("domain", format!("empty interval [{lo}, {hi}]")));
        }
        for i in 0..=256 {
            let x = lo + (hi - lo) * i as f64 / 256.0;
            let s = self.volatility.eval(x);
            if !(s > 0.0) || !s.is_finite() {
                return Err(invalid("volatility", format!("must be > 0 on the domain, got {s} at {x}")));
            }
            if !self.drift.eval(x).is_finite() {
                return Err(invalid("drift", format!("non-finite at {x}")));
            }
        }
        Ok(())
    }
}

/// `dX = theta (mu - X) dt + sigma dB - dJ` with `J` compound Poisson of
/// intensity `lambda` and Exp(`eta`) jump sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuJumpParams {
    pub theta: f64,
    pub mu: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub eta: f64,
}

impl OuJumpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0) {
            return Err(invalid("theta", "must be > 0"));
        }
        if !self.mu.is_finite() {
            return Err(invalid("mu", "must be finite"));
        }
        if !(self.sigma > 0.0) {
            return Err(invalid("sigma", "must be > 0"));
        }
        if !(self.lambda >= 0.0) {
            return Err(invalid("lambda", "must be >= 0"));
        }
        if !(self.eta > 0.0) {
            return Err(invalid("eta", "must be > 0"));
        }
        Ok(())
    }

    /// Laplace exponent of the driving Lévy process
    /// `K_t = theta mu t + sigma B_t - sum of jumps`.
    pub fn driver(&self) -> LevyParams {
        LevyParams::perturbed(self.theta * self.mu, self.sigma, self.lambda, self.eta)
    }
}

#[derive(Debug, Clone)]
pub enum ProcessModel {
    Levy(LevyParams),
    Diffusion(DiffusionParams),
    OuJump(OuJumpParams),
}

impl ProcessModel {
    pub fn family_name(&self) -> &'static str {
        match self {
            ProcessModel::Levy(p) => match (p.sigma > 0.0, p.has_jumps()) {
                (true, false) => "levy-brownian",
                (false, true) => "levy-cramer-lundberg",
                (true, true) => "levy-perturbed-cramer-lundberg",
                (false, false) => "levy-drift",
            },
            ProcessModel::Diffusion(_) => "diffusion",
            ProcessModel::OuJump(_) => "ou-jump",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessModel::Levy(p) => p.validate(),
            ProcessModel::Diffusion(_) => Ok(()),
            ProcessModel::OuJump(p) => p.validate(),
        }
    }
}
