use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Start level `x`, upper target `k`, discount rate `q` and deficit
/// transform argument `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalQuery {
    pub x: f64,
    pub k: f64,
    pub q: f64,
    pub s: f64,
}

impl FunctionalQuery {
    pub fn new(x: f64, k: f64, q: f64, s: f64) -> Result<Self> {
        let query = Self { x, k, q, s };
        query.validate()?;
        Ok(query)
    }

    /// `x == k` is accepted: every functional then has its trivial value.
    pub fn validate(&self) -> Result<()> {
        if !(self.x.is_finite() && self.k.is_finite()) {
            return Err(invalid("x/k", "levels must be finite"));
        }
        if self.x > self.k {
            return Err(invalid("k", format!("start level {} above target {}", self.x, self.k)));
        }
        if !(self.q >= 0.0) {
            return Err(invalid("q", "must be >= 0"));
        }
        if !(self.s >= 0.0) {
            return Err(invalid("s", "must be >= 0"));
        }
        Ok(())
    }
}
