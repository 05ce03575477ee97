//! Differential exit parameters `b_f^(q)` and `c_f^(q,s)`: the interface
//! between the model families and the drawdown/tax engines.

use std::sync::Arc;

use serde::Serialize;

use crate::boundary::Boundary;
use crate::error::Result;

/// Which family produced a set of parameters, and how.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub family: &'static str,
    pub q: f64,
    pub s: f64,
    /// Set when the values come from extrapolation in `q` (ou-jump at `q = 0`).
    pub extrapolated: bool,
}

/// Evaluators `z -> b_f^(q)(z)` and `z -> c_f^(q,s)(z)`, both in 1/level.
pub trait DifferentialExitParams: Send + Sync {
    fn b(&self, z: f64) -> Result<f64>;
    fn c(&self, z: f64) -> Result<f64>;
    fn provenance(&self) -> Provenance;
}

/// Builds exit parameters for an arbitrary boundary; the tax engine uses
/// this to substitute the tax-adjusted boundary.
pub trait ExitParamFactory: Send + Sync {
    fn exit_params(
        &self,
        boundary: Arc<dyn Boundary>,
        q: f64,
        s: f64,
    ) -> Result<Arc<dyn DifferentialExitParams>>;
}

/// Parameters given directly by closures; handy for tests and for models
/// whose `b`, `c` are known in closed form.
pub struct ClosureParams<B, C> {
    pub b: B,
    pub c: C,
    pub provenance: Provenance,
}

impl<B, C> DifferentialExitParams for ClosureParams<B, C>
where
    B: Fn(f64) -> Result<f64> + Send + Sync,
    C: Fn(f64) -> Result<f64> + Send + Sync,
{
    fn b(&self, z: f64) -> Result<f64> {
        (self.b)(z)
    }

    fn c(&self, z: f64) -> Result<f64> {
        (self.c)(z)
    }

    fn provenance(&self) -> Provenance {
        self.provenance.clone()
    }
}
