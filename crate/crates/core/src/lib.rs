//! Drawdown and two-sided exit functionals for spectrally negative Lévy
//! processes, one-dimensional diffusions and OU processes with exponential
//! downward jumps, plus loss-carry-forward taxation and a Monte Carlo oracle.

pub mod boundary;
pub mod diffusion;
pub mod engine;
pub mod error;
pub mod family;
pub mod levy;
pub mod mc;
pub mod model;
pub mod numerics;
pub mod oujump;
pub mod params;
pub mod query;
pub mod schedule;
pub mod tax;
pub mod validation;

pub use boundary::{Boundary, DrawdownBoundary};
pub use engine::{EngineSettings, Evaluation};
pub use error::{Error, Result};
pub use family::{factory_for, FamilySettings};
pub use model::{Coefficient, DiffusionParams, LevyParams, OuJumpParams, ProcessModel};
pub use params::{DifferentialExitParams, ExitParamFactory};
pub use query::FunctionalQuery;
pub use schedule::TaxSchedule;
pub use tax::{EpvMode, PayoutWeight, TaxContext};
