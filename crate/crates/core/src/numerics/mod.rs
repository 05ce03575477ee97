//! Numerical building blocks shared by the model families and engines.

pub mod ode;
pub mod quad;
pub mod roots;
pub mod sum;

pub use quad::{integrate, integrate_plain, QuadResult, QuadTolerance};
pub use roots::{real_roots, safeguarded_newton, PolyRoot, RootOptions};
pub use sum::NeumaierSum;
