//! Monte Carlo oracle: path simulation for every model family, functional
//! estimators with standard errors, and pathwise checks of the drawdown
//! sandwich inequalities and the tax time correspondences.
//!
//! Every path draws from its own ChaCha stream keyed by `(seed, path index)`,
//! so results do not depend on the number of worker threads.

mod estimate;
mod path;
mod pathwise;
mod step;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use estimate::{
    estimate_functional, estimate_functionals, Estimate, FunctionalEstimates, McSettings, Target,
};
pub use path::{simulate_path, simulate_path_stream, SimPath};
pub use pathwise::{
    apply_tax_and_check, check_pathwise, check_sandwich, PathwiseReport, PathwiseViolation, SandwichReport,
    TaxedPath,
};

pub(crate) fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
