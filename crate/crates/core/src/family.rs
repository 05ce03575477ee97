//! Dispatch from a [`ProcessModel`] to its exit-parameter factory.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diffusion::{DiffusionFamily, SolverSettings};
use crate::error::Result;
use crate::levy::{check_supported, LevyFamily};
use crate::model::ProcessModel;
use crate::oujump::OuJumpFamily;
use crate::params::ExitParamFactory;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySettings {
    #[serde(default)]
    pub diffusion: SolverSettings,
}

pub fn factory_for(model: &ProcessModel, settings: &FamilySettings) -> Result<Arc<dyn ExitParamFactory>> {
    model.validate()?;
    Ok(match model {
        ProcessModel::Levy(p) => {
            check_supported(p)?;
            Arc::new(LevyFamily(*p))
        }
        ProcessModel::Diffusion(p) => {
            p.validate_on(settings.diffusion.domain)?;
            Arc::new(DiffusionFamily::new(p.clone(), settings.diffusion))
        }
        ProcessModel::OuJump(p) => Arc::new(OuJumpFamily(*p)),
    })
}
