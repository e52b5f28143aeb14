//! Serialized bias models.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernel_debias::KernelBiasModel;
use crate::linear_debias::LinearBiasModel;
use crate::preimage::PreimageMap;

/// A fitted model as stored on disk. JSON floats are written in shortest
/// round-trip form, so `from_json(to_json(m)) == m` bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum BiasModel {
    Linear {
        model: LinearBiasModel,
    },
    Kernel {
        model: KernelBiasModel,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        preimage: Option<PreimageMap>,
    },
}

impl BiasModel {
    pub fn dim(&self) -> usize {
        match self {
            BiasModel::Linear { model } => model.dim(),
            BiasModel::Kernel { model, .. } => model.dim(),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            BiasModel::Linear { model } => model.k(),
            BiasModel::Kernel { model, .. } => model.k(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
