//! JSON model configuration.
//!
//! ```json
//! { "num_sites": 2,
//!   "hoppings": [{"i": 1, "j": 2, "spin": "up", "eta": 1.0}],
//!   "interactions": [{"i": 1, "gamma": 4.0}],
//!   "rates": [{"i": 1, "j": 2, "spin": "up", "rho": 2.0}] }
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    HoppingEntry, InteractionEntry, LatticeModel, Link, ModelError, RateTable, Spin,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoppingSpec {
    pub i: usize,
    pub j: usize,
    pub spin: Spin,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionSpec {
    pub i: usize,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSpec {
    pub i: usize,
    pub j: usize,
    pub spin: Spin,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub num_sites: usize,
    #[serde(default)]
    pub hoppings: Vec<HoppingSpec>,
    #[serde(default)]
    pub interactions: Vec<InteractionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<RateSpec>>,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_model(model: &LatticeModel) -> Self {
        ModelConfig {
            num_sites: model.num_sites(),
            hoppings: model
                .hoppings()
                .map(|h| HoppingSpec { i: h.i, j: h.j, spin: h.spin, eta: h.eta })
                .collect(),
            interactions: model
                .interactions()
                .map(|u| InteractionSpec { i: u.i, gamma: u.gamma })
                .collect(),
            rates: None,
        }
    }

    pub fn model(&self) -> Result<LatticeModel, ModelError> {
        let hoppings: Vec<_> = self
            .hoppings
            .iter()
            .map(|h| HoppingEntry { i: h.i, j: h.j, spin: h.spin, eta: h.eta })
            .collect();
        let interactions: Vec<_> = self
            .interactions
            .iter()
            .map(|u| InteractionEntry { i: u.i, gamma: u.gamma })
            .collect();
        LatticeModel::build(self.num_sites, &hoppings, &interactions)
    }

    /// Model plus rates: defaults with any listed overrides applied.
    pub fn build(&self) -> Result<(LatticeModel, RateTable), ConfigError> {
        let model = self.model()?;
        let overrides: Vec<_> = self
            .rates
            .iter()
            .flatten()
            .map(|r| (Link::new(r.i, r.j, r.spin), r.rho))
            .collect();
        let rates = RateTable::with_overrides(&model, &overrides)?;
        Ok((model, rates))
    }
}
