//! JSON checkpoints: layer dimensions, per-layer weights (row-major,
//! `fan_in` rows of `fan_out` entries) and biases, optional optimizer
//! state, and free-form metadata.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Adam, Network, OutputActivation};
use crate::error::{Error, Result};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub layer_dims: Vec<usize>,
    pub output_activation: OutputActivation,
    pub layers: Vec<LayerParams>,
    #[serde(default)]
    pub optimizer: Option<Adam>,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl Checkpoint {
    pub fn from_network(net: &Network, optimizer: Option<&Adam>) -> Self {
        let layers = (0..net.n_layers())
            .map(|l| LayerParams {
                weights: net.weights(l).rows().into_iter().map(|r| r.to_vec()).collect(),
                bias: net.bias(l).to_vec(),
            })
            .collect();
        Self {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            layer_dims: net.layer_dims().to_vec(),
            output_activation: net.output_activation(),
            layers,
            optimizer: optimizer.cloned(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_metadata(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn to_network(&self) -> Result<Network> {
        if self.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint schema version {}",
                self.schema_version
            )));
        }
        if self.layers.len() + 1 != self.layer_dims.len() {
            return Err(Error::Shape("layer count does not match layer_dims".into()));
        }
        let mut params = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            let (fi, fo) = (self.layer_dims[l], self.layer_dims[l + 1]);
            if layer.weights.len() != fi || layer.weights.iter().any(|r| r.len() != fo) || layer.bias.len() != fo {
                return Err(Error::Shape(format!("layer {l} does not match {fi}×{fo}")));
            }
            params.extend(layer.weights.iter().flatten());
            params.extend(&layer.bias);
        }
        Network::from_params(self.layer_dims.clone(), self.output_activation, params)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}
