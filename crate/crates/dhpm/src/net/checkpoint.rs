//! Versioned JSON checkpoints for trained networks.
//!
//! The document records everything needed to re-evaluate a network in
//! original units: layer sizes, activation, parameters (weights as row-major
//! nested arrays, `weights[layer][fan_in][fan_out]`), the initialization
//! seed, and the scaling in effect during training. Serialization round-trips
//! byte-identically (write -> read -> write).

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Activation, MlpNetwork, NetError};
use crate::training::ScalingSpec;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    pub seed: u64,
    pub scaling: Option<ScalingSpec>,
}

impl Checkpoint {
    pub fn from_network(net: &MlpNetwork, scaling: Option<&ScalingSpec>) -> Self {
        let weights = net
            .weights()
            .iter()
            .map(|w| w.rows().into_iter().map(|r| r.to_vec()).collect())
            .collect();
        let biases = net.biases().iter().map(|b| b.to_vec()).collect();
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            layer_sizes: net.layer_sizes().to_vec(),
            activation: net.activation(),
            weights,
            biases,
            seed: net.init_seed(),
            scaling: scaling.cloned(),
        }
    }

    pub fn into_network(&self) -> Result<MlpNetwork, NetError> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(NetError::Checkpoint(format!(
                "unsupported format version {}",
                self.format_version
            )));
        }
        let mut weights = Vec::with_capacity(self.weights.len());
        for (l, rows) in self.weights.iter().enumerate() {
            let fan_in = rows.len();
            let fan_out = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != fan_out) {
                return Err(NetError::Checkpoint(format!("ragged weight rows in layer {l}")));
            }
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            let w = Array2::from_shape_vec((fan_in, fan_out), flat)
                .map_err(|e| NetError::Checkpoint(e.to_string()))?;
            weights.push(w);
        }
        let biases = self.biases.iter().map(|b| Array1::from_vec(b.clone())).collect();
        MlpNetwork::from_parts(
            self.layer_sizes.clone(),
            self.activation,
            weights,
            biases,
            self.seed,
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NetError> {
        serde_json::from_str(text).map_err(|e| NetError::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NetError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}
