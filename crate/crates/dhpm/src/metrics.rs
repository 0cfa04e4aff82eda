//! Relative L2 error and experiment reports.
//!
//! The error metric is the RMSE ratio `sqrt(mean((ref - pred)^2)) /
//! sqrt(mean(ref^2))`; on a uniform grid this coincides with the
//! conventional discrete relative L2 norm.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{format_full, Trajectory};
use crate::net::{FeatureMap, MlpNetwork, NetError};
use crate::training::{CandidateMap, LossBreakdown, ScalingSpec, TrainingConfig};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("relative L2 error undefined: reference is identically zero")]
    ZeroReference,
    #[error(transparent)]
    Net(#[from] NetError),
}

/// `sqrt(mean((ref - pred)^2)) / sqrt(mean(ref^2))`.
pub fn rel_l2_error(pred: &[f64], reference: &[f64]) -> Result<f64, MetricsError> {
    if pred.len() != reference.len() {
        return Err(MetricsError::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            pred.len(),
            reference.len()
        )));
    }
    if pred.is_empty() {
        return Err(MetricsError::InvalidArgument("empty sequences".into()));
    }
    let n = pred.len() as f64;
    let num = reference
        .iter()
        .zip(pred)
        .map(|(r, p)| (r - p) * (r - p))
        .sum::<f64>()
        / n;
    let den = reference.iter().map(|r| r * r).sum::<f64>() / n;
    if den == 0.0 {
        return Err(MetricsError::ZeroReference);
    }
    Ok(num.sqrt() / den.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub quantity: String,
    pub rel_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalLosses {
    pub total: f64,
    pub data: f64,
    pub equation: f64,
}

/// Everything a finished experiment reports: the configuration it ran under,
/// per-quantity errors (state and dynamics interleaved, `2k` entries), final
/// losses, convergence against the advisory target, and timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format_version: u32,
    pub system: String,
    pub config: TrainingConfig,
    pub errors: Vec<ErrorEntry>,
    pub final_losses: FinalLosses,
    pub converged: bool,
    pub fast_mode: bool,
    pub wall_seconds: f64,
    #[serde(default)]
    pub checkpoint_paths: Vec<String>,
}

impl ExperimentReport {
    pub fn error_for(&self, quantity: &str) -> Option<f64> {
        self.errors
            .iter()
            .find(|e| e.quantity == quantity)
            .map(|e| e.rel_l2)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MetricsError> {
        serde_json::from_str(text).map_err(|e| MetricsError::InvalidArgument(e.to_string()))
    }
}

/// Evaluate the trained pair on raw (unscaled) times: states from the state
/// network, dynamics from the dynamics network fed with the *predicted*
/// states, both mapped back to original units.
pub fn predict_on_times(
    state_net: &MlpNetwork,
    dyn_net: &MlpNetwork,
    map: &CandidateMap,
    scaling: &ScalingSpec,
    times: &[f64],
) -> Result<(Array2<f64>, Array2<f64>), MetricsError> {
    let scaled: Vec<f64> = times.iter().map(|&t| scaling.scale_time(t)).collect();
    let t_col = Array2::from_shape_vec((scaled.len(), 1), scaled)
        .expect("times form a column");
    let states_scaled = state_net.forward(t_col.view())?;
    let features = map.eval(states_scaled.view());
    let derivs_scaled = dyn_net.forward(features.view())?;
    Ok((
        scaling.unscale_states(&states_scaled),
        scaling.unscale_derivs(&derivs_scaled),
    ))
}

/// Assemble the report for a trained pair: `2k` relative L2 errors on the
/// reference grid (each state followed by its dynamics).
#[allow(clippy::too_many_arguments)]
pub fn build_report(
    state_net: &MlpNetwork,
    dyn_net: &MlpNetwork,
    map: &CandidateMap,
    scaling: &ScalingSpec,
    reference: &Trajectory,
    state_names: &[String],
    config: &TrainingConfig,
    wall_seconds: f64,
    final_losses: &LossBreakdown,
    converged: bool,
) -> Result<ExperimentReport, MetricsError> {
    if state_names.len() != reference.dim() {
        return Err(MetricsError::InvalidArgument(
            "state name count does not match trajectory".into(),
        ));
    }
    let (pred_states, pred_derivs) =
        predict_on_times(state_net, dyn_net, map, scaling, &reference.times)?;
    let mut errors = Vec::with_capacity(2 * reference.dim());
    for j in 0..reference.dim() {
        let state_err = rel_l2_error(
            &pred_states.column(j).to_vec(),
            &reference.states.column(j).to_vec(),
        )?;
        errors.push(ErrorEntry {
            quantity: state_names[j].clone(),
            rel_l2: state_err,
        });
        let dyn_err = rel_l2_error(
            &pred_derivs.column(j).to_vec(),
            &reference.derivs.column(j).to_vec(),
        )?;
        errors.push(ErrorEntry {
            quantity: format!("d{}", state_names[j]),
            rel_l2: dyn_err,
        });
    }
    Ok(ExperimentReport {
        format_version: REPORT_FORMAT_VERSION,
        system: config.system.clone(),
        config: config.clone(),
        errors,
        final_losses: FinalLosses {
            total: final_losses.total,
            data: final_losses.data,
            equation: final_losses.equation,
        },
        converged,
        fast_mode: config.fast_mode,
        wall_seconds,
        checkpoint_paths: Vec::new(),
    })
}

/// Per-experiment errors CSV with header `quantity,rel_l2`.
pub fn errors_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("quantity,rel_l2\n");
    for entry in &report.errors {
        out.push_str(&format!("{},{}\n", entry.quantity, format_full(entry.rel_l2)));
    }
    out
}

/// Predictions CSV over the reference grid: predicted states and dynamics
/// followed by the reference values.
pub fn predictions_csv(
    reference: &Trajectory,
    pred_states: &Array2<f64>,
    pred_derivs: &Array2<f64>,
    state_names: &[String],
) -> String {
    let mut header = String::from("t");
    for n in state_names {
        header.push_str(&format!(",{n}_pred"));
    }
    for n in state_names {
        header.push_str(&format!(",d{n}_pred"));
    }
    for n in state_names {
        header.push_str(&format!(",{n}_ref"));
    }
    for n in state_names {
        header.push_str(&format!(",d{n}_ref"));
    }
    header.push('\n');

    let mut out = header;
    for (i, &t) in reference.times.iter().enumerate() {
        out.push_str(&format_full(t));
        for block in [pred_states, pred_derivs, &reference.states, &reference.derivs] {
            for v in block.row(i) {
                out.push(',');
                out.push_str(&format_full(*v));
            }
        }
        out.push('\n');
    }
    out
}
