//! Data and equation losses with alpha masking.
//!
//! Per-state losses are column-wise mean squared errors. The net data loss
//! sums only the states selected by the alpha mask; equation losses are
//! never masked — that asymmetry is what lets an observed state's dynamics
//! be learned while another state's data is withheld.

use ndarray::{Array2, ArrayView2};

use super::TrainError;
use crate::net::{self, FeatureMap, MlpNetwork};

/// All loss terms of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    /// Column-wise data mean squared errors, for every state (masked or not).
    pub per_state_data: Vec<f64>,
    /// Column-wise equation residual mean squares.
    pub per_state_eq: Vec<f64>,
    /// Alpha-masked sum of the data terms.
    pub data: f64,
    /// Unmasked sum of the equation terms.
    pub equation: f64,
    /// `data + equation`.
    pub total: f64,
}

impl LossBreakdown {
    pub fn assemble(per_state_data: Vec<f64>, per_state_eq: Vec<f64>, alpha: &[u8]) -> Self {
        let data = masked_sum(&per_state_data, alpha);
        let equation = per_state_eq.iter().sum();
        Self {
            total: data + equation,
            per_state_data,
            per_state_eq,
            data,
            equation,
        }
    }
}

fn masked_sum(values: &[f64], alpha: &[u8]) -> f64 {
    values
        .iter()
        .zip(alpha)
        .filter(|(_, &a)| a != 0)
        .map(|(v, _)| v)
        .sum()
}

/// Column-wise mean squared errors and their alpha-masked sum.
pub fn data_loss(
    pred: ArrayView2<'_, f64>,
    target: ArrayView2<'_, f64>,
    alpha: &[u8],
) -> Result<(Vec<f64>, f64), TrainError> {
    if pred.dim() != target.dim() {
        return Err(TrainError::Shape(format!(
            "prediction {:?} vs target {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    if pred.nrows() == 0 {
        return Err(TrainError::Shape("empty data batch".into()));
    }
    if alpha.len() != pred.ncols() {
        return Err(TrainError::Shape(format!(
            "alpha has {} entries for {} states",
            alpha.len(),
            pred.ncols()
        )));
    }
    let n = pred.nrows() as f64;
    let per_state: Vec<f64> = (0..pred.ncols())
        .map(|j| {
            pred.column(j)
                .iter()
                .zip(target.column(j))
                .map(|(p, t)| (p - t) * (p - t))
                .sum::<f64>()
                / n
        })
        .collect();
    let total = masked_sum(&per_state, alpha);
    Ok((per_state, total))
}

/// Gradient of the masked data loss w.r.t. the predictions. Masked columns
/// are filled with exact zeros so their targets cannot influence training in
/// any bit.
pub fn data_loss_grad(
    pred: ArrayView2<'_, f64>,
    target: ArrayView2<'_, f64>,
    alpha: &[u8],
) -> Array2<f64> {
    let n = pred.nrows() as f64;
    let mut grad = Array2::zeros(pred.raw_dim());
    for (j, &a) in alpha.iter().enumerate() {
        if a == 0 {
            continue;
        }
        let p = pred.column(j);
        let t = target.column(j);
        for (slot, (p, t)) in grad.column_mut(j).iter_mut().zip(p.iter().zip(t)) {
            *slot = 2.0 * (p - t) / n;
        }
    }
    grad
}

/// Per-state equation losses and their (never masked) sum at the given
/// collocation times.
pub fn equation_loss(
    state_net: &MlpNetwork,
    dyn_net: &MlpNetwork,
    map: &dyn FeatureMap,
    times: ArrayView2<'_, f64>,
) -> Result<(Vec<f64>, f64), TrainError> {
    let loss = net::equation_loss_terms(state_net, dyn_net, map, times)?;
    Ok((loss.per_state, loss.total))
}
