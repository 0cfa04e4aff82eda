//! Equation residual through the composed pair of networks.
//!
//! The residual at a batch of times is
//! `r = d/dt state_net(t) - dyn_net(features(state_net(t)))`, and the
//! per-output equation losses are column-wise mean squares of `r`. Gradients
//! flow into the dynamics network directly, and into the state network along
//! two paths: through its output feeding the feature map, and through its
//! time derivative.

use ndarray::{Array2, ArrayView2, Axis};

use super::{DualTape, Gradients, MlpNetwork, NetError, Tape};

/// Feature expansion between the state estimate and the dynamics network
/// input (the candidate functions offered to the dynamics network).
pub trait FeatureMap {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn eval(&self, states: ArrayView2<'_, f64>) -> Array2<f64>;
    /// Pull a gradient w.r.t. the features back to a gradient w.r.t. the
    /// states.
    fn backprop(&self, states: ArrayView2<'_, f64>, grad_features: ArrayView2<'_, f64>)
        -> Array2<f64>;
}

/// Per-output equation losses and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct EquationLoss {
    pub per_state: Vec<f64>,
    pub total: f64,
}

/// Reusable tapes for the equation-loss computation. One training run calls
/// [`equation_loss_grads`] hundreds of thousands of times at a fixed batch
/// size; holding the tapes here avoids reallocating their activations every
/// step.
#[derive(Debug, Default)]
pub struct EquationScratch {
    state_tape: DualTape,
    dyn_tape: Tape,
}

impl EquationScratch {
    pub fn new() -> Self {
        Self::default()
    }
}

fn check_pair(
    state_net: &MlpNetwork,
    dyn_net: &MlpNetwork,
    map: &dyn FeatureMap,
) -> Result<(), NetError> {
    if map.in_dim() != state_net.output_dim() {
        return Err(NetError::ShapeMismatch(format!(
            "feature map expects {} states, state network outputs {}",
            map.in_dim(),
            state_net.output_dim()
        )));
    }
    if dyn_net.input_dim() != map.out_dim() {
        return Err(NetError::ShapeMismatch(format!(
            "dynamics network input {} != feature map output {}",
            dyn_net.input_dim(),
            map.out_dim()
        )));
    }
    if dyn_net.output_dim() != state_net.output_dim() {
        return Err(NetError::ShapeMismatch(format!(
            "dynamics network outputs {}, state network outputs {}",
            dyn_net.output_dim(),
            state_net.output_dim()
        )));
    }
    Ok(())
}

fn residual_losses(residual: &Array2<f64>) -> EquationLoss {
    let batch = residual.nrows() as f64;
    let per_state: Vec<f64> = residual
        .axis_iter(Axis(1))
        .map(|col| col.iter().map(|r| r * r).sum::<f64>() / batch)
        .collect();
    let total = per_state.iter().sum();
    EquationLoss { per_state, total }
}

/// Equation losses only (no gradients); used for logging and reports.
pub fn equation_loss_terms(
    state_net: &MlpNetwork,
    dyn_net: &MlpNetwork,
    map: &dyn FeatureMap,
    times: ArrayView2<'_, f64>,
) -> Result<EquationLoss, NetError> {
    check_pair(state_net, dyn_net, map)?;
    let tape = state_net.dual_forward(times)?;
    let features = map.eval(tape.value_output());
    let dyn_out = dyn_net.forward(features.view())?;
    let residual = &tape.tangent_output() - &dyn_out;
    Ok(residual_losses(&residual))
}

/// [`equation_loss_grads`] against caller-held scratch tapes.
pub fn equation_loss_grads_scratch(
    state_net: &MlpNetwork,
    dyn_net: &MlpNetwork,
    map: &dyn FeatureMap,
    times: ArrayView2<'_, f64>,
    scratch: &mut EquationScratch,
) -> Result<(EquationLoss, Gradients, Gradients), NetError> {
    check_pair(state_net, dyn_net, map)?;
    if times.nrows() == 0 {
        return Err(NetError::ShapeMismatch("empty collocation batch".into()));
    }

    state_net.dual_forward_into(times, &mut scratch.state_tape)?;
    let state_tape = &mut scratch.state_tape;
    let features = map.eval(state_tape.value_output());
    dyn_net.forward_tape_into(features.view(), &mut scratch.dyn_tape)?;
    let dyn_tape = &mut scratch.dyn_tape;
    let residual = &state_tape.tangent_output() - &dyn_tape.output();
    let loss = residual_losses(&residual);

    // d(loss)/d(residual), column-wise mean squares.
    let grad_residual = residual.mapv(|r| 2.0 * r / times.nrows() as f64);

    // Dynamics network sees -residual gradient; its input gradient continues
    // back through the feature map into the state estimate.
    let neg = grad_residual.mapv(|g| -g);
    let (dyn_grads, grad_features) = dyn_net.backward(dyn_tape, neg.view())?;
    let grad_states = map.backprop(state_tape.value_output(), grad_features.view());

    let state_grads =
        state_net.dual_backward(state_tape, grad_states.view(), grad_residual.view())?;

    Ok((loss, state_grads, dyn_grads))
}

/// Equation losses together with the gradients w.r.t. both networks'
/// parameters, including the path through the state network's output into
/// the dynamics network input and the path through its time derivative.
pub fn equation_loss_grads(
    state_net: &MlpNetwork,
    dyn_net: &MlpNetwork,
    map: &dyn FeatureMap,
    times: ArrayView2<'_, f64>,
) -> Result<(EquationLoss, Gradients, Gradients), NetError> {
    let mut scratch = EquationScratch::new();
    equation_loss_grads_scratch(state_net, dyn_net, map, times, &mut scratch)
}
