//! Multilayer perceptron with the two derivative flavours the equation
//! residual needs: reverse-mode gradients with respect to parameters, and
//! forward-mode (dual number) derivatives with respect to the scalar time
//! input. The mixed second-order term (parameter gradient of the time
//! derivative) comes from running reverse-mode over the taped dual forward
//! pass; see [`dual`].
//!
//! Hidden layers use the configured activation, the output layer is always
//! linear. Weight matrices are stored `(fan_in, fan_out)` so a batch forward
//! pass is `z = a.dot(w) + b` with `a` holding one sample per row.
//!
//! Training runs the same batch shapes hundreds of thousands of times, so
//! tapes own their storage and can be refilled in place: `forward_tape_into`
//! and `dual_forward_into` reuse a tape's buffers when the shape matches
//! instead of reallocating multi-megabyte activations every step.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod checkpoint;
pub mod compose;
mod dual;
pub mod gradcheck;
mod math;

pub use compose::{
    equation_loss_grads, equation_loss_terms, EquationLoss, EquationScratch, FeatureMap,
};
pub use dual::DualTape;

/// Activation applied to hidden layers; the output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid layer sizes: {0}")]
    InvalidLayers(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("tape already consumed by a backward pass")]
    TapeConsumed,
    #[error("non-finite network parameter")]
    NonFiniteParam,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense feed-forward network. Immutable during evaluation; the optimizer
/// mutates parameters between steps through [`MlpNetwork::params_mut`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    layer_sizes: Vec<usize>,
    activation: Activation,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    init_seed: u64,
}

/// Recorded forward intermediates for one batch evaluation, consumed exactly
/// once by [`MlpNetwork::backward`]. Refill with
/// [`MlpNetwork::forward_tape_into`] to reuse the storage.
#[derive(Debug, Default)]
pub struct Tape {
    /// Post-activation values per level, `activations[0]` being the input.
    activations: Vec<Array2<f64>>,
    /// Ping-pong buffers for the backward sweep, `batch * max_width` each.
    scratch: [Vec<f64>; 2],
    consumed: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Network output of the taped forward pass.
    pub fn output(&self) -> ArrayView2<'_, f64> {
        self.activations
            .last()
            .expect("tape holds at least the input level")
            .view()
    }

    fn matches(&self, net: &MlpNetwork, batch: usize) -> bool {
        self.activations.len() == net.layer_sizes.len()
            && self
                .activations
                .iter()
                .zip(&net.layer_sizes)
                .all(|(a, &w)| a.dim() == (batch, w))
    }

    fn prepare(&mut self, net: &MlpNetwork, batch: usize) {
        if !self.matches(net, batch) {
            self.activations = net
                .layer_sizes
                .iter()
                .map(|&w| Array2::zeros((batch, w)))
                .collect();
            let widest = batch * net.max_width();
            self.scratch = [vec![0.0; widest], vec![0.0; widest]];
        }
        self.consumed = false;
    }
}

/// Slice a `rows x cols` mutable view out of a flat scratch buffer.
pub(crate) fn scratch_view(buf: &mut [f64], rows: usize, cols: usize) -> ArrayViewMut2<'_, f64> {
    ArrayViewMut2::from_shape((rows, cols), &mut buf[..rows * cols])
        .expect("scratch buffer is large enough")
}

/// Per-parameter values shaped like the network they were computed for.
/// Used both for loss gradients and for Adam moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &MlpNetwork) -> Self {
        Self {
            weights: net.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            w.mapv_inplace(|v| v * factor);
        }
        for b in &mut self.biases {
            b.mapv_inplace(|v| v * factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Flat view in the same order as [`MlpNetwork::param`] indexes.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }
}

fn validate_layer_sizes(layer_sizes: &[usize]) -> Result<(), NetError> {
    if layer_sizes.len() < 2 {
        return Err(NetError::InvalidLayers(format!(
            "need input and output sizes, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.iter().any(|&s| s == 0) {
        return Err(NetError::InvalidLayers(format!(
            "layer sizes must be positive, got {layer_sizes:?}"
        )));
    }
    Ok(())
}

impl MlpNetwork {
    /// Glorot-uniform weights (bound `sqrt(6 / (fan_in + fan_out))`), zero
    /// biases. Deterministic under `seed`.
    pub fn init(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<Self, NetError> {
        validate_layer_sizes(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w = Array2::from_shape_fn((fan_in, fan_out), |_| {
                (2.0 * rng.random::<f64>() - 1.0) * bound
            });
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            weights,
            biases,
            init_seed: seed,
        })
    }

    /// Assemble a network from explicit parameters, validating shapes and
    /// finiteness.
    pub fn from_parts(
        layer_sizes: Vec<usize>,
        activation: Activation,
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        init_seed: u64,
    ) -> Result<Self, NetError> {
        validate_layer_sizes(&layer_sizes)?;
        if weights.len() != layer_sizes.len() - 1 || biases.len() != weights.len() {
            return Err(NetError::ShapeMismatch(format!(
                "expected {} layers, got {} weight and {} bias arrays",
                layer_sizes.len() - 1,
                weights.len(),
                biases.len()
            )));
        }
        for (l, pair) in layer_sizes.windows(2).enumerate() {
            if weights[l].dim() != (pair[0], pair[1]) {
                return Err(NetError::ShapeMismatch(format!(
                    "layer {l}: weight shape {:?}, expected ({}, {})",
                    weights[l].dim(),
                    pair[0],
                    pair[1]
                )));
            }
            if biases[l].len() != pair[1] {
                return Err(NetError::ShapeMismatch(format!(
                    "layer {l}: bias length {}, expected {}",
                    biases[l].len(),
                    pair[1]
                )));
            }
        }
        let finite = weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && biases.iter().all(|b| b.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(NetError::NonFiniteParam);
        }
        Ok(Self {
            layer_sizes,
            activation,
            weights,
            biases,
            init_seed,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub(crate) fn max_width(&self) -> usize {
        self.layer_sizes.iter().copied().max().unwrap_or(0)
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub(crate) fn params_mut(&mut self) -> (&mut Vec<Array2<f64>>, &mut Vec<Array1<f64>>) {
        (&mut self.weights, &mut self.biases)
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Read one parameter by flat index (weights then bias, layer by layer).
    pub fn param(&self, idx: usize) -> f64 {
        let mut i = idx;
        for (w, b) in self.weights.iter().zip(&self.biases) {
            if i < w.len() {
                return *w.as_slice().unwrap().get(i).unwrap();
            }
            i -= w.len();
            if i < b.len() {
                return b[i];
            }
            i -= b.len();
        }
        panic!("parameter index {idx} out of range");
    }

    /// Clone with one parameter shifted by `delta`; finite-difference probes
    /// in the grad checks are built on this.
    pub fn perturbed(&self, idx: usize, delta: f64) -> Self {
        let mut net = self.clone();
        let mut i = idx;
        for (w, b) in net.weights.iter_mut().zip(net.biases.iter_mut()) {
            if i < w.len() {
                *w.as_slice_mut().unwrap().get_mut(i).unwrap() += delta;
                return net;
            }
            i -= w.len();
            if i < b.len() {
                b[i] += delta;
                return net;
            }
            i -= b.len();
        }
        panic!("parameter index {idx} out of range");
    }

    fn check_input(&self, inputs: &ArrayView2<'_, f64>) -> Result<(), NetError> {
        if inputs.ncols() != self.input_dim() {
            return Err(NetError::ShapeMismatch(format!(
                "input has {} columns, network expects {}",
                inputs.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Batch forward pass, one sample per row.
    pub fn forward(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>, NetError> {
        self.check_input(&inputs)?;
        let n_layers = self.weights.len();
        let mut a = inputs.to_owned();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = a.dot(w);
            z += b;
            if l + 1 < n_layers && self.activation == Activation::Tanh {
                math::tanh_array_inplace(&mut z);
            }
            a = z;
        }
        Ok(a)
    }

    /// Forward pass recording the intermediates needed by
    /// [`MlpNetwork::backward`], reusing the tape's storage when its shape
    /// already matches.
    pub fn forward_tape_into(
        &self,
        inputs: ArrayView2<'_, f64>,
        tape: &mut Tape,
    ) -> Result<(), NetError> {
        self.check_input(&inputs)?;
        let n_layers = self.weights.len();
        tape.prepare(self, inputs.nrows());
        tape.activations[0].assign(&inputs);
        for l in 0..n_layers {
            let (before, after) = tape.activations.split_at_mut(l + 1);
            let z = &mut after[0];
            general_mat_mul(1.0, &before[l], &self.weights[l], 0.0, z);
            *z += &self.biases[l];
            if l + 1 < n_layers && self.activation == Activation::Tanh {
                math::tanh_array_inplace(z);
            }
        }
        Ok(())
    }

    /// Allocating convenience wrapper around
    /// [`MlpNetwork::forward_tape_into`].
    pub fn forward_tape(&self, inputs: ArrayView2<'_, f64>) -> Result<Tape, NetError> {
        let mut tape = Tape::new();
        self.forward_tape_into(inputs, &mut tape)?;
        Ok(tape)
    }

    /// Reverse-mode gradients of the scalar loss whose output gradient is
    /// `loss_grad`, plus the gradient with respect to the inputs (needed when
    /// this network's input is another network's output).
    pub fn backward(
        &self,
        tape: &mut Tape,
        loss_grad: ArrayView2<'_, f64>,
    ) -> Result<(Gradients, Array2<f64>), NetError> {
        if tape.consumed {
            return Err(NetError::TapeConsumed);
        }
        let batch = tape.activations[0].nrows();
        if loss_grad.dim() != (batch, self.output_dim()) {
            return Err(NetError::ShapeMismatch(format!(
                "loss gradient shape {:?}, expected ({batch}, {})",
                loss_grad.dim(),
                self.output_dim()
            )));
        }
        if !tape.matches(self, batch) {
            return Err(NetError::ShapeMismatch(
                "tape does not match this network".into(),
            ));
        }
        tape.consumed = true;

        let mut grads = Gradients::zeros_like(self);
        let n_layers = self.weights.len();
        let activations = &tape.activations;
        let [buf_a, buf_b] = &mut tape.scratch;

        // Output layer is linear, so the incoming gradient is already the
        // gradient w.r.t. the last pre-activation. The sweep ping-pongs
        // between the two scratch buffers: g for layer l lives in buffer
        // (n_layers - l) % 2.
        {
            let mut g = scratch_view(buf_a, batch, self.output_dim());
            g.assign(&loss_grad);
        }
        for l in (0..n_layers).rev() {
            let (g_buf, prev_buf) = if (n_layers - l) % 2 == 1 {
                (&mut *buf_a, &mut *buf_b)
            } else {
                (&mut *buf_b, &mut *buf_a)
            };
            let g = scratch_view(g_buf, batch, self.layer_sizes[l + 1]);
            let a_prev = &activations[l];
            general_mat_mul(1.0, &a_prev.t(), &g.view(), 0.0, &mut grads.weights[l]);
            grads.biases[l] = g.sum_axis(Axis(0));

            let mut g_prev = scratch_view(prev_buf, batch, self.layer_sizes[l]);
            general_mat_mul(1.0, &g.view(), &self.weights[l].t(), 0.0, &mut g_prev);
            if l > 0 && self.activation == Activation::Tanh {
                // a_prev is post-tanh at level l, so phi' = 1 - a^2.
                ndarray::Zip::from(&mut g_prev)
                    .and(a_prev)
                    .for_each(|g, &a| *g *= 1.0 - a * a);
            }
        }
        let buf = if n_layers % 2 == 1 { &mut *buf_b } else { &mut *buf_a };
        let input_grad = scratch_view(buf, batch, self.layer_sizes[0]).to_owned();
        Ok((grads, input_grad))
    }

    /// Exact derivative of each output with respect to the scalar time
    /// input, by forward-mode dual propagation seeded with dt/dt = 1.
    pub fn input_time_derivative(
        &self,
        times: ArrayView2<'_, f64>,
    ) -> Result<Array2<f64>, NetError> {
        let tape = self.dual_forward(times)?;
        Ok(tape.tangent_output().to_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn seeded(layer_sizes: &[usize], seed: u64) -> MlpNetwork {
        MlpNetwork::init(layer_sizes, Activation::Tanh, seed).unwrap()
    }

    #[test]
    fn zero_network_maps_everything_to_zero() {
        let net = MlpNetwork::from_parts(
            vec![2, 3, 2],
            Activation::Tanh,
            vec![Array2::zeros((2, 3)), Array2::zeros((3, 2))],
            vec![Array1::zeros(3), Array1::zeros(2)],
            0,
        )
        .unwrap();
        let out = net.forward(array![[1.0, -2.0], [0.5, 3.0]].view()).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_affine_layer_is_w_t_plus_b() {
        let net = MlpNetwork::from_parts(
            vec![1, 1],
            Activation::Identity,
            vec![array![[2.5]]],
            vec![array![-0.5]],
            0,
        )
        .unwrap();
        let out = net.forward(array![[0.0], [1.0], [-2.0]].view()).unwrap();
        assert_eq!(out, array![[-0.5], [2.0], [-5.5]]);
    }

    #[test]
    fn output_bounded_by_last_layer_norms_for_tanh_hidden() {
        let net = seeded(&[3, 16, 16, 2], 7);
        let inputs = Array2::from_shape_fn((40, 3), |(i, j)| ((i * 3 + j) as f64).sin() * 10.0);
        let out = net.forward(inputs.view()).unwrap();
        assert!(out.iter().all(|v| v.is_finite()));
        // Hidden activations are in [-1, 1], so per output column j:
        // |out_j| <= sum_i |W_last[i,j]| + |b_last[j]|.
        let w_last = net.weights().last().unwrap();
        let b_last = net.biases().last().unwrap();
        for j in 0..2 {
            let bound = w_last.column(j).iter().map(|v| v.abs()).sum::<f64>() + b_last[j].abs();
            for row in out.column(j) {
                assert!(row.abs() <= bound, "|{row}| > bound {bound}");
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_input_width() {
        let net = seeded(&[2, 4, 1], 0);
        let err = net.forward(array![[1.0]].view()).unwrap_err();
        assert!(matches!(err, NetError::ShapeMismatch(_)));
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let a = seeded(&[1, 8, 2], 42);
        let b = seeded(&[1, 8, 2], 42);
        let c = seeded(&[1, 8, 2], 43);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn init_respects_glorot_bound() {
        let net = seeded(&[1, 64, 2], 3);
        let whole_net_bound = (6.0_f64 / 65.0).sqrt();
        for (l, w) in net.weights().iter().enumerate() {
            let (fan_in, fan_out) = w.dim();
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            assert!(w.iter().all(|v| v.abs() <= bound), "layer {l} exceeds bound");
            assert!(w.iter().all(|v| v.abs() <= whole_net_bound));
        }
        assert!(net.biases().iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn backward_zero_loss_grad_gives_zero_gradient() {
        let net = seeded(&[2, 5, 3], 1);
        let inputs = array![[0.1, 0.2], [0.3, -0.4]];
        let mut tape = net.forward_tape(inputs.view()).unwrap();
        let (grads, g_in) = net.backward(&mut tape, Array2::zeros((2, 3)).view()).unwrap();
        assert!(grads.flat().iter().all(|&v| v == 0.0));
        assert!(g_in.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_matches_closed_form_for_affine_least_squares() {
        // One sample, loss = (w t + b - y)^2 with w = 1.5, b = 0.25.
        let (w, b, t, y) = (1.5, 0.25, 0.8, 2.0);
        let net = MlpNetwork::from_parts(
            vec![1, 1],
            Activation::Identity,
            vec![array![[w]]],
            vec![array![b]],
            0,
        )
        .unwrap();
        let inputs = array![[t]];
        let mut tape = net.forward_tape(inputs.view()).unwrap();
        let pred = tape.output()[(0, 0)];
        let loss_grad = array![[2.0 * (pred - y)]];
        let (grads, _) = net.backward(&mut tape, loss_grad.view()).unwrap();
        let residual = w * t + b - y;
        assert!((grads.weights[0][(0, 0)] - 2.0 * residual * t).abs() < 1e-14);
        assert!((grads.biases[0][0] - 2.0 * residual).abs() < 1e-14);
    }

    #[test]
    fn tape_reuse_is_an_error() {
        let net = seeded(&[1, 4, 1], 5);
        let inputs = array![[0.3]];
        let mut tape = net.forward_tape(inputs.view()).unwrap();
        let g = Array2::ones((1, 1));
        net.backward(&mut tape, g.view()).unwrap();
        let err = net.backward(&mut tape, g.view()).unwrap_err();
        assert!(matches!(err, NetError::TapeConsumed));
    }

    #[test]
    fn refilled_tape_is_usable_again_and_matches_fresh_state() {
        let net = seeded(&[1, 6, 2], 8);
        let inputs_a = array![[0.3], [1.7]];
        let inputs_b = array![[-0.4], [0.9]];
        let g = array![[0.2, -0.1], [0.05, 0.7]];

        let mut reused = Tape::new();
        net.forward_tape_into(inputs_a.view(), &mut reused).unwrap();
        net.backward(&mut reused, g.view()).unwrap();
        net.forward_tape_into(inputs_b.view(), &mut reused).unwrap();
        let (grads_reused, _) = net.backward(&mut reused, g.view()).unwrap();

        let mut fresh = net.forward_tape(inputs_b.view()).unwrap();
        let (grads_fresh, _) = net.backward(&mut fresh, g.view()).unwrap();
        assert_eq!(grads_reused, grads_fresh);
    }

    #[test]
    fn backward_is_linear_in_loss_grad() {
        let net = seeded(&[2, 6, 2], 9);
        let inputs = array![[0.2, -0.7], [1.1, 0.4], [-0.3, 0.9]];
        let g = Array2::from_shape_fn((3, 2), |(i, j)| (i as f64 + 1.0) * 0.3 - j as f64 * 0.8);
        let alpha = 2.75;

        let mut tape1 = net.forward_tape(inputs.view()).unwrap();
        let (grads, _) = net.backward(&mut tape1, g.view()).unwrap();
        let mut tape2 = net.forward_tape(inputs.view()).unwrap();
        let scaled_g = g.mapv(|v| alpha * v);
        let (grads_scaled, _) = net.backward(&mut tape2, scaled_g.view()).unwrap();

        for (a, b) in grads.flat().iter().zip(grads_scaled.flat()) {
            assert!((alpha * a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}
