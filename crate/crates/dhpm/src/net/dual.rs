//! Forward-mode propagation of (value, d/dt) pairs through the network, and
//! reverse-mode over that dual pass.
//!
//! The dual batch is stacked: for a batch of B times, each level holds a
//! `2B x width` matrix whose top half is the primal activation and whose
//! bottom half is its tangent (derivative w.r.t. the time input). Stacking
//! lets one GEMM per layer serve both halves, and the parameter gradient of
//! a loss depending on both halves is a single product against the stacked
//! matrix: dW = a^T u + adot^T v.
//!
//! Backward through tanh needs the second derivative: with a = tanh(z),
//! phi' = 1 - a^2 and phi'' = -2 a phi', and the adjoints of (a, adot) pull
//! back to (z, zdot) as
//!   g_z    = phi' * (g_a - 2 a * g_adot * zdot)
//!   g_zdot = phi' * g_adot
//! so the pre-activation tangents zdot are kept on the tape.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, Axis, Zip};

use super::{math, scratch_view, Activation, Gradients, MlpNetwork, NetError};

/// Tape of a dual forward pass; consumed once by
/// [`MlpNetwork::dual_backward`]. Refill with
/// [`MlpNetwork::dual_forward_into`] to reuse the storage.
#[derive(Debug, Default)]
pub struct DualTape {
    /// Stacked `2B x width` post-activation values per level; level 0 is the
    /// stacked input `[t; 1]`.
    stacked: Vec<Array2<f64>>,
    /// Pre-activation tangents per hidden level (levels `1..n_layers`).
    pre_tangents: Vec<Array2<f64>>,
    /// Ping-pong buffers for the backward sweep, `2 * batch * max_width`.
    scratch: [Vec<f64>; 2],
    batch: usize,
    consumed: bool,
}

impl DualTape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Primal network output.
    pub fn value_output(&self) -> ArrayView2<'_, f64> {
        let last = self.stacked.last().unwrap();
        last.slice(ndarray::s![..self.batch, ..])
    }

    /// Tangent output, i.e. the derivative of each output w.r.t. the time
    /// input.
    pub fn tangent_output(&self) -> ArrayView2<'_, f64> {
        let last = self.stacked.last().unwrap();
        last.slice(ndarray::s![self.batch.., ..])
    }

    fn matches(&self, net: &MlpNetwork, batch: usize) -> bool {
        self.batch == batch
            && self.stacked.len() == net.layer_sizes().len()
            && self
                .stacked
                .iter()
                .zip(net.layer_sizes())
                .all(|(a, &w)| a.dim() == (2 * batch, w))
    }

    fn prepare(&mut self, net: &MlpNetwork, batch: usize) {
        if !self.matches(net, batch) {
            let sizes = net.layer_sizes();
            self.stacked = sizes
                .iter()
                .map(|&w| Array2::zeros((2 * batch, w)))
                .collect();
            self.pre_tangents = sizes[1..sizes.len() - 1]
                .iter()
                .map(|&w| Array2::zeros((batch, w)))
                .collect();
            let widest = 2 * batch * net.max_width();
            self.scratch = [vec![0.0; widest], vec![0.0; widest]];
            self.batch = batch;
        }
        self.consumed = false;
    }
}

impl MlpNetwork {
    /// Forward pass carrying the derivative w.r.t. the scalar input, seeded
    /// with dt/dt = 1, reusing the tape's storage when its shape already
    /// matches. Requires a 1-dimensional input layer.
    pub fn dual_forward_into(
        &self,
        times: ArrayView2<'_, f64>,
        tape: &mut DualTape,
    ) -> Result<(), NetError> {
        if self.input_dim() != 1 {
            return Err(NetError::ShapeMismatch(format!(
                "time derivative needs input dim 1, network has {}",
                self.input_dim()
            )));
        }
        if times.ncols() != 1 {
            return Err(NetError::ShapeMismatch(format!(
                "times must be a column, got {} columns",
                times.ncols()
            )));
        }
        let batch = times.nrows();
        let n_layers = self.weights().len();
        tape.prepare(self, batch);

        {
            let level0 = &mut tape.stacked[0];
            level0.slice_mut(ndarray::s![..batch, ..]).assign(&times);
            level0.slice_mut(ndarray::s![batch.., ..]).fill(1.0);
        }

        for l in 0..n_layers {
            let (before, after) = tape.stacked.split_at_mut(l + 1);
            let z = &mut after[0];
            general_mat_mul(1.0, &before[l], &self.weights()[l], 0.0, z);
            // Bias enters the primal half only; tangents are bias-free.
            {
                let mut top = z.slice_mut(ndarray::s![..batch, ..]);
                top += &self.biases()[l];
            }
            let hidden = l + 1 < n_layers;
            if hidden && self.activation() == Activation::Tanh {
                tape.pre_tangents[l].assign(&z.slice(ndarray::s![batch.., ..]));
                let (mut top, mut bottom) = z.view_mut().split_at(Axis(0), batch);
                math::tanh_inplace(&mut top);
                Zip::from(&mut bottom)
                    .and(&top)
                    .for_each(|zd, &a| *zd *= 1.0 - a * a);
            }
            // Identity activation: phi'' = 0, nothing extra to record.
        }
        Ok(())
    }

    /// Allocating convenience wrapper around
    /// [`MlpNetwork::dual_forward_into`].
    pub fn dual_forward(&self, times: ArrayView2<'_, f64>) -> Result<DualTape, NetError> {
        let mut tape = DualTape::new();
        self.dual_forward_into(times, &mut tape)?;
        Ok(tape)
    }

    /// Reverse-mode over the dual pass: gradients w.r.t. parameters of any
    /// scalar loss with output gradients `value_grad` (w.r.t. the primal
    /// output) and `tangent_grad` (w.r.t. the d/dt output).
    pub fn dual_backward(
        &self,
        tape: &mut DualTape,
        value_grad: ArrayView2<'_, f64>,
        tangent_grad: ArrayView2<'_, f64>,
    ) -> Result<Gradients, NetError> {
        if tape.consumed {
            return Err(NetError::TapeConsumed);
        }
        let batch = tape.batch;
        let out = self.output_dim();
        if value_grad.dim() != (batch, out) || tangent_grad.dim() != (batch, out) {
            return Err(NetError::ShapeMismatch(format!(
                "output gradients {:?}/{:?}, expected ({batch}, {out})",
                value_grad.dim(),
                tangent_grad.dim()
            )));
        }
        if !tape.matches(self, batch) {
            return Err(NetError::ShapeMismatch(
                "dual tape does not match this network".into(),
            ));
        }
        tape.consumed = true;

        let mut grads = Gradients::zeros_like(self);
        let n_layers = self.weights().len();
        let stacked = &tape.stacked;
        let pre_tangents = &tape.pre_tangents;
        let [buf_a, buf_b] = &mut tape.scratch;

        // Output is linear: the stacked gradient w.r.t. the last
        // pre-activation is just [value_grad; tangent_grad].
        {
            let mut g = scratch_view(buf_a, 2 * batch, out);
            g.slice_mut(ndarray::s![..batch, ..]).assign(&value_grad);
            g.slice_mut(ndarray::s![batch.., ..]).assign(&tangent_grad);
        }

        for l in (0..n_layers).rev() {
            let (g_buf, prev_buf) = if (n_layers - l) % 2 == 1 {
                (&mut *buf_a, &mut *buf_b)
            } else {
                (&mut *buf_b, &mut *buf_a)
            };
            let g = scratch_view(g_buf, 2 * batch, self.layer_sizes()[l + 1]);
            general_mat_mul(1.0, &stacked[l].t(), &g.view(), 0.0, &mut grads.weights[l]);
            // Bias feeds the primal half only.
            grads.biases[l] = g.slice(ndarray::s![..batch, ..]).sum_axis(Axis(0));
            if l == 0 {
                break; // No gradient w.r.t. the time input is needed.
            }

            let mut g_prev = scratch_view(prev_buf, 2 * batch, self.layer_sizes()[l]);
            general_mat_mul(1.0, &g.view(), &self.weights()[l].t(), 0.0, &mut g_prev);
            if self.activation() == Activation::Tanh {
                let level = &stacked[l];
                let a = level.slice(ndarray::s![..batch, ..]);
                let zdot = &pre_tangents[l - 1];
                let (mut gu, mut gv) = g_prev.split_at(Axis(0), batch);
                // Order matters: the gu update reads the old gv.
                Zip::from(&mut gu)
                    .and(&a)
                    .and(zdot)
                    .and(&gv.view())
                    .for_each(|u, &a, &zd, &v| {
                        let phi1 = 1.0 - a * a;
                        *u = phi1 * (*u - 2.0 * a * v * zd);
                    });
                Zip::from(&mut gv).and(&a).for_each(|v, &a| *v *= 1.0 - a * a);
            }
            // Identity activation passes gradients through unchanged.
        }
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use ndarray::Array1;

    #[test]
    fn affine_layer_time_derivative_is_the_weight() {
        let net = MlpNetwork::from_parts(
            vec![1, 2],
            Activation::Identity,
            vec![array![[1.5, -0.3]]],
            vec![array![0.7, 0.1]],
            0,
        )
        .unwrap();
        let d = net
            .input_time_derivative(array![[0.0], [2.0], [-1.0]].view())
            .unwrap();
        for i in 0..3 {
            assert_eq!(d[(i, 0)], 1.5);
            assert_eq!(d[(i, 1)], -0.3);
        }
    }

    #[test]
    fn constant_network_has_zero_time_derivative() {
        // Zero weights into the output make the network constant in t.
        let net = MlpNetwork::from_parts(
            vec![1, 4, 2],
            Activation::Tanh,
            vec![
                Array2::from_shape_fn((1, 4), |(_, j)| 0.3 + j as f64),
                Array2::zeros((4, 2)),
            ],
            vec![Array1::zeros(4), array![1.0, -2.0]],
            0,
        )
        .unwrap();
        let d = net.input_time_derivative(array![[0.1], [0.9]].view()).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
        let tape = net.dual_forward(array![[0.1], [0.9]].view()).unwrap();
        assert_eq!(tape.value_output()[(0, 0)], 1.0);
        assert_eq!(tape.value_output()[(0, 1)], -2.0);
    }

    #[test]
    fn time_derivative_requires_scalar_input() {
        let net = MlpNetwork::init(&[2, 4, 1], Activation::Tanh, 0).unwrap();
        let err = net.input_time_derivative(array![[0.1, 0.2]].view()).unwrap_err();
        assert!(matches!(err, NetError::ShapeMismatch(_)));
    }

    #[test]
    fn tangent_matches_central_differences() {
        let net = MlpNetwork::init(&[1, 8, 2], Activation::Tanh, 11).unwrap();
        let times = array![[0.0], [0.35], [-1.2], [2.7]];
        let d = net.input_time_derivative(times.view()).unwrap();
        let h = 1e-6;
        let plus = net.forward(times.mapv(|t| t + h).view()).unwrap();
        let minus = net.forward(times.mapv(|t| t - h).view()).unwrap();
        let fd = (&plus - &minus) / (2.0 * h);
        for (a, b) in d.iter().zip(fd.iter()) {
            let rel = (a - b).abs() / b.abs().max(1e-8);
            assert!(rel < 1e-6, "analytic {a} vs fd {b}");
        }
    }

    #[test]
    fn dual_value_half_equals_plain_forward() {
        let net = MlpNetwork::init(&[1, 8, 8, 3], Activation::Tanh, 21).unwrap();
        let times = array![[0.2], [1.4], [-0.6]];
        let tape = net.dual_forward(times.view()).unwrap();
        let fwd = net.forward(times.view()).unwrap();
        assert_eq!(tape.value_output().to_owned(), fwd);
    }

    #[test]
    fn dual_tape_reuse_is_an_error() {
        let net = MlpNetwork::init(&[1, 4, 1], Activation::Tanh, 2).unwrap();
        let times = array![[0.5]];
        let mut tape = net.dual_forward(times.view()).unwrap();
        let g = Array2::ones((1, 1));
        net.dual_backward(&mut tape, g.view(), g.view()).unwrap();
        let err = net.dual_backward(&mut tape, g.view(), g.view()).unwrap_err();
        assert!(matches!(err, NetError::TapeConsumed));
    }

    #[test]
    fn refilled_dual_tape_matches_fresh_results() {
        let net = MlpNetwork::init(&[1, 6, 6, 2], Activation::Tanh, 31).unwrap();
        let times_a = array![[0.1], [0.8], [1.5]];
        let times_b = array![[-0.2], [0.4], [2.2]];
        let g = array![[0.3, -0.4], [0.9, 0.1], [-0.6, 0.2]];

        let mut reused = DualTape::new();
        net.dual_forward_into(times_a.view(), &mut reused).unwrap();
        net.dual_backward(&mut reused, g.view(), g.view()).unwrap();
        net.dual_forward_into(times_b.view(), &mut reused).unwrap();
        let grads_reused = net.dual_backward(&mut reused, g.view(), g.view()).unwrap();

        let mut fresh = net.dual_forward(times_b.view()).unwrap();
        let grads_fresh = net.dual_backward(&mut fresh, g.view(), g.view()).unwrap();
        assert_eq!(grads_reused, grads_fresh);
    }
}
