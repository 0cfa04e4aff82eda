//! Central finite-difference probes for verifying analytic gradients.
//!
//! These only ever call the plain forward paths, so they stay independent of
//! the reverse-mode and dual-number code they are used to check.

use super::{Gradients, MlpNetwork};

/// Central-difference gradient of `loss` w.r.t. every parameter of `net`.
pub fn numeric_param_grad<F>(net: &MlpNetwork, step: f64, mut loss: F) -> Vec<f64>
where
    F: FnMut(&MlpNetwork) -> f64,
{
    (0..net.param_count())
        .map(|idx| {
            let plus = loss(&net.perturbed(idx, step));
            let minus = loss(&net.perturbed(idx, -step));
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

/// Largest relative deviation between an analytic gradient and its numeric
/// counterpart, with `floor` guarding components near zero.
pub fn max_rel_error(analytic: &Gradients, numeric: &[f64], floor: f64) -> f64 {
    let flat = analytic.flat();
    assert_eq!(flat.len(), numeric.len(), "gradient length mismatch");
    flat.iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / n.abs().max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, MlpNetwork};
    use ndarray::Array2;

    fn batch(rows: usize, cols: usize, scale: f64) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |(i, j)| {
            ((i * cols + j) as f64 * 0.37 + 0.11).sin() * scale
        })
    }

    fn mse_to_zero(net: &MlpNetwork, inputs: &Array2<f64>) -> f64 {
        let out = net.forward(inputs.view()).unwrap();
        out.iter().map(|v| v * v).sum::<f64>() / out.nrows() as f64
    }

    #[test]
    fn reverse_mode_matches_finite_differences() {
        let net = MlpNetwork::init(&[1, 8, 8, 2], Activation::Tanh, 13).unwrap();
        let inputs = batch(6, 1, 1.5);

        let mut tape = net.forward_tape(inputs.view()).unwrap();
        let loss_grad = tape.output().mapv(|v| 2.0 * v / inputs.nrows() as f64);
        let (grads, _) = net.backward(&mut tape, loss_grad.view()).unwrap();

        let numeric = numeric_param_grad(&net, 1e-6, |n| mse_to_zero(n, &inputs));
        assert!(max_rel_error(&grads, &numeric, 1e-4) < 1e-6);
    }

    #[test]
    fn dual_backward_matches_finite_differences_of_tangent_loss() {
        // Loss = mean of squared time derivatives; its parameter gradient
        // exercises the reverse-over-dual path including phi''.
        let net = MlpNetwork::init(&[1, 6, 6, 2], Activation::Tanh, 29).unwrap();
        let times = batch(5, 1, 2.0);

        let tangent_loss = |n: &MlpNetwork| {
            let d = n.input_time_derivative(times.view()).unwrap();
            d.iter().map(|v| v * v).sum::<f64>() / times.nrows() as f64
        };

        let mut tape = net.dual_forward(times.view()).unwrap();
        let tangent_grad = tape
            .tangent_output()
            .mapv(|v| 2.0 * v / times.nrows() as f64);
        let value_grad = Array2::zeros(tangent_grad.dim());
        let grads = net
            .dual_backward(&mut tape, value_grad.view(), tangent_grad.view())
            .unwrap();

        let numeric = numeric_param_grad(&net, 1e-6, tangent_loss);
        assert!(max_rel_error(&grads, &numeric, 1e-4) < 1e-6);
    }
}
