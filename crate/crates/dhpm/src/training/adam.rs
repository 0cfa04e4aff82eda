//! Adam with bias correction, applied in place to a network's parameters.

use ndarray::{Array1, Array2};

use super::TrainError;
use crate::net::{Gradients, MlpNetwork};

/// Optimizer hyperparameters. The defaults besides the learning rate are the
/// standard beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamHyper {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, shape-congruent with the network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Gradients,
    v: Gradients,
    step: u64,
}

impl AdamState {
    pub fn new(net: &MlpNetwork) -> Self {
        Self {
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

fn update_array2(p: &mut Array2<f64>, g: &Array2<f64>, m: &mut Array2<f64>, v: &mut Array2<f64>, h: &AdamHyper, c1: f64, c2: f64) {
    ndarray::Zip::from(p)
        .and(g)
        .and(m)
        .and(v)
        .for_each(|p, &g, m, v| {
            *m = h.beta1 * *m + (1.0 - h.beta1) * g;
            *v = h.beta2 * *v + (1.0 - h.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= h.learning_rate * m_hat / (v_hat.sqrt() + h.epsilon);
        });
}

fn update_array1(p: &mut Array1<f64>, g: &Array1<f64>, m: &mut Array1<f64>, v: &mut Array1<f64>, h: &AdamHyper, c1: f64, c2: f64) {
    ndarray::Zip::from(p)
        .and(g)
        .and(m)
        .and(v)
        .for_each(|p, &g, m, v| {
            *m = h.beta1 * *m + (1.0 - h.beta1) * g;
            *v = h.beta2 * *v + (1.0 - h.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= h.learning_rate * m_hat / (v_hat.sqrt() + h.epsilon);
        });
}

/// One bias-corrected Adam update of `net` under `grads`. Deterministic:
/// identical inputs produce identical parameters and moments.
pub fn adam_step(
    net: &mut MlpNetwork,
    grads: &Gradients,
    state: &mut AdamState,
    hyper: &AdamHyper,
) -> Result<(), TrainError> {
    if !grads.is_finite() {
        return Err(TrainError::NonFiniteGradient {
            step: state.step + 1,
        });
    }
    state.step += 1;
    let c1 = 1.0 - hyper.beta1.powi(state.step as i32);
    let c2 = 1.0 - hyper.beta2.powi(state.step as i32);
    let (weights, biases) = net.params_mut();
    for ((p, g), (m, v)) in weights
        .iter_mut()
        .zip(&grads.weights)
        .zip(state.m.weights.iter_mut().zip(state.v.weights.iter_mut()))
    {
        update_array2(p, g, m, v, hyper, c1, c2);
    }
    for ((p, g), (m, v)) in biases
        .iter_mut()
        .zip(&grads.biases)
        .zip(state.m.biases.iter_mut().zip(state.v.biases.iter_mut()))
    {
        update_array1(p, g, m, v, hyper, c1, c2);
    }
    Ok(())
}
