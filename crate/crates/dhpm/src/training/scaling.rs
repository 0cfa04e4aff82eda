//! Non-dimensionalization: affine maps taking each state into [-1, 1] and
//! time into [0, 1], with the matching chain-rule factor for derivatives.
//!
//! With `xs_i = (x_i - c_i) / s_i` and `ts = t / T`, derivatives transform as
//! `d xs_i / d ts = (T / s_i) * d x_i / d t`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub centers: Vec<f64>,
    pub scales: Vec<f64>,
    pub time_scale: f64,
}

impl ScalingSpec {
    /// The do-nothing scaling (centers 0, scales 1, time scale 1).
    pub fn identity(dim: usize) -> Self {
        Self {
            centers: vec![0.0; dim],
            scales: vec![1.0; dim],
            time_scale: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.centers.len()
    }

    pub fn is_identity(&self) -> bool {
        self.time_scale == 1.0
            && self.centers.iter().all(|&c| c == 0.0)
            && self.scales.iter().all(|&s| s == 1.0)
    }

    /// Factor turning a raw derivative of state `i` into a scaled one.
    pub fn deriv_factor(&self, i: usize) -> f64 {
        self.time_scale / self.scales[i]
    }

    pub fn scale_time(&self, t: f64) -> f64 {
        t / self.time_scale
    }

    pub fn scale_states(&self, states: &Array2<f64>) -> Array2<f64> {
        let mut out = states.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| (v - self.centers[j]) / self.scales[j]);
        }
        out
    }

    pub fn unscale_states(&self, scaled: &Array2<f64>) -> Array2<f64> {
        let mut out = scaled.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| self.centers[j] + self.scales[j] * v);
        }
        out
    }

    pub fn scale_derivs(&self, derivs: &Array2<f64>) -> Array2<f64> {
        let mut out = derivs.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let f = self.deriv_factor(j);
            col.mapv_inplace(|v| f * v);
        }
        out
    }

    pub fn unscale_derivs(&self, scaled: &Array2<f64>) -> Array2<f64> {
        let mut out = scaled.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let f = self.deriv_factor(j);
            col.mapv_inplace(|v| v / f);
        }
        out
    }
}

/// Min-max scaling of a trajectory onto [-1, 1] per state and [0, 1] in
/// time. A degenerate state (max equal to min) falls back to unit scale
/// centered on its value.
pub fn nondimensionalize(traj: &Trajectory) -> (Trajectory, ScalingSpec) {
    let dim = traj.dim();
    let mut centers = Vec::with_capacity(dim);
    let mut scales = Vec::with_capacity(dim);
    for col in traj.states.columns() {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in col {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi > lo {
            centers.push((hi + lo) / 2.0);
            scales.push((hi - lo) / 2.0);
        } else {
            centers.push(lo);
            scales.push(1.0);
        }
    }
    let t_last = traj.times.last().copied().unwrap_or(1.0);
    let time_scale = if t_last > 0.0 { t_last } else { 1.0 };
    let spec = ScalingSpec {
        centers,
        scales,
        time_scale,
    };
    let scaled = Trajectory {
        times: traj.times.iter().map(|&t| spec.scale_time(t)).collect(),
        states: spec.scale_states(&traj.states),
        derivs: spec.scale_derivs(&traj.derivs),
    };
    (scaled, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate_reference, lorenz};
    use ndarray::array;

    #[test]
    fn symmetric_span_maps_linearly() {
        let traj = Trajectory {
            times: vec![0.0, 1.0, 2.0],
            states: array![[-20.0], [10.0], [20.0]],
            derivs: array![[0.0], [0.0], [0.0]],
        };
        let (scaled, spec) = nondimensionalize(&traj);
        assert_eq!(spec.centers, vec![0.0]);
        assert_eq!(spec.scales, vec![20.0]);
        assert_eq!(scaled.states[(1, 0)], 0.5);
        assert_eq!(scaled.times, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn round_trip_is_exact_to_machine_precision() {
        let sys = lorenz();
        let traj = integrate_reference(&sys, &sys.reference_grid()).unwrap();
        let (scaled, spec) = nondimensionalize(&traj);
        // Containment up to one rounding of the affine map.
        let slack = 1.0 + 1e-12;
        assert!(scaled.states.iter().all(|&v| (-slack..=slack).contains(&v)));
        let back = spec.unscale_states(&scaled.states);
        for (a, b) in back.iter().zip(traj.states.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        let derivs_back = spec.unscale_derivs(&scaled.derivs);
        for (a, b) in derivs_back.iter().zip(traj.derivs.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn scaled_derivatives_obey_the_chain_rule() {
        let sys = lorenz();
        let traj = integrate_reference(&sys, &sys.reference_grid()).unwrap();
        let (scaled, spec) = nondimensionalize(&traj);
        for j in 0..traj.dim() {
            let f = spec.deriv_factor(j);
            for i in 0..traj.len() {
                let expected = f * traj.derivs[(i, j)];
                assert_eq!(scaled.derivs[(i, j)], expected);
            }
        }
    }

    #[test]
    fn degenerate_state_gets_unit_scale() {
        let traj = Trajectory {
            times: vec![0.0, 1.0],
            states: array![[3.0, 1.0], [3.0, 2.0]],
            derivs: array![[0.0, 1.0], [0.0, 1.0]],
        };
        let (scaled, spec) = nondimensionalize(&traj);
        assert_eq!(spec.scales[0], 1.0);
        assert_eq!(scaled.states[(0, 0)], 0.0);
        assert_eq!(scaled.states[(1, 0)], 0.0);
    }
}
