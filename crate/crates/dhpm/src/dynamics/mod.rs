//! Autonomous benchmark systems and reference-trajectory generation.
//!
//! Each system is a named entry in a static registry: a right-hand side
//! behind the [`VectorField`] trait plus the initial condition, horizon and
//! grid size used to generate its reference data. Reference trajectories are
//! integrated with an adaptive Dormand-Prince 5(4) scheme at tolerances far
//! below anything the training pipeline can resolve, and carry exact
//! derivative labels computed by re-evaluating the right-hand side at the
//! integrated states.

use std::collections::BTreeMap;
use std::sync::{Arc, LazyLock};

use ndarray::Array2;
use thiserror::Error;

mod dopri5;
mod presets;

pub use presets::{lorenz, nonlinear, type_a, type_b};

/// Right-hand side of an autonomous system: depends on the state only, never
/// on time.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, state: &[f64], out: &mut [f64]);
}

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("integration failed at t = {t_reached}: step size underflow")]
    IntegrationFailure { t_reached: f64 },
    #[error("solution diverged (non-finite state) near t = {t_reached}")]
    Divergence { t_reached: f64 },
}

/// A named autonomous system together with the reference-data settings used
/// throughout the experiments.
#[derive(Clone)]
pub struct AutonomousSystem {
    pub name: String,
    pub params: Vec<(String, f64)>,
    pub initial_state: Vec<f64>,
    pub t_end: f64,
    pub n_points: usize,
    pub state_names: Vec<String>,
    rhs: Arc<dyn VectorField>,
}

impl std::fmt::Debug for AutonomousSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AutonomousSystem")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("params", &self.params)
            .field("t_end", &self.t_end)
            .field("n_points", &self.n_points)
            .finish()
    }
}

impl AutonomousSystem {
    pub fn new(
        name: impl Into<String>,
        params: Vec<(String, f64)>,
        initial_state: Vec<f64>,
        t_end: f64,
        n_points: usize,
        state_names: Vec<String>,
        rhs: Arc<dyn VectorField>,
    ) -> Result<Self, DynamicsError> {
        if initial_state.is_empty() {
            return Err(DynamicsError::InvalidArgument(
                "initial state must have at least one component".into(),
            ));
        }
        if rhs.dim() != initial_state.len() || state_names.len() != initial_state.len() {
            return Err(DynamicsError::InvalidArgument(format!(
                "dimension mismatch: rhs {} / initial state {} / names {}",
                rhs.dim(),
                initial_state.len(),
                state_names.len()
            )));
        }
        if !(t_end > 0.0) || n_points < 2 {
            return Err(DynamicsError::InvalidArgument(
                "need t_end > 0 and n_points >= 2".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            params,
            initial_state,
            t_end,
            n_points,
            state_names,
            rhs,
        })
    }

    pub fn dim(&self) -> usize {
        self.initial_state.len()
    }

    pub fn rhs(&self, state: &[f64], out: &mut [f64]) {
        self.rhs.eval(state, out);
    }

    /// Evaluate the right-hand side row-wise over a batch of states.
    pub fn rhs_matrix(&self, states: &Array2<f64>) -> Array2<f64> {
        let dim = self.dim();
        let mut out = Array2::zeros(states.raw_dim());
        let mut buf = vec![0.0; dim];
        for (row, mut target) in states.rows().into_iter().zip(out.rows_mut()) {
            self.rhs.eval(row.as_slice().unwrap(), &mut buf);
            for (t, &v) in target.iter_mut().zip(&buf) {
                *t = v;
            }
        }
        out
    }

    /// The grid the system's reference data lives on.
    pub fn reference_grid(&self) -> Vec<f64> {
        uniform_grid(self.t_end, self.n_points).expect("preset grid parameters are valid")
    }
}

type SystemFactory = fn() -> AutonomousSystem;

static REGISTRY: LazyLock<BTreeMap<&'static str, SystemFactory>> = LazyLock::new(|| {
    let mut map: BTreeMap<&'static str, SystemFactory> = BTreeMap::new();
    map.insert("type-a", type_a as SystemFactory);
    map.insert("type-b", type_b as SystemFactory);
    map.insert("nonlinear", nonlinear as SystemFactory);
    map.insert("lorenz", lorenz as SystemFactory);
    map
});

/// Look a preset system up by name.
pub fn system(name: &str) -> Option<AutonomousSystem> {
    REGISTRY.get(name).map(|factory| factory())
}

/// Registered preset names, sorted.
pub fn system_names() -> Vec<&'static str> {
    REGISTRY.keys().copied().collect()
}

/// Time grid, state matrix and exact derivative labels of one solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `N x k`, one state per row.
    pub states: Array2<f64>,
    /// `N x k`, the right-hand side evaluated at each state row.
    pub derivs: Array2<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.ncols()
    }
}

/// `n_points` equally spaced values covering `[0, t_end]` inclusive.
pub fn uniform_grid(t_end: f64, n_points: usize) -> Result<Vec<f64>, DynamicsError> {
    if n_points < 2 {
        return Err(DynamicsError::InvalidArgument(format!(
            "need at least 2 grid points, got {n_points}"
        )));
    }
    if !(t_end > 0.0) {
        return Err(DynamicsError::InvalidArgument(format!(
            "need t_end > 0, got {t_end}"
        )));
    }
    let last = n_points - 1;
    Ok((0..n_points)
        .map(|i| {
            if i == 0 {
                0.0
            } else if i == last {
                t_end
            } else {
                t_end * i as f64 / last as f64
            }
        })
        .collect())
}

/// Solve the system's initial value problem and sample it at `times`.
///
/// Integration runs in time relative to `times[0]`, so an autonomous system
/// started later sees exactly the arithmetic of a start at zero.
pub fn integrate_reference(
    system: &AutonomousSystem,
    times: &[f64],
) -> Result<Trajectory, DynamicsError> {
    if times.is_empty() {
        return Err(DynamicsError::InvalidArgument("empty time grid".into()));
    }
    if times[0] < 0.0 {
        return Err(DynamicsError::InvalidArgument(format!(
            "times must start at or after 0, got {}",
            times[0]
        )));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DynamicsError::InvalidArgument(
            "times must be strictly increasing".into(),
        ));
    }

    let t0 = times[0];
    let rel: Vec<f64> = times.iter().map(|t| t - t0).collect();
    let dim = system.dim();
    let rhs = |state: &[f64], out: &mut [f64]| system.rhs(state, out);

    let rows = dopri5::solve_dense(rhs, &system.initial_state, &rel, 1e-10, 1e-12).map_err(
        |failure| match failure {
            dopri5::StepFailure::Underflow { t_reached } => DynamicsError::IntegrationFailure {
                t_reached: t_reached + t0,
            },
            dopri5::StepFailure::NonFinite { t_reached } => DynamicsError::Divergence {
                t_reached: t_reached + t0,
            },
        },
    )?;

    let mut states = Array2::zeros((times.len(), dim));
    for (mut row, values) in states.rows_mut().into_iter().zip(&rows) {
        for (slot, &v) in row.iter_mut().zip(values) {
            *slot = v;
        }
    }
    let derivs = system.rhs_matrix(&states);
    Ok(Trajectory {
        times: times.to_vec(),
        states,
        derivs,
    })
}

/// Format one float with 17 significant digits, enough to round-trip `f64`
/// exactly.
pub fn format_full(value: f64) -> String {
    format!("{value:.16e}")
}

/// CSV with header `t,<names...>,d<names...>` in full double precision.
pub fn trajectory_csv(traj: &Trajectory, state_names: &[String]) -> String {
    assert_eq!(traj.dim(), state_names.len(), "state name count mismatch");
    let mut out = String::from("t");
    for name in state_names {
        out.push(',');
        out.push_str(name);
    }
    for name in state_names {
        out.push_str(",d");
        out.push_str(name);
    }
    out.push('\n');
    for (i, &t) in traj.times.iter().enumerate() {
        out.push_str(&format_full(t));
        for v in traj.states.row(i) {
            out.push(',');
            out.push_str(&format_full(*v));
        }
        for v in traj.derivs.row(i) {
            out.push(',');
            out.push_str(&format_full(*v));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed form for the type-a preset: x1'' = -0.21 x1 gives
    /// x1 = cos(w t), x2 = -(w / 0.3) sin(w t) with w = sqrt(0.21).
    fn type_a_analytic(t: f64) -> [f64; 2] {
        let w = 0.21_f64.sqrt();
        [(w * t).cos(), -(w / 0.3) * (w * t).sin()]
    }

    #[test]
    fn uniform_grid_matches_preset_spacings() {
        let grid = uniform_grid(50.0, 501).unwrap();
        assert_eq!(grid[0], 0.0);
        assert_eq!(*grid.last().unwrap(), 50.0);
        for w in grid.windows(2) {
            assert!((w[1] - w[0] - 0.1).abs() < 1e-12);
        }
        let grid = uniform_grid(20.0, 201).unwrap();
        assert!((grid[1] - grid[0] - 0.1).abs() < 1e-12);
        assert_eq!(uniform_grid(1.0, 2).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn uniform_grid_rejects_degenerate_input() {
        assert!(matches!(
            uniform_grid(1.0, 1),
            Err(DynamicsError::InvalidArgument(_))
        ));
        assert!(uniform_grid(0.0, 5).is_err());
    }

    #[test]
    fn type_a_matches_analytic_solution() {
        let sys = type_a();
        let grid = sys.reference_grid();
        let traj = integrate_reference(&sys, &grid).unwrap();
        let mut max_err = 0.0_f64;
        for (i, &t) in traj.times.iter().enumerate() {
            let exact = type_a_analytic(t);
            max_err = max_err
                .max((traj.states[(i, 0)] - exact[0]).abs())
                .max((traj.states[(i, 1)] - exact[1]).abs());
        }
        assert!(max_err < 1e-8, "max abs error {max_err}");
    }

    #[test]
    fn initial_point_is_exact() {
        for name in system_names() {
            let sys = system(name).unwrap();
            let traj = integrate_reference(&sys, &sys.reference_grid()).unwrap();
            for j in 0..sys.dim() {
                assert_eq!(traj.states[(0, j)], sys.initial_state[j], "{name} state {j}");
            }
            let mut expected = vec![0.0; sys.dim()];
            sys.rhs(&sys.initial_state, &mut expected);
            for j in 0..sys.dim() {
                assert_eq!(traj.derivs[(0, j)], expected[j], "{name} deriv {j}");
            }
        }
    }

    #[test]
    fn lorenz_stays_finite_and_self_converges() {
        let sys = lorenz();
        let grid = sys.reference_grid();
        let traj = integrate_reference(&sys, &grid).unwrap();
        assert!(traj.states.iter().all(|v| v.is_finite()));

        // Self-convergence oracle: a tighter re-integration bounds the
        // reference tolerance error, chaotic amplification included.
        let rhs = |state: &[f64], out: &mut [f64]| sys.rhs(state, out);
        let tight = dopri5::solve_dense(rhs, &sys.initial_state, &grid, 1e-12, 1e-14).unwrap();
        let mut max_diff = 0.0_f64;
        for (i, row) in tight.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                max_diff = max_diff.max((traj.states[(i, j)] - v).abs());
            }
        }
        assert!(max_diff < 1e-6, "tolerance-refinement gap {max_diff}");
    }

    #[test]
    fn fixed_step_error_scales_as_fifth_order()  {
        // Classical order check on the type-a system over [0, 10].
        let sys = type_a();
        let rhs = |state: &[f64], out: &mut [f64]| sys.rhs(state, out);
        let errors: Vec<f64> = [0.1_f64, 0.05, 0.025]
            .iter()
            .map(|&h| {
                let n = (10.0 / h).round() as usize;
                let path = dopri5::solve_fixed_step(rhs, &sys.initial_state, h, n);
                path.iter()
                    .enumerate()
                    .map(|(i, y)| {
                        let exact = type_a_analytic(i as f64 * h);
                        (y[0] - exact[0]).abs().max((y[1] - exact[1]).abs())
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        for pair in errors.windows(2) {
            let order = (pair[0] / pair[1]).log2();
            assert!(
                (4.2..6.5).contains(&order),
                "observed order {order} from errors {errors:?}"
            );
        }
    }

    #[test]
    fn autonomy_makes_integration_time_shift_invariant() {
        let sys = type_b();
        // Offsets chosen exactly representable so the shifted grid subtracts
        // without rounding.
        let base: Vec<f64> = (0..33).map(|i| i as f64 * 0.125).collect();
        let shifted: Vec<f64> = base.iter().map(|t| t + 2.0).collect();
        let a = integrate_reference(&sys, &base).unwrap();
        let b = integrate_reference(&sys, &shifted).unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn derivative_labels_match_central_differences() {
        let sys = nonlinear();
        let grid = uniform_grid(sys.t_end, 2001).unwrap();
        let traj = integrate_reference(&sys, &grid).unwrap();
        let dt = grid[1] - grid[0];
        let mut worst = 0.0_f64;
        for i in 1..grid.len() - 1 {
            for j in 0..sys.dim() {
                let fd = (traj.states[(i + 1, j)] - traj.states[(i - 1, j)]) / (2.0 * dt);
                worst = worst.max((fd - traj.derivs[(i, j)]).abs());
            }
        }
        // Central differences are O(dt^2); dt = 0.01 here.
        assert!(worst < 5e-4, "worst finite-difference gap {worst}");
    }

    #[test]
    fn divergent_system_reports_divergence() {
        struct Blowup;
        impl VectorField for Blowup {
            fn dim(&self) -> usize {
                1
            }
            fn eval(&self, state: &[f64], out: &mut [f64]) {
                out[0] = state[0] * state[0];
            }
        }
        // y' = y^2 from y(0) = 1 blows up at t = 1.
        let sys = AutonomousSystem::new(
            "blowup",
            vec![],
            vec![1.0],
            2.0,
            3,
            vec!["y".into()],
            Arc::new(Blowup),
        )
        .unwrap();
        let grid = uniform_grid(2.0, 3).unwrap();
        let err = integrate_reference(&sys, &grid).unwrap_err();
        match err {
            DynamicsError::Divergence { t_reached } => assert!(t_reached <= 1.01),
            DynamicsError::IntegrationFailure { t_reached } => assert!(t_reached <= 1.01),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_unsorted_times() {
        let sys = type_a();
        let err = integrate_reference(&sys, &[0.0, 0.2, 0.2]).unwrap_err();
        assert!(matches!(err, DynamicsError::InvalidArgument(_)));
        let err = integrate_reference(&sys, &[-1.0, 0.0]).unwrap_err();
        assert!(matches!(err, DynamicsError::InvalidArgument(_)));
    }

    #[test]
    fn csv_round_trips_at_full_precision() {
        let sys = lorenz();
        let grid = uniform_grid(sys.t_end, 5).unwrap();
        let traj = integrate_reference(&sys, &grid).unwrap();
        let csv = trajectory_csv(&traj, &sys.state_names);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,x,y,z,dx,dy,dz");
        for (i, line) in lines.enumerate() {
            let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            assert_eq!(cols[0], traj.times[i]);
            for j in 0..3 {
                assert_eq!(cols[1 + j], traj.states[(i, j)]);
                assert_eq!(cols[4 + j], traj.derivs[(i, j)]);
            }
        }
    }

    #[test]
    fn registry_knows_the_four_presets() {
        assert_eq!(system_names(), vec!["lorenz", "nonlinear", "type-a", "type-b"]);
        assert!(system("unknown").is_none());
    }
}
