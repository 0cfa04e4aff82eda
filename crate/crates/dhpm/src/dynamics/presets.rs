//! The four benchmark systems.

use std::sync::Arc;

use super::{AutonomousSystem, VectorField};

/// Linear 2-D system `x1' = a11 x1 + a12 x2`, `x2' = a21 x1 + a22 x2`.
struct LinearPair {
    a11: f64,
    a12: f64,
    a21: f64,
    a22: f64,
}

impl VectorField for LinearPair {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, state: &[f64], out: &mut [f64]) {
        out[0] = self.a11 * state[0] + self.a12 * state[1];
        out[1] = self.a21 * state[0] + self.a22 * state[1];
    }
}

/// `x1' = x1 - x2`, `x2' = x1^2 - x2`.
struct QuadraticPair;

impl VectorField for QuadraticPair {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, state: &[f64], out: &mut [f64]) {
        out[0] = state[0] - state[1];
        out[1] = state[0] * state[0] - state[1];
    }
}

struct LorenzField {
    sigma: f64,
    rho: f64,
    beta: f64,
}

impl VectorField for LorenzField {
    fn dim(&self) -> usize {
        3
    }
    fn eval(&self, state: &[f64], out: &mut [f64]) {
        let (x, y, z) = (state[0], state[1], state[2]);
        out[0] = self.sigma * (y - x);
        out[1] = x * (self.rho - z) - y;
        out[2] = x * y - self.beta * z;
    }
}

fn names2() -> Vec<String> {
    vec!["x1".into(), "x2".into()]
}

/// `x1' = 0.3 x2`, `x2' = -0.7 x1`, from (1, 0) over 50 time units on a
/// 501-point grid.
pub fn type_a() -> AutonomousSystem {
    AutonomousSystem::new(
        "type-a",
        vec![("c12".into(), 0.3), ("c21".into(), -0.7)],
        vec![1.0, 0.0],
        50.0,
        501,
        names2(),
        Arc::new(LinearPair {
            a11: 0.0,
            a12: 0.3,
            a21: -0.7,
            a22: 0.0,
        }),
    )
    .expect("preset is valid")
}

/// `x1' = x2 - 0.4 x1`, `x2' = -0.8 x1 + 0.5 x2`, from (1, 0) over 20 time
/// units on a 201-point grid.
pub fn type_b() -> AutonomousSystem {
    AutonomousSystem::new(
        "type-b",
        vec![
            ("a11".into(), -0.4),
            ("a12".into(), 1.0),
            ("a21".into(), -0.8),
            ("a22".into(), 0.5),
        ],
        vec![1.0, 0.0],
        20.0,
        201,
        names2(),
        Arc::new(LinearPair {
            a11: -0.4,
            a12: 1.0,
            a21: -0.8,
            a22: 0.5,
        }),
    )
    .expect("preset is valid")
}

/// `x1' = x1 - x2`, `x2' = x1^2 - x2`, from (0.5, 0.25) over 20 time units on
/// a 201-point grid.
pub fn nonlinear() -> AutonomousSystem {
    AutonomousSystem::new(
        "nonlinear",
        vec![],
        vec![0.5, 0.25],
        20.0,
        201,
        names2(),
        Arc::new(QuadraticPair),
    )
    .expect("preset is valid")
}

/// Chaotic Lorenz system with sigma = 10, rho = 28, beta = 8/3, from
/// (-10, -10, 15) over 2.5 time units on a 251-point grid.
pub fn lorenz() -> AutonomousSystem {
    AutonomousSystem::new(
        "lorenz",
        vec![
            ("sigma".into(), 10.0),
            ("rho".into(), 28.0),
            ("beta".into(), 8.0 / 3.0),
        ],
        vec![-10.0, -10.0, 15.0],
        2.5,
        251,
        vec!["x".into(), "y".into(), "z".into()],
        Arc::new(LorenzField {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
        }),
    )
    .expect("preset is valid")
}
