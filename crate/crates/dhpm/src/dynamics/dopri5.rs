//! Adaptive Dormand-Prince 5(4) with dense output.
//!
//! Classic explicit pair: 7 stages, FSAL, embedded 4th-order error estimate,
//! and the order-4 dense interpolant evaluated at the requested output times
//! so no step needs to land on them.

/// Why the integration stopped before covering all requested times.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum StepFailure {
    /// Step size collapsed below the resolution of the time variable.
    Underflow { t_reached: f64 },
    /// A state or stage became non-finite.
    NonFinite { t_reached: f64 },
}

// Stage abscissae are omitted: an autonomous right-hand side never reads t.

const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
/// Also the 5th-order solution weights (b row equals the last A row).
const A7: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];

/// Error weights: difference between the 5th- and 4th-order solutions.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Dense-output weights for the order-4 interpolant.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const MAX_STEPS: usize = 10_000_000;

fn rms(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    (values.map(|v| v * v).sum::<f64>() / n as f64).sqrt()
}

/// One full stage evaluation from `(t, y)` with `k[0]` already holding
/// `f(y)`. Fills `k[1..7]`, writes the 5th-order solution into `y_new`, and
/// the raw error-weight combination into `err`.
fn stages<F>(f: &F, y: &[f64], h: f64, k: &mut [Vec<f64>; 7], y_new: &mut [f64], err: &mut [f64])
where
    F: Fn(&[f64], &mut [f64]),
{
    let dim = y.len();
    let mut y_stage = vec![0.0; dim];

    macro_rules! stage {
        ($idx:expr, $coeffs:expr) => {{
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, &a) in $coeffs.iter().enumerate() {
                    acc += a * k[j][i];
                }
                y_stage[i] = y[i] + h * acc;
            }
            let (done, rest) = k.split_at_mut($idx);
            let _ = done;
            f(&y_stage, &mut rest[0]);
        }};
    }

    stage!(1, A2);
    stage!(2, A3);
    stage!(3, A4);
    stage!(4, A5);
    stage!(5, A6);

    // 6th stage doubles as the 5th-order solution.
    for i in 0..dim {
        let mut acc = 0.0;
        for (j, &a) in A7.iter().enumerate() {
            acc += a * k[j][i];
        }
        y_new[i] = y[i] + h * acc;
    }
    {
        let (done, rest) = k.split_at_mut(6);
        let _ = done;
        f(y_new, &mut rest[0]);
    }

    for i in 0..dim {
        let mut acc = 0.0;
        for (j, &e) in E.iter().enumerate() {
            acc += e * k[j][i];
        }
        err[i] = h * acc;
    }
}

fn initial_step<F>(f: &F, y0: &[f64], f0: &[f64], t_span: f64, rtol: f64, atol: f64) -> f64
where
    F: Fn(&[f64], &mut [f64]),
{
    let dim = y0.len();
    let sc: Vec<f64> = y0.iter().map(|y| atol + rtol * y.abs()).collect();
    let d0 = rms(y0.iter().zip(&sc).map(|(y, s)| y / s), dim);
    let d1 = rms(f0.iter().zip(&sc).map(|(f, s)| f / s), dim);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(t_span);

    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; dim];
    f(&y1, &mut f1);
    let d2 = rms(
        f1.iter().zip(f0).zip(&sc).map(|((a, b), s)| (a - b) / s),
        dim,
    ) / h0;

    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    h1.min(100.0 * h0).min(t_span)
}

/// Integrate `dy/dt = f(y)` from `y0` at `t = 0`, producing the solution at
/// every requested time. `t_out` must be non-negative and strictly
/// increasing; values of exactly 0 return `y0` itself.
pub(crate) fn solve_dense<F>(
    f: F,
    y0: &[f64],
    t_out: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Vec<Vec<f64>>, StepFailure>
where
    F: Fn(&[f64], &mut [f64]),
{
    let dim = y0.len();
    let mut out = Vec::with_capacity(t_out.len());
    let mut out_idx = 0;
    while out_idx < t_out.len() && t_out[out_idx] == 0.0 {
        out.push(y0.to_vec());
        out_idx += 1;
    }
    if out_idx == t_out.len() {
        return Ok(out);
    }
    let t_final = *t_out.last().unwrap();

    let mut t = 0.0_f64;
    let mut y = y0.to_vec();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; dim]);
    f(&y, &mut k[0]);
    let mut y_new = vec![0.0; dim];
    let mut err = vec![0.0; dim];

    let mut h = initial_step(&f, y0, &k[0], t_final, rtol, atol);
    let mut rejected = false;

    for _ in 0..MAX_STEPS {
        if out_idx >= t_out.len() {
            return Ok(out);
        }
        if h < f64::EPSILON * t.abs().max(1.0) * 4.0 {
            return Err(StepFailure::Underflow { t_reached: t });
        }
        if t + h > t_final {
            h = t_final - t;
        }

        stages(&f, &y, h, &mut k, &mut y_new, &mut err);

        if !y_new.iter().all(|v| v.is_finite()) || !k[6].iter().all(|v| v.is_finite()) {
            return Err(StepFailure::NonFinite { t_reached: t });
        }

        let err_norm = rms(
            err.iter()
                .zip(y.iter().zip(&y_new))
                .map(|(e, (a, b))| e / (atol + rtol * a.abs().max(b.abs()))),
            dim,
        );

        if err_norm <= 1.0 {
            // Dense output on (t, t + h].
            let t_next = t + h;
            if out_idx < t_out.len() && t_out[out_idx] <= t_next {
                let ydiff: Vec<f64> = y_new.iter().zip(&y).map(|(a, b)| a - b).collect();
                let bspl: Vec<f64> = k[0].iter().zip(&ydiff).map(|(k1, d)| h * k1 - d).collect();
                let rcont4: Vec<f64> = ydiff
                    .iter()
                    .zip(&k[6])
                    .zip(&bspl)
                    .map(|((d, k7), b)| d - h * k7 - b)
                    .collect();
                let rcont5: Vec<f64> = (0..dim)
                    .map(|i| h * D.iter().zip(&k).map(|(d, kj)| d * kj[i]).sum::<f64>())
                    .collect();
                while out_idx < t_out.len() && t_out[out_idx] <= t_next {
                    let tau = t_out[out_idx];
                    if tau == t_next {
                        out.push(y_new.clone());
                    } else {
                        let theta = (tau - t) / h;
                        let omt = 1.0 - theta;
                        let row = (0..dim)
                            .map(|i| {
                                y[i] + theta
                                    * (ydiff[i]
                                        + omt * (bspl[i] + theta * (rcont4[i] + omt * rcont5[i])))
                            })
                            .collect();
                        out.push(row);
                    }
                    out_idx += 1;
                }
            }

            t = t_next;
            std::mem::swap(&mut y, &mut y_new);
            let k6 = k[6].clone();
            k[0] = k6; // FSAL

            let factor = if err_norm == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err_norm.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            h *= if rejected { factor.min(1.0) } else { factor };
            rejected = false;
        } else {
            h *= (SAFETY * err_norm.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
            rejected = true;
        }
    }
    Err(StepFailure::Underflow { t_reached: t })
}

/// Fixed-step driver over the same tableau; used to verify the classical
/// order of the method.
#[cfg(test)]
pub(crate) fn solve_fixed_step<F>(f: F, y0: &[f64], h: f64, n_steps: usize) -> Vec<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; dim]);
    let mut y_new = vec![0.0; dim];
    let mut err = vec![0.0; dim];
    let mut path = Vec::with_capacity(n_steps + 1);
    path.push(y.clone());
    f(&y, &mut k[0]);
    for _ in 0..n_steps {
        stages(&f, &y, h, &mut k, &mut y_new, &mut err);
        std::mem::swap(&mut y, &mut y_new);
        let k6 = k[6].clone();
        k[0] = k6;
        path.push(y.clone());
    }
    path
}
