//! Micro-timings of the training step components.

use std::time::Instant;

use dhpm::net::{equation_loss_grads, FeatureMap, MlpNetwork};
use dhpm::training::{architecture, data_loss_grad};
use dhpm::{dynamics, integrate_reference, Activation};
use ndarray::Array2;

fn time<F: FnMut()>(label: &str, iters: usize, mut f: F) {
    let mut best = f64::INFINITY;
    for _ in 0..iters {
        let start = Instant::now();
        f();
        best = best.min(start.elapsed().as_secs_f64());
    }
    println!("{label:<36} {:8.3} ms (min of {iters})", best * 1e3);
}

fn main() {
    let sys = dynamics::system("type-a").unwrap();
    let reference = integrate_reference(&sys, &sys.reference_grid()).unwrap();
    let (state_layers, _, _) = architecture(&sys);
    let state_net = MlpNetwork::init(&state_layers, Activation::Tanh, 1).unwrap();
    let data_times = Array2::from_shape_vec((reference.len(), 1), reference.times.clone()).unwrap();

    time("type-a data fwd+bwd", 100, || {
        let mut tape = state_net.forward_tape(data_times.view()).unwrap();
        let g = data_loss_grad(tape.output(), reference.states.view(), &[1, 1]);
        let r = state_net.backward(&mut tape, g.view()).unwrap();
        std::hint::black_box(r);
    });

    // Lorenz-sized nets, piece by piece.
    let lorenz = dynamics::system("lorenz").unwrap();
    let (sl, dl, lmap) = architecture(&lorenz);
    let ls = MlpNetwork::init(&sl, Activation::Tanh, 1).unwrap();
    let ld = MlpNetwork::init(&dl, Activation::Tanh, 2).unwrap();
    let colloc = Array2::from_shape_fn((1000, 1), |(i, _)| i as f64 * 0.001);

    time("lorenz dual_forward", 50, || {
        let t = ls.dual_forward(colloc.view()).unwrap();
        std::hint::black_box(t);
    });

    let tape0 = ls.dual_forward(colloc.view()).unwrap();
    let feats = lmap.eval(tape0.value_output());
    time("lorenz dyn forward_tape", 50, || {
        let t = ld.forward_tape(feats.view()).unwrap();
        std::hint::black_box(t);
    });

    let g = Array2::from_elem((1000, 3), 1e-3);
    time("lorenz dyn fwd+bwd", 50, || {
        let mut t = ld.forward_tape(feats.view()).unwrap();
        let r = ld.backward(&mut t, g.view()).unwrap();
        std::hint::black_box(r);
    });

    time("lorenz dual fwd+bwd", 50, || {
        let mut t = ls.dual_forward(colloc.view()).unwrap();
        let r = ls.dual_backward(&mut t, g.view(), g.view()).unwrap();
        std::hint::black_box(r);
    });

    time("lorenz equation_loss_grads", 50, || {
        let r = equation_loss_grads(&ls, &ld, &lmap, colloc.view()).unwrap();
        std::hint::black_box(r);
    });
}
