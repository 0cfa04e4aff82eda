//! Throughput comparison of the activation paths.

use std::time::Instant;

use dhpm::net::MlpNetwork;
use dhpm::Activation;
use ndarray::Array2;

fn main() {
    let vals: Vec<f64> = (0..256_000)
        .map(|i| ((i as f64) * 0.001).sin() * 3.0)
        .collect();

    let mut buf = vals.clone();
    let start = Instant::now();
    for _ in 0..50 {
        buf.copy_from_slice(&vals);
        for v in &mut buf {
            *v = v.tanh();
        }
        std::hint::black_box(&mut buf);
    }
    println!(
        "std tanh     {:.2} ns/val",
        start.elapsed().as_secs_f64() / 50.0 / vals.len() as f64 * 1e9
    );

    // Network-mediated timing of the hidden-layer activation: a [1,N,1] net
    // with identity weights isolates the tanh pass plus one thin GEMM.
    let n = 1_000_000;
    let times = Array2::from_shape_fn((n, 1), |(i, _)| (i as f64) * 1e-5);
    let net = MlpNetwork::init(&[1, 8, 1], Activation::Tanh, 3).unwrap();
    let start = Instant::now();
    for _ in 0..10 {
        let out = net.forward(times.view()).unwrap();
        std::hint::black_box(out);
    }
    println!(
        "forward [1,8,1] over 1M rows: {:.1} ms ({:.2} ns per hidden value)",
        start.elapsed().as_secs_f64() / 10.0 * 1e3,
        start.elapsed().as_secs_f64() / 10.0 / (n * 8) as f64 * 1e9
    );
}
