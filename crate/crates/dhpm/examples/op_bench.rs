//! Raw ndarray operation timings at the shapes the Lorenz step uses.

use std::time::Instant;

use ndarray::{Array2, Axis, Zip};

fn time<F: FnMut()>(label: &str, iters: usize, mut f: F) {
    let mut best = f64::INFINITY;
    for _ in 0..iters {
        let start = Instant::now();
        f();
        best = best.min(start.elapsed().as_secs_f64());
    }
    println!("{label:<44} {:8.3} ms", best * 1e3);
}

fn main() {
    let g = Array2::<f64>::from_shape_fn((2000, 128), |(i, j)| ((i + j) as f64 * 0.01).sin());
    let w = Array2::<f64>::from_shape_fn((128, 128), |(i, j)| ((i * j) as f64 * 0.001).cos());
    let level = g.clone();
    let zdot = Array2::<f64>::from_shape_fn((1000, 128), |(i, j)| ((i * 2 + j) as f64 * 0.02).sin());

    time("g.dot(w.t())  2000x128 * (128x128)^T", 100, || {
        let r = g.dot(&w.t());
        std::hint::black_box(r);
    });
    time("level.t().dot(g)  (2000x128)^T * 2000x128", 100, || {
        let r = level.t().dot(&g);
        std::hint::black_box(r);
    });
    time("sum_axis(0) of top half", 100, || {
        let r = g.slice(ndarray::s![..1000, ..]).sum_axis(Axis(0));
        std::hint::black_box(r);
    });
    let mut gp = g.clone();
    time("activation cross zip (1000x128 halves)", 100, || {
        let (mut gu, mut gv) = gp.view_mut().split_at(Axis(0), 1000);
        let a = level.slice(ndarray::s![..1000, ..]);
        Zip::from(&mut gu)
            .and(&a)
            .and(&zdot)
            .and(&gv.view())
            .for_each(|u, &a, &zd, &v| {
                let phi1 = 1.0 - a * a;
                *u = phi1 * (*u - 2.0 * a * v * zd);
            });
        Zip::from(&mut gv).and(&a).for_each(|v, &a| *v *= 1.0 - a * a);
        std::hint::black_box(&mut gp);
    });
    time("alloc zeros 2000x128", 100, || {
        let r = Array2::<f64>::zeros((2000, 128));
        std::hint::black_box(r);
    });
    time("alloc zeros + assign halves", 100, || {
        let mut r = Array2::<f64>::zeros((2000, 3));
        r.slice_mut(ndarray::s![..1000, ..]).fill(0.5);
        std::hint::black_box(r);
    });
}
