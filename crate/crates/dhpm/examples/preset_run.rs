//! Train one preset from the command line and print its error table.
//!
//! Usage: preset_run <system> <alpha e.g. 1,1> [seed] [epoch-override]

use dhpm::{train, TrainingConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let system = args.get(1).map(String::as_str).unwrap_or("type-a");
    let alpha: Vec<u8> = args
        .get(2)
        .map(String::as_str)
        .unwrap_or("1,1")
        .split(',')
        .map(|v| v.parse().expect("alpha entries are 0/1"))
        .collect();
    let seed: u64 = args.get(3).map(|v| v.parse().unwrap()).unwrap_or(0);

    let mut config = TrainingConfig::preset(system, alpha, seed).expect("valid preset");
    if let Some(epochs) = args.get(4) {
        let epochs: u64 = epochs.parse().unwrap();
        for phase in &mut config.phases {
            phase.epochs = epochs;
        }
    }

    let started = std::time::Instant::now();
    let out = train(&config).expect("training runs");
    let elapsed = started.elapsed().as_secs_f64();

    println!(
        "{} alpha={} seed={} epochs={} wall={elapsed:.1}s converged={}",
        system,
        config.alpha_label(),
        seed,
        config.total_epochs(),
        out.report.converged
    );
    println!(
        "final: L_total={:.3e} L_d={:.3e} L_eq={:.3e}",
        out.report.final_losses.total,
        out.report.final_losses.data,
        out.report.final_losses.equation
    );
    for entry in &out.report.errors {
        println!("  {:<4} rel_l2 = {:.3e}", entry.quantity, entry.rel_l2);
    }
}
