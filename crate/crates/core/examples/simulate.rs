//! Monte Carlo replicas against the spectral predictions.
//!
//! cargo run --release --example simulate -- [replicas] [horizon]

use brw::lattice::Point;
use brw::presets;
use brw::simulator::{estimate, simulate, RunOptions};
use brw::spectral::{analyze, SpectralOptions};

fn main() {
    let mut args = std::env::args().skip(1);
    let replicas: u64 = args.next().map_or(2000, |a| a.parse().expect("replicas"));
    let horizon: f64 = args.next().map_or(15.0, |a| a.parse().expect("horizon"));
    let config = presets::reference();
    let spectral = analyze(&config, &SpectralOptions::for_dim(1)).unwrap();

    let options = RunOptions::new(&config, horizon, 1_000_000);
    let runs = simulate(&config, &options, 1, replicas).unwrap();
    let report = estimate(&runs, Some(spectral.lambda0)).unwrap();
    println!(
        "{} replicas, {} extinct, {} hit the cap",
        report.replicas, report.extinct, report.cap_hits
    );
    println!(
        "λ̂ = {:.5} [{:.5}, {:.5}], λ₀ = {:.5}",
        report.lambda_hat, report.lambda_ci[0], report.lambda_ci[1], spectral.lambda0
    );
    for p in &report.psi_hat {
        let exact = spectral.psi_at(&config, &[p.y]).unwrap()[0];
        println!("ψ̂({}) = {:.5} [{:.5}, {:.5}]  ψ = {exact:.5}", p.y, p.value, p.ci[0], p.ci[1]);
    }
    if let Some(xi) = &report.xi {
        let c1 = spectral.f.weighted_sum / spectral.lambda0 * spectral.f_at(&config, &[Point::new(&[0])]).unwrap()[0];
        println!("E ξ ≈ {:.4} (C₁(0) = {c1:.4})", xi.moments[0]);
    }
}
