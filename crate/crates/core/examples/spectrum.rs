//! All positive eigenvalues of ℋ, the eigenfunction f and the limit shape ψ,
//! compared with the dense truncated operator.

use brw::green::{QuadratureSpec, TruncatedOperator};
use brw::lattice::Point;
use brw::presets;
use brw::spectral::{all_positive_eigs, analyze, SpectralOptions};

fn main() {
    for (name, config) in [("near", presets::two_near()), ("far", presets::two_far())] {
        let eigs = all_positive_eigs(&config, QuadratureSpec::default()).unwrap();
        let dense: Vec<f64> = TruncatedOperator::evolution(&config, 500)
            .unwrap()
            .eigenvalues()
            .unwrap()
            .into_iter()
            .filter(|l| *l > 1e-8)
            .collect();
        println!("{name}: green route {eigs:?}, dense R = 500 {dense:?}");
    }

    let config = presets::two_far();
    let result = analyze(&config, &SpectralOptions::for_dim(1)).unwrap();
    println!("λ₀ = {:.10}, gap = {:.4}, second |eig G(λ₀)| = {:.4}", result.lambda0, result.gap, result.second_modulus);
    let points: Vec<Point> = (-2..=8).map(|x| Point::new(&[x])).collect();
    let psi = result.psi_at(&config, &points).unwrap();
    for (p, v) in points.iter().zip(psi) {
        println!("ψ({p}) = {v:.6}");
    }
}
