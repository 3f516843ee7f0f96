//! The growth rate λ₀ as the root of γ(λ) = 1, including a subcritical case.

use brw::green::QuadratureSpec;
use brw::kernel::{BranchingSource, BrwConfig, TransitionKernel};
use brw::lattice::Point;
use brw::presets;
use brw::spectral::{find_lambda0, gamma, Lambda0};

fn main() {
    let spec = QuadratureSpec::default();
    let config = presets::reference();
    for lambda in [0.1, 0.3, 0.5, 1.0] {
        println!("γ({lambda}) = {:.6}", gamma(&config, lambda, spec).unwrap());
    }
    if let Lambda0::Supercritical(root) = find_lambda0(&config, spec).unwrap() {
        println!("λ₀ = {:.12} (√2 - 1 = {:.12}), |γ - 1| = {:.1e}", root.lambda0, 2f64.sqrt() - 1.0, root.residual);
    }

    // Two sources: λ₀ approaches the single-source value as they separate.
    for gap in [1, 2, 4, 8, 16] {
        let b = presets::REFERENCE_COEFFICIENTS.to_vec();
        let sources = vec![
            BranchingSource::new(Point::new(&[0]), b.clone()).unwrap(),
            BranchingSource::new(Point::new(&[gap]), b).unwrap(),
        ];
        let cfg = BrwConfig::new(TransitionKernel::nearest_neighbour(1, 1.0).unwrap(), sources).unwrap();
        let l0 = find_lambda0(&cfg, spec).unwrap().value().unwrap();
        println!("sources 0 and {gap:>2}: λ₀ = {l0:.10}");
    }

    // A weak source in d = 3 does not make the process grow.
    let weak = BrwConfig::new(
        TransitionKernel::nearest_neighbour(3, 3.0).unwrap(),
        vec![BranchingSource::binary(Point::origin(3), 0.5, 1.0).unwrap()],
    )
    .unwrap();
    match find_lambda0(&weak, spec).unwrap() {
        Lambda0::Absent { sup_gamma, note, .. } => println!("d = 3, β = 0.5: no growth, sup γ = {sup_gamma:.4} ({note})"),
        Lambda0::Supercritical(root) => println!("d = 3: λ₀ = {}", root.lambda0),
    }
}
