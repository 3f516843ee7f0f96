//! Moment constants C_n(x), C_n(x, y), the resolvent terms D_n and the
//! growth envelope.

use brw::lattice::Point;
use brw::moments::{moment_constants, MomentOptions};
use brw::presets;
use brw::spectral::{analyze, SpectralOptions};

fn main() {
    let config = presets::reference();
    let spectral = analyze(&config, &SpectralOptions::for_dim(1)).unwrap();
    let points: Vec<Point> = (-2..=2).map(|x| Point::new(&[x])).collect();
    let options = MomentOptions {
        n_max: 12,
        radius: 200,
        x_points: points.clone(),
        y_points: points,
    };
    let table = moment_constants(&config, &spectral, &options).unwrap();
    println!("‖ℋ_R‖ = {:.5}, n* = {}, D-bound margin {:.4}", table.h_norm, table.n_star, table.d_bound_margin);
    println!("max |C_n(x,y) / (ψ(y)^n C_n(x)) - 1| = {:.1e}", table.factorization_error);
    for n in 1..=table.n_max {
        println!("C_{n}(0) = {:.6e}", table.c_x[n - 1][2]);
    }
    let env = &table.envelope;
    println!("envelope: C = {}, D = {}, β₂ = {}, γ = {:.4}, violations = {}", env.c, env.d, env.beta2, env.gamma, env.violations.len());
}
