//! The mean population m₁(t, x) from the matrix exponential of ℋ_R, checked
//! against its integral equation m₁ = 1 + Σ_j β_j ∫ m₁(s, x, x_j) ds.

use brw::lattice::Point;
use brw::moments::duhamel_check;
use brw::presets;

fn main() {
    let config = presets::two_near();
    let times: Vec<f64> = (0..=6).map(|k| 0.5 * k as f64).collect();
    let report = duhamel_check(&config, &times, 200, Point::new(&[0])).unwrap();
    println!("{:>5} {:>16} {:>16} {:>10} {:>8}", "t", "m1(t,0)", "1 + integral", "residual", "nodes");
    for p in &report.points {
        println!("{:>5} {:>16.10} {:>16.10} {:>10.1e} {:>8}", p.t, p.lhs, p.rhs, p.residual, p.intervals);
    }
}
