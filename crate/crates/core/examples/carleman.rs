//! Carleman's series Σ m(n, x)^{-1/2n} for the limit ξ and the lower bound
//! on its terms.

use brw::lattice::Point;
use brw::moments::{carleman_diag, moment_constants, MomentOptions};
use brw::presets;
use brw::spectral::{analyze, SpectralOptions};

fn main() {
    let config = presets::reference();
    let spectral = analyze(&config, &SpectralOptions::for_dim(1)).unwrap();
    let x = Point::new(&[0]);
    let options = MomentOptions {
        n_max: 20,
        radius: 200,
        x_points: vec![x],
        y_points: vec![x],
    };
    let table = moment_constants(&config, &spectral, &options).unwrap();
    let report = carleman_diag(&table, &x).unwrap();
    println!("{:>3} {:>12} {:>12} {:>12}", "n", "term", "lower bound", "partial sum");
    for t in &report.terms {
        println!("{:>3} {:>12.6} {:>12.6} {:>12.6}", t.n, t.term, t.lower_bound, t.partial_sum);
    }
    println!("bound holds: {}, partial sums increasing: {}", report.bound_holds, report.partial_sums_increasing);
}
