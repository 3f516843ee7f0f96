//! Lattice Green's function I_x(λ) by quadrature, against the d = 1 closed
//! form and a resolvent solve on a truncated box.

use brw::green::{resolvent_green, GreenFunction, QuadratureSpec};
use brw::kernel::TransitionKernel;
use brw::lattice::Point;

fn main() {
    let kernel = TransitionKernel::nearest_neighbour(1, 1.0).unwrap();
    let green = GreenFunction::new(&kernel, QuadratureSpec::default()).unwrap();
    let lambda: f64 = 0.25;
    let s = (lambda * lambda + 2.0 * lambda).sqrt();
    let rho = 1.0 + lambda - s;
    println!("{:>3} {:>14} {:>14} {:>14}", "x", "quadrature", "closed form", "resolvent");
    for x in 0..6 {
        let q = green.value(Point::new(&[x]), lambda).unwrap();
        let exact = rho.powi(x as i32) / s;
        let r = resolvent_green(&kernel, Point::new(&[x]), lambda, 200).unwrap();
        println!("{x:>3} {q:>14.10} {exact:>14.10} {r:>14.10}");
    }

    // In d = 2 the value at 0 grows like ln(1/λ).
    let kernel2 = TransitionKernel::nearest_neighbour(2, 1.0).unwrap();
    let green2 = GreenFunction::new(&kernel2, QuadratureSpec::default()).unwrap();
    for lambda in [1e-1, 1e-2, 1e-3] {
        println!("d = 2, I_0({lambda}) = {:.6}", green2.value(Point::origin(2), lambda).unwrap());
    }
}
