//! Building kernels and sources, and what validation rejects.

use brw::kernel::{BranchingSource, BrwConfig, TransitionKernel};
use brw::lattice::Point;

fn main() {
    let e1 = Point::new(&[1, 0]);
    let e2 = Point::new(&[0, 1]);
    let kernel = TransitionKernel::new(2, &[(e1, 0.3), (-e1, 0.3), (e2, 0.2), (-e2, 0.2)]).unwrap();
    println!("a(0) = {}, reach = {}", kernel.diagonal(), kernel.reach());
    println!("φ(π/2, 0) = {:.6}", kernel.symbol(&[std::f64::consts::FRAC_PI_2, 0.0]));

    let source = BranchingSource::new(Point::new(&[0, 0]), vec![0.5, -2.0, 1.0, 0.5]).unwrap();
    println!("β = {}, β^(2) = {}, β^(3) = {}", source.intensity(), source.factorial_moment(2), source.factorial_moment(3));
    let config = BrwConfig::new(kernel.clone(), vec![source]).unwrap();
    println!("N = {}, positions = {:?}", config.n_sources(), config.positions());

    // Asymmetric rates, a sublattice-only support, and unbalanced coefficients.
    println!("{}", TransitionKernel::new(2, &[(e1, 0.3), (-e1, 0.1), (e2, 0.2), (-e2, 0.2)]).unwrap_err());
    println!("{}", TransitionKernel::new(1, &[(Point::new(&[2]), 0.5), (Point::new(&[-2]), 0.5)]).unwrap_err());
    println!("{}", BranchingSource::new(Point::new(&[0, 0]), vec![1.0, -1.0, 1.0]).unwrap_err());
}
