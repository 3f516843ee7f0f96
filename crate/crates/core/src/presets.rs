//! Small named configurations used by the examples, `verify` and the tests.

use rand::Rng;

use crate::kernel::{BranchingSource, BrwConfig, TransitionKernel};
use crate::lattice::Point;

/// Offspring coefficients (1, -3, 2): death rate 1, binary splitting rate 2, β = 1.
pub const REFERENCE_COEFFICIENTS: [f64; 3] = [1.0, -3.0, 2.0];

fn nn_1d() -> TransitionKernel {
    TransitionKernel::nearest_neighbour(1, 1.0).expect("valid kernel")
}

fn source(x: i64, coefficients: &[f64]) -> BranchingSource {
    BranchingSource::new(Point::new(&[x]), coefficients.to_vec()).expect("valid source")
}

/// Nearest-neighbour walk on Z with rates ½, ½ and one source at 0 with β = 1.
pub fn reference() -> BrwConfig {
    BrwConfig::new(nn_1d(), vec![source(0, &REFERENCE_COEFFICIENTS)]).expect("valid config")
}

/// Nearest-neighbour walk on Z with one source at 0, b = (1, -(2+β), 1+β).
pub fn single(beta: f64) -> BrwConfig {
    let s = BranchingSource::binary(Point::new(&[0]), 1.0, 1.0 + beta).expect("valid source");
    BrwConfig::new(nn_1d(), vec![s]).expect("valid config")
}

/// Two adjacent sources on Z with β = 1 and β = 0.5.
pub fn two_near() -> BrwConfig {
    BrwConfig::new(nn_1d(), vec![source(0, &REFERENCE_COEFFICIENTS), source(1, &[1.0, -2.5, 1.5])]).expect("valid config")
}

/// Two sources with β = 1 six sites apart.
pub fn two_far() -> BrwConfig {
    BrwConfig::new(nn_1d(), vec![source(0, &REFERENCE_COEFFICIENTS), source(6, &REFERENCE_COEFFICIENTS)]).expect("valid config")
}

/// Random supercritical configuration in d = 1 or 2: 1 to 3 sources within
/// distance 3 of the origin, sometimes a second-neighbour jump. In d = 1 the
/// axis rates lie in [0.2, 1] and β in [0.2, 1.5]; in d = 2, where λ₀ is
/// exponentially small in 1/β, the rates lie in [0.2, 0.5] and β in [1, 3] so
/// that λ₀ stays within reach of the quadrature.
pub fn random<R: Rng + ?Sized>(rng: &mut R) -> BrwConfig {
    let dim = rng.random_range(1..=2usize);
    let mut raw = Vec::new();
    for axis in 0..dim {
        let rate = if dim == 1 { rng.random_range(0.2..1.0) } else { rng.random_range(0.2..0.5) };
        let e = Point::unit(dim, axis);
        raw.push((e, rate));
        raw.push((-e, rate));
    }
    if rng.random_bool(0.3) {
        let e = Point::unit(dim, 0);
        let rate = rng.random_range(0.05..0.3);
        raw.push((e + e, rate));
        raw.push((-(e + e), rate));
    }
    let kernel = TransitionKernel::new(dim, &raw).expect("valid kernel");
    let n = rng.random_range(1..=3usize);
    let mut positions: Vec<Point> = Vec::new();
    while positions.len() < n {
        let coords: Vec<i64> = (0..dim).map(|_| rng.random_range(-3..=3)).collect();
        let p = Point::new(&coords);
        if !positions.contains(&p) {
            positions.push(p);
        }
    }
    let sources = positions
        .into_iter()
        .map(|p| {
            let death = rng.random_range(0.0..1.0);
            let beta = if dim == 1 { rng.random_range(0.2..1.5) } else { rng.random_range(1.0..3.0) };
            BranchingSource::binary(p, death, death + beta).expect("valid source")
        })
        .collect();
    BrwConfig::new(kernel, sources).expect("valid config")
}

/// `config` with β_i raised by `delta` (b_2 += delta, b_1 -= delta).
pub fn bump_intensity(config: &BrwConfig, i: usize, delta: f64) -> BrwConfig {
    let s = &config.sources()[i];
    let mut b = s.coefficients().to_vec();
    if b.len() < 3 {
        b.resize(3, 0.0);
    }
    b[1] -= delta;
    b[2] += delta;
    config
        .with_source(i, BranchingSource::new(s.position(), b).expect("valid source"))
        .expect("valid config")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn intensities() {
        assert_eq!(reference().intensities(), vec![1.0]);
        assert_eq!(two_near().intensities(), vec![1.0, 0.5]);
        assert!((single(0.7).intensities()[0] - 0.7).abs() < 1e-15);
        let bumped = bump_intensity(&two_near(), 1, 0.1);
        assert!((bumped.intensities()[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn random_configs_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let c = random(&mut rng);
            assert!(c.intensities().iter().all(|b| *b > 0.0));
        }
    }
}
