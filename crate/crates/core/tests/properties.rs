use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use brw::config::parse_config_str;
use brw::green::{green_value, QuadratureSpec};
use brw::kernel::{BranchingSource, BrwConfig, TransitionKernel};
use brw::lattice::Point;
use brw::moments::g::{g_bruteforce, g_with};
use brw::simulator::{EventKind, Population, Tables};

/// Symmetric kernel on Z^dim: nearest neighbours plus optional longer jumps.
fn kernel_strategy(dim: usize) -> impl Strategy<Value = TransitionKernel> {
    (
        prop::collection::vec(0.1..1.0f64, dim),
        prop::collection::vec((prop::collection::vec(-2i64..=2, dim), 0.01..0.5f64), 0..3),
    )
        .prop_filter_map("distinct offsets", move |(axis, extra)| {
            let mut raw: Vec<(Point, f64)> = Vec::new();
            for (k, rate) in axis.iter().enumerate() {
                let e = Point::unit(dim, k);
                raw.push((e, *rate));
                raw.push((-e, *rate));
            }
            for (coords, rate) in extra {
                let z = Point::new(&coords);
                if z.is_origin() || raw.iter().any(|(w, _)| *w == z || *w == -z) {
                    return None;
                }
                raw.push((z, rate));
                raw.push((-z, rate));
            }
            TransitionKernel::new(dim, &raw).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn symbol_is_even_nonpositive_and_vanishes_at_zero(
        kernel in (1usize..=3).prop_flat_map(kernel_strategy),
        theta in prop::collection::vec(-std::f64::consts::PI..std::f64::consts::PI, 3),
    ) {
        let d = kernel.dim();
        let t = &theta[..d];
        let neg: Vec<f64> = t.iter().map(|v| -v).collect();
        let phi = kernel.symbol(t);
        prop_assert!(phi <= 1e-15);
        prop_assert!((phi - kernel.symbol(&neg)).abs() < 1e-12);
        prop_assert!(kernel.symbol(&vec![0.0; d]).abs() < 1e-12);
    }

    #[test]
    fn green_function_is_positive_even_and_decreasing(
        kernel in kernel_strategy(1),
        x in -6i64..=6,
        lambda in 0.05..5.0f64,
    ) {
        let spec = QuadratureSpec::default();
        let at = |x: i64, l: f64| green_value(&kernel, Point::new(&[x]), l, spec).unwrap();
        let v = at(x, lambda);
        prop_assert!(v > 0.0);
        prop_assert!((v - at(-x, lambda)).abs() < 1e-10);
        prop_assert!(at(x, 1.5 * lambda) < v);
        prop_assert!(v <= at(0, lambda) + 1e-12);
    }

    #[test]
    fn g_matches_composition_enumeration(
        k in 2usize..=9,
        values in prop::collection::vec(0.01..3.0f64, 8),
        moments in prop::collection::vec(0.0..5.0f64, 10),
    ) {
        let beta_r = |r: usize| moments[r];
        let fast = g_with(beta_r, k, &values).unwrap();
        let slow = g_bruteforce(beta_r, k, &values);
        prop_assert!((fast - slow).abs() <= 1e-10 * slow.abs().max(1.0), "{} vs {}", fast, slow);
    }

    #[test]
    fn psi_independent_of_normalization(l0 in 0.01..2.0f64, f in 0.01..1.0f64, sum in 0.01..5.0f64, c in 0.1..10.0f64) {
        let a = brw::spectral::psi_from(l0, f, sum);
        let b = brw::spectral::psi_from(l0, c * f, c * sum);
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn simulator_keeps_consistent_counts(
        kernel in kernel_strategy(2),
        death in 0.0..1.0f64,
        coefficients in prop::collection::vec(0.0..1.0f64, 3),
        start in prop::collection::vec(prop::collection::vec(-2i64..=2, 2), 1..6),
        seed in any::<u64>(),
    ) {
        // b = (death, -(death + Σ rest), rest_2, rest_3, rest_4)
        let rest: f64 = coefficients.iter().sum();
        let mut b = vec![death, -(death + rest)];
        b.extend(&coefficients);
        let source = BranchingSource::new(Point::origin(2), b).unwrap();
        let config = BrwConfig::new(kernel, vec![source]).unwrap();
        let particles: Vec<Point> = start.iter().map(|c| Point::new(c)).collect();
        let mut pop = Population::from_particles(Tables::new(&config), &particles);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut expected = particles.len() as i64;
        let mut clock = 0.0;
        for _ in 0..200 {
            if pop.is_extinct() || pop.total() > 10_000 {
                break;
            }
            let event = pop.step(&mut rng).unwrap();
            prop_assert!(event.dt > 0.0);
            clock += event.dt;
            expected += match event.kind {
                EventKind::Death => -1,
                EventKind::Branch(n) => n as i64 - 1,
                EventKind::JumpOffSource => { prop_assert!(!event.site.is_origin()); 0 }
                EventKind::JumpFromSource => { prop_assert!(event.site.is_origin()); 0 }
            };
            prop_assert_eq!(pop.total() as i64, expected);
            prop_assert_eq!(pop.occupied().iter().map(|(_, c)| *c).sum::<u64>(), pop.total());
            prop_assert!((pop.time() - clock).abs() < 1e-9 * clock.max(1.0));
        }
    }

    #[test]
    fn config_text_round_trips(
        rate in 0.05..2.0f64,
        positions in prop::collection::btree_set(-9i64..=9, 1..4),
        death in 0.0..2.0f64,
        split in 0.0..2.0f64,
        seed in any::<u64>(),
    ) {
        let mut text = format!(
            "dim = 1\n[[kernel]]\noffset = [1]\nrate = {rate:?}\n[[kernel]]\noffset = [-1]\nrate = {rate:?}\n"
        );
        for x in &positions {
            text.push_str(&format!(
                "[[sources]]\nposition = [{x}]\ncoefficients = [{death:?}, {:?}, {split:?}]\n",
                -(death + split)
            ));
        }
        text.push_str(&format!("[simulation]\nseed = {seed}\n"));
        let first = parse_config_str(&text).unwrap();
        let second = parse_config_str(&first.file.to_toml()).unwrap();
        prop_assert_eq!(&first.file, &second.file);
        prop_assert_eq!(second.model.n_sources(), positions.len());
    }
}
