use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use brw::green::truncated_heat;
use brw::kernel::{BranchingSource, BrwConfig, TransitionKernel};
use brw::lattice::Point;
use brw::presets;
use brw::simulator::estimate::EstimateOptions;
use brw::simulator::{estimate, run, simulate, EventKind, Population, RunOptions, Tables};
use brw::simulator::{estimate::estimate_with, Outcome, SimError};

fn p(x: i64) -> Point {
    Point::new(&[x])
}

fn inert_walk() -> BrwConfig {
    let kernel = TransitionKernel::nearest_neighbour(1, 1.0).unwrap();
    BrwConfig::new(kernel, vec![BranchingSource::new(p(0), vec![0.0, 0.0, 0.0]).unwrap()]).unwrap()
}

#[test]
fn without_branching_the_total_stays_one() {
    let config = inert_walk();
    let options = RunOptions::new(&config, 20.0, 1000);
    let runs = simulate(&config, &options, 3, 200).unwrap();
    for r in &runs {
        assert_eq!(r.outcome, Outcome::Completed);
        assert!(r.snapshots.iter().all(|s| s.total == 1));
        assert!(r.events > 0);
    }
    let report = estimate(&runs, None).unwrap();
    assert!(report.lambda_ci[0] <= 0.0 && 0.0 <= report.lambda_ci[1]);
    assert_eq!(report.extinction_fraction, 0.0);
}

#[test]
fn fixed_seed_reproduces_every_replica() {
    let config = presets::two_near();
    let options = RunOptions::new(&config, 6.0, 10_000);
    let a = simulate(&config, &options, 11, 50).unwrap();
    let b = simulate(&config, &options, 11, 50).unwrap();
    assert_eq!(a, b);
    assert_eq!(run(&config, &options, 11, 17).unwrap(), a[17]);
    let c = simulate(&config, &options, 12, 50).unwrap();
    assert_ne!(a, c);
}

#[test]
fn small_time_mean_matches_the_first_moment() {
    let config = presets::reference();
    let mut options = RunOptions::new(&config, 5.0, 1_000_000);
    options.snapshots = 11;
    let runs = simulate(&config, &options, 2, 1000).unwrap();
    let report = estimate(&runs, None).unwrap();
    for m in report.mean_series.iter().filter(|m| m.t > 0.0) {
        let exact = (-60..=60).map(|y| truncated_heat(&config, 60, m.t, p(0), p(y)).unwrap()).sum::<f64>();
        assert!((m.mean - exact).abs() <= 3.0 * m.std_error, "t = {}: {} vs {exact} ± {}", m.t, m.mean, m.std_error);
    }
}

#[test]
fn cap_stops_a_growing_replica() {
    let config = presets::single(3.0);
    let options = RunOptions::new(&config, 50.0, 100);
    let runs = simulate(&config, &options, 5, 100).unwrap();
    let capped: Vec<_> = runs.iter().filter(|r| r.outcome == Outcome::CapHit).collect();
    assert!(!capped.is_empty());
    for r in capped {
        assert!(r.last.total > 100);
        assert!(r.last.t < 50.0);
        assert!(r.snapshots.iter().all(|s| s.t <= r.last.t));
    }
}

#[test]
fn too_few_survivors() {
    let config = presets::reference();
    let options = RunOptions::new(&config, 2.0, 1000);
    let runs = simulate(&config, &options, 1, 20).unwrap();
    let mut opts = EstimateOptions::new(None);
    opts.min_survivors = 100;
    assert!(matches!(estimate_with(&runs, &opts), Err(SimError::TooFewSurvivors { .. })));
}

#[test]
fn rates_are_linear_in_the_population() {
    let config = presets::reference();
    let tables = Tables::new(&config);
    let one = Population::new(tables.clone(), p(0));
    let two = Population::from_particles(tables.clone(), &[p(0), p(0)]);
    let away = Population::new(tables.clone(), p(3));
    assert!((one.total_rate() - 4.0).abs() < 1e-12);
    assert!((two.total_rate() - 2.0 * one.total_rate()).abs() < 1e-12);
    assert!((away.total_rate() - 1.0).abs() < 1e-12);
}

#[test]
fn event_frequencies_at_a_source() {
    let config = presets::reference();
    let tables = Tables::new(&config);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut jumps, mut deaths, mut splits) = (0u32, 0u32, 0u32);
    let trials = 40_000;
    for _ in 0..trials {
        let mut pop = Population::new(tables.clone(), p(0));
        match pop.step(&mut rng).unwrap().kind {
            EventKind::JumpFromSource => jumps += 1,
            EventKind::Death => deaths += 1,
            EventKind::Branch(2) => splits += 1,
            other => panic!("unexpected {other:?}"),
        }
    }
    // Probabilities 1/4, 1/4, 1/2; 4 standard deviations.
    for (count, prob) in [(jumps, 0.25), (deaths, 0.25), (splits, 0.5)] {
        let sd = (trials as f64 * prob * (1.0 - prob)).sqrt();
        assert!((count as f64 - trials as f64 * prob).abs() < 4.0 * sd, "{count} vs {prob}");
    }
}

#[test]
fn extinct_population_cannot_step() {
    let config = presets::reference();
    let tables = Tables::new(&config);
    for seed in 0.. {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pop = Population::new(tables.clone(), p(0));
        while !pop.is_extinct() && pop.total() <= 50 {
            pop.step(&mut rng).unwrap();
        }
        if pop.is_extinct() {
            assert!(matches!(pop.step(&mut rng), Err(SimError::EmptyPopulation)));
            return;
        }
    }
}
