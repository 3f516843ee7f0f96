//! Naive per-particle reference stepper and the aggregation equivalence test.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::engine::{EventKind, Population, Tables};
use crate::kernel::BrwConfig;
use crate::lattice::{BoxLattice, Point};

/// Pooled categories must have at least this many expected counts.
const MIN_EXPECTED: f64 = 5.0;

/// Particles stored one by one.
#[derive(Clone, Debug)]
pub struct ParticleSystem<'a> {
    config: &'a BrwConfig,
    pub particles: Vec<Point>,
}

impl<'a> ParticleSystem<'a> {
    pub fn new(config: &'a BrwConfig, particles: Vec<Point>) -> Self {
        Self { config, particles }
    }

    fn particle_rate(&self, p: &Point) -> f64 {
        let exit = self.config.kernel().exit_rate();
        match self.config.source_at(p) {
            Some(i) => exit - self.config.sources()[i].coefficient(1),
            None => exit,
        }
    }

    /// One event: every particle carries its own exponential clock.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<(EventKind, Point)> {
        let rates: Vec<f64> = self.particles.iter().map(|p| self.particle_rate(p)).collect();
        let total: f64 = rates.iter().sum();
        if self.particles.is_empty() || total <= 0.0 {
            return None;
        }
        let mut u = rng.random::<f64>() * total;
        let mut chosen = rates.len() - 1;
        for (k, r) in rates.iter().enumerate() {
            if u < *r {
                chosen = k;
                break;
            }
            u -= r;
        }
        let site = self.particles[chosen];
        let rate = rates[chosen];
        let mut v = rng.random::<f64>() * rate;
        for (z, a) in self.config.kernel().jumps() {
            if v < *a {
                self.particles[chosen] = site + *z;
                let kind = if self.config.source_at(&site).is_some() {
                    EventKind::JumpFromSource
                } else {
                    EventKind::JumpOffSource
                };
                return Some((kind, site));
            }
            v -= a;
        }
        let source = &self.config.sources()[self.config.source_at(&site)?];
        let mut last = None;
        for (n, b) in source.coefficients().iter().enumerate() {
            if n == 1 || *b <= 0.0 {
                continue;
            }
            last = Some(n);
            if v < *b {
                break;
            }
            v -= b;
        }
        let n = last?;
        self.particles.swap_remove(chosen);
        self.particles.extend(std::iter::repeat_n(site, n));
        let kind = if n == 0 { EventKind::Death } else { EventKind::Branch(n as u32) };
        Some((kind, site))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CategoryCount {
    pub category: String,
    pub aggregated: u64,
    pub naive: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AggregationTest {
    pub states: usize,
    /// Event (kind, site) frequencies after pooling sparse categories.
    pub categories: Vec<CategoryCount>,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Random populations of 1..=max_particles particles near the sources.
fn random_state<R: Rng + ?Sized>(config: &BrwConfig, max_particles: usize, rng: &mut R) -> Vec<Point> {
    let positions = config.positions();
    let offsets: Vec<Point> = BoxLattice::new(config.dim(), 1).points().collect();
    let n = rng.random_range(1..=max_particles);
    (0..n)
        .map(|_| {
            let x = positions[rng.random_range(0..positions.len())];
            // Half of the particles sit exactly on a source.
            if rng.random_bool(0.5) {
                x
            } else {
                x + offsets[rng.random_range(0..offsets.len())]
            }
        })
        .collect()
}

/// Two-sample chi-square homogeneity test of the first event from `states` random
/// populations, stepped once by the aggregated engine and once by the per-particle stepper.
pub fn aggregation_chi_square(config: &BrwConfig, states: usize, max_particles: usize, seed: u64) -> AggregationTest {
    let tables = Tables::new(config);
    let mut state_rng = ChaCha8Rng::seed_from_u64(seed);
    state_rng.set_stream(2);
    let mut agg_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut naive_rng = ChaCha8Rng::seed_from_u64(seed);
    naive_rng.set_stream(1);

    let mut counts: BTreeMap<(EventKind, Point), (u64, u64)> = BTreeMap::new();
    for _ in 0..states {
        let particles = random_state(config, max_particles.max(1), &mut state_rng);
        let mut pop = Population::from_particles(std::sync::Arc::clone(&tables), &particles);
        if let Ok(event) = pop.step(&mut agg_rng) {
            counts.entry((event.kind, event.site)).or_default().0 += 1;
        }
        let mut naive = ParticleSystem::new(config, particles);
        if let Some(key) = naive.step(&mut naive_rng) {
            counts.entry(key).or_default().1 += 1;
        }
    }

    let n_a: u64 = counts.values().map(|c| c.0).sum();
    let n_b: u64 = counts.values().map(|c| c.1).sum();
    let n = (n_a + n_b) as f64;
    let expected_min = |c: &(u64, u64)| (c.0 + c.1) as f64 * n_a.min(n_b) as f64 / n;
    let mut categories = Vec::new();
    let mut pooled = (0u64, 0u64);
    for ((kind, site), c) in &counts {
        if expected_min(c) < MIN_EXPECTED {
            pooled.0 += c.0;
            pooled.1 += c.1;
        } else {
            categories.push(CategoryCount {
                category: format!("{kind:?}@{site}"),
                aggregated: c.0,
                naive: c.1,
            });
        }
    }
    if pooled.0 + pooled.1 > 0 {
        if expected_min(&pooled) >= MIN_EXPECTED || categories.is_empty() {
            categories.push(CategoryCount {
                category: "other".into(),
                aggregated: pooled.0,
                naive: pooled.1,
            });
        } else if let Some(last) = categories.last_mut() {
            last.aggregated += pooled.0;
            last.naive += pooled.1;
            last.category.push_str("+other");
        }
    }

    let mut statistic = 0.0;
    for c in &categories {
        let row = (c.aggregated + c.naive) as f64;
        for (obs, col) in [(c.aggregated, n_a), (c.naive, n_b)] {
            let e = row * col as f64 / n;
            statistic += (obs as f64 - e).powi(2) / e;
        }
    }
    let dof = categories.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let chi = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
        1.0 - chi.cdf(statistic)
    };
    AggregationTest {
        states,
        categories,
        statistic,
        dof,
        p_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{BranchingSource, TransitionKernel};

    fn config() -> BrwConfig {
        let k = TransitionKernel::nearest_neighbour(1, 1.0).unwrap();
        let s = BranchingSource::new(Point::new(&[0]), vec![1.0, -3.0, 2.0]).unwrap();
        BrwConfig::new(k, vec![s]).unwrap()
    }

    #[test]
    fn naive_branch_adds_particles() {
        let cfg = config();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut sys = ParticleSystem::new(&cfg, vec![Point::new(&[0])]);
        for _ in 0..50 {
            let before = sys.particles.len();
            let Some((kind, _)) = sys.step(&mut rng) else { break };
            let after = sys.particles.len();
            match kind {
                EventKind::Death => assert_eq!(after + 1, before),
                EventKind::Branch(n) => assert_eq!(after + 1, before + n as usize),
                _ => assert_eq!(after, before),
            }
        }
    }

    #[test]
    fn aggregated_matches_naive() {
        let t = aggregation_chi_square(&config(), 4000, 10, 11);
        assert!(t.dof >= 3, "{t:?}");
        assert!(t.p_value > 0.001, "{t:?}");
    }
}
