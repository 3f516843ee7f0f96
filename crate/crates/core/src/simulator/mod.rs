//! Monte Carlo simulation of the branching random walk.

pub mod engine;
pub mod estimate;
pub mod reference;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::kernel::BrwConfig;
use crate::lattice::{BoxLattice, Point};

pub use engine::{Event, EventKind, Population, Tables};
pub use estimate::{estimate, EstimatorReport};
pub use reference::{aggregation_chi_square, AggregationTest};

/// Default number of snapshot times.
pub const DEFAULT_SNAPSHOTS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("the population is empty")]
    EmptyPopulation,
    #[error("only {survivors} surviving replicas; at least {needed} are needed")]
    TooFewSurvivors { survivors: usize, needed: usize },
    #[error("invalid simulation options: {0}")]
    InvalidOptions(String),
}

/// How a replica ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Extinct,
    CapHit,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::Extinct => "extinct",
            Outcome::CapHit => "cap_hit",
        }
    }
}

/// Parameters of a simulation run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunOptions {
    pub horizon: f64,
    /// Replicas stop once the total exceeds this.
    pub cap: u64,
    pub snapshots: usize,
    /// Radius of the window whose site counts are stored with each snapshot.
    pub window: usize,
    /// Site of the initial particle.
    pub start: Point,
}

impl RunOptions {
    pub fn new(config: &BrwConfig, horizon: f64, cap: u64) -> Self {
        Self {
            horizon,
            cap,
            snapshots: DEFAULT_SNAPSHOTS,
            window: 3,
            start: config.sources()[0].position(),
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(SimError::InvalidOptions(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.cap < 1 {
            return Err(SimError::InvalidOptions("cap must be at least 1".into()));
        }
        if self.snapshots < 2 {
            return Err(SimError::InvalidOptions("at least 2 snapshots are needed".into()));
        }
        Ok(())
    }

    /// Uniform snapshot grid t_k = k T / (S - 1).
    pub fn times(&self) -> Vec<f64> {
        let s = self.snapshots;
        (0..s)
            .map(|k| if k + 1 == s { self.horizon } else { self.horizon * k as f64 / (s - 1) as f64 })
            .collect()
    }
}

/// State of one replica at one time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub total: u64,
    /// Nonzero counts inside the window.
    pub sites: Vec<(Point, u64)>,
}

/// One replica: snapshots on the grid (truncated at a cap hit) and the final state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationRun {
    pub replica: u64,
    pub seed: u64,
    pub outcome: Outcome,
    pub snapshots: Vec<Snapshot>,
    /// State when the run stopped: at the horizon, at extinction, or at the cap hit.
    pub last: Snapshot,
    pub events: u64,
}

impl SimulationRun {
    pub fn survived(&self) -> bool {
        self.outcome != Outcome::Extinct
    }
}

fn snapshot(pop: &Population, t: f64, window: &BoxLattice) -> Snapshot {
    let sites = window
        .points()
        .filter_map(|y| {
            let c = pop.count(&y);
            (c > 0).then_some((y, c))
        })
        .collect();
    Snapshot {
        t,
        total: pop.total(),
        sites,
    }
}

/// Simulates one replica with RNG stream `replica` of the master `seed`.
pub fn run(config: &BrwConfig, options: &RunOptions, seed: u64, replica: u64) -> Result<SimulationRun, SimError> {
    options.validate()?;
    run_with(Tables::new(config), options, seed, replica)
}

fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

fn run_with(tables: std::sync::Arc<Tables>, options: &RunOptions, seed: u64, replica: u64) -> Result<SimulationRun, SimError> {
    let mut rng = replica_rng(seed, replica);
    let window = BoxLattice::new(options.start.dim(), options.window);
    let times = options.times();
    let mut pop = Population::new(tables, options.start);
    let mut snapshots = Vec::with_capacity(times.len());
    let mut next = 0;
    let mut t = 0.0;
    let mut events = 0u64;
    let outcome = loop {
        if pop.is_extinct() {
            break Outcome::Extinct;
        }
        let (rate, off_rate) = pop.rates();
        let dt = -(1.0 - rng.random::<f64>()).ln() / rate;
        // The current state holds on [t, t + dt).
        let t_next = t + dt;
        while next < times.len() && times[next] < t_next {
            snapshots.push(snapshot(&pop, times[next], &window));
            next += 1;
        }
        if next == times.len() {
            break Outcome::Completed;
        }
        t = t_next;
        pop.apply(&mut rng, dt, rate, off_rate);
        events += 1;
        if pop.total() > options.cap {
            break Outcome::CapHit;
        }
    };
    let last = match outcome {
        Outcome::Completed => snapshots.last().cloned().expect("grid includes the horizon"),
        Outcome::Extinct => {
            while next < times.len() {
                snapshots.push(Snapshot {
                    t: times[next],
                    total: 0,
                    sites: Vec::new(),
                });
                next += 1;
            }
            Snapshot {
                t,
                total: 0,
                sites: Vec::new(),
            }
        }
        Outcome::CapHit => snapshot(&pop, t, &window),
    };
    Ok(SimulationRun {
        replica,
        seed,
        outcome,
        snapshots,
        last,
        events,
    })
}

/// Runs `replicas` independent replicas in parallel; results are ordered by replica index.
pub fn simulate(config: &BrwConfig, options: &RunOptions, seed: u64, replicas: u64) -> Result<Vec<SimulationRun>, SimError> {
    options.validate()?;
    let tables = Tables::new(config);
    (0..replicas)
        .into_par_iter()
        .map(|r| run_with(std::sync::Arc::clone(&tables), options, seed, r))
        .collect()
}
