//! Aggregated event-driven simulation over per-site particle counts.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use super::SimError;
use crate::kernel::BrwConfig;
use crate::lattice::{BoxLattice, Point};

const NO_SOURCE: u32 = u32::MAX;

/// Kind of a single event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EventKind {
    /// A particle away from every source jumps.
    JumpOffSource,
    /// A particle at a source jumps away.
    JumpFromSource,
    /// A particle at a source dies (zero offspring).
    Death,
    /// A particle at a source is replaced by n >= 2 particles.
    Branch(u32),
}

/// One simulated event.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Event {
    pub dt: f64,
    pub kind: EventKind,
    /// Site of the particle that triggered the event.
    pub site: Point,
}

#[derive(Clone, Copy, Debug)]
enum Outcome {
    /// Jump by the given kernel offset (index into `Tables::offsets`).
    Jump(usize),
    Offspring(u32),
}

/// Rate tables shared by all replicas of one configuration.
#[derive(Debug)]
pub struct Tables {
    dim: usize,
    /// -a(0): jump rate of a particle away from the sources.
    walk_rate: f64,
    offsets: Vec<Point>,
    /// Cumulative a(z)/(-a(0)).
    walk_cumulative: Vec<f64>,
    /// -(a(0) + b_1) for each source.
    source_rates: Vec<f64>,
    /// Cumulative outcome distribution per source: jumps a(z)/rate, offspring b_n/rate.
    source_cumulative: Vec<Vec<(f64, Outcome)>>,
    positions: Vec<Point>,
    reach: i64,
}

impl Tables {
    pub fn new(config: &BrwConfig) -> Arc<Self> {
        let kernel = config.kernel();
        let walk_rate = kernel.exit_rate();
        let offsets: Vec<Point> = kernel.jumps().iter().map(|(z, _)| *z).collect();
        let walk_cumulative = cumulative(kernel.jumps().iter().map(|(_, a)| a / walk_rate));
        let mut source_rates = Vec::new();
        let mut source_cumulative = Vec::new();
        for s in config.sources() {
            let rate = walk_rate - s.coefficient(1);
            let mut entries: Vec<(f64, Outcome)> = kernel
                .jumps()
                .iter()
                .enumerate()
                .map(|(k, (_, a))| (a / rate, Outcome::Jump(k)))
                .collect();
            for (n, b) in s.coefficients().iter().enumerate() {
                if n != 1 && *b > 0.0 {
                    entries.push((b / rate, Outcome::Offspring(n as u32)));
                }
            }
            let cum = cumulative(entries.iter().map(|e| e.0));
            source_cumulative.push(cum.into_iter().zip(entries).map(|(c, (_, o))| (c, o)).collect());
            source_rates.push(rate);
        }
        Arc::new(Self {
            dim: config.dim(),
            walk_rate,
            offsets,
            walk_cumulative,
            source_rates,
            source_cumulative,
            positions: config.positions(),
            reach: kernel.reach(),
        })
    }

    pub fn walk_rate(&self) -> f64 {
        self.walk_rate
    }

    pub fn source_rates(&self) -> &[f64] {
        &self.source_rates
    }
}

/// Running sums; the last entry is infinite so rounding never falls off the end.
fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = f64::INFINITY;
    }
    out
}

/// Fenwick tree of u64 weights.
#[derive(Clone, Debug)]
struct Fenwick {
    tree: Vec<u64>,
    top: usize,
}

impl Fenwick {
    fn from_weights(weights: &[u64]) -> Self {
        let n = weights.len();
        let mut tree = vec![0u64; n + 1];
        for (i, &w) in weights.iter().enumerate() {
            tree[i + 1] += w;
            let parent = (i + 1) + ((i + 1) & (i + 1).wrapping_neg());
            if parent <= n {
                let v = tree[i + 1];
                tree[parent] += v;
            }
        }
        let top = if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
        Self { tree, top }
    }

    #[inline]
    fn add(&mut self, index: usize, delta: i64) {
        let mut i = index + 1;
        while i < self.tree.len() {
            self.tree[i] = self.tree[i].wrapping_add(delta as u64);
            i += i & i.wrapping_neg();
        }
    }

    /// Smallest index whose inclusive prefix sum exceeds `target`.
    #[inline]
    fn find(&self, mut target: u64) -> usize {
        let mut pos = 0;
        let mut step = self.top;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

/// Per-site particle counts on a box that grows as the population spreads.
///
/// Counts at source sites are kept in `source_counts`; the dense array and
/// its Fenwick tree hold only particles away from the sources, all of which
/// jump at the same rate.
#[derive(Clone, Debug)]
pub struct Population {
    tables: Arc<Tables>,
    lattice: BoxLattice,
    counts: Vec<u64>,
    fenwick: Fenwick,
    source_of: Vec<u32>,
    near_edge: Vec<bool>,
    /// Index deltas of the kernel offsets on the current box.
    deltas: Vec<isize>,
    source_sites: Vec<usize>,
    source_counts: Vec<u64>,
    off_total: u64,
    total: u64,
    time: f64,
}

impl Population {
    /// One particle at `start`.
    pub fn new(tables: Arc<Tables>, start: Point) -> Self {
        Self::from_particles(tables, &[start])
    }

    /// A population with one particle at each listed position.
    pub fn from_particles(tables: Arc<Tables>, particles: &[Point]) -> Self {
        let extent = particles
            .iter()
            .chain(&tables.positions)
            .map(|p| p.linf())
            .max()
            .unwrap_or(0);
        let radius = (extent + 2 * tables.reach + 8) as usize;
        let mut pop = Self {
            lattice: BoxLattice::new(tables.dim, radius),
            tables,
            counts: Vec::new(),
            fenwick: Fenwick::from_weights(&[]),
            source_of: Vec::new(),
            near_edge: Vec::new(),
            deltas: Vec::new(),
            source_sites: Vec::new(),
            source_counts: Vec::new(),
            off_total: 0,
            total: 0,
            time: 0.0,
        };
        pop.source_counts = vec![0; pop.tables.positions.len()];
        pop.rebuild(radius, &[]);
        for p in particles {
            let s = pop.lattice.index(p).expect("initial particle inside box");
            pop.insert(s, 1);
        }
        pop
    }

    /// Re-lays the counts on a box of radius `radius`.
    fn rebuild(&mut self, radius: usize, occupied: &[(Point, u64)]) {
        let tables = &self.tables;
        let lattice = BoxLattice::new(tables.dim, radius);
        let len = lattice.len();
        let edge = radius as i64 - tables.reach;
        let mut counts = vec![0u64; len];
        let mut near_edge = vec![false; len];
        for (i, flag) in near_edge.iter_mut().enumerate() {
            *flag = lattice.point(i).linf() > edge;
        }
        let mut source_of = vec![NO_SOURCE; len];
        let source_sites: Vec<usize> = tables
            .positions
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let s = lattice.index(p).unwrap();
                source_of[s] = j as u32;
                s
            })
            .collect();
        for (p, c) in occupied {
            counts[lattice.index(p).unwrap()] = *c;
        }
        let center = lattice.index(&Point::origin(tables.dim)).unwrap() as isize;
        self.deltas = tables
            .offsets
            .iter()
            .map(|z| lattice.index(z).unwrap() as isize - center)
            .collect();
        self.fenwick = Fenwick::from_weights(&counts);
        self.lattice = lattice;
        self.counts = counts;
        self.near_edge = near_edge;
        self.source_of = source_of;
        self.source_sites = source_sites;
    }

    fn grow(&mut self) {
        let occupied: Vec<(Point, u64)> = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(i, c)| (self.lattice.point(i), *c))
            .collect();
        let radius = 2 * self.lattice.radius();
        self.rebuild(radius, &occupied);
    }

    #[inline]
    fn insert(&mut self, site: usize, n: u64) {
        let src = self.source_of[site];
        if src != NO_SOURCE {
            self.source_counts[src as usize] += n;
        } else {
            self.counts[site] += n;
            self.fenwick.add(site, n as i64);
            self.off_total += n;
            if self.near_edge[site] {
                self.grow();
            }
        }
        self.total += n;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn is_extinct(&self) -> bool {
        self.total == 0
    }

    /// μ(y); zero outside the stored box.
    pub fn count(&self, y: &Point) -> u64 {
        match self.lattice.index(y) {
            None => 0,
            Some(s) => match self.source_of[s] {
                NO_SOURCE => self.counts[s],
                j => self.source_counts[j as usize],
            },
        }
    }

    /// All occupied sites with their counts.
    pub fn occupied(&self) -> Vec<(Point, u64)> {
        let mut out: Vec<(Point, u64)> = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(i, c)| (self.lattice.point(i), *c))
            .collect();
        for (j, &c) in self.source_counts.iter().enumerate() {
            if c > 0 {
                out.push((self.tables.positions[j], c));
            }
        }
        out.sort();
        out
    }

    /// Total event rate Λ.
    pub fn total_rate(&self) -> f64 {
        self.tables.walk_rate * self.off_total as f64
            + self
                .source_counts
                .iter()
                .zip(&self.tables.source_rates)
                .map(|(&c, r)| c as f64 * r)
                .sum::<f64>()
    }

    /// (Λ, rate of the off-source particles).
    #[inline]
    pub(crate) fn rates(&self) -> (f64, f64) {
        let off_rate = self.tables.walk_rate * self.off_total as f64;
        let mut rate = off_rate;
        for (&c, r) in self.source_counts.iter().zip(&self.tables.source_rates) {
            rate += c as f64 * r;
        }
        (rate, off_rate)
    }

    /// Performs one event; returns the time increment, the kind and the site index.
    #[inline]
    pub(crate) fn step_raw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<(f64, EventKind, usize)> {
        if self.total == 0 {
            return None;
        }
        let (rate, off_rate) = self.rates();
        let dt = -(1.0 - rng.random::<f64>()).ln() / rate;
        let (kind, site) = self.apply(rng, dt, rate, off_rate);
        Some((dt, kind, site))
    }

    /// Applies one event after a holding time `dt` drawn at total rate `rate`.
    #[inline]
    pub(crate) fn apply<R: Rng + ?Sized>(&mut self, rng: &mut R, dt: f64, rate: f64, off_rate: f64) -> (EventKind, usize) {
        self.time += dt;
        let mut u = rng.random::<f64>() * rate;
        if u < off_rate {
            let site = self.fenwick.find(rng.random_range(0..self.off_total));
            let k = pick(&self.tables.walk_cumulative, rng.random::<f64>());
            self.counts[site] -= 1;
            self.fenwick.add(site, -1);
            self.off_total -= 1;
            self.total -= 1;
            self.insert((site as isize + self.deltas[k]) as usize, 1);
            return (EventKind::JumpOffSource, site);
        }
        u -= off_rate;
        let (j, outcome) = {
            let tables = &*self.tables;
            let mut j = 0;
            loop {
                let w = self.source_counts[j] as f64 * tables.source_rates[j];
                if u < w || j + 1 == self.source_counts.len() {
                    break;
                }
                u -= w;
                j += 1;
            }
            // Rounding can leave u just past the last occupied source.
            while self.source_counts[j] == 0 {
                j -= 1;
            }
            let table = &tables.source_cumulative[j];
            let v = rng.random::<f64>();
            let k = table.iter().position(|(c, _)| v < *c).unwrap_or(table.len() - 1);
            (j, table[k].1)
        };
        let site = self.source_sites[j];
        self.source_counts[j] -= 1;
        self.total -= 1;
        let kind = match outcome {
            Outcome::Jump(k) => {
                self.insert((site as isize + self.deltas[k]) as usize, 1);
                EventKind::JumpFromSource
            }
            Outcome::Offspring(0) => EventKind::Death,
            Outcome::Offspring(n) => {
                self.source_counts[j] += n as u64;
                self.total += n as u64;
                EventKind::Branch(n)
            }
        };
        (kind, site)
    }

    /// Advances the population by one event.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Event, SimError> {
        // The site index refers to the box before any regrowth, so resolve it first.
        let lattice = self.lattice;
        let (dt, kind, site) = self.step_raw(rng).ok_or(SimError::EmptyPopulation)?;
        Ok(Event {
            dt,
            kind,
            site: lattice.point(site),
        })
    }
}

#[inline]
fn pick(cumulative: &[f64], u: f64) -> usize {
    let mut k = 0;
    while u >= cumulative[k] {
        k += 1;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{BranchingSource, TransitionKernel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reference() -> BrwConfig {
        let k = TransitionKernel::nearest_neighbour(1, 1.0).unwrap();
        let s = BranchingSource::new(Point::new(&[0]), vec![1.0, -3.0, 2.0]).unwrap();
        BrwConfig::new(k, vec![s]).unwrap()
    }

    #[test]
    fn fenwick_find() {
        let f = Fenwick::from_weights(&[0, 3, 0, 2, 5]);
        assert_eq!(f.find(0), 1);
        assert_eq!(f.find(2), 1);
        assert_eq!(f.find(3), 3);
        assert_eq!(f.find(5), 4);
        assert_eq!(f.find(9), 4);
    }

    #[test]
    fn rate_table_at_source() {
        let t = Tables::new(&reference());
        assert_eq!(t.source_rates(), &[4.0]);
        let pop = Population::new(Arc::clone(&t), Point::new(&[0]));
        assert_eq!(pop.total_rate(), 4.0);
        let two = Population::from_particles(t, &[Point::new(&[0]), Point::new(&[0])]);
        assert_eq!(two.total_rate(), 8.0);
    }

    #[test]
    fn pure_walk_only_jumps() {
        let cfg = reference();
        let t = Tables::new(&cfg);
        let mut pop = Population::new(t, Point::new(&[5]));
        assert_eq!(pop.total_rate(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ev = pop.step(&mut rng).unwrap();
        assert_eq!(ev.kind, EventKind::JumpOffSource);
        assert_eq!(ev.site, Point::new(&[5]));
        assert_eq!(pop.total(), 1);
    }

    #[test]
    fn box_grows_and_keeps_counts() {
        let cfg = reference();
        let mut pop = Population::new(Tables::new(&cfg), Point::new(&[3]));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20_000 {
            if pop.step(&mut rng).is_err() {
                break;
            }
            let occ = pop.occupied();
            assert_eq!(occ.iter().map(|o| o.1).sum::<u64>(), pop.total());
            if pop.total() > 2000 {
                break;
            }
        }
    }
}
