//! Random-walk kernel, branching sources and the assembled model.
//!
//! A [`TransitionKernel`] is a symmetric, finitely supported jump-rate
//! function a(z) on Z^d with a(0) = -Σ_{z≠0} a(z). A [`BranchingSource`] holds
//! the infinitesimal offspring coefficients b_n of one source and their
//! factorial moments β^{(r)} = Σ_n n(n-1)…(n-r+1) b_n.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::lattice::{Point, MAX_DIM};

/// Absolute/relative tolerance for symmetry and zero-sum checks.
pub const VALIDATION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel has no positive off-diagonal rate")]
    EmptySupport,
    #[error("kernel is asymmetric at offset {offset}: a(z) = {forward}, a(-z) = {backward}")]
    AsymmetricKernel {
        offset: Point,
        forward: f64,
        backward: f64,
    },
    #[error("kernel support generates a sublattice of index {index} in Z^{dim}, not Z^{dim}")]
    NotIrreducible { dim: usize, index: String },
    #[error("dimension {0} is not supported (expected 1..={MAX_DIM})")]
    UnsupportedDimension(usize),
    #[error("point {point} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        point: Point,
        got: usize,
        expected: usize,
    },
    #[error("rate at offset {offset} must be finite and nonnegative, got {rate}")]
    InvalidRate { offset: Point, rate: f64 },
    #[error("offset {0} listed more than once")]
    DuplicateOffset(Point),
    #[error("invalid branching coefficients: {0}")]
    InvalidCoefficients(String),
    #[error("two sources share position {0}")]
    DuplicateSource(Point),
    #[error("at least one branching source is required")]
    NoSources,
}

/// Validated jump-rate function of a symmetric, spatially homogeneous walk.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitionKernel {
    dim: usize,
    /// Off-diagonal support, sorted, each with its rate a(z) > 0.
    jumps: Vec<(Point, f64)>,
    /// a(0) = -Σ_{z≠0} a(z).
    diagonal: f64,
}

impl TransitionKernel {
    /// Validates raw off-diagonal rates. A zero offset, if present, is
    /// ignored: a(0) is always derived from the other rates.
    pub fn new(dim: usize, raw: &[(Point, f64)]) -> Result<Self, KernelError> {
        validate_kernel(raw, dim)
    }

    /// Nearest-neighbour walk on Z^d with total jump rate `total_rate`.
    pub fn nearest_neighbour(dim: usize, total_rate: f64) -> Result<Self, KernelError> {
        let each = total_rate / (2 * dim) as f64;
        let mut raw = Vec::new();
        for axis in 0..dim {
            let e = Point::unit(dim, axis);
            raw.push((e, each));
            raw.push((-e, each));
        }
        Self::new(dim, &raw)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Support {z ≠ 0 : a(z) > 0} with rates.
    pub fn jumps(&self) -> &[(Point, f64)] {
        &self.jumps
    }

    /// a(0), strictly negative.
    pub fn diagonal(&self) -> f64 {
        self.diagonal
    }

    /// Total jump rate -a(0).
    pub fn exit_rate(&self) -> f64 {
        -self.diagonal
    }

    pub fn rate(&self, z: &Point) -> f64 {
        if z.is_origin() {
            return self.diagonal;
        }
        self.jumps
            .binary_search_by(|(p, _)| p.cmp(z))
            .map(|i| self.jumps[i].1)
            .unwrap_or(0.0)
    }

    /// Largest |z_k| over the support.
    pub fn reach(&self) -> i64 {
        self.jumps.iter().map(|(z, _)| z.linf()).max().unwrap_or(0)
    }

    /// φ(θ) = Σ_z a(z) cos(z, θ), including the z = 0 term.
    pub fn symbol(&self, theta: &[f64]) -> f64 {
        assert_eq!(theta.len(), self.dim, "θ has the wrong dimension");
        // Pair ±z so the result is exactly even in θ.
        let mut acc = 0.0;
        for (z, a) in &self.jumps {
            acc += a * (z.dot(theta)).cos();
        }
        self.diagonal + acc
    }
}

/// Validates a raw rate map into a [`TransitionKernel`].
pub fn validate_kernel(raw: &[(Point, f64)], dim: usize) -> Result<TransitionKernel, KernelError> {
    if !(1..=MAX_DIM).contains(&dim) {
        return Err(KernelError::UnsupportedDimension(dim));
    }
    let mut rates: BTreeMap<Point, f64> = BTreeMap::new();
    for &(z, rate) in raw {
        if z.dim() != dim {
            return Err(KernelError::DimensionMismatch {
                point: z,
                got: z.dim(),
                expected: dim,
            });
        }
        if !rate.is_finite() || rate < 0.0 {
            return Err(KernelError::InvalidRate { offset: z, rate });
        }
        if z.is_origin() {
            continue;
        }
        if rates.insert(z, rate).is_some() {
            return Err(KernelError::DuplicateOffset(z));
        }
    }
    rates.retain(|_, r| *r > 0.0);
    if rates.is_empty() {
        return Err(KernelError::EmptySupport);
    }
    for (&z, &forward) in &rates {
        let backward = rates.get(&-z).copied().unwrap_or(0.0);
        if (forward - backward).abs() > VALIDATION_TOL * forward.max(backward).max(1.0) {
            return Err(KernelError::AsymmetricKernel {
                offset: z,
                forward,
                backward,
            });
        }
    }
    // Average each ±z pair so the stored kernel is exactly symmetric.
    let jumps: Vec<(Point, f64)> = rates
        .iter()
        .map(|(&z, &r)| (z, 0.5 * (r + rates[&-z])))
        .collect();
    let support: Vec<Point> = jumps.iter().map(|(z, _)| *z).collect();
    let index = lattice_index(&support, dim);
    if index != Some(1) {
        return Err(KernelError::NotIrreducible {
            dim,
            index: index.map_or_else(|| "infinite".to_string(), |i| i.to_string()),
        });
    }
    let diagonal = -jumps.iter().map(|(_, r)| r).sum::<f64>();
    Ok(TransitionKernel {
        dim,
        jumps,
        diagonal,
    })
}

/// Index [Z^d : L] of the lattice L generated by `vectors`, or `None` when
/// L has rank < d. Computed by integer row reduction to echelon form.
pub fn lattice_index(vectors: &[Point], dim: usize) -> Option<u128> {
    let mut rows: Vec<Vec<i128>> = vectors
        .iter()
        .map(|p| p.coords().iter().map(|&c| c as i128).collect())
        .collect();
    let mut index: u128 = 1;
    let mut top = 0;
    for col in 0..dim {
        // Euclid on column `col` among rows[top..] until one nonzero remains.
        loop {
            let mut nz: Vec<usize> = (top..rows.len()).filter(|&r| rows[r][col] != 0).collect();
            if nz.is_empty() {
                return None;
            }
            nz.sort_by_key(|&r| rows[r][col].abs());
            let pivot = nz[0];
            if nz.len() == 1 {
                rows.swap(top, pivot);
                break;
            }
            let pv = rows[pivot][col];
            for &r in &nz[1..] {
                let q = rows[r][col].div_euclid(pv);
                for k in 0..dim {
                    rows[r][k] -= q * rows[pivot][k];
                }
            }
        }
        index = index.checked_mul(rows[top][col].unsigned_abs())?;
        top += 1;
    }
    Some(index)
}

/// A branching source x_i with offspring coefficients b_0, b_1, ….
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchingSource {
    position: Point,
    coefficients: Vec<f64>,
    intensity: f64,
    /// β^{(r)} for r = 1..=M where M is the largest offspring count.
    factorial_moments: Vec<f64>,
}

impl BranchingSource {
    /// Validates `coefficients` (b_n ≥ 0 for n ≠ 1, b_1 < 0, Σ b_n = 0).
    ///
    /// An all-zero list is accepted as an inert source: no branching, β = 0.
    pub fn new(position: Point, coefficients: Vec<f64>) -> Result<Self, KernelError> {
        let max_r = coefficients.len().saturating_sub(1);
        let (intensity, factorial_moments) = source_moments(&coefficients, max_r.max(1))?;
        Ok(Self {
            position,
            coefficients,
            intensity,
            factorial_moments,
        })
    }

    /// Source with b_0 = death, b_2 = split rate (and b_1 balancing them).
    pub fn binary(position: Point, death: f64, split: f64) -> Result<Self, KernelError> {
        Self::new(position, vec![death, -(death + split), split])
    }

    pub fn position(&self) -> Point {
        self.position
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// b_n, zero beyond the stored list.
    pub fn coefficient(&self, n: usize) -> f64 {
        self.coefficients.get(n).copied().unwrap_or(0.0)
    }

    /// β = Σ n b_n.
    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    /// β^{(r)}; zero for r above the largest offspring count.
    pub fn factorial_moment(&self, r: usize) -> f64 {
        assert!(r >= 1);
        self.factorial_moments.get(r - 1).copied().unwrap_or(0.0)
    }

    pub fn is_inert(&self) -> bool {
        self.coefficients.iter().all(|&b| b == 0.0)
    }

    /// Sources with β ≤ 0 are accepted but do not drive growth.
    pub fn is_flagged(&self) -> bool {
        self.intensity <= 0.0
    }
}

/// β and the factorial moments β^{(1)}, …, β^{(r_max)} of a coefficient list.
pub fn source_moments(coefficients: &[f64], r_max: usize) -> Result<(f64, Vec<f64>), KernelError> {
    let inert = coefficients.iter().all(|&b| b == 0.0);
    if !inert {
        for (n, &b) in coefficients.iter().enumerate() {
            if !b.is_finite() {
                return Err(KernelError::InvalidCoefficients(format!("b_{n} = {b} is not finite")));
            }
            if n != 1 && b < 0.0 {
                return Err(KernelError::InvalidCoefficients(format!("b_{n} = {b} is negative")));
            }
        }
        let b1 = coefficients.get(1).copied().unwrap_or(0.0);
        if b1 >= 0.0 {
            return Err(KernelError::InvalidCoefficients(format!("b_1 = {b1} must be negative")));
        }
        let sum: f64 = coefficients.iter().sum();
        let scale: f64 = coefficients.iter().map(|b| b.abs()).sum();
        if sum.abs() > VALIDATION_TOL * scale.max(1.0) {
            return Err(KernelError::InvalidCoefficients(format!(
                "coefficients sum to {sum}, expected 0"
            )));
        }
    }
    let moments: Vec<f64> = (1..=r_max)
        .map(|r| {
            coefficients
                .iter()
                .enumerate()
                .map(|(n, &b)| falling_factorial(n, r) * b)
                .sum()
        })
        .collect();
    let intensity = moments.first().copied().unwrap_or(0.0);
    Ok((intensity, moments))
}

/// n(n-1)…(n-r+1) as a float (zero when r > n).
pub fn falling_factorial(n: usize, r: usize) -> f64 {
    if r > n {
        return 0.0;
    }
    ((n - r + 1)..=n).map(|k| k as f64).product()
}

/// Kernel plus N ≥ 1 sources at distinct positions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BrwConfig {
    kernel: TransitionKernel,
    sources: Vec<BranchingSource>,
}

impl BrwConfig {
    pub fn new(kernel: TransitionKernel, sources: Vec<BranchingSource>) -> Result<Self, KernelError> {
        if sources.is_empty() {
            return Err(KernelError::NoSources);
        }
        for (i, s) in sources.iter().enumerate() {
            let p = s.position();
            if p.dim() != kernel.dim() {
                return Err(KernelError::DimensionMismatch {
                    point: p,
                    got: p.dim(),
                    expected: kernel.dim(),
                });
            }
            if sources[..i].iter().any(|o| o.position() == p) {
                return Err(KernelError::DuplicateSource(p));
            }
        }
        Ok(Self { kernel, sources })
    }

    pub fn kernel(&self) -> &TransitionKernel {
        &self.kernel
    }

    pub fn sources(&self) -> &[BranchingSource] {
        &self.sources
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn positions(&self) -> Vec<Point> {
        self.sources.iter().map(|s| s.position()).collect()
    }

    pub fn intensities(&self) -> Vec<f64> {
        self.sources.iter().map(|s| s.intensity()).collect()
    }

    pub fn source_at(&self, x: &Point) -> Option<usize> {
        self.sources.iter().position(|s| s.position() == *x)
    }

    /// Same positions and kernel with source `i` replaced.
    pub fn with_source(&self, i: usize, source: BranchingSource) -> Result<Self, KernelError> {
        let mut sources = self.sources.clone();
        sources[i] = source;
        Self::new(self.kernel.clone(), sources)
    }
}
