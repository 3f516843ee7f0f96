//! Supercriticality, the growth rate λ₀, the eigenfunction f and the limit shape ψ.
//!
//! λ > 0 is an eigenvalue of ℋ exactly when 1 is an eigenvalue of the N×N
//! matrix G(λ)_{ij} = β_j I_{x_j - x_i}(λ). With B = diag(β) and
//! Î_{ij} = I_{x_j - x_i}, G = Î B is similar to the symmetric matrix
//! S = B^{1/2} Î B^{1/2}; all computations work with S.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::green::{resolvable_lambda, source_green_block, GreenError, GreenFunction, QuadratureSpec};
use crate::kernel::BrwConfig;
use crate::lattice::{BoxLattice, Point};

/// Tolerance on |γ(λ₀) - 1|.
pub const ROOT_TOL: f64 = 1e-12;
/// Relative residual at which power iteration stops.
pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITERS: usize = 10_000;
/// Smallest λ probed when bracketing from above.
pub const PROBE_FLOOR: f64 = 1e-8;
/// Initial and maximal sizes of the λ-grid used by [`all_positive_eigs`].
pub const GRID_POINTS: usize = 64;
pub const MAX_GRID_POINTS: usize = 4096;
/// Largest admissible relative ℓ² mass of f outside the window.
pub const WINDOW_TAIL_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error(transparent)]
    Green(#[from] GreenError),
    #[error("source {index} has intensity β = {beta}; the spectral analysis needs every β_i > 0")]
    NonPositiveIntensity { index: usize, beta: f64 },
    #[error("configuration is not supercritical (sup γ = {sup_gamma})")]
    NotSupercritical { sup_gamma: f64 },
    #[error("eigenvalue curve {index} still changes sign inconsistently on a {points}-point grid")]
    GridResolutionExhausted { index: usize, points: usize },
    #[error("window of radius {radius} misses {tail:e} of the ℓ² norm of f")]
    WindowTooSmall { radius: usize, tail: f64 },
}

/// Square roots of the intensities; errors on any β_i <= 0.
fn sqrt_intensities(config: &BrwConfig) -> Result<DVector<f64>, SpectralError> {
    let betas = config.intensities();
    for (index, &beta) in betas.iter().enumerate() {
        if !(beta > 0.0) {
            return Err(SpectralError::NonPositiveIntensity { index, beta });
        }
    }
    Ok(DVector::from_iterator(betas.len(), betas.iter().map(|b| b.sqrt())))
}

fn symmetrized(config: &BrwConfig, lambda: f64, spec: QuadratureSpec) -> Result<DMatrix<f64>, SpectralError> {
    let root = sqrt_intensities(config)?;
    let block = source_green_block(config, lambda, spec)?;
    Ok(DMatrix::from_fn(block.nrows(), block.ncols(), |i, j| root[i] * block[(i, j)] * root[j]))
}

/// Perron eigenpair of G(λ).
#[derive(Clone, Debug)]
pub struct Perron {
    pub value: f64,
    /// Positive right eigenvector of G(λ), unit Euclidean norm.
    pub vector: Vec<f64>,
    pub power_iterations: usize,
    /// Whether power iteration hit its cap and a dense eigensolve was used.
    pub used_fallback: bool,
}

/// Power iteration on the symmetric positive matrix `s` from the all-ones vector.
fn power_iteration(s: &DMatrix<f64>) -> Option<(f64, DVector<f64>, usize)> {
    let n = s.nrows();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    for it in 1..=POWER_MAX_ITERS {
        let w = s * &v;
        let rho = v.dot(&w);
        let residual = (&w - &v * rho).norm();
        if residual <= POWER_TOL * rho.abs() {
            return Some((rho, v, it));
        }
        v = &w / w.norm();
    }
    None
}

fn perron_of(s: &DMatrix<f64>, root: &DVector<f64>) -> Perron {
    let (value, w, power_iterations, used_fallback) = match power_iteration(s) {
        Some((rho, w, it)) => (rho, w, it, false),
        None => {
            let eig = SymmetricEigen::new(s.clone());
            let k = eig.eigenvalues.imax();
            let mut w = eig.eigenvectors.column(k).into_owned();
            if w.sum() < 0.0 {
                w = -w;
            }
            (eig.eigenvalues[k], w, POWER_MAX_ITERS, true)
        }
    };
    let f = w.component_div(root);
    let f = &f / f.norm();
    Perron {
        value,
        vector: f.iter().copied().collect(),
        power_iterations,
        used_fallback,
    }
}

/// Perron eigenpair of G(λ).
pub fn perron(config: &BrwConfig, lambda: f64, spec: QuadratureSpec) -> Result<Perron, SpectralError> {
    let root = sqrt_intensities(config)?;
    let s = symmetrized(config, lambda, spec)?;
    Ok(perron_of(&s, &root))
}

/// γ(λ): the Perron eigenvalue of G(λ).
pub fn gamma(config: &BrwConfig, lambda: f64, spec: QuadratureSpec) -> Result<f64, SpectralError> {
    Ok(perron(config, lambda, spec)?.value)
}

/// All eigenvalues of G(λ) in decreasing order.
pub fn eigenvalues_of_g(config: &BrwConfig, lambda: f64, spec: QuadratureSpec) -> Result<Vec<f64>, SpectralError> {
    let s = symmetrized(config, lambda, spec)?;
    let mut ev: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}

/// A bracketed root of γ(λ) = 1.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lambda0Root {
    pub lambda0: f64,
    /// Final bracket with γ(lo) >= 1 >= γ(hi).
    pub bracket: (f64, f64),
    /// |γ(λ₀) - 1|.
    pub residual: f64,
    pub evaluations: usize,
}

/// Outcome of the search for λ₀.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Lambda0 {
    Supercritical(Lambda0Root),
    Absent {
        /// Largest γ seen, or its extrapolation to λ = 0+.
        sup_gamma: f64,
        extrapolated: bool,
        note: String,
    },
}

impl Lambda0 {
    pub fn value(&self) -> Option<f64> {
        match self {
            Lambda0::Supercritical(r) => Some(r.lambda0),
            Lambda0::Absent { .. } => None,
        }
    }
}

/// Largest λ with 1 ∈ spec G(λ), or `Absent` if there is none.
pub fn find_lambda0(config: &BrwConfig, spec: QuadratureSpec) -> Result<Lambda0, SpectralError> {
    let mut probes = Vec::new();
    find_lambda0_traced(config, spec, &mut probes)
}

/// [`find_lambda0`], recording every (λ, γ(λ)) evaluation in `probes`.
pub fn find_lambda0_traced(
    config: &BrwConfig,
    spec: QuadratureSpec,
    probes: &mut Vec<(f64, f64)>,
) -> Result<Lambda0, SpectralError> {
    sqrt_intensities(config)?;
    let eval = |lambda: f64, probes: &mut Vec<(f64, f64)>| -> Result<f64, SpectralError> {
        let g = gamma(config, lambda, spec)?;
        probes.push((lambda, g));
        Ok(g)
    };
    let mut lambda = 1.0;
    let mut g = eval(lambda, probes)?;
    let (lo, g_lo, hi, g_hi);
    if g > 1.0 {
        let (mut l, mut gl) = (lambda, g);
        loop {
            lambda *= 2.0;
            g = eval(lambda, probes)?;
            if g <= 1.0 {
                break;
            }
            (l, gl) = (lambda, g);
        }
        (lo, g_lo, hi, g_hi) = (l, gl, lambda, g);
    } else {
        let (mut h, mut gh) = (lambda, g);
        loop {
            if g == 1.0 {
                return Ok(root_at(lambda, probes.len()));
            }
            let next = lambda / 2.0;
            if next < PROBE_FLOOR {
                let note = if config.dim() <= 2 {
                    format!(
                        "γ({lambda:e}) = {g} < 1 at the probe floor; the walk is recurrent so γ → ∞ as λ → 0 and a root may lie below the floor"
                    )
                } else {
                    "γ stays below 1 down to the probe floor".to_string()
                };
                return Ok(Lambda0::Absent {
                    sup_gamma: g,
                    extrapolated: false,
                    note,
                });
            }
            match eval(next, probes) {
                Ok(v) => {
                    lambda = next;
                    g = v;
                }
                Err(SpectralError::Green(GreenError::QuadratureNotConverged { .. })) if config.dim() == 3 => {
                    return absent_by_extrapolation(probes, lambda);
                }
                Err(e) => return Err(e),
            }
            if g >= 1.0 {
                break;
            }
            (h, gh) = (lambda, g);
        }
        (lo, g_lo, hi, g_hi) = (lambda, g, h, gh);
    }
    refine(|l| eval(l, probes), lo, g_lo, hi, g_hi).map(Lambda0::Supercritical)
}

fn root_at(lambda: f64, evaluations: usize) -> Lambda0 {
    Lambda0::Supercritical(Lambda0Root {
        lambda0: lambda,
        bracket: (lambda, lambda),
        residual: 0.0,
        evaluations,
    })
}

/// In d = 3 the quadrature stops converging as λ ↓ 0 while γ(0+) is finite.
fn absent_by_extrapolation(probes: &[(f64, f64)], smallest: f64) -> Result<Lambda0, SpectralError> {
    let sup = crate::green::extrapolate_sqrt(probes).unwrap_or(f64::NAN);
    if sup < 1.0 {
        Ok(Lambda0::Absent {
            sup_gamma: sup,
            extrapolated: true,
            note: format!("γ(0+) ≈ {sup:.6} extrapolated from γ(λ) ≈ a + b√λ + cλ on λ >= {smallest:e}"),
        })
    } else {
        // A root would lie below the smallest resolvable λ.
        Err(SpectralError::Green(GreenError::QuadratureNotConverged {
            lambda: smallest / 2.0,
            nodes: 0,
            difference: f64::NAN,
        }))
    }
}

/// Safeguarded Illinois iteration for h(λ) = γ(λ) - 1 on a bracket with
/// h(lo) > 0 > h(hi); falls back to bisection when progress stalls.
fn refine(
    mut gamma_at: impl FnMut(f64) -> Result<f64, SpectralError>,
    mut lo: f64,
    g_lo: f64,
    mut hi: f64,
    g_hi: f64,
) -> Result<Lambda0Root, SpectralError> {
    let (mut h_lo, mut h_hi) = (g_lo - 1.0, g_hi - 1.0);
    let (mut best, mut best_res) = if h_lo.abs() < h_hi.abs() { (lo, h_lo.abs()) } else { (hi, h_hi.abs()) };
    let mut side = 0i8;
    let mut evaluations = 0;
    for it in 0..400 {
        if best_res <= ROOT_TOL || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let mut x = if it % 4 == 3 {
            0.5 * (lo + hi)
        } else {
            hi - h_hi * (hi - lo) / (h_hi - h_lo)
        };
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let h = gamma_at(x)? - 1.0;
        evaluations += 1;
        if h.abs() < best_res {
            (best, best_res) = (x, h.abs());
        }
        if h == 0.0 {
            (lo, hi) = (x, x);
            break;
        }
        if h > 0.0 {
            lo = x;
            h_lo = h;
            if side == 1 {
                h_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = x;
            h_hi = h;
            if side == -1 {
                h_lo *= 0.5;
            }
            side = -1;
        }
    }
    Ok(Lambda0Root {
        lambda0: best,
        bracket: (lo, hi),
        residual: best_res,
        evaluations,
    })
}

/// Every λ > PROBE_FLOOR at which some eigenvalue of G(λ) equals 1, in decreasing order.
///
/// Each sorted eigenvalue of G(λ) is strictly decreasing in λ, so index k
/// crosses 1 at most once. Crossings are located on a logarithmic λ-grid
/// and then refined per index.
pub fn all_positive_eigs(config: &BrwConfig, spec: QuadratureSpec) -> Result<Vec<f64>, SpectralError> {
    sqrt_intensities(config)?;
    let max_beta = config.intensities().into_iter().fold(0.0, f64::max);
    let ceil = 1.01 * max_beta;
    let mut floor = PROBE_FLOOR;
    let resolvable = resolvable_lambda(config.kernel());
    while floor < resolvable && floor < 1e-2 * ceil {
        floor *= 10.0;
    }
    // Raise the floor until the quadrature converges there (d = 2, 3).
    let floor_eigs = loop {
        match eigenvalues_of_g(config, floor, spec) {
            Ok(ev) => break ev,
            Err(SpectralError::Green(GreenError::QuadratureNotConverged { .. })) if floor < 0.1 * ceil => floor *= 10.0,
            Err(e) => return Err(e),
        }
    };
    let n = config.n_sources();
    let mut points = GRID_POINTS;
    let crossings = loop {
        let grid = log_grid(floor, ceil, points);
        let mut curves = vec![floor_eigs.clone()];
        let rest: Vec<Vec<f64>> = grid[1..]
            .par_iter()
            .map(|&l| eigenvalues_of_g(config, l, spec))
            .collect::<Result<_, _>>()?;
        curves.extend(rest);
        match locate_crossings(&grid, &curves, n) {
            Ok(c) => break c,
            Err(index) if 2 * points <= MAX_GRID_POINTS => {
                let _ = index;
                points *= 2;
            }
            Err(index) => return Err(SpectralError::GridResolutionExhausted { index, points }),
        }
    };
    let mut roots = Vec::with_capacity(crossings.len());
    for (k, lo, hi) in crossings {
        let eig_k = |l: f64| -> Result<f64, SpectralError> { Ok(eigenvalues_of_g(config, l, spec)?[k]) };
        let (g_lo, g_hi) = (eig_k(lo)?, eig_k(hi)?);
        roots.push(refine(eig_k, lo, g_lo, hi, g_hi)?.lambda0);
    }
    roots.sort_by(|a, b| b.total_cmp(a));
    Ok(roots)
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// For each eigenvalue index, the grid interval where it drops through 1.
/// Returns the offending index if some curve changes sign more than once.
fn locate_crossings(grid: &[f64], curves: &[Vec<f64>], n: usize) -> Result<Vec<(usize, f64, f64)>, usize> {
    let mut out = Vec::new();
    for k in 0..n {
        let mut change = None;
        for i in 1..grid.len() {
            let above = curves[i - 1][k] > 1.0;
            let below = curves[i][k] > 1.0;
            if above != below {
                if change.is_some() || !above {
                    return Err(k);
                }
                change = Some((k, grid[i - 1], grid[i]));
            }
        }
        out.extend(change);
    }
    Ok(out)
}

/// The eigenfunction f of ℋ at λ₀, ℓ²-normalized.
#[derive(Clone, Debug, Serialize)]
pub struct Eigenfunction {
    /// f(x_i) for each source, in configuration order.
    pub sources: Vec<f64>,
    /// Window radius and the values f(x) for ‖x‖∞ <= radius.
    pub radius: usize,
    pub window: Vec<(Point, f64)>,
    /// Squared ℓ² mass of f outside the window (relative to the full norm).
    pub tail: f64,
    /// Σ_j β_j f(x_j).
    pub weighted_sum: f64,
}

/// Squared ℓ² norm of x ↦ Σ_j c_j I_{x_j - x}(λ) over all of Z^d:
/// Σ_x I_{x_j-x} I_{x_k-x} = -dI_{x_j-x_k}/dλ.
fn full_norm_sq(config: &BrwConfig, lambda: f64, coeffs: &[f64], spec: QuadratureSpec) -> Result<f64, GreenError> {
    let green = GreenFunction::new(config.kernel(), spec)?;
    let pos = config.positions();
    let offsets: Vec<Point> = pos
        .iter()
        .flat_map(|a| pos.iter().map(move |b| *a - *b))
        .collect();
    let d = green.derivative_values(&offsets, lambda)?;
    let n = pos.len();
    Ok((0..n)
        .flat_map(|j| (0..n).map(move |k| (j, k)))
        .map(|(j, k)| coeffs[j] * coeffs[k] * d[j * n + k])
        .sum())
}

/// f(x) = Σ_j β_j f(x_j) I_{x_j - x}(λ₀) at arbitrary points, for a given
/// (unnormalized) source vector.
pub fn extend(
    config: &BrwConfig,
    lambda0: f64,
    f_sources: &[f64],
    points: &[Point],
    spec: QuadratureSpec,
) -> Result<Vec<f64>, GreenError> {
    let green = GreenFunction::new(config.kernel(), spec)?;
    let pos = config.positions();
    let betas = config.intensities();
    let mut offsets: Vec<Point> = Vec::new();
    let mut slots = Vec::with_capacity(points.len() * pos.len());
    for x in points {
        for xj in &pos {
            let o = (*xj - *x).canonical_sign();
            let idx = match offsets.iter().rposition(|p| *p == o) {
                Some(i) => i,
                None => {
                    offsets.push(o);
                    offsets.len() - 1
                }
            };
            slots.push(idx);
        }
    }
    let vals = green.values(&offsets, lambda0)?;
    let n = pos.len();
    Ok((0..points.len())
        .map(|p| (0..n).map(|j| betas[j] * f_sources[j] * vals[slots[p * n + j]]).sum())
        .collect())
}

/// Perron vector at λ₀, extended to the window of radius `radius` and
/// normalized to unit ℓ² norm over Z^d.
pub fn eigenfunction(
    config: &BrwConfig,
    lambda0: f64,
    radius: usize,
    spec: QuadratureSpec,
) -> Result<Eigenfunction, SpectralError> {
    let pr = perron(config, lambda0, spec)?;
    let betas = config.intensities();
    let coeffs: Vec<f64> = pr.vector.iter().zip(&betas).map(|(f, b)| f * b).collect();
    let total = full_norm_sq(config, lambda0, &coeffs, spec)?;
    let scale = 1.0 / total.sqrt();
    let lattice = BoxLattice::new(config.dim(), radius);
    let points: Vec<Point> = lattice.points().collect();
    let values = extend(config, lambda0, &pr.vector, &points, spec)?;
    let inside: f64 = values.iter().map(|v| v * v).sum();
    let tail = ((total - inside) / total).max(0.0);
    if tail.sqrt() > WINDOW_TAIL_TOL {
        return Err(SpectralError::WindowTooSmall { radius, tail });
    }
    let sources: Vec<f64> = pr.vector.iter().map(|v| v * scale).collect();
    let weighted_sum = sources.iter().zip(&betas).map(|(f, b)| f * b).sum();
    Ok(Eigenfunction {
        sources,
        radius,
        window: points.into_iter().zip(values.into_iter().map(|v| v * scale)).collect(),
        tail,
        weighted_sum,
    })
}

/// ψ(y) = λ₀ f(y) / Σ_j β_j f(x_j) from values of f.
pub fn psi_from(lambda0: f64, f_y: f64, weighted_sum: f64) -> f64 {
    lambda0 * f_y / weighted_sum
}

/// Numerical settings for [`analyze`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralOptions {
    pub quadrature: QuadratureSpec,
    /// Radius of the window on which f is tabulated.
    pub window: usize,
}

impl SpectralOptions {
    pub fn new(quadrature: QuadratureSpec, window: usize) -> Self {
        Self { quadrature, window }
    }

    /// Quadrature default and a window that grows with dimension-dependent cost in mind.
    pub fn for_dim(dim: usize) -> Self {
        let window = match dim {
            1 => 60,
            2 => 24,
            _ => 10,
        };
        Self::new(QuadratureSpec::default(), window)
    }
}

/// Everything the spectral module knows about a supercritical configuration.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralResult {
    pub lambda0: f64,
    pub root: Lambda0Root,
    /// γ evaluations made while bracketing and refining.
    pub gamma_at: Vec<(f64, f64)>,
    /// All positive eigenvalues of ℋ found, decreasing.
    pub positive_eigs: Vec<f64>,
    /// λ₀ minus the next positive eigenvalue (or λ₀ itself when there is none).
    pub gap: f64,
    /// Second largest |eigenvalue| of G(λ₀).
    pub second_modulus: f64,
    pub f: Eigenfunction,
    /// ψ(x_i) at the sources.
    pub psi_sources: Vec<f64>,
    #[serde(skip)]
    quadrature: QuadratureSpec,
}

impl SpectralResult {
    pub fn quadrature(&self) -> QuadratureSpec {
        self.quadrature
    }

    /// f(x) at arbitrary points (same normalization as `self.f`).
    pub fn f_at(&self, config: &BrwConfig, points: &[Point]) -> Result<Vec<f64>, GreenError> {
        extend(config, self.lambda0, &self.f.sources, points, self.quadrature)
    }

    pub fn psi_at(&self, config: &BrwConfig, points: &[Point]) -> Result<Vec<f64>, GreenError> {
        Ok(self
            .f_at(config, points)?
            .into_iter()
            .map(|f| psi_from(self.lambda0, f, self.f.weighted_sum))
            .collect())
    }
}

/// λ₀, the positive spectrum, f and ψ; `NotSupercritical` when λ₀ does not exist.
pub fn analyze(config: &BrwConfig, options: &SpectralOptions) -> Result<SpectralResult, SpectralError> {
    let spec = options.quadrature;
    let mut gamma_at = Vec::new();
    let root = match find_lambda0_traced(config, spec, &mut gamma_at)? {
        Lambda0::Supercritical(r) => r,
        Lambda0::Absent { sup_gamma, .. } => return Err(SpectralError::NotSupercritical { sup_gamma }),
    };
    let lambda0 = root.lambda0;
    let positive_eigs = all_positive_eigs(config, spec)?;
    let gap = lambda0 - positive_eigs.get(1).copied().unwrap_or(0.0);
    let ev = eigenvalues_of_g(config, lambda0, spec)?;
    let second_modulus = ev.iter().skip(1).fold(0.0f64, |m, v| m.max(v.abs()));
    let f = eigenfunction(config, lambda0, options.window, spec)?;
    let psi_sources = f
        .sources
        .iter()
        .map(|&fx| psi_from(lambda0, fx, f.weighted_sum))
        .collect();
    gamma_at.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(SpectralResult {
        lambda0,
        root,
        gamma_at,
        positive_eigs,
        gap,
        second_modulus,
        f,
        psi_sources,
        quadrature: spec,
    })
}
