//! Limit constants C_n of the particle-number moments and the diagnostics built on them.
//!
//! With f the ℓ²-normalized eigenfunction of ℋ at λ₀,
//! C₁(x, y) = f(y) f(x), C₁(x) = f(x) Σ_j β_j f(x_j) / λ₀, and for n >= 2
//! C_n(x, ·) = Σ_j g_n^{(j)}(C_1(x_j, ·), …, C_{n-1}(x_j, ·)) D_n^{(j)}(x) with
//! D_n^{(j)} = (nλ₀ - ℋ)^{-1} δ_{x_j}.

pub mod carleman;
pub mod combinatorics;
pub mod duhamel;
pub mod g;

use std::sync::OnceLock;

use serde::Serialize;
use thiserror::Error;

use crate::green::{GreenError, TruncatedOperator};
use crate::kernel::BrwConfig;
use crate::lattice::Point;
use crate::spectral::{SpectralError, SpectralResult};

pub use carleman::{carleman_diag, CarlemanReport};
pub use combinatorics::{check_bounds, comp_sum, comp_sum_bruteforce, BoundsReport, CompositionTable, Thresholds};
pub use duhamel::{duhamel_check, DuhamelReport};
pub use g::g_eval;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentError {
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("n = {0} exceeds the cost guard")]
    TooLarge(usize),
    #[error("configuration is not supercritical")]
    NotSupercritical,
    #[error("{0} is not strictly positive")]
    NonPositive(String),
    #[error(transparent)]
    Green(#[from] GreenError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// D_n^{(j)}(x): the solution of (nλ₀ I - ℋ_R) u = δ_{x_j} on the box of radius R, at x.
pub fn resolvent_d(
    config: &BrwConfig,
    lambda0: f64,
    n: usize,
    j: usize,
    x: Point,
    radius: usize,
) -> Result<f64, MomentError> {
    let op = TruncatedOperator::evolution(config, radius)?;
    let column = resolvent_column(&op, config, lambda0, n, j)?;
    Ok(column[op.index(&x)?])
}

/// The whole vector (nλ₀ I - ℋ_R)^{-1} δ_{x_j}.
fn resolvent_column(
    op: &TruncatedOperator,
    config: &BrwConfig,
    lambda0: f64,
    n: usize,
    j: usize,
) -> Result<Vec<f64>, MomentError> {
    if n < 2 {
        return Err(MomentError::OutOfRange(format!("D_n needs n >= 2, got {n}")));
    }
    let source = config
        .sources()
        .get(j)
        .ok_or_else(|| MomentError::OutOfRange(format!("source index {j}")))?;
    let rhs = op.unit_vector(&source.position())?;
    Ok(op.solve_shifted(n as f64 * lambda0, &rhs)?)
}

/// Settings for [`moment_constants`].
#[derive(Clone, Debug, PartialEq)]
pub struct MomentOptions {
    pub n_max: usize,
    /// Truncation radius R of the box carrying ℋ_R.
    pub radius: usize,
    pub x_points: Vec<Point>,
    pub y_points: Vec<Point>,
}

/// Constants of the bound C_n(x) <= γ^{n-1} n! n^n, assembled as
/// γ = 2N · C · D · E · (λ₀ β₂ / 2) · C₁²(x₁).
#[derive(Clone, Debug, Serialize)]
pub struct GrowthEnvelope {
    /// Index of the source x₁ maximizing C₁(x_j).
    pub x1: usize,
    /// Composition-sum constant: max(6^6, sup f(n,r) r^{r-1}/n^n over n <= ñ + 1).
    pub c: f64,
    /// sup_{j, r >= 2} β_j^{(r)} / (r! r^{r-1}).
    pub d: f64,
    /// max_j β_j^{(2)}.
    pub beta2: f64,
    /// Smallest E with C_n(x₁) <= γ^{n-1} n! n^n for 2 <= n <= max(n*, 2).
    pub e: f64,
    pub gamma: f64,
    /// Whether C₁(x₁) <= 1, i.e. the bound also holds at n = 1.
    pub holds_at_one: bool,
    /// (n, point) pairs with n >= 2 where C_n exceeds the bound.
    pub violations: Vec<(usize, Point)>,
}

/// C_n for n = 1..=n_max on the requested windows, with D_n^{(j)} and checks.
#[derive(Clone, Debug, Serialize)]
pub struct MomentTable {
    pub n_max: usize,
    pub lambda0: f64,
    pub radius: usize,
    pub sources: Vec<Point>,
    pub x_points: Vec<Point>,
    pub y_points: Vec<Point>,
    pub f_x: Vec<f64>,
    pub psi_y: Vec<f64>,
    /// c_x[n-1][i] = C_n(x_i).
    pub c_x: Vec<Vec<f64>>,
    /// c_xy[n-1][i][k] = C_n(x_i, y_k).
    pub c_xy: Vec<Vec<Vec<f64>>>,
    /// c_sources[n-1][j] = C_n(x_j) at the sources, for n up to `n_sources_max`.
    pub c_sources: Vec<Vec<f64>>,
    pub n_sources_max: usize,
    /// d[n-1][j][i] = D_n^{(j)}(x_i) (empty for n = 1).
    pub d: Vec<Vec<Vec<f64>>>,
    /// ‖ℋ_R‖ and n* = ⌈2‖ℋ_R‖/λ₀⌉.
    pub h_norm: f64,
    pub n_star: usize,
    /// min over n* <= n <= `d_checked_to`, j and points (window and sources) of 2/(nλ₀) - D_n^{(j)}(x).
    pub d_bound_margin: f64,
    pub d_checked_to: usize,
    /// max relative deviation of C_n(x, y) from ψ(y)^n C_n(x).
    pub factorization_error: f64,
    pub envelope: GrowthEnvelope,
}

impl MomentTable {
    /// min_j (2/(nλ₀) - D_n^{(j)}(x_i)), or None for n = 1.
    pub fn d_margin(&self, n: usize, i: usize) -> Option<f64> {
        if n < 2 {
            return None;
        }
        let bound = 2.0 / (n as f64 * self.lambda0);
        self.d[n - 1]
            .iter()
            .map(|col| bound - col[i])
            .reduce(f64::min)
    }
}

fn composition_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let n = combinatorics::thresholds().first_beyond;
        let table = CompositionTable::new(n);
        let rep = combinatorics::check_bounds_on(&table, n);
        rep.min_constant.max(46_656.0)
    })
}

/// Runs the recursion Σ_j g_n^{(j)}(values at sources) · D_n^{(j)}(point) for every
/// order, given the first-order values at the sources and at the points.
fn recurse(
    config: &BrwConfig,
    first_sources: &[f64],
    first_points: &[f64],
    n_max: usize,
    d_sources: &[Vec<Vec<f64>>],
    d_points: &[Vec<Vec<f64>>],
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>), MomentError> {
    let n_src = config.n_sources();
    let mut at_sources = vec![first_sources.to_vec()];
    let mut at_points = vec![first_points.to_vec()];
    for n in 2..=n_max {
        let gs: Vec<f64> = (0..n_src)
            .map(|j| {
                let history: Vec<f64> = at_sources.iter().map(|row| row[j]).collect();
                g_eval(&config.sources()[j], n, &history)
            })
            .collect::<Result<_, _>>()?;
        let combine = |d: &Vec<Vec<f64>>, len: usize| -> Vec<f64> {
            (0..len)
                .map(|i| (0..n_src).map(|j| gs[j] * d[j][i]).sum())
                .collect()
        };
        at_sources.push(combine(&d_sources[n - 1], n_src));
        if n - 1 < d_points.len() {
            at_points.push(combine(&d_points[n - 1], first_points.len()));
        }
    }
    Ok((at_sources, at_points))
}

/// Fills the moment table from the spectral data.
pub fn moment_constants(
    config: &BrwConfig,
    spectral: &SpectralResult,
    options: &MomentOptions,
) -> Result<MomentTable, MomentError> {
    let n_max = options.n_max;
    if n_max < 1 {
        return Err(MomentError::OutOfRange("n_max must be >= 1".into()));
    }
    let lambda0 = spectral.lambda0;
    if !(lambda0 > 0.0) {
        return Err(MomentError::NotSupercritical);
    }
    let sources = config.positions();
    let n_src = sources.len();
    let (xs, ys) = (&options.x_points, &options.y_points);

    let f_src = spectral.f.sources.clone();
    let f_x = spectral.f_at(config, xs)?;
    let f_y = spectral.f_at(config, ys)?;
    let weighted = spectral.f.weighted_sum;
    let psi_y: Vec<f64> = f_y.iter().map(|fy| lambda0 * fy / weighted).collect();

    let op = TruncatedOperator::evolution(config, options.radius)?;
    let h_norm = op.operator_norm();
    let n_star = ((2.0 * h_norm / lambda0).ceil() as usize).max(2);
    let n_src_max = n_max.max(n_star);
    let d_checked_to = n_src_max.max(n_star + 10);
    let x_idx: Vec<usize> = xs.iter().map(|x| op.index(x)).collect::<Result<_, _>>()?;

    // D_n^{(j)} at the sources and on the window.
    let mut d_src = vec![Vec::new()];
    let mut d_x = vec![Vec::new()];
    let mut d_bound_margin = f64::INFINITY;
    for n in 2..=d_checked_to {
        let mut per_src = Vec::with_capacity(n_src);
        let mut per_x = Vec::with_capacity(n_src);
        for j in 0..n_src {
            let col = resolvent_column(&op, config, lambda0, n, j)?;
            let at_src: Vec<f64> = sources.iter().map(|s| col[op.index(s).unwrap()]).collect();
            let at_x: Vec<f64> = x_idx.iter().map(|&i| col[i]).collect();
            if let Some(v) = at_src.iter().chain(&at_x).find(|v| !(**v > 0.0)) {
                return Err(MomentError::NonPositive(format!("D_{n}^({j}) = {v}")));
            }
            if n >= n_star {
                let bound = 2.0 / (n as f64 * lambda0);
                let worst = at_src.iter().chain(&at_x).fold(0.0f64, |m, v| m.max(*v));
                d_bound_margin = d_bound_margin.min(bound - worst);
            }
            per_src.push(at_src);
            per_x.push(at_x);
        }
        d_src.push(per_src);
        if n <= n_max {
            d_x.push(per_x);
        }
    }

    // First order: C₁(x) = f(x) Σ β_j f(x_j) / λ₀ and C₁(x, y) = f(x) f(y).
    let c1 = |fx: f64| fx * weighted / lambda0;
    let first_src: Vec<f64> = f_src.iter().map(|&f| c1(f)).collect();
    let first_x: Vec<f64> = f_x.iter().map(|&f| c1(f)).collect();
    let (c_sources, c_x) = recurse(config, &first_src, &first_x, n_src_max, &d_src, &d_x)?;

    // C_n(·, y) for each y separately.
    let mut c_xy = vec![vec![vec![0.0; ys.len()]; xs.len()]; n_max];
    for (k, &fy) in f_y.iter().enumerate() {
        let first_src: Vec<f64> = f_src.iter().map(|&f| f * fy).collect();
        let first_x: Vec<f64> = f_x.iter().map(|&f| f * fy).collect();
        let (_, rows) = recurse(config, &first_src, &first_x, n_max, &d_src, &d_x)?;
        for (n, row) in rows.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                c_xy[n][i][k] = *v;
            }
        }
    }

    let mut factorization_error: f64 = 0.0;
    for n in 1..=n_max {
        for i in 0..xs.len() {
            let cx = c_x[n - 1][i];
            if !(cx > 0.0) {
                return Err(MomentError::NonPositive(format!("C_{n}({})", xs[i])));
            }
            for k in 0..ys.len() {
                let predicted = psi_y[k].powi(n as i32) * cx;
                factorization_error = factorization_error.max(((c_xy[n - 1][i][k] - predicted) / predicted).abs());
            }
        }
    }

    let envelope = growth_envelope(config, lambda0, n_star, &c_sources, xs, &c_x, &sources);

    Ok(MomentTable {
        n_max,
        lambda0,
        radius: options.radius,
        sources,
        x_points: xs.clone(),
        y_points: ys.clone(),
        f_x,
        psi_y,
        c_x,
        c_xy,
        c_sources,
        n_sources_max: n_src_max,
        d: d_x,
        h_norm,
        n_star,
        d_bound_margin,
        d_checked_to,
        factorization_error,
        envelope,
    })
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

fn growth_envelope(
    config: &BrwConfig,
    lambda0: f64,
    n_star: usize,
    c_sources: &[Vec<f64>],
    xs: &[Point],
    c_x: &[Vec<f64>],
    sources: &[Point],
) -> GrowthEnvelope {
    let n_src = config.n_sources();
    let x1 = (0..n_src)
        .max_by(|&a, &b| c_sources[0][a].total_cmp(&c_sources[0][b]))
        .unwrap();
    let c = composition_constant();
    let mut d: f64 = 0.0;
    let mut beta2: f64 = 0.0;
    for s in config.sources() {
        beta2 = beta2.max(s.factorial_moment(2));
        for r in 2..s.coefficients().len() {
            let scale = (ln_factorial(r) + (r as f64 - 1.0) * (r as f64).ln()).exp();
            d = d.max(s.factorial_moment(r) / scale);
        }
    }
    let c1 = c_sources[0][x1];
    let k0 = 2.0 * n_src as f64 * c * d * (lambda0 * beta2 / 2.0) * c1 * c1;
    // ln of n! n^n.
    let ln_scale = |n: usize| ln_factorial(n) + n as f64 * (n as f64).ln();
    let mut ln_gamma_min = f64::NEG_INFINITY;
    for n in 2..=n_star.max(2).min(c_sources.len()) {
        let need = (c_sources[n - 1][x1].ln() - ln_scale(n)) / (n - 1) as f64;
        ln_gamma_min = ln_gamma_min.max(need);
    }
    let gamma = ln_gamma_min.exp();
    let e = gamma / k0;
    let mut violations = Vec::new();
    let ln_g = gamma.ln();
    let mut check = |n: usize, p: Point, v: f64| {
        if v.ln() > (n - 1) as f64 * ln_g + ln_scale(n) + 1e-12 {
            violations.push((n, p));
        }
    };
    for n in 2..=c_sources.len() {
        for (j, p) in sources.iter().enumerate() {
            check(n, *p, c_sources[n - 1][j]);
        }
    }
    for n in 2..=c_x.len() {
        for (i, p) in xs.iter().enumerate() {
            check(n, *p, c_x[n - 1][i]);
        }
    }
    GrowthEnvelope {
        x1,
        c,
        d,
        beta2,
        e,
        gamma,
        holds_at_one: c1 <= 1.0,
        violations,
    }
}
