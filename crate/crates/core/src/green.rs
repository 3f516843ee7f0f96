//! Lattice Green's functions and truncated-box operators.
//!
//! `I_x(λ) = G_λ(x, 0) = (2π)^{-d} ∫ cos(θ, x) / (λ - φ(θ)) dθ` is evaluated by
//! the tensor-product trapezoid rule on the torus, doubling the node count
//! until two successive levels agree. The truncated operators restrict 𝒜 or
//! ℋ = 𝒜 + Σ β_i Δ_{x_i} to a box with absorbing boundary and serve as
//! independent oracles (resolvent solves, matrix exponentials).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::kernel::{BrwConfig, TransitionKernel};
use crate::lattice::{BoxLattice, Point};

/// Cauchy tolerance between trapezoid levels K and 2K (relative for values above 1).
pub const QUADRATURE_TOL: f64 = 1e-10;
/// Upper limit on the total node count K^d.
pub const MAX_QUADRATURE_NODES: usize = 1 << 24;
/// Largest admissible boundary leakage in [`HeatKernel`] evaluations.
pub const LEAKAGE_TOL: f64 = 1e-9;
/// Largest box handled by dense (eigendecomposition) routines.
pub const MAX_DENSE_SITES: usize = 6000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GreenError {
    #[error("λ must be positive, got {0}")]
    LambdaNonpositive(f64),
    #[error("quadrature supports 1 <= d <= 3, got d = {0}")]
    UnsupportedDimension(usize),
    #[error("nodes per axis must be even and >= 8, got {0}")]
    InvalidNodes(usize),
    #[error("trapezoid rule did not converge at λ = {lambda} (K = {nodes}, last difference {difference:e})")]
    QuadratureNotConverged {
        lambda: f64,
        nodes: usize,
        difference: f64,
    },
    #[error("point {0} lies outside the truncation box")]
    PointOutsideBox(Point),
    #[error("boundary leakage {leaked:e} at t = {t} exceeds {LEAKAGE_TOL:e}; enlarge the box or shorten the horizon")]
    HorizonTooLong { t: f64, leaked: f64 },
    #[error("linear system is singular or solver broke down")]
    SingularSystem,
    #[error("box with {0} sites is too large for a dense solve")]
    BoxTooLarge(usize),
}

/// Trapezoid discretisation of the torus integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct QuadratureSpec {
    nodes_per_axis: usize,
}

impl QuadratureSpec {
    /// Starting node count per axis; must be even and at least 8.
    pub fn new(nodes_per_axis: usize) -> Result<Self, GreenError> {
        if nodes_per_axis < 8 || nodes_per_axis % 2 != 0 {
            return Err(GreenError::InvalidNodes(nodes_per_axis));
        }
        Ok(Self { nodes_per_axis })
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { nodes_per_axis: 32 }
    }
}

/// Batched evaluator of I_x(λ) (and of ∫cos/(λ-φ)², i.e. -dI_x/dλ).
#[derive(Clone, Debug)]
pub struct GreenFunction<'a> {
    kernel: &'a TransitionKernel,
    spec: QuadratureSpec,
}

impl<'a> GreenFunction<'a> {
    pub fn new(kernel: &'a TransitionKernel, spec: QuadratureSpec) -> Result<Self, GreenError> {
        if !(1..=3).contains(&kernel.dim()) {
            return Err(GreenError::UnsupportedDimension(kernel.dim()));
        }
        Ok(Self { kernel, spec })
    }

    pub fn kernel(&self) -> &TransitionKernel {
        self.kernel
    }

    pub fn spec(&self) -> QuadratureSpec {
        self.spec
    }

    /// I_x(λ) for every x in `offsets`, sharing one adaptive quadrature.
    pub fn values(&self, offsets: &[Point], lambda: f64) -> Result<Vec<f64>, GreenError> {
        self.integrate(offsets, lambda, 1)
    }

    pub fn value(&self, x: Point, lambda: f64) -> Result<f64, GreenError> {
        Ok(self.values(&[x], lambda)?[0])
    }

    /// -d I_x/dλ = (2π)^{-d} ∫ cos(θ, x) / (λ - φ(θ))² dθ = Σ_y I_{x-y} I_y.
    pub fn derivative_values(&self, offsets: &[Point], lambda: f64) -> Result<Vec<f64>, GreenError> {
        self.integrate(offsets, lambda, 2)
    }

    fn integrate(&self, offsets: &[Point], lambda: f64, power: i32) -> Result<Vec<f64>, GreenError> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(GreenError::LambdaNonpositive(lambda));
        }
        let d = self.kernel.dim();
        let max_k = max_nodes_per_axis(d);
        let mut k = self.spec.nodes_per_axis;
        let mut sums = self.sweep(offsets, lambda, power, k, false);
        let mut last_diff = f64::INFINITY;
        while 2 * k <= max_k {
            let fresh = self.sweep(offsets, lambda, power, 2 * k, true);
            let coarse_norm = (k as f64).powi(d as i32);
            let fine_norm = coarse_norm * (1u64 << d) as f64;
            let mut diff: f64 = 0.0;
            let mut fine_vals = Vec::with_capacity(offsets.len());
            for (s, f) in sums.iter_mut().zip(&fresh) {
                let coarse = *s / coarse_norm;
                *s += f;
                let fine = *s / fine_norm;
                diff = diff.max((fine - coarse).abs() / fine.abs().max(1.0));
                fine_vals.push(fine);
            }
            k *= 2;
            last_diff = diff;
            if diff < QUADRATURE_TOL {
                return Ok(fine_vals);
            }
        }
        Err(GreenError::QuadratureNotConverged {
            lambda,
            nodes: k,
            difference: last_diff,
        })
    }

    /// Raw trapezoid sums Σ_nodes cos(θ, x)/(λ-φ)^p. With `odd_only`, nodes
    /// whose indices are all even (the previous level) are skipped.
    fn sweep(&self, offsets: &[Point], lambda: f64, power: i32, k: usize, odd_only: bool) -> Vec<f64> {
        match self.kernel.dim() {
            1 => self.sweep_1d(offsets, lambda, power, k, odd_only),
            _ => self.sweep_nd(offsets, lambda, power, k, odd_only),
        }
    }

    fn sweep_1d(&self, offsets: &[Point], lambda: f64, power: i32, k: usize, odd_only: bool) -> Vec<f64> {
        let jumps: Vec<(f64, f64)> = self
            .kernel
            .jumps()
            .iter()
            .map(|(z, a)| (z.coords()[0] as f64, *a))
            .collect();
        let xs: Vec<f64> = offsets.iter().map(|x| x.coords()[0] as f64).collect();
        let a0 = self.kernel.diagonal();
        let mut acc = vec![Neumaier::default(); xs.len()];
        let step = if odd_only { 2 } else { 1 };
        let start = usize::from(odd_only);
        let h = 2.0 * PI / k as f64;
        for j in (start..k).step_by(step) {
            let theta = -PI + h * j as f64;
            let phi = a0 + jumps.iter().map(|(z, a)| a * (z * theta).cos()).sum::<f64>();
            let w = (lambda - phi).powi(-power);
            for (s, x) in acc.iter_mut().zip(&xs) {
                s.add(w * (x * theta).cos());
            }
        }
        acc.into_iter().map(|s| s.sum()).collect()
    }

    fn sweep_nd(&self, offsets: &[Point], lambda: f64, power: i32, k: usize, odd_only: bool) -> Vec<f64> {
        let d = self.kernel.dim();
        let h = 2.0 * PI / k as f64;
        // Per-axis tables of e^{i m θ_j} for every integer m that occurs.
        let vectors: Vec<Point> = self
            .kernel
            .jumps()
            .iter()
            .map(|(z, _)| *z)
            .chain(offsets.iter().copied())
            .collect();
        let mut tables: Vec<Vec<(f64, f64)>> = Vec::with_capacity(d);
        let mut slot: Vec<Vec<usize>> = vec![vec![0; d]; vectors.len()];
        for axis in 0..d {
            let mut ms: Vec<i64> = vectors.iter().map(|v| v.coords()[axis]).collect();
            ms.sort_unstable();
            ms.dedup();
            for (vi, v) in vectors.iter().enumerate() {
                slot[vi][axis] = ms.binary_search(&v.coords()[axis]).unwrap();
            }
            let mut table = Vec::with_capacity(ms.len() * k);
            for &m in &ms {
                for j in 0..k {
                    let arg = m as f64 * (-PI + h * j as f64);
                    table.push((arg.cos(), arg.sin()));
                }
            }
            tables.push(table);
        }
        let n_jumps = self.kernel.jumps().len();
        let rates: Vec<f64> = self.kernel.jumps().iter().map(|(_, a)| *a).collect();
        let a0 = self.kernel.diagonal();
        let mut acc = vec![Neumaier::default(); offsets.len()];
        let mut phase = vec![0.0; vectors.len()];
        let total = k.pow(d as u32);
        let mut idx = [0usize; 3];
        for flat in 0..total {
            let mut rem = flat;
            for axis in (0..d).rev() {
                idx[axis] = rem % k;
                rem /= k;
            }
            if odd_only && idx[..d].iter().all(|i| i % 2 == 0) {
                continue;
            }
            for (vi, ph) in phase.iter_mut().enumerate() {
                let (mut re, mut im) = (1.0, 0.0);
                for axis in 0..d {
                    let (c, s) = tables[axis][slot[vi][axis] * k + idx[axis]];
                    let nr = re * c - im * s;
                    im = re * s + im * c;
                    re = nr;
                }
                *ph = re;
            }
            let phi = a0 + (0..n_jumps).map(|i| rates[i] * phase[i]).sum::<f64>();
            let w = (lambda - phi).powi(-power);
            for (s, c) in acc.iter_mut().zip(&phase[n_jumps..]) {
                s.add(w * c);
            }
        }
        acc.into_iter().map(|s| s.sum()).collect()
    }
}

pub fn max_nodes_per_axis(d: usize) -> usize {
    match d {
        1 => MAX_QUADRATURE_NODES,
        2 => 1 << 12,
        _ => 1 << 8,
    }
}

/// Rough smallest λ the node cap can resolve: the integrand has poles about
/// √(λ/c) off the real axis, c = Σ a(z)|z|² / 2d, and the periodic trapezoid
/// error decays like e^{-K·distance}.
pub fn resolvable_lambda(kernel: &TransitionKernel) -> f64 {
    let d = kernel.dim();
    let c: f64 = kernel
        .jumps()
        .iter()
        .map(|(z, a)| a * z.coords().iter().map(|v| (v * v) as f64).sum::<f64>())
        .sum::<f64>()
        / (2 * d) as f64;
    let k = max_nodes_per_axis(d) as f64;
    c * (QUADRATURE_TOL.recip().ln() / k).powi(2)
}

/// Compensated summation.
#[derive(Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn sum(self) -> f64 {
        self.sum + self.comp
    }
}

/// I_x(λ) for a single offset.
pub fn green_value(kernel: &TransitionKernel, x: Point, lambda: f64, spec: QuadratureSpec) -> Result<f64, GreenError> {
    GreenFunction::new(kernel, spec)?.value(x, lambda)
}

/// Distinct offsets x_j - x_i (up to sign) needed by G(λ).
pub fn source_offsets(config: &BrwConfig) -> Vec<Point> {
    let pos = config.positions();
    let mut out: Vec<Point> = Vec::new();
    for a in &pos {
        for b in &pos {
            let o = (*b - *a).canonical_sign();
            if !out.contains(&o) {
                out.push(o);
            }
        }
    }
    out
}

/// Symmetric matrix Î(λ)_{ij} = I_{x_j - x_i}(λ).
pub fn source_green_block(config: &BrwConfig, lambda: f64, spec: QuadratureSpec) -> Result<DMatrix<f64>, GreenError> {
    let green = GreenFunction::new(config.kernel(), spec)?;
    let offsets = source_offsets(config);
    let vals = green.values(&offsets, lambda)?;
    let pos = config.positions();
    let n = pos.len();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let o = (pos[j] - pos[i]).canonical_sign();
        vals[offsets.iter().position(|p| *p == o).unwrap()]
    }))
}

/// G(λ)_{ij} = β_j I_{x_j - x_i}(λ).
pub fn green_matrix(config: &BrwConfig, lambda: f64, spec: QuadratureSpec) -> Result<DMatrix<f64>, GreenError> {
    let mut g = source_green_block(config, lambda, spec)?;
    for (j, beta) in config.intensities().into_iter().enumerate() {
        g.column_mut(j).scale_mut(beta);
    }
    Ok(g)
}

/// 𝒜 or ℋ restricted to a box, with zero (absorbing) boundary.
#[derive(Clone, Debug)]
pub struct TruncatedOperator {
    lattice: BoxLattice,
    diag: Vec<f64>,
    /// Off-diagonal entries per row as (column, rate).
    rows: Vec<Vec<(usize, f64)>>,
    /// (site index, β) for each source.
    sources: Vec<(usize, f64)>,
}

impl TruncatedOperator {
    /// 𝒜_R: the walk generator on the box of radius `radius`.
    pub fn walk(kernel: &TransitionKernel, radius: usize) -> Self {
        let lattice = BoxLattice::new(kernel.dim(), radius);
        let mut rows = Vec::with_capacity(lattice.len());
        for i in 0..lattice.len() {
            let x = lattice.point(i);
            let row: Vec<(usize, f64)> = kernel
                .jumps()
                .iter()
                .filter_map(|(z, a)| lattice.index(&(x + *z)).map(|j| (j, *a)))
                .collect();
            rows.push(row);
        }
        Self {
            lattice,
            diag: vec![kernel.diagonal(); lattice.len()],
            rows,
            sources: Vec::new(),
        }
    }

    /// ℋ_R = 𝒜_R + Σ β_i Δ_{x_i}; every source must lie in the box.
    pub fn evolution(config: &BrwConfig, radius: usize) -> Result<Self, GreenError> {
        let mut op = Self::walk(config.kernel(), radius);
        for s in config.sources() {
            let i = op
                .lattice
                .index(&s.position())
                .ok_or(GreenError::PointOutsideBox(s.position()))?;
            op.diag[i] += s.intensity();
            op.sources.push((i, s.intensity()));
        }
        Ok(op)
    }

    pub fn lattice(&self) -> &BoxLattice {
        &self.lattice
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, x: &Point) -> Result<usize, GreenError> {
        self.lattice.index(x).ok_or(GreenError::PointOutsideBox(*x))
    }

    pub fn sources(&self) -> &[(usize, f64)] {
        &self.sources
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// y = H x.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, (row, d)) in self.rows.iter().zip(&self.diag).enumerate() {
            let mut acc = d * x[i];
            for &(j, a) in row {
                acc += a * x[j];
            }
            y[i] = acc;
        }
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>, GreenError> {
        let n = self.len();
        if n > MAX_DENSE_SITES {
            return Err(GreenError::BoxTooLarge(n));
        }
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            m[(i, i)] = self.diag[i];
            for &(j, a) in row {
                m[(i, j)] = a;
            }
        }
        Ok(m)
    }

    /// Eigenvalues of the dense truncated matrix in decreasing order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>, GreenError> {
        let mut ev: Vec<f64> = self.to_dense()?.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        Ok(ev)
    }

    /// Solves (shift·I - H) u = rhs by conjugate gradients. Requires
    /// shift above the top of the spectrum so the system is positive definite.
    pub fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Result<Vec<f64>, GreenError> {
        let n = self.len();
        let mut u = vec![0.0; n];
        let mut r = rhs.to_vec();
        let mut p = r.clone();
        let mut hp = vec![0.0; n];
        let rhs_norm = dot(rhs, rhs).sqrt();
        if rhs_norm == 0.0 {
            return Ok(u);
        }
        let mut rr = dot(&r, &r);
        for _ in 0..(20 * n + 100) {
            self.apply(&p, &mut hp);
            for (q, pv) in hp.iter_mut().zip(&p) {
                *q = shift * pv - *q;
            }
            let pq = dot(&p, &hp);
            if !(pq > 0.0) {
                return Err(GreenError::SingularSystem);
            }
            let alpha = rr / pq;
            for i in 0..n {
                u[i] += alpha * p[i];
                r[i] -= alpha * hp[i];
            }
            let rr_new = dot(&r, &r);
            if rr_new.sqrt() <= 1e-15 * rhs_norm {
                return Ok(u);
            }
            let beta = rr_new / rr;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
            rr = rr_new;
        }
        Err(GreenError::SingularSystem)
    }

    /// Largest |eigenvalue| of the truncated matrix: dense when the box is
    /// small, otherwise Lanczos-free power iteration on H.
    pub fn operator_norm(&self) -> f64 {
        if let Ok(ev) = self.eigenvalues() {
            return ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        }
        let n = self.len();
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
        let mut w = vec![0.0; n];
        let mut est = 0.0;
        for _ in 0..5000 {
            let norm = dot(&v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            self.apply(&v, &mut w);
            let next = dot(&w, &w).sqrt();
            std::mem::swap(&mut v, &mut w);
            if (next - est).abs() <= 1e-12 * next {
                return next;
            }
            est = next;
        }
        est
    }

    pub fn unit_vector(&self, x: &Point) -> Result<Vec<f64>, GreenError> {
        let mut e = vec![0.0; self.len()];
        e[self.index(x)?] = 1.0;
        Ok(e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// u(x) where (λI - 𝒜_R) u = δ_0 on the box of radius `radius`.
pub fn resolvent_green(kernel: &TransitionKernel, x: Point, lambda: f64, radius: usize) -> Result<f64, GreenError> {
    if !(lambda > 0.0) {
        return Err(GreenError::LambdaNonpositive(lambda));
    }
    let op = TruncatedOperator::walk(kernel, radius);
    let ix = op.index(&x)?;
    let rhs = op.unit_vector(&Point::origin(kernel.dim()))?;
    let u = op.solve_shifted(lambda, &rhs)?;
    Ok(u[ix])
}

/// Spectral form of e^{tH_R}: p(t,x,y) for a walk, m₁(t,x,y) with sources.
#[derive(Clone, Debug)]
pub struct HeatKernel {
    op: TruncatedOperator,
    values: DVector<f64>,
    vectors: DMatrix<f64>,
    column_sums: DVector<f64>,
}

impl HeatKernel {
    pub fn new(op: TruncatedOperator) -> Result<Self, GreenError> {
        let eig = SymmetricEigen::new(op.to_dense()?);
        let column_sums = DVector::from_iterator(eig.eigenvectors.ncols(), eig.eigenvectors.column_iter().map(|c| c.sum()));
        Ok(Self {
            op,
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
            column_sums,
        })
    }

    pub fn operator(&self) -> &TruncatedOperator {
        &self.op
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    /// Pairs (λ_k, V[i,k] V[j,k]) so that [e^{tH_R}]_{ij} = Σ_k V[i,k] V[j,k] e^{tλ_k}.
    pub fn modes(&self, i: usize, j: usize) -> Vec<(f64, f64)> {
        let (vi, vj) = (self.vectors.row(i), self.vectors.row(j));
        (0..self.values.len())
            .map(|k| (self.values[k], vi[k] * vj[k]))
            .collect()
    }

    /// Largest eigenvalue and its unit eigenvector, signed to have a positive sum.
    pub fn top_mode(&self) -> (f64, Vec<f64>) {
        let k = self.values.imax();
        let sign = if self.column_sums[k] < 0.0 { -1.0 } else { 1.0 };
        (self.values[k], self.vectors.column(k).iter().map(|v| sign * v).collect())
    }

    /// Σ_k V[i,k] V[j,k] w_k.
    fn bilinear(&self, i: usize, j: usize, weight: impl Fn(f64) -> f64) -> f64 {
        let (vi, vj) = (self.vectors.row(i), self.vectors.row(j));
        (0..self.values.len())
            .map(|k| vi[k] * vj[k] * weight(self.values[k]))
            .sum()
    }

    /// [e^{tH_R}]_{xy} without the leakage check.
    pub fn entry_unchecked(&self, t: f64, x: usize, y: usize) -> f64 {
        self.bilinear(x, y, |l| (l * t).exp())
    }

    /// Σ_y [e^{tH_R}]_{xy}.
    pub fn total_unchecked(&self, t: f64, x: usize) -> f64 {
        let vx = self.vectors.row(x);
        (0..self.values.len())
            .map(|k| vx[k] * self.column_sums[k] * (self.values[k] * t).exp())
            .sum()
    }

    /// ∫_0^t [e^{sH_R}]_{xy} ds in closed form.
    pub fn integral_unchecked(&self, t: f64, x: usize, y: usize) -> f64 {
        self.bilinear(x, y, |l| {
            if (l * t).abs() < 1e-12 {
                t
            } else {
                (l * t).exp_m1() / l
            }
        })
    }

    /// Relative mass that has left the box by time t when starting from x:
    /// (1 + Σ_j β_j ∫_0^t m(s,x,x_j) ds - Σ_y m(t,x,y)) / (1 + Σ_j β_j ∫…).
    pub fn leakage(&self, t: f64, x: usize) -> f64 {
        let produced: f64 = 1.0
            + self
                .op
                .sources
                .iter()
                .map(|&(j, beta)| beta * self.integral_unchecked(t, x, j))
                .sum::<f64>();
        ((produced - self.total_unchecked(t, x)) / produced).max(0.0)
    }

    fn check(&self, t: f64, x: usize) -> Result<(), GreenError> {
        let leaked = self.leakage(t, x);
        if leaked > LEAKAGE_TOL {
            return Err(GreenError::HorizonTooLong { t, leaked });
        }
        Ok(())
    }

    /// m(t, x, y) (or p(t, x, y) for a pure walk).
    pub fn entry(&self, t: f64, x: &Point, y: &Point) -> Result<f64, GreenError> {
        assert!(t >= 0.0);
        let (ix, iy) = (self.op.index(x)?, self.op.index(y)?);
        if t == 0.0 {
            return Ok(if ix == iy { 1.0 } else { 0.0 });
        }
        self.check(t, ix)?;
        Ok(self.entry_unchecked(t, ix, iy))
    }

    /// m(t, x) = Σ_y m(t, x, y).
    pub fn total(&self, t: f64, x: &Point) -> Result<f64, GreenError> {
        let ix = self.op.index(x)?;
        if t == 0.0 {
            return Ok(1.0);
        }
        self.check(t, ix)?;
        Ok(self.total_unchecked(t, ix))
    }
}

/// p(t,x,y) (kernel only) on a box of radius `radius`.
pub fn truncated_heat_walk(kernel: &TransitionKernel, radius: usize, t: f64, x: Point, y: Point) -> Result<f64, GreenError> {
    HeatKernel::new(TruncatedOperator::walk(kernel, radius))?.entry(t, &x, &y)
}

/// m₁(t,x,y) for the branching walk on a box of radius `radius`.
pub fn truncated_heat(config: &BrwConfig, radius: usize, t: f64, x: Point, y: Point) -> Result<f64, GreenError> {
    HeatKernel::new(TruncatedOperator::evolution(config, radius)?)?.entry(t, &x, &y)
}

/// Whether G_0 = I_0(0) is finite, with a numerical estimate when it is.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct RecurrenceProbe {
    pub finite: bool,
    /// Extrapolated G_0 (only when finite).
    pub estimate: Option<f64>,
    /// Smallest λ at which the quadrature converged, and I_0 there.
    pub smallest_lambda: f64,
    pub value_at_smallest: f64,
    pub note: String,
}

/// Decides finiteness of G_0 and extrapolates its value as λ ↓ 0.
///
/// For finitely supported kernels the walk has finite variance, so G_0 is
/// infinite exactly when d <= 2. The estimate in d = 3 fits
/// I_0(λ) ≈ G_0 - c√λ + c'λ to the three smallest converged probes.
pub fn probe_g0(kernel: &TransitionKernel, spec: QuadratureSpec) -> Result<RecurrenceProbe, GreenError> {
    let green = GreenFunction::new(kernel, spec)?;
    let origin = Point::origin(kernel.dim());
    let mut probes: Vec<(f64, f64)> = Vec::new();
    let mut lambda: f64 = 1.0;
    while lambda >= 1e-8 {
        match green.value(origin, lambda) {
            Ok(v) => probes.push((lambda, v)),
            Err(GreenError::QuadratureNotConverged { .. }) => break,
            Err(e) => return Err(e),
        }
        lambda /= 4.0;
    }
    let &(smallest_lambda, value_at_smallest) = probes.last().ok_or(GreenError::QuadratureNotConverged {
        lambda: 1.0,
        nodes: 0,
        difference: f64::NAN,
    })?;
    if kernel.dim() <= 2 {
        return Ok(RecurrenceProbe {
            finite: false,
            estimate: None,
            smallest_lambda,
            value_at_smallest,
            note: format!("recurrent walk in d = {}: I_0(λ) → ∞ as λ → 0", kernel.dim()),
        });
    }
    let estimate = extrapolate_sqrt(&probes);
    Ok(RecurrenceProbe {
        finite: true,
        estimate,
        smallest_lambda,
        value_at_smallest,
        note: "transient walk; G_0 extrapolated from I_0(λ) ≈ G_0 - c√λ + c'λ".into(),
    })
}

/// Fits y ≈ a + b√λ + cλ through the three smallest-λ samples; returns a.
pub fn extrapolate_sqrt(samples: &[(f64, f64)]) -> Option<f64> {
    if samples.len() < 3 {
        return None;
    }
    let mut pts: Vec<(f64, f64)> = samples.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let pts = &pts[..3];
    let m = DMatrix::from_fn(3, 3, |i, j| match j {
        0 => 1.0,
        1 => pts[i].0.sqrt(),
        _ => pts[i].0,
    });
    let rhs = DVector::from_iterator(3, pts.iter().map(|p| p.1));
    m.lu().solve(&rhs).map(|c| c[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::BranchingSource;

    /// Closed form for the nearest-neighbour walk with rates ½, ½:
    /// I_x(λ) = ρ^|x| / √(λ² + 2λ), ρ = 1 + λ - √(λ² + 2λ).
    fn nn_green(x: i64, lambda: f64) -> f64 {
        let s = (lambda * lambda + 2.0 * lambda).sqrt();
        (1.0 + lambda - s).powi(x.abs() as i32) / s
    }

    fn nn1() -> TransitionKernel {
        TransitionKernel::nearest_neighbour(1, 1.0).unwrap()
    }

    #[test]
    fn closed_form_values() {
        let k = nn1();
        let spec = QuadratureSpec::default();
        let v = green_value(&k, Point::new(&[0]), 1.0, spec).unwrap();
        assert!((v - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        let v = green_value(&k, Point::new(&[0]), 0.2, spec).unwrap();
        assert!((v - 1.507_556_722_888_818).abs() < 1e-10);
        for x in [-3, 1, 5] {
            let v = green_value(&k, Point::new(&[x]), 0.7, spec).unwrap();
            assert!((v - nn_green(x, 0.7)).abs() < 1e-12);
        }
    }

    #[test]
    fn large_lambda_behaviour() {
        let k = TransitionKernel::nearest_neighbour(2, 1.0).unwrap();
        let spec = QuadratureSpec::default();
        let mut prev = f64::INFINITY;
        for lambda in [1e3, 1e4] {
            let v = green_value(&k, Point::origin(2), lambda, spec).unwrap();
            let err = (v * lambda - 1.0).abs();
            assert!(err < prev && err < 1e-3);
            prev = err;
        }
    }

    #[test]
    fn lambda_must_be_positive() {
        let k = nn1();
        assert_eq!(
            green_value(&k, Point::new(&[0]), 0.0, QuadratureSpec::default()),
            Err(GreenError::LambdaNonpositive(0.0))
        );
        assert!(QuadratureSpec::new(6).is_err());
        assert!(QuadratureSpec::new(9).is_err());
    }

    #[test]
    fn matrix_for_two_sources() {
        let k = nn1();
        let s1 = BranchingSource::binary(Point::new(&[0]), 1.0, 2.0).unwrap();
        let s2 = BranchingSource::binary(Point::new(&[2]), 1.0, 2.0).unwrap();
        let cfg = BrwConfig::new(k.clone(), vec![s1, s2]).unwrap();
        let g = green_matrix(&cfg, 1.0, QuadratureSpec::default()).unwrap();
        let i2 = nn_green(2, 1.0);
        assert!((g[(0, 1)] - i2).abs() < 1e-12 && (g[(1, 0)] - i2).abs() < 1e-12);
        assert!((g[(0, 0)] - g[(1, 1)]).abs() < 1e-15);
        let r = resolvent_green(&k, Point::new(&[2]), 1.0, 60).unwrap();
        assert!((r - g[(0, 1)]).abs() < 1e-10);
    }

    #[test]
    fn resolvent_matches_quadrature() {
        let k = nn1();
        let spec = QuadratureSpec::default();
        for x in [0, 1, 4] {
            let q = green_value(&k, Point::new(&[x]), 1.0, spec).unwrap();
            let r = resolvent_green(&k, Point::new(&[x]), 1.0, 400).unwrap();
            assert!((q - r).abs() < 1e-8, "x={x}: {q} vs {r}");
        }
        let u = resolvent_green(&k, Point::new(&[0]), 10.0, 50).unwrap();
        assert!(u > 0.0 && u <= 0.1 + 1.0 / 100.0);
        // Decay along an axis.
        let k2 = TransitionKernel::nearest_neighbour(2, 1.0).unwrap();
        let prof: Vec<f64> = (0..6)
            .map(|x| resolvent_green(&k2, Point::new(&[x, 0]), 0.5, 12).unwrap())
            .collect();
        assert!(prof.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn quadrature_2d_and_3d_agree_with_resolvent() {
        let spec = QuadratureSpec::default();
        for dim in [2usize, 3] {
            let k = TransitionKernel::nearest_neighbour(dim, 1.0).unwrap();
            let x = Point::unit(dim, 0) + Point::unit(dim, dim - 1);
            let q = green_value(&k, x, 1.0, spec).unwrap();
            let r = resolvent_green(&k, x, 1.0, if dim == 2 { 30 } else { 14 }).unwrap();
            assert!((q - r).abs() < 1e-8, "d={dim}: {q} vs {r}");
        }
    }

    #[test]
    fn derivative_is_sum_of_squares() {
        // -dI_0/dλ = Σ_y I_y² for the NN walk.
        let k = nn1();
        let green = GreenFunction::new(&k, QuadratureSpec::default()).unwrap();
        let d = green.derivative_values(&[Point::new(&[0])], 0.5).unwrap()[0];
        let direct: f64 = (-200..=200).map(|y| nn_green(y, 0.5).powi(2)).sum();
        assert!((d - direct).abs() < 1e-10);
    }

    #[test]
    fn heat_kernel_small_cases() {
        let k = nn1();
        let heat = HeatKernel::new(TruncatedOperator::walk(&k, 200)).unwrap();
        let o = Point::new(&[0]);
        assert_eq!(heat.entry(0.0, &o, &o).unwrap(), 1.0);
        assert_eq!(heat.entry(0.0, &o, &Point::new(&[1])).unwrap(), 0.0);
        // e^{-t} I_0(t) with the modified Bessel function, t = 1.
        let p = heat.entry(1.0, &o, &o).unwrap();
        assert!((p - 0.465_759_607_593_640_4).abs() < 1e-10, "{p}");
        let mass = heat.total(1.0, &o).unwrap();
        assert!(mass <= 1.0 + 1e-12 && (1.0 - mass) < 1e-12);
        // A tiny box leaks quickly.
        let small = HeatKernel::new(TruncatedOperator::walk(&k, 3)).unwrap();
        assert!(matches!(small.entry(5.0, &o, &o), Err(GreenError::HorizonTooLong { .. })));
        assert!(matches!(small.entry(1.0, &o, &Point::new(&[9])), Err(GreenError::PointOutsideBox(_))));
    }

    #[test]
    fn probe_recurrence() {
        let spec = QuadratureSpec::default();
        let p1 = probe_g0(&nn1(), spec).unwrap();
        assert!(!p1.finite);
        let p3 = probe_g0(&TransitionKernel::nearest_neighbour(3, 1.0).unwrap(), spec).unwrap();
        assert!(p3.finite);
        // Watson's integral for the simple cubic lattice.
        let g0 = p3.estimate.unwrap();
        assert!((g0 - 1.516_386_06).abs() < 2e-2, "{g0}");
    }
}
