//! Numerical check of m₁(t, x) = 1 + Σ_j β_j ∫_0^t m₁(s, x, x_j) ds.

use serde::Serialize;

use super::MomentError;
use crate::green::{HeatKernel, TruncatedOperator};
use crate::kernel::BrwConfig;
use crate::lattice::Point;

/// Time-quadrature stops once doubling moves the residual by less than this.
pub const DOUBLING_TOL: f64 = 1e-8;
const START_INTERVALS: usize = 64;
const MAX_INTERVALS: usize = 1 << 22;

#[derive(Clone, Debug, Serialize)]
pub struct DuhamelPoint {
    pub t: f64,
    /// m₁(t, x) from the matrix exponential.
    pub lhs: f64,
    /// 1 + Σ_j β_j ∫_0^t m₁(s, x, x_j) ds by composite trapezoid.
    pub rhs: f64,
    pub residual: f64,
    pub intervals: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct DuhamelReport {
    pub x: Point,
    pub radius: usize,
    pub points: Vec<DuhamelPoint>,
    pub max_residual: f64,
}

/// Evaluates both sides of the integral equation for m₁(t, x) at every t in `times`.
pub fn duhamel_check(config: &BrwConfig, times: &[f64], radius: usize, x: Point) -> Result<DuhamelReport, MomentError> {
    let heat = HeatKernel::new(TruncatedOperator::evolution(config, radius)?)?;
    let op = heat.operator();
    let ix = op.index(&x)?;
    // Σ_j β_j m₁(s, x, x_j) = Σ_k w_k e^{sλ_k}.
    let mut weights: Vec<(f64, f64)> = heat.modes(ix, ix).iter().map(|&(l, _)| (l, 0.0)).collect();
    for &(j, beta) in op.sources() {
        for (w, (_, v)) in weights.iter_mut().zip(heat.modes(ix, j)) {
            w.1 += beta * v;
        }
    }
    let integrand = |s: f64| weights.iter().map(|(l, w)| w * (l * s).exp()).sum::<f64>();
    let mut points = Vec::with_capacity(times.len());
    for &t in times {
        if t < 0.0 {
            return Err(MomentError::OutOfRange(format!("t = {t} is negative")));
        }
        let lhs = heat.total(t, &x)?;
        let (rhs, intervals) = if t == 0.0 {
            (1.0, 0)
        } else {
            trapezoid_until_stable(&integrand, t, lhs)
        };
        points.push(DuhamelPoint {
            t,
            lhs,
            rhs,
            residual: (lhs - rhs).abs(),
            intervals,
        });
    }
    let max_residual = points.iter().fold(0.0f64, |m, p| m.max(p.residual));
    Ok(DuhamelReport {
        x,
        radius,
        points,
        max_residual,
    })
}

/// 1 + ∫_0^t h, doubling the interval count until |residual| changes by < DOUBLING_TOL.
fn trapezoid_until_stable(h: &impl Fn(f64) -> f64, t: f64, lhs: f64) -> (f64, usize) {
    let mut n = START_INTERVALS;
    let step = t / n as f64;
    let mut sum = 0.5 * (h(0.0) + h(t)) + (1..n).map(|i| h(i as f64 * step)).sum::<f64>();
    let mut value = 1.0 + sum * step;
    while 2 * n <= MAX_INTERVALS {
        let half = t / (2 * n) as f64;
        sum += (0..n).map(|i| h((2 * i + 1) as f64 * half)).sum::<f64>();
        let next = 1.0 + sum * half;
        n *= 2;
        let changed = ((lhs - next).abs() - (lhs - value).abs()).abs();
        value = next;
        if changed < DOUBLING_TOL {
            break;
        }
    }
    (value, n)
}
