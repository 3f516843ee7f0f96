//! Carleman's divergence criterion for the normalized moments m(n, x) = C_n(x) / C₁(x)^n.

use serde::Serialize;

use super::{MomentError, MomentTable};
use crate::lattice::Point;

/// Smallest table size accepted by [`carleman_diag`].
pub const MIN_ORDERS: usize = 10;

#[derive(Clone, Debug, Serialize)]
pub struct CarlemanTerm {
    pub n: usize,
    /// m(n, x)
    pub m: f64,
    /// m(n, x)^{-1/2n}
    pub term: f64,
    pub partial_sum: f64,
    /// √(2C₁(x)/γ) / (n + 1)
    pub lower_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CarlemanReport {
    pub x: Point,
    pub gamma: f64,
    pub c1: f64,
    pub terms: Vec<CarlemanTerm>,
    /// Every term dominates its harmonic lower bound.
    pub bound_holds: bool,
    pub partial_sums_increasing: bool,
    /// Partial sums dominate √(2C₁/γ) Σ 1/(n+1), which is unbounded.
    pub diverges: bool,
}

/// Terms and partial sums of Σ m(n, x)^{-1/2n} for the orders in `table`.
pub fn carleman_diag(table: &MomentTable, x: &Point) -> Result<CarlemanReport, MomentError> {
    if table.n_max < MIN_ORDERS {
        return Err(MomentError::OutOfRange(format!(
            "the Carleman diagnostic needs n_max >= {MIN_ORDERS}, got {}",
            table.n_max
        )));
    }
    let i = table
        .x_points
        .iter()
        .position(|p| p == x)
        .ok_or_else(|| MomentError::OutOfRange(format!("{x} is not in the x-window of the table")))?;
    let gamma = table.envelope.gamma;
    let c1 = table.c_x[0][i];
    let scale = (2.0 * c1 / gamma).sqrt();
    let mut terms = Vec::with_capacity(table.n_max);
    let mut partial_sum = 0.0;
    for n in 1..=table.n_max {
        let cn = table.c_x[n - 1][i];
        // m^{-1/2n} evaluated through logarithms; C_n and C₁^n overflow separately.
        let ln_m = cn.ln() - n as f64 * c1.ln();
        let term = (-ln_m / (2.0 * n as f64)).exp();
        partial_sum += term;
        terms.push(CarlemanTerm {
            n,
            m: ln_m.exp(),
            term,
            partial_sum,
            lower_bound: scale / (n + 1) as f64,
        });
    }
    let bound_holds = terms.iter().all(|t| t.term >= t.lower_bound);
    let partial_sums_increasing = terms.windows(2).all(|w| w[1].partial_sum > w[0].partial_sum);
    Ok(CarlemanReport {
        x: *x,
        gamma,
        c1,
        terms,
        bound_holds,
        partial_sums_increasing,
        diverges: bound_holds && partial_sums_increasing,
    })
}
