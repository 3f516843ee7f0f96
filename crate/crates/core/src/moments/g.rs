//! The nonlinear source terms g_k^{(j)} of the moment recursions.

use super::MomentError;
use crate::kernel::BranchingSource;

/// Largest order for which k! is finite in double precision.
pub const MAX_ORDER: usize = 170;

/// g_k(v_1, …, v_{k-1}) = Σ_{r=2}^{k} (β^{(r)}/r!) Σ_{i_1+…+i_r=k, i_m>0} k!/(i_1!⋯i_r!) v_{i_1}⋯v_{i_r}
/// for a source with factorial moments `beta_r(r)` = β^{(r)}.
///
/// The inner sum over compositions equals k! [z^k] P(z)^r with
/// P(z) = Σ_i v_i z^i / i!, so the powers of P are accumulated degree by degree.
pub fn g_with(beta_r: impl Fn(usize) -> f64, k: usize, values: &[f64]) -> Result<f64, MomentError> {
    if !(2..=MAX_ORDER).contains(&k) {
        return Err(MomentError::OutOfRange(format!("g_k needs 2 <= k <= {MAX_ORDER}, got {k}")));
    }
    if values.len() < k - 1 {
        return Err(MomentError::OutOfRange(format!(
            "g_{k} needs {} values, got {}",
            k - 1,
            values.len()
        )));
    }
    // p[i] = v_i / i! for 1 <= i < k.
    let mut p = vec![0.0; k + 1];
    let mut fact = 1.0;
    for i in 1..k {
        fact *= i as f64;
        p[i] = values[i - 1] / fact;
    }
    let k_fact = fact * k as f64;
    let mut power = p.clone();
    let mut r_fact = 1.0;
    let mut total = 0.0;
    for r in 2..=k {
        r_fact *= r as f64;
        // power <- power · P, truncated at degree k; degrees below r vanish.
        let mut next = vec![0.0; k + 1];
        for (deg, coeff) in power.iter().enumerate().take(k).skip(r - 1) {
            if *coeff == 0.0 {
                continue;
            }
            for i in 1..=(k - deg) {
                next[deg + i] += coeff * p[i];
            }
        }
        power = next;
        let b = beta_r(r);
        if b != 0.0 {
            total += b / r_fact * power[k];
        }
    }
    Ok(total * k_fact)
}

/// g_k^{(j)} for source `source`.
pub fn g_eval(source: &BranchingSource, k: usize, values: &[f64]) -> Result<f64, MomentError> {
    g_with(|r| source.factorial_moment(r), k, values)
}

/// The same quantity by direct enumeration of compositions; test oracle.
pub fn g_bruteforce(beta_r: impl Fn(usize) -> f64, k: usize, values: &[f64]) -> f64 {
    let fact = |m: usize| (1..=m).map(|i| i as f64).product::<f64>();
    let mut total = 0.0;
    for r in 2..=k {
        let mut inner = 0.0;
        super::combinatorics::for_each_composition(k, r, &mut |parts| {
            let coeff = fact(k) / parts.iter().map(|&i| fact(i)).product::<f64>();
            inner += coeff * parts.iter().map(|&i| values[i - 1]).product::<f64>();
        });
        total += beta_r(r) / fact(r) * inner;
    }
    total
}
