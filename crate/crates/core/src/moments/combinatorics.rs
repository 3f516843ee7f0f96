//! The composition sums f(n, r) = Σ_{i_1+…+i_r=n, i_m>0} i_1^{i_1} ⋯ i_r^{i_r}
//! in exact arithmetic, and the bound checks built on them.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use super::MomentError;

/// Largest n accepted by [`comp_sum_bruteforce`].
pub const BRUTEFORCE_MAX_N: usize = 25;
/// Largest n accepted by [`check_bounds`].
pub const CHECK_BOUNDS_MAX_N: usize = 300;
/// The threshold value quoted for ñ in the literature this crate follows.
pub const CLAIMED_NTILDE: usize = 106;

fn pow(base: usize, exp: usize) -> BigUint {
    BigUint::from(base).pow(exp as u32)
}

/// Table of f(n, r) for 1 <= r <= n <= n_max, filled by
/// f(n, 1) = n^n and f(n, r) = Σ_{u=1}^{n-r+1} u^u f(n-u, r-1).
#[derive(Clone, Debug)]
pub struct CompositionTable {
    n_max: usize,
    /// rows[n][r], with row 0 and column 0 unused.
    rows: Vec<Vec<BigUint>>,
}

impl CompositionTable {
    pub fn new(n_max: usize) -> Self {
        let powers: Vec<BigUint> = (0..=n_max).map(|u| pow(u, u)).collect();
        let mut rows: Vec<Vec<BigUint>> = vec![vec![]; n_max + 1];
        for n in 1..=n_max {
            let mut row = vec![BigUint::zero(); n + 1];
            row[1] = powers[n].clone();
            for r in 2..=n {
                let mut acc = BigUint::zero();
                for u in 1..=n - r + 1 {
                    acc += &powers[u] * &rows[n - u][r - 1];
                }
                row[r] = acc;
            }
            rows[n] = row;
        }
        Self { n_max, rows }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn get(&self, n: usize, r: usize) -> Result<&BigUint, MomentError> {
        if n == 0 || n > self.n_max || r == 0 || r > n {
            return Err(MomentError::OutOfRange(format!(
                "f(n, r) needs 1 <= r <= n <= {}, got ({n}, {r})",
                self.n_max
            )));
        }
        Ok(&self.rows[n][r])
    }
}

/// f(n, r) by the recursion, in exact arithmetic.
pub fn comp_sum(n: usize, r: usize) -> Result<BigUint, MomentError> {
    if n == 0 || r == 0 || r > n {
        return Err(MomentError::OutOfRange(format!("f(n, r) needs 1 <= r <= n, got ({n}, {r})")));
    }
    Ok(CompositionTable::new(n).get(n, r)?.clone())
}

/// f(n, r) by enumerating every composition of n into r positive parts.
pub fn comp_sum_bruteforce(n: usize, r: usize) -> Result<BigUint, MomentError> {
    if n > BRUTEFORCE_MAX_N {
        return Err(MomentError::TooLarge(n));
    }
    if n == 0 || r == 0 || r > n {
        return Err(MomentError::OutOfRange(format!("f(n, r) needs 1 <= r <= n, got ({n}, {r})")));
    }
    let mut total = BigUint::zero();
    for_each_composition(n, r, &mut |parts| {
        total += parts.iter().fold(BigUint::one(), |acc, &i| acc * pow(i, i));
    });
    Ok(total)
}

/// Calls `visit` with every composition of `n` into `r` positive parts.
pub fn for_each_composition(n: usize, r: usize, visit: &mut impl FnMut(&[usize])) {
    fn rec(remaining: usize, slots: usize, parts: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
        if slots == 1 {
            parts.push(remaining);
            visit(parts);
            parts.pop();
            return;
        }
        for first in 1..=remaining - (slots - 1) {
            parts.push(first);
            rec(remaining - first, slots - 1, parts, visit);
            parts.pop();
        }
    }
    if r == 0 || r > n {
        return;
    }
    rec(n, r, &mut Vec::with_capacity(r), visit);
}

/// n₁, n₂, n₃ recomputed from their defining inequalities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    /// max{n : 6^6 (n-5)^{n-5} >= 4^4 (n-3)^{n-3}}
    pub n1: usize,
    /// max{n : 283 (n-2)^{n-2} >= (n-1)^{n-1}}
    pub n2: usize,
    /// max{n : (1 + 2/(n-1))^{n-1} <= 2e}
    pub n3: usize,
    /// max{n₁, n₂, n₃}
    pub ntilde: usize,
    /// ñ + 1, the induction basis of the growth lemma.
    pub first_beyond: usize,
}

/// Largest n in [start, limit] satisfying `holds`; the predicates used here
/// hold on an initial segment and fail from some point on.
fn last_true(start: usize, limit: usize, holds: impl Fn(usize) -> bool) -> usize {
    let mut last = start;
    for n in start..=limit {
        if holds(n) {
            last = n;
        }
    }
    last
}

pub fn thresholds() -> Thresholds {
    const LIMIT: usize = 2000;
    let n1 = last_true(5, LIMIT, |n| {
        BigUint::from(46_656u32) * pow(n - 5, n - 5) >= BigUint::from(256u32) * pow(n - 3, n - 3)
    });
    let n2 = last_true(2, LIMIT, |n| BigUint::from(283u32) * pow(n - 2, n - 2) >= pow(n - 1, n - 1));
    let two_e = 2.0 * std::f64::consts::E;
    let n3 = last_true(2, LIMIT, |n| {
        let m = (n - 1) as f64;
        (1.0 + 2.0 / m).powf(m) <= two_e
    });
    let ntilde = n1.max(n2).max(n3);
    Thresholds {
        n1,
        n2,
        n3,
        ntilde,
        first_beyond: ntilde + 1,
    }
}

/// ratio = num / den as f64, for big integers of arbitrary size.
pub fn big_ratio(num: &BigUint, den: &BigUint) -> f64 {
    let shift = num.bits().max(den.bits()).saturating_sub(1000);
    let (a, b) = (num >> shift, den >> shift);
    match (a.to_f64(), b.to_f64()) {
        (Some(x), Some(y)) if y > 0.0 => x / y,
        _ => f64::NAN,
    }
}

/// Result of [`check_bounds`].
#[derive(Clone, Debug, Serialize)]
pub struct BoundsReport {
    pub n_max: usize,
    /// Pairs (n, r), 2 <= r <= n, with f(n, r) >= 6 (n-1)^{n-1}.
    pub violations: Vec<(usize, usize)>,
    pub pairs_checked: usize,
    /// sup over 2 <= r <= n <= n_max of f(n, r) r^{r-1} / n^n.
    pub min_constant: f64,
    /// Pair attaining the supremum.
    pub argmax: (usize, usize),
    pub thresholds: Thresholds,
    pub claimed_ntilde: usize,
    pub ntilde_matches_claim: bool,
}

/// Verifies f(n, r) < 6 (n-1)^{n-1} for 2 <= r <= n <= n_max and measures
/// the smallest C with f(n, r) <= C n^n / r^{r-1} on that range.
pub fn check_bounds(n_max: usize) -> Result<BoundsReport, MomentError> {
    if n_max > CHECK_BOUNDS_MAX_N {
        return Err(MomentError::TooLarge(n_max));
    }
    Ok(check_bounds_on(&CompositionTable::new(n_max.max(1)), n_max))
}

/// [`check_bounds`] on an already computed table.
pub fn check_bounds_on(table: &CompositionTable, n_max: usize) -> BoundsReport {
    let mut violations = Vec::new();
    let mut pairs_checked = 0;
    let (mut min_constant, mut argmax) = (0.0f64, (0, 0));
    for n in 2..=n_max.min(table.n_max()) {
        let bound = BigUint::from(6u32) * pow(n - 1, n - 1);
        let nn = pow(n, n);
        for r in 2..=n {
            let f = &table.rows[n][r];
            pairs_checked += 1;
            if *f >= bound {
                violations.push((n, r));
            }
            let ratio = big_ratio(&(f * pow(r, r - 1)), &nn);
            if ratio > min_constant {
                (min_constant, argmax) = (ratio, (n, r));
            }
        }
    }
    let thresholds = thresholds();
    BoundsReport {
        n_max,
        violations,
        pairs_checked,
        min_constant,
        argmax,
        ntilde_matches_claim: thresholds.ntilde == CLAIMED_NTILDE,
        thresholds,
        claimed_ntilde: CLAIMED_NTILDE,
    }
}
