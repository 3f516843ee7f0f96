//! Estimators of λ₀, ψ and ξ from simulated replicas.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Outcome, SimError, SimulationRun};
use crate::lattice::Point;

/// Fewest surviving replicas for which estimates are reported.
pub const MIN_SURVIVORS: usize = 100;
pub const DEFAULT_BOOTSTRAP: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateOptions {
    pub lambda0: Option<f64>,
    pub bootstrap: usize,
    /// Seed of the bootstrap resampling.
    pub seed: u64,
    pub min_survivors: usize,
}

impl EstimateOptions {
    pub fn new(lambda0: Option<f64>) -> Self {
        Self {
            lambda0,
            bootstrap: DEFAULT_BOOTSTRAP,
            seed: 0,
            min_survivors: MIN_SURVIVORS,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MeanPoint {
    pub t: f64,
    /// Mean of μ_t over replicas not censored by the cap before t.
    pub mean: f64,
    pub std_error: f64,
    pub replicas: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PsiEstimate {
    pub y: Point,
    /// Σ_r μ_T(y) / Σ_r μ_T over surviving replicas r.
    pub value: f64,
    pub ci: [f64; 2],
    /// Plain mean of μ_T(y)/μ_T over survivors.
    pub unweighted: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct XiSummary {
    pub lambda0: f64,
    /// μ_T e^{-λ₀T} for every replica that reached the horizon (zero when extinct).
    pub samples: Vec<f64>,
    /// First four raw moments of the samples.
    pub moments: [f64; 4],
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimatorReport {
    pub replicas: usize,
    pub completed: usize,
    pub extinct: usize,
    pub cap_hits: usize,
    pub survivors: usize,
    pub extinction_fraction: f64,
    pub horizon: f64,
    pub mean_series: Vec<MeanPoint>,
    /// Slope of ln(mean μ_t) on [T/2, T].
    pub lambda_hat: f64,
    pub lambda_ci: [f64; 2],
    /// Survivor ratios μ(y)/μ weighted by μ, at the horizon or at the cap hit.
    pub psi_hat: Vec<PsiEstimate>,
    /// Σ_y ψ̂(y) over the window; the ratios sum to exactly 1 over all sites.
    pub window_coverage: f64,
    pub xi: Option<XiSummary>,
}

/// Ordinary least squares slope of (x, y).
fn ols_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

fn percentile_ci(mut values: Vec<f64>) -> [f64; 2] {
    values.retain(|v| v.is_finite());
    if values.is_empty() {
        return [f64::NAN, f64::NAN];
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let b = values.len();
    let lo = ((0.025 * b as f64).floor() as usize).min(b - 1);
    let hi = (((0.975 * b as f64).ceil() as usize).max(1) - 1).min(b - 1);
    [values[lo], values[hi]]
}

/// Regression slope for the replicas listed in `sample` (indices into `totals`).
fn lambda_for(sample: &[usize], totals: &[Vec<Option<u64>>], times: &[f64], fit: &[usize]) -> f64 {
    let pts: Vec<(f64, f64)> = fit
        .iter()
        .filter_map(|&k| {
            let (mut sum, mut count) = (0.0, 0usize);
            for &r in sample {
                if let Some(v) = totals[r][k] {
                    sum += v as f64;
                    count += 1;
                }
            }
            let mean = sum / count as f64;
            (count > 0 && mean > 0.0).then(|| (times[k], mean.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    ols_slope(&pts)
}

/// λ̂, ψ̂ and ξ samples with bootstrap confidence intervals.
pub fn estimate(runs: &[SimulationRun], lambda0: Option<f64>) -> Result<EstimatorReport, SimError> {
    estimate_with(runs, &EstimateOptions::new(lambda0))
}

pub fn estimate_with(runs: &[SimulationRun], options: &EstimateOptions) -> Result<EstimatorReport, SimError> {
    let survivors: Vec<&SimulationRun> = runs.iter().filter(|r| r.survived()).collect();
    if survivors.len() < options.min_survivors {
        return Err(SimError::TooFewSurvivors {
            survivors: survivors.len(),
            needed: options.min_survivors,
        });
    }
    let grid = runs
        .iter()
        .find(|r| r.outcome != Outcome::CapHit)
        .or(runs.first())
        .map(|r| r.snapshots.iter().map(|s| s.t).collect::<Vec<_>>())
        .unwrap_or_default();
    let horizon = *grid.last().unwrap_or(&0.0);
    // totals[r][k] = μ_{t_k} for replica r, None once censored by the cap.
    let totals: Vec<Vec<Option<u64>>> = runs
        .iter()
        .map(|r| (0..grid.len()).map(|k| r.snapshots.get(k).map(|s| s.total)).collect())
        .collect();
    let mean_series = (0..grid.len())
        .map(|k| {
            let vals: Vec<f64> = totals.iter().filter_map(|row| row[k]).map(|v| v as f64).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = if vals.len() > 1 {
                vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            MeanPoint {
                t: grid[k],
                mean,
                std_error: (var / n).sqrt(),
                replicas: vals.len(),
            }
        })
        .collect();
    let fit: Vec<usize> = (0..grid.len()).filter(|&k| grid[k] >= 0.5 * horizon).collect();
    let all: Vec<usize> = (0..runs.len()).collect();
    let lambda_hat = lambda_for(&all, &totals, &grid, &fit);

    // Per-survivor counts μ(y) on the window.
    let mut window: Vec<Point> = survivors
        .iter()
        .flat_map(|r| r.last.sites.iter().map(|s| s.0))
        .collect();
    window.sort();
    window.dedup();
    let site_counts: Vec<Vec<f64>> = survivors
        .iter()
        .map(|r| {
            window
                .iter()
                .map(|y| r.last.sites.iter().find(|s| s.0 == *y).map_or(0.0, |s| s.1 as f64))
                .collect()
        })
        .collect();
    let survivor_totals: Vec<f64> = survivors.iter().map(|r| r.last.total as f64).collect();
    let weighted_ratio = |sample: &[usize], i: usize| {
        let num: f64 = sample.iter().map(|&r| site_counts[r][i]).sum();
        let den: f64 = sample.iter().map(|&r| survivor_totals[r]).sum();
        num / den
    };
    let all_survivors: Vec<usize> = (0..survivors.len()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    rng.set_stream(u64::MAX);
    let mut lambda_boot = Vec::with_capacity(options.bootstrap);
    let mut psi_boot: Vec<Vec<f64>> = vec![Vec::with_capacity(options.bootstrap); window.len()];
    let mut sample = vec![0usize; runs.len()];
    let mut surv_sample = vec![0usize; survivors.len()];
    for _ in 0..options.bootstrap {
        for s in sample.iter_mut() {
            *s = rng.random_range(0..runs.len());
        }
        lambda_boot.push(lambda_for(&sample, &totals, &grid, &fit));
        for s in surv_sample.iter_mut() {
            *s = rng.random_range(0..survivors.len());
        }
        for (i, b) in psi_boot.iter_mut().enumerate() {
            b.push(weighted_ratio(&surv_sample, i));
        }
    }
    let psi_hat: Vec<PsiEstimate> = window
        .iter()
        .enumerate()
        .map(|(i, y)| PsiEstimate {
            y: *y,
            value: weighted_ratio(&all_survivors, i),
            ci: percentile_ci(std::mem::take(&mut psi_boot[i])),
            unweighted: site_counts
                .iter()
                .zip(&survivor_totals)
                .map(|(c, t)| c[i] / t)
                .sum::<f64>()
                / survivors.len() as f64,
        })
        .collect();
    let window_coverage = psi_hat.iter().map(|p| p.value).sum();

    let xi = options.lambda0.map(|l0| {
        let samples: Vec<f64> = runs
            .iter()
            .filter(|r| r.outcome != Outcome::CapHit)
            .map(|r| r.snapshots.last().map_or(0, |s| s.total) as f64 * (-l0 * horizon).exp())
            .collect();
        let n = samples.len() as f64;
        let moment = |p: i32| samples.iter().map(|v| v.powi(p)).sum::<f64>() / n;
        XiSummary {
            lambda0: l0,
            moments: [moment(1), moment(2), moment(3), moment(4)],
            samples,
        }
    });

    let count = |o: Outcome| runs.iter().filter(|r| r.outcome == o).count();
    let extinct = count(Outcome::Extinct);
    Ok(EstimatorReport {
        replicas: runs.len(),
        completed: count(Outcome::Completed),
        extinct,
        cap_hits: count(Outcome::CapHit),
        survivors: survivors.len(),
        extinction_fraction: extinct as f64 / runs.len() as f64,
        horizon,
        mean_series,
        lambda_hat,
        lambda_ci: percentile_ci(lambda_boot),
        psi_hat,
        window_coverage,
        xi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        assert!((ols_slope(&pts) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn percentiles() {
        let ci = percentile_ci((0..1000).map(|i| i as f64).collect());
        assert_eq!(ci, [25.0, 974.0]);
    }
}
