//! End-to-end verification: every analytic output checked against an
//! independent route, plus the Monte Carlo comparison.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::Config;
use crate::green::{HeatKernel, QuadratureSpec, TruncatedOperator};
use crate::kernel::BrwConfig;
use crate::lattice::Point;
use crate::moments::combinatorics::{check_bounds, comp_sum, comp_sum_bruteforce, thresholds, CLAIMED_NTILDE};
use crate::moments::{carleman_diag, duhamel::duhamel_check, moment_constants};
use crate::presets;
use crate::simulator::{aggregation_chi_square, estimate, simulate};
use crate::spectral::{all_positive_eigs, analyze, find_lambda0, gamma, Lambda0};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub passed: usize,
    pub failed: usize,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub replicas: u64,
    pub seed: u64,
    pub chi_square_states: usize,
    /// Skip the Monte Carlo comparison (the slowest check).
    pub skip_monte_carlo: bool,
}

type Outcome = Result<(bool, String), String>;

fn run(id: usize, name: &'static str, check: impl FnOnce() -> Outcome) -> Check {
    let start = Instant::now();
    let (passed, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
    Check {
        id,
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn lambda0_of(config: &BrwConfig, spec: QuadratureSpec) -> Result<f64, String> {
    match find_lambda0(config, spec).map_err(|e| e.to_string())? {
        Lambda0::Supercritical(root) => Ok(root.lambda0),
        Lambda0::Absent { sup_gamma, .. } => Err(format!("not supercritical (sup γ = {sup_gamma})")),
    }
}

/// λ₀ of the one-source nearest-neighbour walk against √(1+β²) - 1.
pub fn closed_form() -> Outcome {
    let start = Instant::now();
    let got = lambda0_of(&presets::reference(), QuadratureSpec::default())?;
    let elapsed = start.elapsed().as_secs_f64();
    let exact = 2f64.sqrt() - 1.0;
    let err = (got - exact).abs();
    Ok((err < 1e-8 && elapsed < 1.0, format!("λ₀ = {got:.12}, |error| = {err:.2e}, {elapsed:.3} s")))
}

/// Positive eigenvalues from the Green-function route against the dense ℋ_R (R = 500).
pub fn operator_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, config) in [("N=1", presets::reference()), ("N=2 near", presets::two_near()), ("N=2 far", presets::two_far())] {
        let from_green = all_positive_eigs(&config, QuadratureSpec::default()).map_err(|e| e.to_string())?;
        let op = TruncatedOperator::evolution(&config, 500).map_err(|e| e.to_string())?;
        let dense: Vec<f64> = op.eigenvalues().map_err(|e| e.to_string())?.into_iter().filter(|l| *l > 1e-8).collect();
        if dense.len() != from_green.len() {
            ok = false;
        }
        for (a, b) in dense.iter().zip(&from_green) {
            worst = worst.max((a - b).abs());
        }
        parts.push(format!("{name}: {:?}", from_green));
    }
    let elapsed = start.elapsed().as_secs_f64();
    ok &= worst < 1e-6 && elapsed < 30.0;
    Ok((ok, format!("{}; max |Δ| = {worst:.2e}, {elapsed:.1} s", parts.join("; "))))
}

/// γ strictly decreasing on a 50-point grid and λ₀ strictly increasing in each β_i.
pub fn monotonicity(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = QuadratureSpec::default();
    let mut failures = Vec::new();
    for trial in 0..20 {
        let config = presets::random(&mut rng);
        let top = config.intensities().into_iter().fold(0.0, f64::max);
        let (lo, hi) = (0.01f64, 2.0 * top);
        let mut prev = f64::INFINITY;
        for k in 0..50 {
            let lambda = lo * (hi / lo).powf(k as f64 / 49.0);
            let g = gamma(&config, lambda, spec).map_err(|e| e.to_string())?;
            if !(g < prev - 1e-12) {
                failures.push(format!("trial {trial}: γ not decreasing at λ = {lambda:.4}"));
            }
            prev = g;
        }
        let base = lambda0_of(&config, spec)?;
        for i in 0..config.n_sources() {
            let bumped = lambda0_of(&presets::bump_intensity(&config, i, 0.1), spec)?;
            if !(bumped > base + 1e-12) {
                failures.push(format!("trial {trial}: λ₀ {base} -> {bumped} after β_{i} += 0.1"));
            }
        }
    }
    Ok((failures.is_empty(), if failures.is_empty() { "20 random configs".into() } else { failures.join("; ") }))
}

/// At most N positive eigenvalues on 50 random configurations.
pub fn eigenvalue_count(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut total = 0;
    for _ in 0..50 {
        let config = presets::random(&mut rng);
        let eigs = all_positive_eigs(&config, QuadratureSpec::default()).map_err(|e| e.to_string())?;
        total += eigs.len();
        if eigs.len() > config.n_sources() {
            violations += 1;
        }
    }
    Ok((violations == 0, format!("{violations} violations, {total} eigenvalues over 50 configs")))
}

/// Composition sums: closed form against enumeration, the bound up to 300, and ñ.
pub fn combinatorics() -> Outcome {
    let start = Instant::now();
    for n in 1..=12 {
        for r in 1..=n {
            let a = comp_sum(n, r).map_err(|e| e.to_string())?;
            let b = comp_sum_bruteforce(n, r).map_err(|e| e.to_string())?;
            if a != b {
                return Ok((false, format!("f({n},{r}): {a} != {b}")));
            }
        }
    }
    let bounds = check_bounds(300).map_err(|e| e.to_string())?;
    let th = thresholds();
    let elapsed = start.elapsed().as_secs_f64();
    let ok = bounds.violations.is_empty() && th.ntilde == CLAIMED_NTILDE && elapsed < 60.0;
    Ok((
        ok,
        format!(
            "enumeration agrees for n <= 12; {} bound violations for n <= 300; ñ = {} (n1 = {}, n2 = {}, n3 = {}), bound applies from n = {}, expected ñ = {CLAIMED_NTILDE}; {elapsed:.1} s",
            bounds.violations.len(),
            th.ntilde,
            th.n1,
            th.n2,
            th.n3,
            th.first_beyond
        ),
    ))
}

struct Analysis {
    spectral: crate::spectral::SpectralResult,
    table: crate::moments::MomentTable,
}

fn analysis(config: &Config, n_max: usize) -> Result<Analysis, String> {
    let spectral = analyze(&config.model, &config.spectral_options()).map_err(|e| e.to_string())?;
    let mut options = config.moment_options();
    options.n_max = options.n_max.max(n_max);
    let table = moment_constants(&config.model, &spectral, &options).map_err(|e| e.to_string())?;
    Ok(Analysis { spectral, table })
}

/// Factorization C_n(x,y) = ψ(y)^n C_n(x), the D bound, and C₁ against the dense top eigenvector.
fn moment_structure(config: &Config, a: &Analysis) -> Outcome {
    let t = &a.table;
    let mut fact: f64 = 0.0;
    for n in 1..=6 {
        for (i, cx) in t.c_x[n - 1].iter().enumerate() {
            for (k, psi) in t.psi_y.iter().enumerate() {
                let predicted = psi.powi(n as i32) * cx;
                fact = fact.max(((t.c_xy[n - 1][i][k] - predicted) / predicted).abs());
            }
        }
    }
    let heat = HeatKernel::new(TruncatedOperator::evolution(&config.model, t.radius).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let (_, v) = heat.top_mode();
    let op = heat.operator();
    let sum_v: f64 = v.iter().sum();
    let mut c1: f64 = 0.0;
    for (i, x) in t.x_points.iter().enumerate() {
        let vx = v[op.index(x).map_err(|e| e.to_string())?];
        c1 = c1.max((t.c_x[0][i] - vx * sum_v).abs());
        for (k, y) in t.y_points.iter().enumerate() {
            let vy = v[op.index(y).map_err(|e| e.to_string())?];
            c1 = c1.max((t.c_xy[0][i][k] - vx * vy).abs());
            c1 = c1.max((t.psi_y[k] - vy / sum_v).abs());
        }
    }
    let ok = fact < 1e-8 && t.d_bound_margin >= 0.0 && c1 < 1e-10;
    Ok((
        ok,
        format!(
            "factorization error {fact:.2e} (n <= 6); D bound margin {:.4} for {} <= n <= {}; C₁, ψ vs dense eigenvector {c1:.2e}",
            t.d_bound_margin, t.n_star, t.d_checked_to
        ),
    ))
}

fn duhamel(config: &Config) -> Outcome {
    let x = config.model.sources()[0].position();
    let times: Vec<f64> = (0..=12).map(|k| 0.25 * k as f64).collect();
    let report = duhamel_check(&config.model, &times, 200, x).map_err(|e| e.to_string())?;
    Ok((report.max_residual < 1e-6, format!("max residual {:.2e} for t <= 3, R = 200", report.max_residual)))
}

fn carleman(a: &Analysis, x: &Point) -> Outcome {
    let report = carleman_diag(&a.table, x).map_err(|e| e.to_string())?;
    let ok = report.bound_holds && report.partial_sums_increasing && report.terms.len() >= 20;
    let last = report.terms.last().map_or(0.0, |t| t.partial_sum);
    Ok((
        ok,
        format!(
            "{} orders, lower bound holds: {}, partial sums increasing: {}, S_{} = {last:.4}",
            report.terms.len(),
            report.bound_holds,
            report.partial_sums_increasing,
            report.terms.len()
        ),
    ))
}

fn monte_carlo(config: &Config, a: &Analysis, replicas: u64, seed: u64) -> Outcome {
    let options = config.run_options().map_err(|e| e.to_string())?;
    let runs = simulate(&config.model, &options, seed, replicas).map_err(|e| e.to_string())?;
    let lambda0 = a.spectral.lambda0;
    let report = estimate(&runs, Some(lambda0)).map_err(|e| e.to_string())?;
    let x1 = options.start;
    let psi = a.spectral.psi_at(&config.model, &[x1]).map_err(|e| e.to_string())?[0];
    let est = report.psi_hat.iter().find(|p| p.y == x1).ok_or("start site not in the window")?;
    let lambda_ok = ((report.lambda_hat - lambda0) / lambda0).abs() <= 0.05;
    let psi_ok = ((est.value - psi) / psi).abs() <= 0.10 && est.ci[0] <= psi && psi <= est.ci[1];

    let heat = HeatKernel::new(TruncatedOperator::evolution(&config.model, config.file.numerics.radius).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let mut worst_z: f64 = 0.0;
    for m in report.mean_series.iter().filter(|m| m.t > 0.0 && m.t <= 3.0) {
        let exact = heat.total(m.t, &x1).map_err(|e| e.to_string())?;
        worst_z = worst_z.max((m.mean - exact).abs() / m.std_error);
    }
    Ok((
        lambda_ok && psi_ok && worst_z <= 3.0,
        format!(
            "λ̂ = {:.5} (λ₀ = {lambda0:.5}); ψ̂({x1}) = {:.5} CI [{:.5}, {:.5}] (ψ = {psi:.5}); small-t mean within {worst_z:.2} SE; {} survivors of {replicas}",
            report.lambda_hat, est.value, est.ci[0], est.ci[1], report.survivors
        ),
    ))
}

fn aggregation(config: &Config, states: usize, seed: u64) -> Outcome {
    let t = aggregation_chi_square(&config.model, states, 10, seed);
    Ok((t.p_value > 0.01, format!("χ² = {:.2}, dof = {}, p = {:.4}", t.statistic, t.dof, t.p_value)))
}

/// Runs every check. Checks tied to a fixed configuration use the presets;
/// the rest use `config`.
pub fn verify(config: &Config, options: &VerifyOptions) -> VerifyReport {
    let mut checks = vec![
        run(1, "single-source closed form", closed_form),
        run(2, "dense operator oracle", operator_oracle),
        run(3, "monotonicity", || monotonicity(options.seed)),
        run(4, "eigenvalue count", || eigenvalue_count(options.seed.wrapping_add(1))),
        run(5, "combinatorics", combinatorics),
    ];
    let start = Instant::now();
    match analysis(config, 20) {
        Ok(a) => {
            let x = config.model.sources()[0].position();
            checks.push(run(6, "moment structure", || moment_structure(config, &a)));
            checks.push(run(7, "Duhamel residual", || duhamel(config)));
            checks.push(run(8, "Carleman diagnostic", || carleman(&a, &x)));
            if options.skip_monte_carlo {
                checks.push(Check {
                    id: 9,
                    name: "Monte Carlo vs spectral",
                    passed: false,
                    detail: "skipped".into(),
                    seconds: 0.0,
                });
            } else {
                checks.push(run(9, "Monte Carlo vs spectral", || monte_carlo(config, &a, options.replicas, options.seed)));
            }
        }
        Err(e) => {
            let seconds = start.elapsed().as_secs_f64();
            for (id, name) in [(6, "moment structure"), (7, "Duhamel residual"), (8, "Carleman diagnostic"), (9, "Monte Carlo vs spectral")] {
                checks.push(Check {
                    id,
                    name,
                    passed: false,
                    detail: format!("spectral analysis failed: {e}"),
                    seconds,
                });
            }
        }
    }
    checks.push(run(10, "aggregation equivalence", || aggregation(config, options.chi_square_states, options.seed)));
    let passed = checks.iter().filter(|c| c.passed).count();
    VerifyReport {
        failed: checks.len() - passed,
        passed,
        checks,
    }
}
