use nalgebra::{DMatrix, SymmetricEigen};

use brw::green::QuadratureSpec;
use brw::kernel::{BranchingSource, BrwConfig, TransitionKernel};
use brw::lattice::Point;
use brw::moments::{carleman_diag, duhamel_check, moment_constants, resolvent_d, MomentOptions};
use brw::presets;
use brw::spectral::{all_positive_eigs, analyze, find_lambda0, psi_from, Lambda0, SpectralOptions};

fn p(x: i64) -> Point {
    Point::new(&[x])
}

fn nn_with(sources: &[(i64, f64)]) -> BrwConfig {
    let kernel = TransitionKernel::nearest_neighbour(1, 1.0).unwrap();
    let sources = sources
        .iter()
        .map(|&(x, beta)| BranchingSource::binary(p(x), 1.0, 1.0 + beta).unwrap())
        .collect();
    BrwConfig::new(kernel, sources).unwrap()
}

/// Positive eigenvalues of the nearest-neighbour ℋ_R on {-R..R}, decreasing.
fn dense_positive(sources: &[(i64, f64)], radius: i64) -> Vec<f64> {
    let n = (2 * radius + 1) as usize;
    let mut h = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = -1.0;
        if i > 0 {
            h[(i, i - 1)] = 0.5;
        }
        if i + 1 < n {
            h[(i, i + 1)] = 0.5;
        }
    }
    for &(x, beta) in sources {
        let i = (x + radius) as usize;
        h[(i, i)] += beta;
    }
    let mut eigs: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().filter(|l| *l > 1e-8).collect();
    eigs.sort_by(|a, b| b.total_cmp(a));
    eigs
}

fn lambda0(config: &BrwConfig) -> f64 {
    find_lambda0(config, QuadratureSpec::default()).unwrap().value().unwrap()
}

#[test]
fn adjacent_strong_sources_have_two_eigenvalues() {
    let sources = [(0, 2.0), (1, 2.0)];
    let got = all_positive_eigs(&nn_with(&sources), QuadratureSpec::default()).unwrap();
    let dense = dense_positive(&sources, 500);
    assert_eq!(got.len(), 2);
    assert_eq!(dense.len(), 2);
    for (a, b) in got.iter().zip(&dense) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
    assert!(got[0] < lambda0(&nn_with(&sources)) + 1.0);
}

#[test]
fn largest_positive_eigenvalue_is_lambda0() {
    for config in [presets::reference(), presets::two_near(), presets::two_far(), nn_with(&[(0, 0.3), (3, 1.2), (-2, 0.7)])] {
        let eigs = all_positive_eigs(&config, QuadratureSpec::default()).unwrap();
        assert!(!eigs.is_empty() && eigs.len() <= config.n_sources());
        assert!((eigs[0] - lambda0(&config)).abs() < 1e-10);
    }
}

#[test]
fn separated_sources_approach_the_single_source_rate() {
    let single = 2f64.sqrt() - 1.0;
    let excess: Vec<f64> = [2, 4, 8, 16]
        .iter()
        .map(|&sep| lambda0(&nn_with(&[(0, 1.0), (sep, 1.0)])) - single)
        .collect();
    assert!(excess.iter().all(|e| *e > 0.0), "{excess:?}");
    assert!(excess.windows(2).all(|w| w[1] < w[0]), "{excess:?}");
    assert!(excess[3] < 1e-5, "{excess:?}");
}

#[test]
fn truncated_operator_converges_in_radius() {
    let sources = [(0, 1.0), (6, 1.0)];
    let exact = all_positive_eigs(&nn_with(&sources), QuadratureSpec::default()).unwrap();
    let errors: Vec<f64> = [8, 12, 16, 24]
        .iter()
        .map(|&r| (dense_positive(&sources, r)[0] - exact[0]).abs())
        .collect();
    assert!(errors.windows(2).all(|w| w[1] <= w[0]), "{errors:?}");
}

#[test]
fn psi_of_a_single_source() {
    for beta in [0.5, 1.0, 2.0] {
        let config = presets::single(beta);
        let result = analyze(&config, &SpectralOptions::for_dim(1)).unwrap();
        assert!((result.psi_sources[0] - result.lambda0 / beta).abs() < 1e-12);
    }
    let result = analyze(&presets::reference(), &SpectralOptions::for_dim(1)).unwrap();
    assert!((result.psi_sources[0] - (2f64.sqrt() - 1.0)).abs() < 1e-9);
    // f enters ψ homogeneously.
    let (l0, f, s) = (0.3, 0.7, 2.1);
    assert!((psi_from(l0, f, s) - psi_from(l0, 5.0 * f, 5.0 * s)).abs() < 1e-15);
}

#[test]
fn weak_source_in_three_dimensions_is_absent() {
    let kernel = TransitionKernel::nearest_neighbour(3, 3.0).unwrap();
    let source = BranchingSource::binary(Point::origin(3), 0.5, 1.0).unwrap();
    let config = BrwConfig::new(kernel, vec![source]).unwrap();
    assert!(matches!(find_lambda0(&config, QuadratureSpec::default()).unwrap(), Lambda0::Absent { .. }));
}

fn two_near_table(n_max: usize) -> brw::moments::MomentTable {
    let config = presets::two_near();
    let spectral = analyze(&config, &SpectralOptions::for_dim(1)).unwrap();
    let window: Vec<Point> = (-2..=3).map(p).collect();
    let options = MomentOptions {
        n_max,
        radius: 200,
        x_points: window.clone(),
        y_points: window,
    };
    moment_constants(&config, &spectral, &options).unwrap()
}

#[test]
fn second_moment_ratio_is_psi_squared() {
    let table = two_near_table(4);
    let config = presets::two_near();
    let spectral = analyze(&config, &SpectralOptions::for_dim(1)).unwrap();
    for (i, k) in [(0, 0), (1, 3), (2, 2), (4, 1), (5, 5)] {
        let psi = spectral.psi_at(&config, &[table.y_points[k]]).unwrap()[0];
        let ratio = table.c_xy[1][i][k] / table.c_x[1][i];
        assert!((ratio / (psi * psi) - 1.0).abs() < 1e-8, "({i}, {k}): {ratio} vs {}", psi * psi);
    }
}

#[test]
fn first_moment_constants_of_a_single_source() {
    let config = presets::single(0.8);
    let spectral = analyze(&config, &SpectralOptions::for_dim(1)).unwrap();
    let window: Vec<Point> = (-3..=3).map(p).collect();
    let options = MomentOptions {
        n_max: 2,
        radius: 200,
        x_points: window.clone(),
        y_points: window.clone(),
    };
    let table = moment_constants(&config, &spectral, &options).unwrap();
    let f = spectral.f_at(&config, &window).unwrap();
    let f_source = spectral.f.sources[0];
    for i in 0..window.len() {
        let expected = f[i] * 0.8 * f_source / spectral.lambda0;
        assert!((table.c_x[0][i] - expected).abs() < 1e-10);
        for k in 0..window.len() {
            assert!((table.c_xy[0][i][k] - f[i] * f[k]).abs() < 1e-10);
        }
    }
}

#[test]
fn resolvent_terms() {
    let config = presets::reference();
    let l0 = lambda0(&config);
    let at_2r = resolvent_d(&config, l0, 2, 0, p(0), 400).unwrap();
    let at_r = resolvent_d(&config, l0, 2, 0, p(0), 200).unwrap();
    assert!((at_r - at_2r).abs() < 1e-9);
    let mut prev = f64::INFINITY;
    for n in [10, 100, 1000, 10_000] {
        let gap = (n as f64 * l0 * resolvent_d(&config, l0, n, 0, p(0), 50).unwrap() - 1.0).abs();
        assert!(gap < prev, "n = {n}: |nλ₀D - 1| = {gap}");
        prev = gap;
    }
    assert!(prev < 1e-3);
    assert!(resolvent_d(&config, l0, 1, 0, p(0), 50).is_err());
    assert!(resolvent_d(&config, l0, 2, 0, p(60), 50).is_err());
}

#[test]
fn carleman_partial_sums_dominate_the_harmonic_tail() {
    let table = two_near_table(20);
    let report = carleman_diag(&table, &p(0)).unwrap();
    assert!((report.terms[0].m - 1.0).abs() < 1e-12);
    let scale = (2.0 * report.c1 / report.gamma).sqrt();
    let tail: f64 = (11..=20).map(|n| scale / (n + 1) as f64).sum();
    assert!(report.terms[19].partial_sum - report.terms[9].partial_sum >= tail);
    assert!(report.bound_holds && report.partial_sums_increasing);

    let short = two_near_table(9);
    assert!(carleman_diag(&short, &p(0)).is_err());
}

#[test]
fn duhamel_residuals() {
    let times: Vec<f64> = (0..=6).map(|k| 0.5 * k as f64).collect();
    let report = duhamel_check(&presets::two_near(), &times, 200, p(0)).unwrap();
    assert_eq!(report.points[0].residual, 0.0);
    assert!(report.max_residual < 1e-6, "{}", report.max_residual);

    let kernel = TransitionKernel::nearest_neighbour(1, 1.0).unwrap();
    let inert = BranchingSource::new(p(0), vec![0.0, 0.0, 0.0]).unwrap();
    let walk = BrwConfig::new(kernel, vec![inert]).unwrap();
    let report = duhamel_check(&walk, &times, 200, p(0)).unwrap();
    for point in &report.points {
        assert!((point.lhs - 1.0).abs() < 1e-9 && point.residual < 1e-9);
    }
}
