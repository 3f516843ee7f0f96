//! Command-line front end. Exit status: 0 success, 1 domain verdict (not
//! supercritical, failed verification), 2 error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use brw::config::{parse_config, Config};
use brw::green::GreenFunction;
use brw::lattice::{BoxLattice, Point};
use brw::moments::{carleman_diag, moment_constants, MomentError};
use brw::output::{self, Header};
use brw::simulator::{estimate, simulate};
use brw::spectral::{all_positive_eigs, analyze, find_lambda0, Lambda0, SpectralError};
use brw::verify::{verify, VerifyOptions};

#[derive(Parser)]
#[command(name = "brw", version, about = "Branching random walks with several sources on Z^d")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    config: PathBuf,
    /// Write the result here instead of standard output.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration and print its summary.
    Validate(Common),
    /// Table of the symbol φ(θ) on a uniform grid of [-π, π]^d (CSV).
    Symbol {
        #[command(flatten)]
        common: Common,
        /// Grid points per axis.
        #[arg(long, default_value_t = 33)]
        points: usize,
    },
    /// Table of I_x(λ) for |x|∞ <= radius (CSV).
    Green {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 5)]
        radius: usize,
    },
    /// The growth rate λ₀ (JSON).
    Lambda0(Common),
    /// All positive eigenvalues, f and ψ (JSON).
    Spectrum(Common),
    /// Moment constants C_n(x, y), C_n(x) and the D-bound margin (CSV).
    Moments(Common),
    /// Carleman diagnostic at a point, by default the first source (JSON).
    Carleman {
        #[command(flatten)]
        common: Common,
        /// Coordinates of x, e.g. --x 0 or --x 1,0.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<i64>>,
    },
    /// Monte Carlo replicas: a CSV of population totals and a JSON estimator report.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        sim: SimFlags,
        /// Directory receiving runs.csv and report.json.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run every verification check and report pass/fail (JSON).
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        replicas: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Random states in the aggregation chi-square test.
        #[arg(long, default_value_t = 20_000)]
        states: usize,
        #[arg(long)]
        skip_monte_carlo: bool,
    },
}

#[derive(Args)]
struct SimFlags {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<u64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    cap: Option<u64>,
}

enum Failure {
    Verdict(String),
    Error(String),
}

impl From<SpectralError> for Failure {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::NotSupercritical { .. } => Failure::Verdict(e.to_string()),
            e => Failure::Error(e.to_string()),
        }
    }
}

impl From<MomentError> for Failure {
    fn from(e: MomentError) -> Self {
        match e {
            MomentError::NotSupercritical | MomentError::Spectral(SpectralError::NotSupercritical { .. }) => {
                Failure::Verdict(e.to_string())
            }
            e => Failure::Error(e.to_string()),
        }
    }
}

fn err(e: impl std::fmt::Display) -> Failure {
    Failure::Error(e.to_string())
}

fn load(path: &Path) -> Result<Config, Failure> {
    parse_config(path).map_err(err)
}

fn emit(out: &Option<PathBuf>, text: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| err(format!("{}: {e}", path.display()))),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text).map_err(err)
        }
    }
}

fn emit_json<T: Serialize>(out: &Option<PathBuf>, header: &Header, result: &T) -> Result<(), Failure> {
    let mut text = output::to_json(header, result);
    text.push('\n');
    emit(out, text.as_bytes())
}

fn emit_csv(out: &Option<PathBuf>, header: &Header, columns: &[&str], rows: Vec<Vec<String>>) -> Result<(), Failure> {
    let bytes = output::to_csv(header, columns, rows).map_err(err)?;
    emit(out, &bytes)
}

fn coord_columns(dim: usize, prefix: &str) -> Vec<String> {
    (1..=dim).map(|i| format!("{prefix}{i}")).collect()
}

#[derive(Serialize)]
struct Summary {
    dim: usize,
    sources: usize,
    exit_rate: f64,
    reach: i64,
    intensities: Vec<f64>,
    /// Sources with β_i <= 0.
    flagged: Vec<usize>,
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate(c) => {
            let cfg = load(&c.config)?;
            let m = &cfg.model;
            let summary = Summary {
                dim: m.dim(),
                sources: m.n_sources(),
                exit_rate: m.kernel().exit_rate(),
                reach: m.kernel().reach(),
                intensities: m.intensities(),
                flagged: (0..m.n_sources()).filter(|&i| m.sources()[i].is_flagged()).collect(),
            };
            emit_json(&c.out, &Header::new("validate", &cfg.file, None), &summary)
        }
        Command::Symbol { common, points } => {
            let cfg = load(&common.config)?;
            let dim = cfg.file.dim;
            if points < 2 {
                return Err(err("--points must be at least 2"));
            }
            let axis: Vec<f64> = (0..points)
                .map(|i| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / (points - 1) as f64)
                .collect();
            let mut rows = Vec::new();
            let total = points.pow(dim as u32);
            for flat in 0..total {
                let mut rest = flat;
                let mut theta = vec![0.0; dim];
                for slot in theta.iter_mut().rev() {
                    *slot = axis[rest % points];
                    rest /= points;
                }
                let mut row: Vec<String> = theta.iter().map(|t| t.to_string()).collect();
                row.push(cfg.model.kernel().symbol(&theta).to_string());
                rows.push(row);
            }
            let mut cols = coord_columns(dim, "theta");
            cols.push("phi".into());
            let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
            emit_csv(&common.out, &Header::new("symbol", &cfg.file, None), &cols, rows)
        }
        Command::Green { common, lambda, radius } => {
            let cfg = load(&common.config)?;
            let dim = cfg.file.dim;
            let points: Vec<Point> = BoxLattice::new(dim, radius).points().collect();
            let green = GreenFunction::new(cfg.model.kernel(), cfg.spectral_options().quadrature).map_err(err)?;
            let values = green.values(&points, lambda).map_err(err)?;
            let rows = points
                .iter()
                .zip(values)
                .map(|(p, v)| {
                    let mut row: Vec<String> = p.coords().iter().map(|c| c.to_string()).collect();
                    row.push(v.to_string());
                    row
                })
                .collect();
            let mut cols = coord_columns(dim, "x");
            cols.push("I".into());
            let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
            emit_csv(&common.out, &Header::new(&format!("green --lambda {lambda}"), &cfg.file, None), &cols, rows)
        }
        Command::Lambda0(c) => {
            let cfg = load(&c.config)?;
            let verdict = find_lambda0(&cfg.model, cfg.spectral_options().quadrature)?;
            emit_json(&c.out, &Header::new("lambda0", &cfg.file, None), &verdict)?;
            match verdict {
                Lambda0::Supercritical(_) => Ok(()),
                Lambda0::Absent { sup_gamma, .. } => Err(Failure::Verdict(format!("not supercritical (sup γ = {sup_gamma})"))),
            }
        }
        Command::Spectrum(c) => {
            let cfg = load(&c.config)?;
            let options = cfg.spectral_options();
            let absent = matches!(find_lambda0(&cfg.model, options.quadrature)?, Lambda0::Absent { .. });
            let eigs = if absent { Vec::new() } else { all_positive_eigs(&cfg.model, options.quadrature)? };
            if eigs.is_empty() {
                #[derive(Serialize)]
                struct Empty {
                    positive_eigs: Vec<f64>,
                }
                emit_json(&c.out, &Header::new("spectrum", &cfg.file, None), &Empty { positive_eigs: eigs })?;
                return Err(Failure::Verdict("no positive eigenvalue: not supercritical".into()));
            }
            let result = analyze(&cfg.model, &options)?;
            let psi: Vec<(Point, f64)> = result
                .f
                .window
                .iter()
                .map(|(p, f)| (*p, result.lambda0 * f / result.f.weighted_sum))
                .collect();
            #[derive(Serialize)]
            struct Spectrum<'a> {
                #[serde(flatten)]
                spectral: &'a brw::spectral::SpectralResult,
                psi_window: Vec<(Point, f64)>,
            }
            emit_json(
                &c.out,
                &Header::new("spectrum", &cfg.file, None),
                &Spectrum {
                    spectral: &result,
                    psi_window: psi,
                },
            )
        }
        Command::Moments(c) => {
            let cfg = load(&c.config)?;
            let spectral = analyze(&cfg.model, &cfg.spectral_options())?;
            let table = moment_constants(&cfg.model, &spectral, &cfg.moment_options())?;
            let dim = cfg.file.dim;
            let mut rows = Vec::new();
            for n in 1..=table.n_max {
                for (i, x) in table.x_points.iter().enumerate() {
                    let margin = table.d_margin(n, i).map_or(String::new(), |m| m.to_string());
                    for (k, y) in table.y_points.iter().enumerate() {
                        let mut row = vec![n.to_string()];
                        row.extend(x.coords().iter().map(|v| v.to_string()));
                        row.extend(y.coords().iter().map(|v| v.to_string()));
                        row.push(table.c_xy[n - 1][i][k].to_string());
                        row.push(table.c_x[n - 1][i].to_string());
                        row.push(margin.clone());
                        rows.push(row);
                    }
                }
            }
            let mut cols = vec!["n".to_string()];
            cols.extend(coord_columns(dim, "x"));
            cols.extend(coord_columns(dim, "y"));
            cols.extend(["C_xy", "C_x", "D_bound_margin"].map(String::from));
            let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
            emit_csv(&c.out, &Header::new("moments", &cfg.file, None), &cols, rows)
        }
        Command::Carleman { common, x } => {
            let cfg = load(&common.config)?;
            let x = match x {
                Some(coords) => Point::try_new(&coords)
                    .filter(|p| p.dim() == cfg.file.dim)
                    .ok_or_else(|| err(format!("--x needs {} coordinates", cfg.file.dim)))?,
                None => cfg.model.sources()[0].position(),
            };
            let spectral = analyze(&cfg.model, &cfg.spectral_options())?;
            let mut options = cfg.moment_options();
            if !options.x_points.contains(&x) {
                options.x_points.push(x);
            }
            let table = moment_constants(&cfg.model, &spectral, &options)?;
            let report = carleman_diag(&table, &x)?;
            emit_json(&common.out, &Header::new("carleman", &cfg.file, None), &report)
        }
        Command::Simulate { config, sim, out_dir } => {
            let mut cfg = load(&config)?;
            let s = &mut cfg.file.simulation;
            s.seed = sim.seed.unwrap_or(s.seed);
            s.replicas = sim.replicas.unwrap_or(s.replicas);
            s.horizon = sim.horizon.unwrap_or(s.horizon);
            s.cap = sim.cap.unwrap_or(s.cap);
            let (seed, replicas) = (s.seed, s.replicas);
            let options = cfg.run_options().map_err(err)?;
            let runs = simulate(&cfg.model, &options, seed, replicas).map_err(err)?;
            let header = Header::new("simulate", &cfg.file, Some(seed));
            let mut rows = Vec::new();
            for r in &runs {
                for snap in &r.snapshots {
                    rows.push(vec![r.replica.to_string(), snap.t.to_string(), snap.total.to_string(), r.outcome.as_str().to_string()]);
                }
            }
            std::fs::create_dir_all(&out_dir).map_err(err)?;
            output::write_csv(&out_dir.join("runs.csv"), &header, &["replica", "t", "total", "outcome"], rows).map_err(err)?;
            let lambda0 = match find_lambda0(&cfg.model, cfg.spectral_options().quadrature) {
                Ok(Lambda0::Supercritical(root)) => Some(root.lambda0),
                _ => None,
            };
            match estimate(&runs, lambda0) {
                Ok(report) => output::write_json(&out_dir.join("report.json"), &header, &report).map_err(err),
                Err(e) => {
                    #[derive(Serialize)]
                    struct NoEstimate {
                        error: String,
                        replicas: usize,
                        extinct: usize,
                    }
                    let extinct = runs.iter().filter(|r| !r.survived()).count();
                    let body = NoEstimate {
                        error: e.to_string(),
                        replicas: runs.len(),
                        extinct,
                    };
                    output::write_json(&out_dir.join("report.json"), &header, &body).map_err(err)?;
                    Err(Failure::Verdict(e.to_string()))
                }
            }
        }
        Command::Verify {
            common,
            replicas,
            seed,
            states,
            skip_monte_carlo,
        } => {
            let mut cfg = load(&common.config)?;
            let s = &mut cfg.file.simulation;
            s.seed = seed.unwrap_or(s.seed);
            s.replicas = replicas.unwrap_or(s.replicas);
            let options = VerifyOptions {
                replicas: s.replicas,
                seed: s.seed,
                chi_square_states: states,
                skip_monte_carlo,
            };
            let report = verify(&cfg, &options);
            for c in &report.checks {
                eprintln!("[{}] {:>2} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.name, c.detail);
            }
            emit_json(&common.out, &Header::new("verify", &cfg.file, Some(options.seed)), &report)?;
            if report.all_passed() {
                Ok(())
            } else {
                Err(Failure::Verdict(format!("{} of {} checks failed", report.failed, report.checks.len())))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verdict(msg)) => {
            eprintln!("brw: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Error(msg)) => {
            eprintln!("brw: error: {msg}");
            ExitCode::from(2)
        }
    }
}
