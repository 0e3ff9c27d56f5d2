//! `foliage`: command-line front end for the foliation simulations.
//!
//! Exit codes: 0 pass, 1 tolerance failure, 2 input error, 3 theory
//! precondition violated.

mod artifact;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use foliage::ergodic::Estimator;
use foliage::foliation::FoliationSpec;
use foliage::Error;

use artifact::Context;
use commands::Outcome;
use config::{EtaChoice, RunConfig};

#[derive(Parser)]
#[command(name = "foliage", version, about = "Leafwise Brownian motion and Lyapunov exponents of holomorphic foliations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the disc heat kernel and check its identities.
    HeatKernel {
        #[command(flatten)]
        run: RunArgs,
        /// Diffusion time.
        #[arg(long)]
        t: Option<f64>,
        /// Number of radial grid points.
        #[arg(long)]
        grid: Option<usize>,
        /// Table CSV (rho, density, cdf).
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON report (default: stdout).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Checks on the linear model z∂/∂z + λw∂/∂w.
    LocalModel {
        #[command(subcommand)]
        action: LocalModelAction,
    },
    /// Lyapunov exponent of the holonomy cocycle.
    Lyapunov {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        foliation: FoliationArgs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long, value_parser = parse_estimator)]
        estimator: Option<Estimator>,
        /// Also write the occupation grid CSV here.
        #[arg(long)]
        grid_file: Option<PathBuf>,
        /// JSON report (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Occupation grid of a path ensemble.
    Occupation {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        foliation: FoliationArgs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Grid CSV (chart, i, j, weight).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Reservoir CSV of equally spaced path points.
        #[arg(long)]
        reservoir: Option<PathBuf>,
        /// JSON report (default: stdout).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Pairwise TV distances between grids grown from distinct starts.
    UniqueErgodicity {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        foliation: FoliationArgs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Comma-separated horizons (overrides --horizon).
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Diffusion invariance of a stored occupation grid.
    Invariance {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        foliation: FoliationArgs,
        #[command(flatten)]
        eta: EtaArgs,
        /// Grid CSV written by `occupation`.
        #[arg(long)]
        grid_file: Option<PathBuf>,
        /// Reservoir CSV written by `occupation`.
        #[arg(long)]
        reservoir: Option<PathBuf>,
        /// Bins per axis of the stored grid.
        #[arg(long)]
        bins: Option<usize>,
        /// Bins per axis used for the comparison.
        #[arg(long)]
        check_bins: Option<usize>,
        /// Diffusion time.
        #[arg(long)]
        t: Option<f64>,
        /// Points diffused.
        #[arg(long)]
        points: Option<usize>,
        /// Run the uniform-measure control.
        #[arg(long)]
        control: Option<bool>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Poincaré density estimates.
    Eta {
        #[command(subcommand)]
        action: EtaAction,
    },
    /// Stability of the log* and W integrals under horizon doubling.
    Integrability {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        foliation: FoliationArgs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum LocalModelAction {
    /// Holonomy and curvature cross-checks.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        /// λ as `a+bi`, `bi` or `a,b`; needs Im λ > 0.
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: Option<[f64; 2]>,
        #[arg(long)]
        cases: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum EtaAction {
    /// CSV of (s, η̂, η̂/(s log* s)) approaching a singular point.
    Profile {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        foliation: FoliationArgs,
        #[command(flatten)]
        eta: EtaArgs,
        /// Index into the singular set.
        #[arg(long)]
        singularity: Option<usize>,
        #[arg(long)]
        s_min: Option<f64>,
        #[arg(long)]
        s_max: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        /// CSV path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fill and save the interpolation cache.
    Cache {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        foliation: FoliationArgs,
        #[arg(long)]
        depth: Option<u32>,
        /// Random points compared against direct evaluation.
        #[arg(long)]
        validate: Option<usize>,
        /// Cache file; existing nodes are reused.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML or JSON configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "FOLIAGE_WORKERS")]
    workers: Option<usize>,
}

#[derive(Args)]
struct FoliationArgs {
    /// jouanolou, linear_model or product_disc.
    #[arg(long)]
    builtin: Option<String>,
    #[arg(long)]
    degree: Option<u32>,
    /// λ of the linear model.
    #[arg(long = "model-lambda", value_parser = parse_complex, allow_hyphen_values = true)]
    lambda: Option<[f64; 2]>,
    /// Foliation description file (.toml or .json).
    #[arg(long = "foliation")]
    file: Option<PathBuf>,
}

#[derive(Args)]
struct EtaArgs {
    #[arg(long, value_enum)]
    eta: Option<EtaChoice>,
    /// Chain depth of the disc search.
    #[arg(long)]
    depth: Option<u32>,
    /// Cache file read before and written after the run.
    #[arg(long)]
    eta_cache: Option<PathBuf>,
}

#[derive(Args)]
struct EnsembleArgs {
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    burn_in: Option<f64>,
    #[arg(long)]
    dt_max: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[command(flatten)]
    eta: EtaArgs,
}

/// Parses `a+bi`, `a-bi`, `bi`, `i`, `a` or `a,b`.
fn parse_complex(s: &str) -> Result<[f64; 2], String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("cannot parse {s:?} as a complex number");
    if let Some((a, b)) = t.split_once(',') {
        return Ok([a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?]);
    }
    let Some(body) = t.strip_suffix('i') else {
        return Ok([t.parse().map_err(|_| bad())?, 0.0]);
    };
    // Split at the last sign that is not part of an exponent.
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        v => v.parse().map_err(|_| bad())?,
    };
    Ok([re.parse().map_err(|_| bad())?, im])
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    match s.to_ascii_lowercase().replace('-', "_").as_str() {
        "log_holonomy" => Ok(Estimator::LogHolonomy),
        "kappa_average" => Ok(Estimator::KappaAverage),
        _ => Err(format!("unknown estimator {s:?} (log-holonomy or kappa-average)")),
    }
}

impl RunArgs {
    fn apply(&self, c: &mut RunConfig) {
        c.seed = self.seed;
        c.workers = self.workers;
    }
}

impl FoliationArgs {
    fn apply(&self, c: &mut RunConfig) {
        c.foliation_file.clone_from(&self.file);
        if self.builtin.is_some() || self.degree.is_some() || self.lambda.is_some() {
            c.foliation = Some(FoliationSpec {
                builtin: self.builtin.clone(),
                degree: self.degree,
                lambda: self.lambda,
                ..FoliationSpec::default()
            });
        }
    }
}

impl EtaArgs {
    fn apply(&self, c: &mut RunConfig) {
        c.eta = self.eta;
        c.depth = self.depth;
        c.eta_cache.clone_from(&self.eta_cache);
    }
}

impl EnsembleArgs {
    fn apply(&self, c: &mut RunConfig) {
        c.horizon = self.horizon;
        c.paths = self.paths;
        c.starts = self.starts;
        c.bins = self.bins;
        c.burn_in = self.burn_in;
        c.dt_max = self.dt_max;
        c.beta = self.beta;
        self.eta.apply(c);
    }
}

type Runner = fn(&Context) -> foliage::Result<Outcome>;

/// Flag values as a partial configuration, the config file path and the runner.
fn plan(command: Command) -> (String, RunConfig, Option<PathBuf>, Runner) {
    let mut c = RunConfig::default();
    let (name, run, runner): (&str, RunArgs, Runner) = match command {
        Command::HeatKernel { run, t, grid, out, report } => {
            (c.t, c.grid, c.out, c.report) = (t, grid, out, report);
            ("heat-kernel", run, commands::heat_kernel)
        }
        Command::LocalModel { action: LocalModelAction::Verify { run, lambda, cases, out } } => {
            (c.lambda, c.cases, c.out) = (lambda, cases, out);
            ("local-model verify", run, commands::local_model_verify)
        }
        Command::Lyapunov { run, foliation, ensemble, estimator, grid_file, out } => {
            foliation.apply(&mut c);
            ensemble.apply(&mut c);
            (c.estimator, c.grid_file, c.out) = (estimator, grid_file, out);
            ("lyapunov", run, commands::lyapunov)
        }
        Command::Occupation { run, foliation, ensemble, out, reservoir, report } => {
            foliation.apply(&mut c);
            ensemble.apply(&mut c);
            (c.out, c.reservoir, c.report) = (out, reservoir, report);
            ("occupation", run, commands::occupation)
        }
        Command::UniqueErgodicity { run, foliation, ensemble, horizons, out } => {
            foliation.apply(&mut c);
            ensemble.apply(&mut c);
            (c.horizons, c.out) = (horizons, out);
            ("unique-ergodicity", run, commands::unique_ergodicity)
        }
        Command::Invariance { run, foliation, eta, grid_file, reservoir, bins, check_bins, t, points, control, out } => {
            foliation.apply(&mut c);
            eta.apply(&mut c);
            (c.grid_file, c.reservoir, c.bins, c.check_bins) = (grid_file, reservoir, bins, check_bins);
            (c.t, c.points, c.control, c.out) = (t, points, control, out);
            ("invariance", run, commands::invariance)
        }
        Command::Eta { action: EtaAction::Profile { run, foliation, eta, singularity, s_min, s_max, samples, out } } => {
            foliation.apply(&mut c);
            eta.apply(&mut c);
            (c.singularity, c.s_min, c.s_max, c.samples, c.out) = (singularity, s_min, s_max, samples, out);
            if c.eta.is_none() {
                c.eta = Some(EtaChoice::Chain);
            }
            ("eta profile", run, commands::eta_profile)
        }
        Command::Eta { action: EtaAction::Cache { run, foliation, depth, validate, out, report } } => {
            foliation.apply(&mut c);
            (c.depth, c.validate, c.out, c.report) = (depth, validate, out, report);
            ("eta cache", run, commands::eta_cache)
        }
        Command::Integrability { run, foliation, ensemble, out } => {
            foliation.apply(&mut c);
            ensemble.apply(&mut c);
            c.out = out;
            ("integrability", run, commands::integrability)
        }
    };
    run.apply(&mut c);
    (name.to_string(), c, run.config, runner)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Input(_) | Error::Parse(_) | Error::Domain(_) | Error::Unsupported(_) | Error::Io(_) => 2,
        Error::Precondition(_) => 3,
        Error::Numerical { .. } | Error::SingularProximity { .. } | Error::ChartFailure(_) => 1,
    }
}

fn execute(command: Command) -> foliage::Result<Outcome> {
    let started = Instant::now();
    let (name, flags, config_path, runner) = plan(command);
    let config = match config_path {
        Some(p) => RunConfig::from_path(&p)?.overlay(flags),
        None => flags,
    };
    let workers = config.workers()?.unwrap_or_else(rayon::current_num_threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::input(format!("cannot start {workers} workers: {e}")))?;
    // The pool size goes to the runtime section so that reports from
    // different worker counts differ only there.
    let ctx = Context { command: name, config: RunConfig { workers: None, ..config }, workers, started };
    pool.install(|| runner(&ctx))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => {
            eprintln!("tolerance check failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_forms() {
        assert_eq!(parse_complex("i").unwrap(), [0.0, 1.0]);
        assert_eq!(parse_complex("-i").unwrap(), [0.0, -1.0]);
        assert_eq!(parse_complex("0.5+2i").unwrap(), [0.5, 2.0]);
        assert_eq!(parse_complex("1e-3-1.5i").unwrap(), [1e-3, -1.5]);
        assert_eq!(parse_complex("2").unwrap(), [2.0, 0.0]);
        assert_eq!(parse_complex("0.3, 1").unwrap(), [0.3, 1.0]);
        assert!(parse_complex("x+i").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
