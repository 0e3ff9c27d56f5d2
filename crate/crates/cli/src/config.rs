//! Run configuration: a TOML or JSON file, overlaid by command-line flags.
//! Unknown keys are rejected. The merged configuration is echoed into every
//! artifact.

use std::path::{Path, PathBuf};

use foliage::ergodic::Estimator;
use foliage::foliation::{FoliationSpec, PolyFoliation};
use foliage::{Error, Result};
use serde::{Deserialize, Serialize};

/// How η is evaluated along paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EtaChoice {
    /// Interpolated chain-refined values on a lazily filled grid.
    Cache,
    /// Chain-refined disc search at every step.
    Chain,
    /// Single flow disc at every step.
    Flow,
    /// Closed form (product disc and linear model only).
    Exact,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub foliation: Option<FoliationSpec>,
    pub foliation_file: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub horizon: Option<f64>,
    pub horizons: Option<Vec<f64>>,
    pub paths: Option<usize>,
    pub bins: Option<usize>,
    pub burn_in: Option<f64>,
    pub dt_max: Option<f64>,
    pub beta: Option<f64>,
    pub eta: Option<EtaChoice>,
    pub depth: Option<u32>,
    pub eta_cache: Option<PathBuf>,
    pub estimator: Option<Estimator>,
    pub starts: Option<usize>,
    pub t: Option<f64>,
    pub grid: Option<usize>,
    pub lambda: Option<[f64; 2]>,
    pub cases: Option<usize>,
    pub singularity: Option<usize>,
    pub s_min: Option<f64>,
    pub s_max: Option<f64>,
    pub samples: Option<usize>,
    pub points: Option<usize>,
    pub check_bins: Option<usize>,
    pub control: Option<bool>,
    pub validate: Option<usize>,
    pub grid_file: Option<PathBuf>,
    pub reservoir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),* $(,)?) => {
        RunConfig { $($field: $top.$field.or($base.$field)),* }
    };
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::input(format!("cannot read config {}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string())),
            Some("toml") => toml::from_str(&text).map_err(|e| Error::Parse(e.to_string())),
            _ => Err(Error::input(format!("{}: expected a .toml or .json config", path.display()))),
        }
    }

    /// Fields set in `top` win; the foliation table merges key by key.
    pub fn overlay(self, top: RunConfig) -> RunConfig {
        let base = self;
        let foliation = match (base.foliation.clone(), top.foliation.clone()) {
            (Some(b), Some(t)) => Some(FoliationSpec {
                builtin: t.builtin.or(b.builtin),
                name: t.name.or(b.name),
                degree: t.degree.or(b.degree),
                lambda: t.lambda.or(b.lambda),
                coeffs: t.coeffs.or(b.coeffs),
            }),
            (b, t) => t.or(b),
        };
        let merged = overlay!(base, top;
            foliation_file, seed, workers, horizon, horizons, paths, bins, burn_in, dt_max, beta, eta, depth,
            eta_cache, estimator, starts, t, grid, lambda, cases, singularity, s_min, s_max, samples, points,
            check_bins, control, validate, grid_file, reservoir, out, report, foliation,
        );
        RunConfig { foliation, ..merged }
    }

    pub fn build_foliation(&self) -> Result<PolyFoliation> {
        match (&self.foliation_file, &self.foliation) {
            (Some(_), Some(_)) => Err(Error::input("give either a foliation file or an inline foliation, not both")),
            (Some(path), None) => FoliationSpec::from_path(path)?.build(),
            (None, Some(spec)) => spec.build(),
            (None, None) => Err(Error::input("no foliation given (use --builtin or --foliation)")),
        }
    }
}

fn in_range<T: PartialOrd + Copy + std::fmt::Display>(name: &str, v: T, lo: T, hi: T) -> Result<T> {
    if v >= lo && v <= hi {
        Ok(v)
    } else {
        Err(Error::input(format!("{name} = {v} outside [{lo}, {hi}]")))
    }
}

/// Positive and finite, at most `hi`.
fn positive(name: &str, v: f64, hi: f64) -> Result<f64> {
    if v > 0.0 && v <= hi {
        Ok(v)
    } else {
        Err(Error::input(format!("{name} = {v} must lie in (0, {hi}]")))
    }
}

/// Validated accessors with documented defaults.
impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn horizon(&self, default: f64) -> Result<f64> {
        positive("horizon", self.horizon.unwrap_or(default), 1e6)
    }

    pub fn horizons(&self, default: f64) -> Result<Vec<f64>> {
        match &self.horizons {
            Some(list) if list.is_empty() => Err(Error::input("horizons list is empty")),
            Some(list) => list.iter().map(|&h| positive("horizon", h, 1e6)).collect(),
            None => Ok(vec![self.horizon(default)?]),
        }
    }

    pub fn paths(&self, default: usize) -> Result<usize> {
        in_range("paths", self.paths.unwrap_or(default), 1, 10_000_000)
    }

    pub fn bins(&self) -> Result<usize> {
        in_range("bins", self.bins.unwrap_or(32), 1, 4096)
    }

    pub fn burn_in(&self) -> Result<f64> {
        let b = self.burn_in.unwrap_or(0.1);
        if (0.0..1.0).contains(&b) {
            Ok(b)
        } else {
            Err(Error::input(format!("burn_in = {b} outside [0, 1)")))
        }
    }

    pub fn dt_max(&self) -> Result<f64> {
        positive("dt_max", self.dt_max.unwrap_or(foliage::constants::DT_MAX), 1.0)
    }

    pub fn beta(&self) -> Result<f64> {
        positive("beta", self.beta.unwrap_or(foliage::constants::DT_BETA), 1.0)
    }

    pub fn eta(&self) -> EtaChoice {
        self.eta.unwrap_or(EtaChoice::Cache)
    }

    pub fn depth(&self) -> Result<u32> {
        in_range("depth", self.depth.unwrap_or(8), 0, 16)
    }

    pub fn estimator(&self) -> Estimator {
        self.estimator.unwrap_or(Estimator::LogHolonomy)
    }

    pub fn starts(&self, default: usize) -> Result<usize> {
        in_range("starts", self.starts.unwrap_or(default), 1, 64)
    }

    pub fn t(&self, default: f64) -> Result<f64> {
        let t = self.t.unwrap_or(default);
        if t > 0.0 && t.is_finite() {
            Ok(t)
        } else {
            Err(Error::input(format!("t = {t} must be positive and finite")))
        }
    }

    pub fn grid(&self) -> Result<usize> {
        in_range("grid", self.grid.unwrap_or(1024), 64, 1 << 20)
    }

    pub fn cases(&self, default: usize) -> Result<usize> {
        in_range("cases", self.cases.unwrap_or(default), 1, 10_000_000)
    }

    pub fn s_range(&self) -> Result<(f64, f64, usize)> {
        let (lo, hi) = (self.s_min.unwrap_or(1e-4), self.s_max.unwrap_or(1e-1));
        if !(lo > 0.0 && lo < hi && hi < 1.0) {
            return Err(Error::input(format!("need 0 < s_min < s_max < 1, got {lo}, {hi}")));
        }
        Ok((lo, hi, in_range("samples", self.samples.unwrap_or(13), 2, 10_000)?))
    }

    pub fn points(&self) -> Result<usize> {
        in_range("points", self.points.unwrap_or(2000), 1, 10_000_000)
    }

    pub fn check_bins(&self) -> Result<usize> {
        in_range("check_bins", self.check_bins.unwrap_or(8), 1, 4096)
    }

    pub fn workers(&self) -> Result<Option<usize>> {
        self.workers.map(|w| in_range("workers", w, 1, 1024)).transpose()
    }
}
