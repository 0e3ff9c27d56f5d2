use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::occupation::{record_step, OccupationGrid, OccupationSpec};
use crate::error::{Error, Result};
use crate::foliation::{ChartPoint, PolyFoliation, SingularSet};
use crate::leafwise::{curvature_density_analytic, path_rng, EtaProvider, LeafSampler, SamplerConfig, StepRecord, Termination};
use crate::poincare_metric::EtaMethod;
use crate::quad::KahanAcc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Estimator {
    LogHolonomy,
    KappaAverage,
}

/// Settings of a path ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Fraction of each path's horizon left out of occupation and κ averages.
    pub burn_in: f64,
    pub sampler: SamplerConfig,
    pub occupation: OccupationSpec,
    /// Paths per deterministic reduction block.
    pub block: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            horizon: 200.0,
            n_paths: 100,
            seed: 0,
            burn_in: 0.1,
            sampler: SamplerConfig { stride: usize::MAX, ..SamplerConfig::default() },
            occupation: OccupationSpec::default(),
            block: 8,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::input("horizon must be positive and finite"));
        }
        if self.n_paths == 0 {
            return Err(Error::input("need at least one path"));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(Error::input("burn_in must lie in [0, 1)"));
        }
        if self.occupation.bins == 0 || self.occupation.bins > 4096 {
            return Err(Error::input("occupation bins must lie in 1..=4096"));
        }
        Ok(())
    }
}

/// Path-level accumulators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    pub time: f64,
    pub log_holonomy: f64,
    /// Time and log-holonomy accrued after burn-in.
    pub window_time: f64,
    pub window_log_holonomy: f64,
    /// Time integral of κ after burn-in.
    pub kappa_integral: f64,
    pub kappa_time: f64,
    /// Time integral of `2(d−1)·η²` after burn-in, the true-time clock
    /// implied by the mass identity (projective foliations only).
    pub mass_clock: f64,
    pub termination: Termination,
    /// Steps whose curvature density could not be evaluated.
    pub kappa_failures: usize,
}

impl PathStats {
    pub fn log_holonomy_rate(&self) -> f64 {
        if self.window_time > 0.0 {
            self.window_log_holonomy / self.window_time
        } else {
            0.0
        }
    }

    pub fn kappa_average(&self) -> f64 {
        if self.kappa_time > 0.0 {
            self.kappa_integral / self.kappa_time
        } else {
            0.0
        }
    }
}

pub struct Ensemble {
    pub paths: Vec<PathStats>,
    pub grid: OccupationGrid,
}

/// Samples `n_paths` paths (path `i` starts at `starts[i % len]` with stream
/// `i`) and accumulates path statistics and the occupation grid. The result
/// does not depend on the number of worker threads.
pub fn run_ensemble(
    fol: &PolyFoliation,
    singular: &SingularSet,
    starts: &[ChartPoint],
    eta: &dyn EtaProvider,
    cfg: &EnsembleConfig,
) -> Result<Ensemble> {
    cfg.validate()?;
    if starts.is_empty() {
        return Err(Error::input("no start points"));
    }
    for s in starts {
        if !fol.contains(s) || singular.distance_to(&s.in_best_chart_or_self(fol)) < cfg.sampler.proximity_radius {
            return Err(Error::input(format!("start {s:?} is not a regular point")));
        }
    }
    let sampler = LeafSampler { fol, singular, eta, config: SamplerConfig { horizon: cfg.horizon, ..cfg.sampler } };
    let mass_weight = fol.is_projective().then(|| 2.0 * (fol.degree() as f64 - 1.0));
    let burn = cfg.burn_in * cfg.horizon;
    let block = cfg.block.max(1);
    let n_blocks = cfg.n_paths.div_ceil(block);
    let blocks: Vec<(Vec<PathStats>, OccupationGrid)> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut grid = OccupationGrid::empty(fol, &cfg.occupation);
            let mut stats = Vec::new();
            for i in b * block..((b + 1) * block).min(cfg.n_paths) {
                let start = starts[i % starts.len()];
                let mut rng = path_rng(cfg.seed, i as u64);
                let mut kappa = KahanAcc::default();
                let mut kappa_time = KahanAcc::default();
                let mut clock = KahanAcc::default();
                let mut window = KahanAcc::default();
                let mut window_log = KahanAcc::default();
                let mut failures = 0usize;
                let mut observe = |st: &StepRecord| {
                    if st.t + 0.5 * st.dt < burn {
                        return;
                    }
                    window.add(st.dt);
                    window_log.add(st.log_holonomy);
                    if let Some(w) = mass_weight {
                        clock.add(w * st.eta * st.eta * st.dt);
                    }
                    match curvature_density_analytic(fol, &st.from, st.eta) {
                        Ok(k) if k.is_finite() => {
                            kappa.add(k * st.dt);
                            kappa_time.add(st.dt);
                        }
                        _ => failures += 1,
                    }
                    record_step(&mut grid, singular, &st.from, &st.to, st.t, st.dt);
                };
                let ps = sampler.sample_observed(&start, &mut rng, i as u64, &mut observe);
                grid.n_paths += 1;
                grid.horizon = cfg.horizon;
                grid.starts.push(start);
                stats.push(PathStats {
                    time: ps.total_time(),
                    log_holonomy: ps.log_holonomy(),
                    window_time: window.value(),
                    window_log_holonomy: window_log.value(),
                    kappa_integral: kappa.value(),
                    kappa_time: kappa_time.value(),
                    mass_clock: clock.value(),
                    termination: ps.termination,
                    kappa_failures: failures,
                });
            }
            (stats, grid)
        })
        .collect();
    let mut grid = OccupationGrid::empty(fol, &cfg.occupation);
    let mut paths = Vec::with_capacity(cfg.n_paths);
    for (s, g) in blocks {
        paths.extend(s);
        grid.merge(&g)?;
    }
    Ok(Ensemble { paths, grid })
}

/// Mean with its standard error `sd/√n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn of(values: &[f64]) -> Estimate {
        let n = values.len() as f64;
        if values.is_empty() {
            return Estimate { mean: f64::NAN, stderr: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            return Estimate { mean, stderr: f64::NAN };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Estimate { mean, stderr: (var / n).sqrt() }
    }

    /// Ratio `Σa/Σb` with a delta-method standard error.
    pub fn ratio(a: &[f64], b: &[f64]) -> Estimate {
        let n = a.len() as f64;
        let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
        let r = sa / sb;
        if a.len() < 2 {
            return Estimate { mean: r, stderr: f64::NAN };
        }
        let mb = sb / n;
        let var = a.iter().zip(b).map(|(x, y)| (x - r * y).powi(2)).sum::<f64>() / (n - 1.0);
        Estimate { mean: r, stderr: (var / n).sqrt() / mb.abs() }
    }
}

/// The two estimators on the same paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub log_holonomy: Estimate,
    pub kappa_average: Estimate,
    pub discrepancy: f64,
    pub combined_stderr: f64,
    pub within_three_stderr: bool,
}

/// Hyperbolic-clock calibration from the mass identity: along paths run on
/// an estimated clock, true hyperbolic time accrues at `2(d−1)·η̂²` in
/// expectation, so `logH / ∫2(d−1)η̂² dt` estimates χ free of the η scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockCalibration {
    /// Mean of `2(d−1)·η̂²` per unit of the estimated clock; 1 for exact η.
    pub clock_ratio: Estimate,
    pub chi_mass_normalized: Estimate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub chi_hat: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub horizon: f64,
    pub estimator: Estimator,
    pub eta_method: EtaMethod,
    /// Relative accuracy of the η method on the exact reference cases.
    pub eta_reference_accuracy: Option<f64>,
    pub per_path: Vec<f64>,
    pub interquartile_range: f64,
    pub cross: CrossCheck,
    pub clock: Option<ClockCalibration>,
    /// The closed-form exponent when the theory provides one.
    pub target: Option<f64>,
    pub terminations: BTreeMap<String, usize>,
    pub kappa_failures: usize,
}

fn termination_name(t: Termination) -> String {
    serde_json::to_value(t).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

/// Builds a report from ensemble statistics.
pub fn lyapunov_report(
    fol: &PolyFoliation,
    paths: &[PathStats],
    horizon: f64,
    estimator: Estimator,
    eta_method: EtaMethod,
) -> LyapunovReport {
    let lh: Vec<f64> = paths.iter().map(PathStats::log_holonomy_rate).collect();
    let ka: Vec<f64> = paths.iter().map(PathStats::kappa_average).collect();
    // Pooled time averages: paths stopped early weigh in by their duration.
    let logs: Vec<f64> = paths.iter().map(|p| p.window_log_holonomy).collect();
    let times: Vec<f64> = paths.iter().map(|p| p.window_time).collect();
    let kappas: Vec<f64> = paths.iter().map(|p| p.kappa_integral).collect();
    let kappa_times: Vec<f64> = paths.iter().map(|p| p.kappa_time).collect();
    let (a, b) = (Estimate::ratio(&logs, &times), Estimate::ratio(&kappas, &kappa_times));
    let combined = a.stderr.hypot(b.stderr);
    let discrepancy = (a.mean - b.mean).abs();
    let cross = CrossCheck {
        log_holonomy: a,
        kappa_average: b,
        discrepancy,
        combined_stderr: combined,
        within_three_stderr: discrepancy < 3.0 * combined,
    };
    let clock = fol.is_projective().then(|| {
        let clocks: Vec<f64> = paths.iter().map(|p| p.mass_clock).collect();
        ClockCalibration {
            clock_ratio: Estimate::ratio(&clocks, &times),
            chi_mass_normalized: Estimate::ratio(&logs, &clocks),
        }
    });
    let per_path = match estimator {
        Estimator::LogHolonomy => lh,
        Estimator::KappaAverage => ka,
    };
    let chosen = match estimator {
        Estimator::LogHolonomy => a,
        Estimator::KappaAverage => b,
    };
    let mut terminations = BTreeMap::new();
    for p in paths {
        *terminations.entry(termination_name(p.termination)).or_insert(0) += 1;
    }
    let iqr = crate::stats::quantile(&per_path, 0.75) - crate::stats::quantile(&per_path, 0.25);
    LyapunovReport {
        chi_hat: chosen.mean,
        stderr: chosen.stderr,
        n_paths: paths.len(),
        horizon,
        estimator,
        eta_method,
        eta_reference_accuracy: None,
        per_path,
        interquartile_range: iqr,
        cross,
        clock,
        target: fol.is_projective().then(|| super::cohomological_chi(fol.degree()).ok()).flatten().map(|r| {
            *r.numer() as f64 / *r.denom() as f64
        }),
        terminations,
        kappa_failures: paths.iter().map(|p| p.kappa_failures).sum(),
    }
}

/// Lyapunov exponent of the holonomy cocycle by Monte Carlo over leafwise
/// Brownian paths. Refuses foliations with non-hyperbolic singularities.
#[allow(clippy::too_many_arguments)]
pub fn estimate_lyapunov(
    fol: &PolyFoliation,
    singular: &SingularSet,
    starts: &[ChartPoint],
    eta: &dyn EtaProvider,
    eta_method: EtaMethod,
    estimator: Estimator,
    cfg: &EnsembleConfig,
) -> Result<(LyapunovReport, OccupationGrid)> {
    if let Some(rec) = singular.first_non_hyperbolic() {
        return Err(Error::Precondition(format!(
            "non-hyperbolic singularity: {}",
            serde_json::to_string(rec).unwrap_or_else(|_| format!("{rec:?}"))
        )));
    }
    let ens = run_ensemble(fol, singular, starts, eta, cfg)?;
    Ok((lyapunov_report(fol, &ens.paths, cfg.horizon, estimator, eta_method), ens.grid))
}

trait BestChart {
    fn in_best_chart_or_self(&self, fol: &PolyFoliation) -> ChartPoint;
}

impl BestChart for ChartPoint {
    fn in_best_chart_or_self(&self, fol: &PolyFoliation) -> ChartPoint {
        if fol.is_projective() {
            self.in_best_chart()
        } else {
            *self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_estimate_matches_plain_ratio() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 4.0, 6.0, 8.0];
        let r = Estimate::ratio(&a, &b);
        assert_eq!(r.mean, 0.5);
        assert!(r.stderr.abs() < 1e-15);
    }

    #[test]
    fn stderr_is_sd_over_root_n() {
        let e = Estimate::of(&[1.0, 3.0]);
        assert_eq!(e.mean, 2.0);
        assert!((e.stderr - (2.0f64).sqrt() / (2.0f64).sqrt()).abs() < 1e-15);
    }
}
