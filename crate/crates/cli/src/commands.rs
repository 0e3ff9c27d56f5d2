use std::path::Path;

use foliage::ergodic::{
    cohomological_chi, diffusion_check_points, diffusion_invariance_check, estimate_lyapunov, integrability_diagnostic,
    run_ensemble, unique_ergodicity_diagnostic, uniform_grid_points, weight_w_diagnostic, EnsembleConfig,
    InvarianceReport, OccupationGrid, UniqueErgodicityReport,
};
use foliage::foliation::{find_singularities, ChartId, ChartPoint, PolyFoliation, SeedGrid, SingularSet};
use foliage::hyperbolic::{green_identity_residual, kernel_mass, DiscPoint, HeatKernelTable};
use foliage::leafwise::{path_rng, verify_local_model, EtaProvider};
use foliage::poincare_metric::{
    eta_chain_refine, eta_flow_disc, eta_reference_exact, log_star, CacheSummary, CacheValidation, EtaCache, EtaMethod,
    GridSpec,
};
use foliage::{Error, Result};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::artifact::Context;
use crate::config::{EtaChoice, RunConfig};

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    /// A documented tolerance was not met.
    Fail,
}

impl Outcome {
    fn of(pass: bool) -> Outcome {
        if pass {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

const NORMALIZATION_TOLERANCE: f64 = 1e-6;
const GREEN_TOLERANCE: f64 = 1e-5;
const GREEN_RADII: [f64; 3] = [0.3, 0.5, 0.9];
const INVARIANCE_TOLERANCE: f64 = 0.05;
const STABILITY_TOLERANCE: f64 = 0.1;

fn singular_set(fol: &PolyFoliation) -> Result<SingularSet> {
    find_singularities(fol, &SeedGrid::default())
}

fn best(fol: &PolyFoliation, p: &ChartPoint) -> ChartPoint {
    if fol.is_projective() {
        p.in_best_chart()
    } else {
        *p
    }
}

/// The η evaluator selected by the configuration.
pub enum Eta {
    Cache(Box<EtaCache>),
    Direct(Box<dyn EtaProvider>, EtaMethod),
}

impl Eta {
    pub fn build(fol: &PolyFoliation, singular: &SingularSet, cfg: &RunConfig) -> Result<Eta> {
        let depth = cfg.depth()?;
        Ok(match cfg.eta() {
            EtaChoice::Cache => {
                let cache = EtaCache::new(fol, singular, GridSpec { depth, ..GridSpec::default() })?;
                if let Some(path) = cfg.eta_cache.as_deref().filter(|p| p.exists()) {
                    cache.load(path)?;
                }
                Eta::Cache(Box::new(cache))
            }
            EtaChoice::Chain => Eta::Direct(
                Box::new(move |f: &PolyFoliation, p: &ChartPoint| eta_chain_refine(f, &best(f, p), depth).map(|e| e.lower)),
                EtaMethod::ChainRefined,
            ),
            EtaChoice::Flow => Eta::Direct(
                Box::new(|f: &PolyFoliation, p: &ChartPoint| eta_flow_disc(f, &best(f, p)).map(|e| e.lower)),
                EtaMethod::FlowDisc,
            ),
            EtaChoice::Exact => {
                eta_reference_exact(fol, &ChartPoint::plane(C::new(0.1, 0.0), C::new(0.1, 0.0)))?;
                Eta::Direct(
                    Box::new(|f: &PolyFoliation, p: &ChartPoint| eta_reference_exact(f, p).map(|e| e.lower)),
                    EtaMethod::ReferenceExact,
                )
            }
        })
    }

    pub fn provider(&self) -> &dyn EtaProvider {
        match self {
            Eta::Cache(c) => c.as_ref(),
            Eta::Direct(f, _) => f.as_ref(),
        }
    }

    pub fn method(&self) -> EtaMethod {
        match self {
            Eta::Cache(_) => EtaMethod::ChainRefined,
            Eta::Direct(_, m) => *m,
        }
    }

    /// Persists newly computed cache nodes.
    pub fn finish(&self, cfg: &RunConfig) -> Result<()> {
        if let (Eta::Cache(c), Some(path)) = (self, cfg.eta_cache.as_deref()) {
            c.save(path)?;
        }
        Ok(())
    }
}

/// Worst relative error of the configured η method on product-disc points
/// where η is known exactly.
fn reference_accuracy(cfg: &RunConfig) -> Result<f64> {
    let fol = PolyFoliation::product_disc();
    let depth = cfg.depth()?;
    let mut worst: f64 = 0.0;
    for (z, w) in [(0.0, 0.0), (0.3, 0.2), (-0.5, 0.4), (0.1, -0.7)] {
        let p = ChartPoint::plane(C::new(z, 0.1 * z), C::new(w, 0.0));
        let exact = eta_reference_exact(&fol, &p)?.lower;
        let est = match cfg.eta() {
            EtaChoice::Exact => exact,
            EtaChoice::Flow => eta_flow_disc(&fol, &p)?.lower,
            EtaChoice::Cache | EtaChoice::Chain => eta_chain_refine(&fol, &p, depth)?.lower,
        };
        worst = worst.max((est / exact - 1.0).abs());
    }
    Ok(worst)
}

/// Deterministic regular start points, spread over the charts.
pub fn default_starts(fol: &PolyFoliation, singular: &SingularSet, k: usize, seed: u64) -> Vec<ChartPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7374_6172_7473);
    let charts = fol.charts();
    let radius = if fol.is_projective() { 0.9 } else { 0.6 };
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let chart = charts[out.len() % charts.len()];
        let mut draw = || C::from_polar(radius * rng.random::<f64>().sqrt(), rng.random_range(0.0..std::f64::consts::TAU));
        let p = ChartPoint { chart, coords: [draw(), draw()] };
        if fol.contains(&p) && singular.distance_to(&best(fol, &p)) > 0.05 && p.coords[0].norm() + p.coords[1].norm() > 0.05 {
            out.push(p);
        }
    }
    out
}

fn ensemble_config(cfg: &RunConfig, horizon: f64, default_paths: usize) -> Result<EnsembleConfig> {
    let mut e = EnsembleConfig {
        horizon,
        n_paths: cfg.paths(default_paths)?,
        seed: cfg.seed(),
        burn_in: cfg.burn_in()?,
        ..EnsembleConfig::default()
    };
    e.sampler.dt_max = cfg.dt_max()?;
    e.sampler.beta = cfg.beta()?;
    e.occupation.bins = cfg.bins()?;
    e.validate()?;
    Ok(e)
}

fn require<'a>(path: &'a Option<std::path::PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| Error::input(format!("{what} is required")))
}

#[derive(Serialize)]
struct GreenCheck {
    radius: f64,
    residual: f64,
}

#[derive(Serialize)]
struct HeatKernelReport {
    t: f64,
    grid: usize,
    normalization_residual: f64,
    table_mass_defect: f64,
    green: Vec<GreenCheck>,
    pass: bool,
}

pub fn heat_kernel(ctx: &Context) -> Result<Outcome> {
    let cfg = &ctx.config;
    let t = cfg.t(1.0)?;
    let n = cfg.grid()?;
    let normalization_residual = (kernel_mass(t)? - 1.0).abs();
    let table = HeatKernelTable::build(t, n)?;
    let green = GREEN_RADII
        .iter()
        .map(|&r| {
            Ok(GreenCheck { radius: r, residual: green_identity_residual(DiscPoint::new(C::new(r, 0.0))?)?.residual.abs() })
        })
        .collect::<Result<Vec<_>>>()?;
    let pass = normalization_residual < NORMALIZATION_TOLERANCE && green.iter().all(|g| g.residual < GREEN_TOLERANCE);
    if let Some(out) = &cfg.out {
        ctx.write_csv(out, table.to_csv_string()?.as_bytes())?;
    }
    eprintln!("normalization residual {normalization_residual:.3e} at t = {t}");
    let report = HeatKernelReport {
        t,
        grid: n,
        normalization_residual,
        table_mass_defect: (table.raw_mass() - 1.0).abs(),
        green,
        pass,
    };
    ctx.emit(report, cfg.report.as_deref())?;
    Ok(Outcome::of(pass))
}

pub fn local_model_verify(ctx: &Context) -> Result<Outcome> {
    let cfg = &ctx.config;
    let [re, im] = cfg.lambda.unwrap_or([0.0, 1.0]);
    let report = verify_local_model(Some(C::new(re, im)), cfg.cases(1000)?, cfg.seed())?;
    eprintln!(
        "holonomy {:.3e}, variational {:.3e}, curvature {:.3e}",
        report.max_holonomy_error, report.max_variational_error, report.max_curvature_error
    );
    let pass = report.pass;
    ctx.emit(report, cfg.out.as_deref())?;
    Ok(Outcome::of(pass))
}

pub fn lyapunov(ctx: &Context) -> Result<Outcome> {
    let cfg = &ctx.config;
    let fol = cfg.build_foliation()?;
    if fol.is_projective() {
        cohomological_chi(fol.degree())?;
    }
    let singular = singular_set(&fol)?;
    let eta = Eta::build(&fol, &singular, cfg)?;
    let ens = ensemble_config(cfg, cfg.horizon(200.0)?, 100)?;
    let starts = default_starts(&fol, &singular, cfg.starts(2)?, cfg.seed());
    let (mut report, grid) =
        estimate_lyapunov(&fol, &singular, &starts, eta.provider(), eta.method(), cfg.estimator(), &ens)?;
    report.eta_reference_accuracy = Some(reference_accuracy(cfg)?);
    eta.finish(cfg)?;
    if let Some(path) = &cfg.grid_file {
        let mut body = Vec::new();
        grid.write_csv(&mut body)?;
        ctx.write_csv(path, &body)?;
    }
    eprintln!("chi_hat {:.4} ± {:.4} (target {:?})", report.chi_hat, report.stderr, report.target);
    ctx.emit(report, cfg.out.as_deref())?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct OccupationReport {
    starts: Vec<ChartPoint>,
    n_paths: usize,
    horizon: f64,
    bins: usize,
    total_time: f64,
    log_star_integral: f64,
    weight_w_integral: f64,
    reservoir_points: usize,
}

pub fn occupation(ctx: &Context) -> Result<Outcome> {
    let cfg = &ctx.config;
    let out = require(&cfg.out, "--out (grid CSV path)")?;
    let fol = cfg.build_foliation()?;
    let singular = singular_set(&fol)?;
    let eta = Eta::build(&fol, &singular, cfg)?;
    let ens = ensemble_config(cfg, cfg.horizon(200.0)?, 100)?;
    let starts = default_starts(&fol, &singular, cfg.starts(5)?, cfg.seed());
    let grid = run_ensemble(&fol, &singular, &starts, eta.provider(), &ens)?.grid;
    eta.finish(cfg)?;
    let mut body = Vec::new();
    grid.write_csv(&mut body)?;
    ctx.write_csv(out, &body)?;
    if let Some(path) = &cfg.reservoir {
        let mut body = Vec::new();
        grid.write_reservoir_csv(&mut body)?;
        ctx.write_csv(path, &body)?;
    }
    let report = OccupationReport {
        starts,
        n_paths: grid.n_paths,
        horizon: ens.horizon,
        bins: grid.bins,
        total_time: grid.total_time,
        log_star_integral: integrability_diagnostic(&grid)?,
        weight_w_integral: weight_w_diagnostic(&grid)?,
        reservoir_points: grid.reservoir.len(),
    };
    ctx.emit(report, cfg.report.as_deref())?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct UniqueErgodicityRuns {
    runs: Vec<UniqueErgodicityReport>,
    /// Whether the maximal TV decreases along increasing horizons.
    decreasing: bool,
}

pub fn unique_ergodicity(ctx: &Context) -> Result<Outcome> {
    let cfg = &ctx.config;
    let fol = cfg.build_foliation()?;
    let singular = singular_set(&fol)?;
    let eta = Eta::build(&fol, &singular, cfg)?;
    let starts = default_starts(&fol, &singular, cfg.starts(5)?, cfg.seed());
    let mut horizons = cfg.horizons(200.0)?;
    horizons.sort_by(f64::total_cmp);
    let mut runs = Vec::new();
    for h in horizons {
        let ens = ensemble_config(cfg, h, 20)?;
        let r = unique_ergodicity_diagnostic(&fol, &singular, &starts, eta.provider(), &ens)?;
        eprintln!("horizon {h}: max TV {:.4} (noise floor {:.4})", r.max_tv, r.noise_floor);
        runs.push(r);
    }
    eta.finish(cfg)?;
    let decreasing = runs.windows(2).all(|w| w[1].max_tv < w[0].max_tv);
    ctx.emit(UniqueErgodicityRuns { runs, decreasing }, cfg.out.as_deref())?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct InvarianceRun {
    check_bins: usize,
    invariance: InvarianceReport,
    /// The same check started from points uniform on the grid cells.
    control: Option<InvarianceReport>,
    tolerance: f64,
    pass: bool,
}

pub fn invariance(ctx: &Context) -> Result<Outcome> {
    let cfg = &ctx.config;
    let fol = cfg.build_foliation()?;
    let grid_path = require(&cfg.grid_file, "--grid-file")?;
    let reservoir_path = require(&cfg.reservoir, "--reservoir")?;
    let mut grid = OccupationGrid::read_csv(std::fs::File::open(grid_path)?, &fol, cfg.bins()?)?;
    grid.read_reservoir_csv(std::fs::File::open(reservoir_path)?)?;
    let singular = singular_set(&fol)?;
    let eta = Eta::build(&fol, &singular, cfg)?;
    let check_bins = cfg.check_bins()?;
    let template = grid.rebinned(check_bins);
    let (t, n, seed) = (cfg.t(1.0)?, cfg.points()?, cfg.seed());
    let inv = diffusion_invariance_check(&template, &fol, &singular, eta.provider(), t, n, seed)?;
    let control = if cfg.control.unwrap_or(true) {
        let mut rng = path_rng(seed, u64::MAX - 1);
        let pts: Vec<ChartPoint> = uniform_grid_points(&template, 4 * n, &mut rng)
            .into_iter()
            .filter(|p| fol.contains(p) && singular.distance_to(&best(&fol, p)) > 1e-3)
            .collect();
        let h = (pts.len() / 2).min(n);
        Some(diffusion_check_points(&fol, &singular, eta.provider(), &template, &pts[..h], &pts[h..2 * h], t, seed)?)
    } else {
        None
    };
    eta.finish(cfg)?;
    let pass = inv.excess < INVARIANCE_TOLERANCE;
    eprintln!("invariance TV {:.4}, noise floor {:.4}", inv.tv, inv.noise_floor);
    let run = InvarianceRun { check_bins, invariance: inv, control, tolerance: INVARIANCE_TOLERANCE, pass };
    ctx.emit(run, cfg.out.as_deref())?;
    Ok(Outcome::of(pass))
}

/// Point at distance about `s` from a singular point, off both separatrices.
fn near_singular_point(singular: &SingularSet, index: usize, s: f64) -> Result<ChartPoint> {
    let rec = singular
        .records
        .get(index)
        .ok_or_else(|| Error::input(format!("singularity index {index} out of range (found {})", singular.records.len())))?;
    let [e1, e2] = [[rec.eigenvectors[0][0], rec.eigenvectors[1][0]], [rec.eigenvectors[0][1], rec.eigenvectors[1][1]]];
    let dir = [e1[0] + e2[0], e1[1] + e2[1]];
    let norm = dir[0].norm().hypot(dir[1].norm());
    if !(norm > 0.0) {
        return Err(Error::domain("degenerate eigenvectors"));
    }
    let a = rec.location;
    Ok(ChartPoint { chart: a.chart, coords: [a.coords[0] + dir[0] * (s / norm), a.coords[1] + dir[1] * (s / norm)] })
}

pub fn eta_profile(ctx: &Context) -> Result<Outcome> {
    let cfg = &ctx.config;
    let fol = cfg.build_foliation()?;
    let singular = singular_set(&fol)?;
    let eta = Eta::build(&fol, &singular, cfg)?;
    let (lo, hi, n) = cfg.s_range()?;
    let index = cfg.singularity.unwrap_or(0);
    let mut body = String::from("s,eta_hat,ratio\n");
    for k in 0..n {
        let target = lo * (hi / lo).powf(k as f64 / (n - 1) as f64);
        let p = near_singular_point(&singular, index, target)?;
        let s = singular.distance_to(&p);
        let v = eta.provider().eta(&fol, &p)?;
        body.push_str(&format!("{s:e},{v:e},{:e}\n", v / (s * log_star(s))));
    }
    eta.finish(cfg)?;
    match &cfg.out {
        Some(path) => ctx.write_csv(path, body.as_bytes())?,
        None => print!("{}{body}", ctx.csv_header()?),
    }
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct CacheReport {
    key: String,
    summary: CacheSummary,
    validation: Option<CacheValidation>,
}

pub fn eta_cache(ctx: &Context) -> Result<Outcome> {
    let cfg = &ctx.config;
    let out = require(&cfg.out, "--out (cache file)")?;
    let fol = cfg.build_foliation()?;
    let singular = singular_set(&fol)?;
    let cache = EtaCache::new(&fol, &singular, GridSpec { depth: cfg.depth()?, ..GridSpec::default() })?;
    if out.exists() {
        cache.load(out)?;
    }
    cache.fill();
    cache.save(out)?;
    let validation = match cfg.validate.unwrap_or(0) {
        0 => None,
        n => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
            let charts = fol.charts();
            let pts: Vec<ChartPoint> = (0..n)
                .map(|i| {
                    let chart = charts[i % charts.len()];
                    let r = if chart == ChartId::Plane { 0.9 } else { 1.0 };
                    let mut draw = || C::from_polar(r * rng.random::<f64>().sqrt(), rng.random_range(0.0..std::f64::consts::TAU));
                    ChartPoint { chart, coords: [draw(), draw()] }
                })
                .filter(|p| fol.contains(p))
                .collect();
            Some(cache.validate(&pts)?)
        }
    };
    ctx.emit(CacheReport { key: cache.key(), summary: cache.summary(), validation }, cfg.report.as_deref())?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct IntegrabilityReport {
    horizons: [f64; 2],
    log_star_integral: [f64; 2],
    weight_w_integral: [f64; 2],
    log_star_change: f64,
    weight_w_change: f64,
    tolerance: f64,
    pass: bool,
}

pub fn integrability(ctx: &Context) -> Result<Outcome> {
    let cfg = &ctx.config;
    let fol = cfg.build_foliation()?;
    let singular = singular_set(&fol)?;
    let eta = Eta::build(&fol, &singular, cfg)?;
    let starts = default_starts(&fol, &singular, cfg.starts(5)?, cfg.seed());
    let h = cfg.horizon(100.0)?;
    let mut ls = [0.0; 2];
    let mut ww = [0.0; 2];
    for (k, horizon) in [h, 2.0 * h].into_iter().enumerate() {
        let grid = run_ensemble(&fol, &singular, &starts, eta.provider(), &ensemble_config(cfg, horizon, 100)?)?.grid;
        ls[k] = integrability_diagnostic(&grid)?;
        ww[k] = weight_w_diagnostic(&grid)?;
    }
    eta.finish(cfg)?;
    let change = |v: [f64; 2]| (v[1] - v[0]).abs() / v[0].abs();
    let (lc, wc) = (change(ls), change(ww));
    let pass = lc < STABILITY_TOLERANCE && wc < STABILITY_TOLERANCE;
    eprintln!("log* integral {:.4} → {:.4}, W integral {:.4} → {:.4}", ls[0], ls[1], ww[0], ww[1]);
    let report = IntegrabilityReport {
        horizons: [h, 2.0 * h],
        log_star_integral: ls,
        weight_w_integral: ww,
        log_star_change: lc,
        weight_w_change: wc,
        tolerance: STABILITY_TOLERANCE,
        pass,
    };
    ctx.emit(report, cfg.out.as_deref())?;
    Ok(Outcome::of(pass))
}
