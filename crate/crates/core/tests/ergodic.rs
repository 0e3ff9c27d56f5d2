use foliage::ergodic::{
    diffusion_check_points, diffusion_invariance_check, integrability_diagnostic, lyapunov_report, run_ensemble,
    tv_distance, uniform_grid_points, unique_ergodicity_diagnostic, weight_w_diagnostic, EnsembleConfig, Estimator,
    OccupationSpec,
};
use foliage::foliation::{find_singularities, ChartPoint, PolyFoliation, SeedGrid, SingularSet};
use foliage::leafwise::{path_rng, Termination};
use foliage::poincare_metric::{log_star, EtaMethod};
use foliage::Result;
use num_complex::Complex64 as C;

/// Cheap stand-in for η with the `s·log*(s)` decay at the singular set.
fn synthetic_eta(singular: SingularSet) -> impl Fn(&PolyFoliation, &ChartPoint) -> Result<f64> + Send + Sync {
    move |_, p| {
        let s = singular.distance_to(&p.in_best_chart());
        let u = 3.0 * s * log_star(s);
        Ok(0.4 * u / (1.0 + u))
    }
}

fn jouanolou() -> (PolyFoliation, SingularSet) {
    let fol = PolyFoliation::jouanolou(2).unwrap();
    let singular = find_singularities(&fol, &SeedGrid::default()).unwrap();
    (fol, singular)
}

fn starts() -> Vec<ChartPoint> {
    vec![
        ChartPoint::affine(0, C::new(0.3, 0.1), C::new(-0.2, 0.4)),
        ChartPoint::affine(1, C::new(-0.5, 0.2), C::new(0.1, 0.6)),
        ChartPoint::affine(2, C::new(0.05, -0.7), C::new(0.4, 0.0)),
    ]
}

fn config(horizon: f64, n_paths: usize, bins: usize) -> EnsembleConfig {
    EnsembleConfig {
        horizon,
        n_paths,
        seed: 21,
        occupation: OccupationSpec { bins, reservoir_interval: 0.25 },
        ..Default::default()
    }
}

#[test]
fn single_path_bookkeeping() {
    let (fol, singular) = jouanolou();
    let eta = synthetic_eta(singular.clone());
    let cfg = EnsembleConfig { burn_in: 0.0, ..config(6.0, 1, 8) };
    let ens = run_ensemble(&fol, &singular, &starts()[..1], &eta, &cfg).unwrap();
    let p = ens.paths[0];
    assert_eq!(p.termination, Termination::Horizon);
    assert!((p.time - 6.0).abs() < 1e-9, "{}", p.time);
    assert!((p.window_time - p.time).abs() < 1e-9);
    assert!((ens.grid.total_time - 6.0).abs() < 1e-9, "{}", ens.grid.total_time);
    assert!((ens.grid.normalized().iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let burned = run_ensemble(&fol, &singular, &starts()[..1], &eta, &EnsembleConfig { burn_in: 0.5, ..cfg }).unwrap();
    assert_eq!(burned.paths[0].time, p.time);
    assert_eq!(burned.paths[0].log_holonomy, p.log_holonomy);
    assert!((burned.paths[0].window_time - 3.0).abs() < 0.05);
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let (fol, singular) = jouanolou();
    let eta = synthetic_eta(singular.clone());
    let cfg = config(3.0, 12, 8);
    let run = |workers: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
        pool.install(|| run_ensemble(&fol, &singular, &starts(), &eta, &cfg).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.paths, b.paths);
    assert_eq!(a.grid.weights, b.grid.weights);
    assert_eq!(a.grid.reservoir, b.grid.reservoir);
    let ra = lyapunov_report(&fol, &a.paths, cfg.horizon, Estimator::LogHolonomy, EtaMethod::FlowDisc);
    let rb = lyapunov_report(&fol, &b.paths, cfg.horizon, Estimator::LogHolonomy, EtaMethod::FlowDisc);
    assert_eq!(serde_json::to_string(&ra).unwrap(), serde_json::to_string(&rb).unwrap());
}

#[test]
fn identical_starts_give_identical_grids() {
    let (fol, singular) = jouanolou();
    let eta = synthetic_eta(singular.clone());
    let s = starts()[0];
    let r = unique_ergodicity_diagnostic(&fol, &singular, &[s, s], &eta, &config(2.0, 4, 8)).unwrap();
    assert_eq!(r.max_tv, 0.0);
    assert!(r.noise_floor > 0.0);
}

#[test]
fn ball_mass_vanishes_at_singular_points() {
    let (fol, singular) = jouanolou();
    let eta = synthetic_eta(singular.clone());
    let ens = run_ensemble(&fol, &singular, &starts(), &eta, &config(40.0, 24, 8)).unwrap();
    assert!(ens.grid.reservoir.len() > 3000);
    let radii = [0.4, 0.2, 0.1, 0.05, 0.025];
    let mut total = vec![0.0; radii.len()];
    for rec in &singular.records {
        for (k, &r) in radii.iter().enumerate() {
            total[k] += ens.grid.ball_mass(&rec.location, r);
        }
    }
    assert!(total.windows(2).all(|w| w[1] <= w[0]), "{total:?}");
    assert!(total[4] < 0.25 * total[0], "{total:?}");
}

#[test]
fn per_path_spread_shrinks_with_horizon() {
    let (fol, singular) = jouanolou();
    let eta = synthetic_eta(singular.clone());
    let iqr: Vec<f64> = [8.0, 32.0]
        .iter()
        .map(|&h| {
            let ens = run_ensemble(&fol, &singular, &starts(), &eta, &config(h, 36, 8)).unwrap();
            lyapunov_report(&fol, &ens.paths, h, Estimator::LogHolonomy, EtaMethod::FlowDisc).interquartile_range
        })
        .collect();
    // 1/√T predicts a factor 2.
    assert!(iqr[1] < 0.75 * iqr[0], "{iqr:?}");
}

#[test]
fn invariance_beats_the_uniform_control() {
    let (fol, singular) = jouanolou();
    let eta = synthetic_eta(singular.clone());
    let ens = run_ensemble(&fol, &singular, &starts(), &eta, &config(60.0, 24, 4)).unwrap();
    let n = 400;
    let still = diffusion_invariance_check(&ens.grid, &fol, &singular, &eta, 0.0, n, 3).unwrap();
    assert!(still.tv <= still.noise_floor + 0.1, "{still:?}");
    let moved = diffusion_invariance_check(&ens.grid, &fol, &singular, &eta, 1.0, n, 3).unwrap();
    let mut rng = path_rng(17, 0);
    let uniform: Vec<ChartPoint> = uniform_grid_points(&ens.grid, 4 * n, &mut rng)
        .into_iter()
        .filter(|p| fol.contains(p) && singular.distance_to(&p.in_best_chart()) > 1e-3)
        .take(2 * n)
        .collect();
    assert_eq!(uniform.len(), 2 * n);
    let control =
        diffusion_check_points(&fol, &singular, &eta, &ens.grid, &uniform[..n], &uniform[n..], 1.0, 3).unwrap();
    assert!(control.excess > moved.excess + 0.05, "invariance {moved:?} control {control:?}");
}

#[test]
fn integrals_are_finite_and_grids_comparable() {
    let (fol, singular) = jouanolou();
    let eta = synthetic_eta(singular.clone());
    let a = run_ensemble(&fol, &singular, &starts(), &eta, &config(10.0, 12, 8)).unwrap();
    let b = run_ensemble(&fol, &singular, &starts(), &eta, &EnsembleConfig { seed: 22, ..config(10.0, 12, 8) }).unwrap();
    for g in [&a.grid, &b.grid] {
        let l = integrability_diagnostic(g).unwrap();
        let w = weight_w_diagnostic(g).unwrap();
        assert!(l.is_finite() && l >= 1.0, "{l}");
        assert!(w.is_finite() && w > 0.0, "{w}");
    }
    let d = tv_distance(&a.grid, &b.grid).unwrap();
    assert!(d > 0.0 && d < 1.0);
    assert_eq!(d, tv_distance(&b.grid, &a.grid).unwrap());
}
