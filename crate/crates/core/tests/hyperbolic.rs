use foliage::hyperbolic::{
    birkhoff_discrepancy, diffusion_average, dist_hyperbolic, mass_mr, sample_bm_step, DiscPoint,
    HeatKernelTable,
};
use foliage::hyperbolic::averaging_fns::{CappedDistance, Constant};
use foliage::stats::ks_against;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

// Independent quadrature of the radial law at t = 1.
const MEAN_DIST_T1: f64 = 2.037_133_978_399_498;
// Independent quadrature of E|ζ|² at t = 2.
const MEAN_SQ_MODULUS_T2: f64 = 0.733_911_672_395_443_1;
// Independent double quadrature of both sides for f = min(ρ, 1), R = 10 (signed B − A).
const BIRKHOFF_R10: f64 = -2.403_089_894_450_483e-4;

#[test]
fn chapman_kolmogorov() {
    let t1 = HeatKernelTable::build(1.0, 2048).unwrap();
    let t2 = HeatKernelTable::build(2.0, 2048).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let o = DiscPoint::origin();
    let d: Vec<f64> = (0..100_000)
        .map(|_| {
            let a = sample_bm_step(o, &t1, &mut rng);
            dist_hyperbolic(o, sample_bm_step(a, &t1, &mut rng))
        })
        .collect();
    assert!(ks_against(&d, |r| t2.cdf_at(r)) < 0.01);
}

#[test]
fn semigroup_and_distance_mean() {
    let t1 = HeatKernelTable::build(1.0, 2048).unwrap();
    let t2 = HeatKernelTable::build(2.0, 2048).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let o = DiscPoint::origin();
    let f = |p: DiscPoint| p.value().norm_sqr();
    let direct = diffusion_average(f, o, &t2, 100_000, &mut rng).unwrap();
    let nested: Vec<f64> = (0..100_000)
        .map(|_| f(sample_bm_step(sample_bm_step(o, &t1, &mut rng), &t1, &mut rng)))
        .collect();
    let nested = foliage::hyperbolic::MeanEstimate::from_samples(&nested);
    let se = (direct.stderr.powi(2) + nested.stderr.powi(2)).sqrt();
    assert!((direct.mean - nested.mean).abs() < 3.0 * se);
    assert!((direct.mean - MEAN_SQ_MODULUS_T2).abs() < 3.0 * direct.stderr);

    let dist = diffusion_average(|p| dist_hyperbolic(o, p), o, &t1, 100_000, &mut rng).unwrap();
    assert!((dist.mean - MEAN_DIST_T1).abs() < 3.0 * dist.stderr);
}

#[test]
fn median_grows_with_time() {
    let a = HeatKernelTable::build(1.0, 512).unwrap();
    let b = HeatKernelTable::build(4.0, 512).unwrap();
    assert!(b.median() > a.median());
}

#[test]
fn nevanlinna_mass_deficiency_is_bounded() {
    let bound = 4.0 * PI * 2f64.ln();
    let mut sup = 0.0f64;
    for k in 0..=38 {
        let big_r = 1.0 + 0.5 * k as f64;
        sup = sup.max((mass_mr(big_r).unwrap() - 2.0 * PI * big_r).abs());
    }
    assert!(sup < bound, "{sup} vs {bound}");
}

#[test]
fn birkhoff_bridge() {
    let f = CappedDistance(1.0);
    let r10 = birkhoff_discrepancy(&f, 10.0).unwrap();
    let signed = r10.nevanlinna_average - r10.diffusion_average;
    assert!((signed - BIRKHOFF_R10).abs() < 1e-8, "{signed}");
    let r40 = birkhoff_discrepancy(&f, 40.0).unwrap();
    assert!(r40.discrepancy < r10.discrepancy);
    let mut ratios = Vec::new();
    for big_r in [5.0, 10.0, 20.0, 40.0] {
        let d = birkhoff_discrepancy(&f, big_r).unwrap().discrepancy;
        ratios.push(d / (big_r.powf(-0.5) * big_r.ln().sqrt()));
    }
    assert!(ratios.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(birkhoff_discrepancy(&Constant(1.0), 10.0).unwrap().discrepancy, 0.0);
}

#[test]
fn base_point_does_not_change_radial_law() {
    let tab = HeatKernelTable::build(1.0, 2048).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let base = DiscPoint::new(Complex64::new(-0.2, 0.65)).unwrap();
    let d: Vec<f64> = (0..50_000)
        .map(|_| dist_hyperbolic(base, sample_bm_step(base, &tab, &mut rng)))
        .collect();
    assert!(ks_against(&d, |r| tab.cdf_at(r)) < 0.01);
}
