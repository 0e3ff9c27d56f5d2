use foliage::foliation::{find_singularities, ChartPoint, LocalModelPoint, PolyFoliation, SeedGrid};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

// Independent resultant-based root counts of the chart-0 system.
const JOUANOLOU_2_COUNT: usize = 7;
const JOUANOLOU_3_COUNT: usize = 13;

#[test]
fn jouanolou_singularities() {
    for (d, expected) in [(2, JOUANOLOU_2_COUNT), (3, JOUANOLOU_3_COUNT)] {
        let f = PolyFoliation::jouanolou(d).unwrap();
        let set = find_singularities(&f, &SeedGrid::default()).unwrap();
        assert_eq!(set.records.len(), expected, "degree {d}");
        assert!(set.all_hyperbolic());
        for r in &set.records {
            let z = f.evaluate_field(&r.location).unwrap();
            assert!(z[0].norm() + z[1].norm() < 1e-10);
            assert!(r.ratio.im.abs() > 1e-6);
        }
    }
}

/// `∂_ζ∂_ζ̄ g(0)` by the five-point Laplacian with one Richardson step.
fn mixed_second_derivative(g: impl Fn(Complex64) -> f64, h: f64) -> f64 {
    let lap = |h: f64| {
        let s = g(Complex64::new(h, 0.0)) + g(Complex64::new(-h, 0.0)) + g(Complex64::new(0.0, h))
            + g(Complex64::new(0.0, -h));
        (s - 4.0 * g(Complex64::new(0.0, 0.0))) / (h * h)
    };
    0.25 * (4.0 * lap(0.5 * h) - lap(h)) / 3.0
}

#[test]
fn curvature_closed_form_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let lam = Complex64::new(rng.random_range(-1.5..1.5), rng.random_range(0.2..3.0));
        let z = Complex64::from_polar(rng.random_range(0.05..0.9), rng.random_range(0.0..2.0 * PI));
        let w = Complex64::from_polar(rng.random_range(0.05..0.9), rng.random_range(0.0..2.0 * PI));
        let m = LocalModelPoint::new(lam, z, w).unwrap();
        let fd = mixed_second_derivative(|zeta| m.holonomy(zeta).unwrap().ln(), 1e-3) / (2.0 * PI);
        let exact = m.curvature_numerator().unwrap();
        assert!(((fd - exact) / exact).abs() < 1e-4, "{fd} vs {exact}");
    }
}

#[test]
fn product_disc_and_linear_model_points() {
    let f = PolyFoliation::product_disc();
    assert!(f.contains(&ChartPoint::plane(Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.9))));
    assert!(!f.contains(&ChartPoint::plane(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))));
}
