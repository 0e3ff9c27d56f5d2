use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::flow::{flow_step, holonomy_variational};
use super::sampler::holonomy_along;
use crate::error::{Error, Result};
use crate::foliation::{LocalModelPoint, PolyFoliation};

type C = Complex64;

pub const HOLONOMY_TOLERANCE: f64 = 1e-8;
pub const CURVATURE_TOLERANCE: f64 = 1e-4;

/// Worst errors of the linear-model cross-checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalModelReport {
    /// Fixed λ, or `None` when λ was drawn per case.
    pub lambda: Option<[f64; 2]>,
    pub cases: usize,
    pub seed: u64,
    /// `|holonomy_along − log Φ|` over all cases.
    pub max_holonomy_error: f64,
    /// Trace reduction against the variational equation.
    pub max_variational_error: f64,
    pub curvature_cases: usize,
    /// Relative error of the finite-difference `∂∂̄ log Φ` against the closed form.
    pub max_curvature_error: f64,
    pub pass: bool,
}

fn random_in_disc(rng: &mut impl Rng, r: f64) -> C {
    loop {
        let z = C::new(rng.random_range(-r..r), rng.random_range(-r..r));
        if z.norm() < r {
            return z;
        }
    }
}

/// `∂_ζ∂_ζ̄ g(0)` by the five-point Laplacian with one Richardson step.
fn mixed_second_derivative(g: impl Fn(C) -> Result<f64>, h: f64) -> Result<f64> {
    let lap = |h: f64| -> Result<f64> {
        let s = g(C::new(h, 0.0))? + g(C::new(-h, 0.0))? + g(C::new(0.0, h))? + g(C::new(0.0, -h))?;
        Ok((s - 4.0 * g(C::new(0.0, 0.0))?) / (h * h))
    };
    Ok(0.25 * (4.0 * lap(0.5 * h)? - lap(h)?) / 3.0)
}

/// Randomized holonomy and curvature checks on `z∂/∂z + λw∂/∂w`. With
/// `lambda = None` each case draws its own λ. The variational comparison
/// runs on every tenth case and the curvature check on at most 100.
pub fn verify_local_model(lambda: Option<C>, cases: usize, seed: u64) -> Result<LocalModelReport> {
    if let Some(l) = lambda {
        if !(l.im > 0.0) {
            return Err(Error::input(format!("λ = {l} must have positive imaginary part")));
        }
    }
    if cases == 0 {
        return Err(Error::input("need at least one case"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw_lambda = |rng: &mut ChaCha8Rng| {
        lambda.unwrap_or_else(|| C::new(rng.random_range(-2.0..2.0), rng.random_range(0.2..3.0)))
    };
    let (mut hol, mut var) = (0.0f64, 0.0f64);
    let mut done = 0;
    while done < cases {
        let lam = draw_lambda(&mut rng);
        let (z, w) = (random_in_disc(&mut rng, 0.9), random_in_disc(&mut rng, 0.9));
        let zeta = random_in_disc(&mut rng, 1.0);
        if z.norm() + w.norm() < 1e-3 {
            continue;
        }
        let m = LocalModelPoint::new(lam, z, w)?;
        let fol = PolyFoliation::linear_model(lam)?;
        let dtau = C::new(0.0, 1.0) * zeta;
        let seg = flow_step(&fol, &m.chart_point(), dtau)?;
        let log_h = holonomy_along(&seg);
        hol = hol.max((log_h - m.holonomy(zeta)?.ln()).abs());
        if done % 10 == 0 {
            var = var.max((seg.log_holonomy - holonomy_variational(&fol, &m.chart_point(), dtau, 2000)?).abs());
        }
        done += 1;
    }
    let curvature_cases = cases.min(100);
    let mut curv = 0.0f64;
    for _ in 0..curvature_cases {
        let lam = draw_lambda(&mut rng);
        let z = C::from_polar(rng.random_range(0.05..0.9), rng.random_range(0.0..2.0 * PI));
        let w = C::from_polar(rng.random_range(0.05..0.9), rng.random_range(0.0..2.0 * PI));
        let m = LocalModelPoint::new(lam, z, w)?;
        let fd = mixed_second_derivative(|zeta| Ok(m.holonomy(zeta)?.ln()), 1e-3)? / (2.0 * PI);
        let exact = m.curvature_numerator()?;
        curv = curv.max(((fd - exact) / exact).abs());
    }
    Ok(LocalModelReport {
        lambda: lambda.map(|l| [l.re, l.im]),
        cases,
        seed,
        max_holonomy_error: hol,
        max_variational_error: var,
        curvature_cases,
        max_curvature_error: curv,
        pass: hol < HOLONOMY_TOLERANCE && var < HOLONOMY_TOLERANCE && curv < CURVATURE_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_lambda_is_rejected() {
        assert!(matches!(verify_local_model(Some(C::new(2.0, 0.0)), 10, 0), Err(Error::Input(_))));
    }

    #[test]
    fn small_run_passes() {
        let r = verify_local_model(Some(C::new(0.0, 1.0)), 20, 1).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
