use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use std::f64::consts::PI;

use super::{DiscPoint, HeatKernelTable};
use crate::error::{Error, Result};

/// One transition of Brownian motion on the disc over the table's time.
pub fn sample_bm_step<R: Rng + ?Sized>(base: DiscPoint, table: &HeatKernelTable, rng: &mut R) -> DiscPoint {
    let rho = table.quantile(rng.random::<f64>());
    let theta = 2.0 * PI * rng.random::<f64>();
    let r = (0.5 * rho).tanh().min(1.0 - f64::EPSILON);
    let z = DiscPoint(Complex64::from_polar(r, theta));
    z.transported_to(base)
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = crate::quad::kahan_sum(xs.iter().copied()) / n as f64;
        let var = if n > 1 {
            crate::quad::kahan_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64
        } else {
            0.0
        };
        MeanEstimate {
            mean,
            stderr: (var / n as f64).sqrt(),
            n,
        }
    }
}

/// Monte Carlo estimate of `(D_t f)(x)` with `t` the table's time.
pub fn diffusion_average<F, R>(f: F, x: DiscPoint, table: &HeatKernelTable, n: usize, rng: &mut R) -> Result<MeanEstimate>
where
    F: Fn(DiscPoint) -> f64,
    R: Rng + ?Sized,
{
    if n == 0 {
        return Err(Error::input("sample count must be ≥ 1"));
    }
    let xs: Vec<f64> = (0..n).map(|_| f(sample_bm_step(x, table, rng))).collect();
    Ok(MeanEstimate::from_samples(&xs))
}
