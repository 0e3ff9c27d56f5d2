//! Geometry, heat kernel, Brownian sampling and averaging operators on the
//! Poincaré disc with its curvature −1 metric `4|dζ|²/(1−|ζ|²)²`.

mod averaging;
pub mod averaging_fns {
    pub use super::averaging::{CappedDistance, Constant};
}
mod kernel;
mod sampling;

pub use averaging::{
    birkhoff_discrepancy, mass_mr, mass_mr_closed_form, nevanlinna_weight, BirkhoffReport, RadialFn,
};
pub use kernel::{green_identity_residual, heat_kernel, heat_kernel_with, kernel_mass, GreenResidual, HeatKernelTable};
pub use sampling::{diffusion_average, sample_bm_step, MeanEstimate};

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A point of the open unit disc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscPoint(Complex64);

impl DiscPoint {
    pub fn new(value: Complex64) -> Result<Self> {
        if !(value.norm() < 1.0) {
            return Err(Error::input(format!("|{value}| must be < 1")));
        }
        Ok(DiscPoint(value))
    }

    pub fn origin() -> Self {
        DiscPoint(Complex64::new(0.0, 0.0))
    }

    pub fn value(self) -> Complex64 {
        self.0
    }

    /// Image of `self` under the disc automorphism sending 0 to `base`.
    pub fn transported_to(self, base: DiscPoint) -> DiscPoint {
        let z = self.0;
        let b = base.0;
        let w = (z + b) / (Complex64::new(1.0, 0.0) + b.conj() * z);
        // Rounding can push |w| onto the circle when both points are near it.
        let n = w.norm();
        if n < 1.0 {
            DiscPoint(w)
        } else {
            DiscPoint(w * ((1.0 - f64::EPSILON) / n))
        }
    }
}

/// Euclidean radius `r` to hyperbolic radius `log((1+r)/(1−r))`.
pub fn radius_to_hyperbolic(r: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::input(format!("euclidean radius {r} outside [0,1)")));
    }
    Ok(2.0 * r.atanh())
}

/// Hyperbolic radius `R` to Euclidean radius `tanh(R/2)`.
pub fn radius_to_euclidean(big_r: f64) -> Result<f64> {
    if !(big_r >= 0.0) || !big_r.is_finite() {
        return Err(Error::input(format!("hyperbolic radius {big_r} must be finite and ≥ 0")));
    }
    Ok((0.5 * big_r).tanh())
}

pub fn dist_hyperbolic(a: DiscPoint, b: DiscPoint) -> f64 {
    let one = Complex64::new(1.0, 0.0);
    let m = ((b.0 - a.0) / (one - a.0.conj() * b.0)).norm().min(1.0 - f64::EPSILON);
    2.0 * m.atanh()
}

/// Unit-speed geodesic from the origin in direction `theta` (in turns).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicRay {
    direction: f64,
}

impl GeodesicRay {
    pub fn new(direction: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&direction) {
            return Err(Error::input(format!("direction {direction} outside [0,1)")));
        }
        Ok(GeodesicRay { direction })
    }

    pub fn direction(&self) -> f64 {
        self.direction
    }

    pub fn at(&self, big_r: f64) -> Result<DiscPoint> {
        let r = radius_to_euclidean(big_r)?;
        if r >= 1.0 {
            return Err(Error::domain(format!("R = {big_r} is not representable in the disc")));
        }
        DiscPoint::new(Complex64::from_polar(r, 2.0 * PI * self.direction))
    }
}

pub fn geodesic_ray(theta: f64, big_r: f64) -> Result<DiscPoint> {
    GeodesicRay::new(theta)?.at(big_r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn radius_conversion() {
        assert_eq!(radius_to_hyperbolic(0.0).unwrap(), 0.0);
        assert_eq!(radius_to_euclidean(0.0).unwrap(), 0.0);
        assert!((radius_to_hyperbolic(0.5).unwrap() - 3f64.ln()).abs() < 1e-15);
        for r in [0.0, 0.1, 0.5, 0.9, 0.999] {
            let back = radius_to_euclidean(radius_to_hyperbolic(r).unwrap()).unwrap();
            assert!((back - r).abs() < 1e-14);
        }
        assert!(radius_to_hyperbolic(1.0).is_err());
        assert!(radius_to_euclidean(-1.0).is_err());
    }

    #[test]
    fn disc_point_rejects_boundary() {
        assert!(DiscPoint::new(c(1.0, 0.0)).is_err());
        assert!(DiscPoint::new(c(0.6, 0.8)).is_err());
        assert!(DiscPoint::new(c(0.6, 0.7)).is_ok());
    }

    #[test]
    fn distances() {
        let o = DiscPoint::origin();
        let half = DiscPoint::new(c(0.5, 0.0)).unwrap();
        assert_eq!(dist_hyperbolic(o, o), 0.0);
        assert!((dist_hyperbolic(o, half) - 3f64.ln()).abs() < 1e-14);
        let a = DiscPoint::new(c(0.3, 0.0)).unwrap();
        let b = DiscPoint::new(c(-0.3, 0.0)).unwrap();
        let reduced = DiscPoint::new(c(0.6 / 1.09, 0.0)).unwrap();
        assert!((dist_hyperbolic(a, b) - dist_hyperbolic(o, reduced)).abs() < 1e-14);
        assert!((dist_hyperbolic(a, b) - dist_hyperbolic(b, a)).abs() < 1e-15);
    }

    #[test]
    fn geodesic_rays() {
        for th in [0.0, 0.3, 0.77] {
            assert_eq!(geodesic_ray(th, 0.0).unwrap().value().norm(), 0.0);
            for big_r in [0.5, 1.0, 2.0, 5.0] {
                let p = geodesic_ray(th, big_r).unwrap();
                assert!((dist_hyperbolic(DiscPoint::origin(), p) - big_r).abs() < 1e-12);
            }
        }
        assert!((geodesic_ray(0.0, 3f64.ln()).unwrap().value() - c(0.5, 0.0)).norm() < 1e-15);
        let q = geodesic_ray(0.25, 1.0).unwrap().value();
        assert!((q - c(0.0, 0.5f64.tanh())).norm() < 1e-15);
    }

    #[test]
    fn transport_is_isometry() {
        let base = DiscPoint::new(c(0.4, -0.2)).unwrap();
        let p = DiscPoint::new(c(-0.1, 0.6)).unwrap();
        let q = DiscPoint::new(c(0.3, 0.3)).unwrap();
        let d0 = dist_hyperbolic(p, q);
        let d1 = dist_hyperbolic(p.transported_to(base), q.transported_to(base));
        assert!((d0 - d1).abs() < 1e-12);
        assert!((DiscPoint::origin().transported_to(base).value() - base.value()).norm() < 1e-15);
    }
}
