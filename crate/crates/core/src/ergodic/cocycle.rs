use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::{radius_to_euclidean, DiscPoint};
use crate::leafwise::PathSample;

type C = Complex64;

/// Paths along which a cocycle can be evaluated and shifted.
pub trait CocyclePath: Sized {
    fn shifted_by(&self, s: f64) -> Result<Self>;
}

/// `(path, t) ↦ log‖A(path, t)‖` for a rank-one cocycle.
pub trait CocycleEvaluator<P> {
    fn log_norm(&self, path: &P, t: f64) -> Result<f64>;
}

/// Largest violation of `A(ω, 0) = 0` and `A(ω, s+t) = A(ω, s) + A(σ_s ω, t)`
/// over the given `(s, t)` pairs.
pub fn check_cocycle_laws<P: CocyclePath, E: CocycleEvaluator<P>>(eval: &E, path: &P, pairs: &[(f64, f64)]) -> Result<f64> {
    let mut worst = eval.log_norm(path, 0.0)?.abs();
    for &(s, t) in pairs {
        let whole = eval.log_norm(path, s + t)?;
        let split = eval.log_norm(path, s)? + eval.log_norm(&path.shifted_by(s)?, t)?;
        worst = worst.max((whole - split).abs());
    }
    Ok(worst)
}

impl CocyclePath for PathSample {
    fn shifted_by(&self, s: f64) -> Result<Self> {
        self.shifted(s)
    }
}

/// The holonomy cocycle read off a sampled path.
#[derive(Debug, Clone, Copy, Default)]
pub struct HolonomyCocycle;

impl CocycleEvaluator<PathSample> for HolonomyCocycle {
    fn log_norm(&self, path: &PathSample, t: f64) -> Result<f64> {
        if t > path.total_time() * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::domain(format!("time {t} beyond the path horizon {}", path.total_time())));
        }
        Ok(path.log_holonomy_at(t))
    }
}

/// Unit-speed geodesic of the Poincaré disc through `start` with initial
/// direction `theta` (radians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscGeodesic {
    pub start: DiscPoint,
    pub theta: f64,
}

impl DiscGeodesic {
    pub fn point_at(&self, t: f64) -> Result<DiscPoint> {
        let z = DiscPoint::new(C::from_polar(radius_to_euclidean(t)?, self.theta))?;
        Ok(z.transported_to(self.start))
    }
}

impl CocyclePath for DiscGeodesic {
    fn shifted_by(&self, s: f64) -> Result<Self> {
        let b = self.start.value();
        let z = C::from_polar(radius_to_euclidean(s)?, self.theta);
        let one = C::new(1.0, 0.0);
        // Tangent direction of the Möbius image at z.
        let deriv = (1.0 - b.norm_sqr()) / ((one + b.conj() * z) * (one + b.conj() * z));
        Ok(DiscGeodesic { start: self.point_at(s)?, theta: self.theta + deriv.arg() })
    }
}

/// Geodesics available for the expansion rate.
pub trait GeodesicSupply {
    fn geodesic(&self, x: DiscPoint, theta: f64) -> Result<DiscGeodesic>;
}

/// Exact geodesics of the disc.
#[derive(Debug, Clone, Copy, Default)]
pub struct DiscGeodesics;

impl GeodesicSupply for DiscGeodesics {
    fn geodesic(&self, x: DiscPoint, theta: f64) -> Result<DiscGeodesic> {
        Ok(DiscGeodesic { start: x, theta })
    }
}

/// Leaf geodesics need the covering map, which is not computable.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoGeodesics;

impl GeodesicSupply for NoGeodesics {
    fn geodesic(&self, _x: DiscPoint, _theta: f64) -> Result<DiscGeodesic> {
        Err(Error::Unsupported("no geodesic supply for generic leaves".into()))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityCocycle;

impl CocycleEvaluator<DiscGeodesic> for IdentityCocycle {
    fn log_norm(&self, _path: &DiscGeodesic, _t: f64) -> Result<f64> {
        Ok(0.0)
    }
}

/// `A(γ, t) = e^{ct}`.
#[derive(Debug, Clone, Copy)]
pub struct ExponentialCocycle {
    pub c: C,
}

impl CocycleEvaluator<DiscGeodesic> for ExponentialCocycle {
    fn log_norm(&self, _path: &DiscGeodesic, t: f64) -> Result<f64> {
        Ok(self.c.re * t)
    }
}

/// `e^{ct}` times a bounded coboundary `e^{b(γ(t)) − b(γ(0))}`, `|b| ≤ bound/2`.
#[derive(Debug, Clone, Copy)]
pub struct NoisyCocycle {
    pub c: C,
    pub bound: f64,
}

impl NoisyCocycle {
    fn potential(&self, z: DiscPoint) -> f64 {
        let z = z.value();
        0.5 * self.bound * (3.0 * z.re + 5.0 * z.im + 7.0 * z.norm_sqr()).sin()
    }
}

impl CocycleEvaluator<DiscGeodesic> for NoisyCocycle {
    fn log_norm(&self, path: &DiscGeodesic, t: f64) -> Result<f64> {
        Ok(self.c.re * t + self.potential(path.point_at(t)?) - self.potential(path.start))
    }
}

/// `(1/R)·log(‖A(γ, R) v‖/‖v‖)` along the supplied geodesic from `x` in
/// direction `theta`. At rank one the vector only has to be nonzero.
pub fn expansion_rate<E: CocycleEvaluator<DiscGeodesic>>(
    eval: &E,
    supply: &dyn GeodesicSupply,
    x: DiscPoint,
    theta: f64,
    v: Option<C>,
    big_r: f64,
) -> Result<f64> {
    if !(big_r > 0.0) {
        return Err(Error::input("R must be positive"));
    }
    if v.is_some_and(|v| v == C::new(0.0, 0.0)) {
        return Err(Error::input("the vector must be nonzero"));
    }
    let g = supply.geodesic(x, theta)?;
    Ok(eval.log_norm(&g, big_r)? / big_r)
}

/// Expansion rate averaged over `n_theta` equally spaced directions.
pub fn expansion_rate_averaged<E: CocycleEvaluator<DiscGeodesic>>(
    eval: &E,
    supply: &dyn GeodesicSupply,
    x: DiscPoint,
    big_r: f64,
    n_theta: usize,
) -> Result<f64> {
    if n_theta == 0 {
        return Err(Error::input("need at least one direction"));
    }
    let mut acc = 0.0;
    for k in 0..n_theta {
        let th = std::f64::consts::TAU * k as f64 / n_theta as f64;
        acc += expansion_rate(eval, supply, x, th, None, big_r)?;
    }
    Ok(acc / n_theta as f64)
}
