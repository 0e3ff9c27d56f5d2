use serde::Serialize;
use std::f64::consts::PI;

use super::{heat_kernel_with, DiscPoint};
use crate::error::{Error, Result};
use crate::quad::{integrate_pieces, QuadConfig};

/// A bounded radial function on the disc, `f(ζ) = value(dist(0, ζ))`.
pub trait RadialFn: Sync {
    fn value(&self, rho: f64) -> f64;

    /// Limit at infinity when known. Both averaging operators preserve
    /// constants, so it is subtracted before quadrature.
    fn limit(&self) -> Option<f64> {
        None
    }

    /// Points where `value` is not smooth.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// The constant function.
#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl RadialFn for Constant {
    fn value(&self, _rho: f64) -> f64 {
        self.0
    }

    fn limit(&self) -> Option<f64> {
        Some(self.0)
    }
}

/// `min(dist(0, ζ), cap)`.
#[derive(Debug, Clone, Copy)]
pub struct CappedDistance(pub f64);

impl RadialFn for CappedDistance {
    fn value(&self, rho: f64) -> f64 {
        rho.min(self.0)
    }

    fn limit(&self) -> Option<f64> {
        Some(self.0)
    }

    fn kinks(&self) -> Vec<f64> {
        vec![self.0]
    }
}

/// Nevanlinna weight `log⁺(r_R/|ζ|)` with `r_R = tanh(R/2)`; infinite at 0.
pub fn nevanlinna_weight(zeta: DiscPoint, big_r: f64) -> Result<f64> {
    if !(big_r > 0.0) {
        return Err(Error::input(format!("R = {big_r} must be > 0")));
    }
    let r = (0.5 * big_r).tanh();
    let m = zeta.value().norm();
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((r / m).ln().max(0.0))
}

fn tight() -> QuadConfig {
    QuadConfig {
        abs_tol: 1e-14,
        rel_tol: 1e-13,
        max_intervals: 4000,
    }
}

/// `log(r_R / tanh(ρ/2))` for `ρ < R`, written to keep precision as ρ → R.
fn log_weight(rho: f64, big_r: f64) -> f64 {
    if rho <= 0.0 {
        return f64::INFINITY;
    }
    log_tanh_half(big_r) - log_tanh_half(rho)
}

/// `log tanh(x/2)` accurate for large `x`.
fn log_tanh_half(x: f64) -> f64 {
    let e = (-x).exp();
    (-e).ln_1p() - e.ln_1p()
}

fn sorted_breaks(lo: f64, hi: f64, extra: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut b: Vec<f64> = extra.into_iter().filter(|&x| x > lo && x < hi).collect();
    b.push(lo);
    b.push(hi);
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// `M_R = ∫ log⁺(r_R/|ζ|) dArea` by quadrature in the hyperbolic radius.
pub fn mass_mr(big_r: f64) -> Result<f64> {
    if !(big_r > 0.0) {
        return Err(Error::input(format!("R = {big_r} must be > 0")));
    }
    let breaks = sorted_breaks(
        0.0,
        big_r,
        (1..8).map(|k| big_r * k as f64 / 8.0).chain([1e-4, 1e-3, 1e-2, 0.1, 1.0]),
    );
    let q = integrate_pieces(
        |rho| {
            if rho == 0.0 {
                0.0
            } else {
                log_weight(rho, big_r) * 2.0 * PI * rho.sinh()
            }
        },
        &breaks,
        tight(),
    )?;
    Ok(q.value)
}

/// Closed form `4π log cosh(R/2)` of the Nevanlinna mass.
pub fn mass_mr_closed_form(big_r: f64) -> f64 {
    let x = 0.5 * big_r;
    // log cosh x = x + log((1 + e^{-2x})/2)
    4.0 * PI * (x + (0.5 * (1.0 + (-2.0 * x).exp())).ln())
}

/// The two sides of the B_R versus time-averaged diffusion comparison.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BirkhoffReport {
    pub radius: f64,
    pub nevanlinna_average: f64,
    pub diffusion_average: f64,
    pub discrepancy: f64,
}

/// `|B_R f(0) − (2π/M_R) ∫₀^{M_R/2π} (D_t f)(0) dt|` with both sides by quadrature.
pub fn birkhoff_discrepancy<F: RadialFn>(f: &F, big_r: f64) -> Result<BirkhoffReport> {
    let mass = mass_mr(big_r)?;
    let shift = f.limit().unwrap_or(0.0);
    let h = |rho: f64| f.value(rho) - shift;
    let kinks = f.kinks();
    let mut failure: Option<Error> = None;

    let b_breaks = sorted_breaks(
        0.0,
        big_r,
        kinks.iter().copied().chain([1e-4, 1e-3, 1e-2, 0.1, 1.0, 0.5 * big_r]),
    );
    let b_side = integrate_pieces(
        |rho| {
            if rho == 0.0 {
                0.0
            } else {
                log_weight(rho, big_r) * h(rho) * 2.0 * PI * rho.sinh()
            }
        },
        &b_breaks,
        tight(),
    )?
    .value
        / mass;

    let kcfg = QuadConfig {
        abs_tol: 1e-15,
        rel_tol: 1e-12,
        max_intervals: 2000,
    };
    let mut d_t = |t: f64| -> f64 {
        if t == 0.0 {
            return h(0.0);
        }
        let top = t + 12.0 * (2.0 * t).sqrt() + 6.0;
        let s = t.sqrt();
        let breaks = sorted_breaks(0.0, top, kinks.iter().copied().chain([s, 4.0 * s, 10.0 * s, t]));
        let q = integrate_pieces(
            |rho| {
                let hv = h(rho);
                if hv == 0.0 || rho == 0.0 {
                    return 0.0;
                }
                match heat_kernel_with(rho, t, kcfg) {
                    Ok(p) => hv * p * 2.0 * PI * rho.sinh(),
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            },
            &breaks,
            tight(),
        );
        match q {
            Ok(q) => q.value,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let horizon = mass / (2.0 * PI);
    let t_breaks = sorted_breaks(0.0, horizon, [1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]);
    let a_side = integrate_pieces(
        &mut d_t,
        &t_breaks,
        QuadConfig {
            abs_tol: 1e-14,
            rel_tol: 1e-12,
            max_intervals: 4000,
        },
    )?
    .value
        / horizon;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(BirkhoffReport {
        radius: big_r,
        nevanlinna_average: shift + b_side,
        diffusion_average: shift + a_side,
        discrepancy: (b_side - a_side).abs(),
    })
}
