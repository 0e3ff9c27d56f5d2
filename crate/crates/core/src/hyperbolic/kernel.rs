use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_pieces, QuadConfig};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

use super::DiscPoint;

/// `exp(-x) / sqrt(sinh(y))` without overflow for large `y`.
fn damped_inv_sqrt_sinh(x: f64, y: f64) -> f64 {
    if y > 20.0 {
        (-x - 0.5 * y).exp() * (2.0 / (1.0 - (-2.0 * y).exp())).sqrt()
    } else {
        (-x).exp() / y.sinh().sqrt()
    }
}

fn sinhc(a: f64) -> f64 {
    if a < 1e-4 {
        1.0 + a * a / 6.0
    } else {
        a.sinh() / a
    }
}

fn kernel_prefactor(t: f64) -> f64 {
    std::f64::consts::SQRT_2 * (-0.25 * t).exp() / (4.0 * PI * t).powf(1.5)
}

/// Heat kernel `p(0, ζ, t)` of the disc as a function of `ρ = dist(0, ζ)`,
/// with absolute tolerance 1e-9.
pub fn heat_kernel(rho: f64, t: f64) -> Result<f64> {
    heat_kernel_with(rho, t, QuadConfig::default())
}

/// Heat kernel with explicit quadrature tolerances (applied to the kernel value).
pub fn heat_kernel_with(rho: f64, t: f64, cfg: QuadConfig) -> Result<f64> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::input(format!("rho = {rho} must be ≥ 0")));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::input(format!("t = {t} must be > 0")));
    }
    let pre = kernel_prefactor(t);
    // s = ρ + u² removes the inverse square root at s = ρ.
    let integrand = |u: f64| {
        let a = 0.5 * u * u;
        let s = rho + u * u;
        if rho + a == 0.0 {
            return 0.0;
        }
        2.0 * s * damped_inv_sqrt_sinh(s * s / (4.0 * t), rho + a) / sinhc(a).sqrt()
    };
    let u_max = ((rho * rho + 320.0 * t).sqrt() - rho).sqrt();
    let breaks = [0.0, 0.1 * u_max, 0.25 * u_max, 0.5 * u_max, u_max];
    let scaled = QuadConfig {
        abs_tol: cfg.abs_tol / pre,
        ..cfg
    };
    let q = integrate_pieces(integrand, &breaks, scaled)?;
    Ok(pre * q.value)
}

/// Outer radius of tabulation at time `t`; the radial law beyond it is negligible.
fn rho_max(t: f64) -> f64 {
    t + 12.0 * (2.0 * t).sqrt() + 6.0
}

fn radial_density(rho: f64, t: f64, cfg: QuadConfig) -> Result<f64> {
    Ok(heat_kernel_with(rho, t, cfg)? * 2.0 * PI * rho.sinh())
}

/// Total mass `∫ p(0,·,t) dArea` of the kernel, by adaptive quadrature in ρ.
pub fn kernel_mass(t: f64) -> Result<f64> {
    let cfg = QuadConfig {
        abs_tol: 1e-12,
        rel_tol: 1e-12,
        max_intervals: 4000,
    };
    let mut err = None;
    let top = rho_max(t);
    let breaks: Vec<f64> = (0..=16).map(|k| top * k as f64 / 16.0).collect();
    let q = integrate_pieces(
        |r| match radial_density(r, t, cfg) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        &breaks,
        cfg,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(q.value),
    }
}

/// Residual of the Green identity at `y` together with the truncation bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GreenResidual {
    pub residual: f64,
    pub tail_bound: f64,
    pub truncation_time: f64,
}

/// `∫₀^∞ p(0,y,t) dt − (1/2π) log(1/|y|)`. The time integral is truncated
/// at `T*` with the tail bounded by `e^{−T*/4}/(π T*)`, which dominates
/// `∫_{T*}^∞ p(0,0,t) dt`.
pub fn green_identity_residual(y: DiscPoint) -> Result<GreenResidual> {
    let r = y.value().norm();
    if r == 0.0 {
        return Err(Error::input("y must be different from 0"));
    }
    let rho = 2.0 * r.atanh();
    let tail_tol = 1e-9;
    let mut t_star = 40.0_f64;
    while (-0.25 * t_star).exp() / (PI * t_star) > tail_tol {
        t_star += 4.0;
    }
    let kcfg = QuadConfig {
        abs_tol: 1e-12,
        rel_tol: 1e-11,
        max_intervals: 2000,
    };
    let mut err = None;
    let breaks = [0.0, 0.05, 0.25, 1.0, 3.0, 8.0, 20.0, t_star];
    let q = integrate_pieces(
        |t| {
            if t == 0.0 {
                return 0.0;
            }
            match heat_kernel_with(rho, t, kcfg) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            }
        },
        &breaks,
        QuadConfig {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_intervals: 2000,
        },
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    let tail_bound = (-0.25 * t_star).exp() / (PI * t_star);
    let residual = q.value - (1.0 / r).ln() / (2.0 * PI);
    if tail_bound + q.error > 1e-5 {
        return Err(Error::numerical("Green identity truncation too coarse", tail_bound + q.error));
    }
    Ok(GreenResidual {
        residual,
        tail_bound,
        truncation_time: t_star,
    })
}

/// Tabulated radial law of Brownian motion started at the origin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatKernelTable {
    time: f64,
    rho_grid: Vec<f64>,
    density: Vec<f64>,
    radial_cdf: Vec<f64>,
    /// dCDF/dρ at the grid points.
    slope: Vec<f64>,
    mass: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TableRow {
    rho: f64,
    density: f64,
    cdf: f64,
}

impl HeatKernelTable {
    pub fn build(t: f64, n: usize) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::input(format!("t = {t} must be > 0")));
        }
        if n < 64 {
            return Err(Error::input(format!("grid size {n} must be ≥ 64")));
        }
        let top = rho_max(t);
        let rho_grid: Vec<f64> = (0..n).map(|i| top * i as f64 / (n - 1) as f64).collect();
        let kcfg = QuadConfig {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_intervals: 2000,
        };
        let density = rho_grid
            .iter()
            .map(|&r| heat_kernel_with(r, t, kcfg))
            .collect::<Result<Vec<_>>>()?;
        let seg_cfg = QuadConfig {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_intervals: 200,
        };
        let mut cdf = Vec::with_capacity(n);
        cdf.push(0.0);
        let mut acc = 0.0;
        let mut err = None;
        for w in rho_grid.windows(2) {
            let q = integrate(
                |r| match radial_density(r, t, kcfg) {
                    Ok(v) => v,
                    Err(e) => {
                        err.get_or_insert(e);
                        0.0
                    }
                },
                w[0],
                w[1],
                seg_cfg,
            )?;
            acc += q.value;
            cdf.push(acc);
        }
        if let Some(e) = err {
            return Err(e);
        }
        let mass = acc;
        if (mass - 1.0).abs() > 1e-4 {
            return Err(Error::numerical("kernel table normalization defect", (mass - 1.0).abs()));
        }
        for c in cdf.iter_mut() {
            *c /= mass;
        }
        let slope = rho_grid
            .iter()
            .zip(&density)
            .map(|(&r, &p)| p * 2.0 * PI * r.sinh() / mass)
            .collect();
        Ok(HeatKernelTable {
            time: t,
            rho_grid,
            density,
            radial_cdf: cdf,
            slope,
            mass,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn rho_grid(&self) -> &[f64] {
        &self.rho_grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn radial_cdf(&self) -> &[f64] {
        &self.radial_cdf
    }

    /// Mass of the radial law before normalization.
    pub fn raw_mass(&self) -> f64 {
        self.mass
    }

    /// Monotone cubic Hermite pieces on interval `k`: returns (h, c0, c1, m0, m1).
    fn piece(&self, k: usize) -> (f64, f64, f64, f64, f64) {
        let h = self.rho_grid[k + 1] - self.rho_grid[k];
        let c0 = self.radial_cdf[k];
        let c1 = self.radial_cdf[k + 1];
        let delta = (c1 - c0) / h;
        let (mut m0, mut m1) = (self.slope[k], self.slope[k + 1]);
        if delta <= 0.0 {
            m0 = 0.0;
            m1 = 0.0;
        } else {
            let a = m0 / delta;
            let b = m1 / delta;
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                m0 *= tau;
                m1 *= tau;
            }
        }
        (h, c0, c1, m0, m1)
    }

    fn hermite(h: f64, c0: f64, c1: f64, m0: f64, m1: f64, x: f64) -> (f64, f64) {
        let s = x / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let v = h00 * c0 + h10 * h * m0 + h01 * c1 + h11 * h * m1;
        let d = ((6.0 * s2 - 6.0 * s) * c0 + (3.0 * s2 - 4.0 * s + 1.0) * h * m0 + (-6.0 * s2 + 6.0 * s) * c1
            + (3.0 * s2 - 2.0 * s) * h * m1)
            / h;
        (v, d)
    }

    /// Interpolated radial CDF.
    pub fn cdf_at(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        let last = *self.rho_grid.last().unwrap();
        if rho >= last {
            return 1.0;
        }
        let k = (self.rho_grid.partition_point(|&r| r <= rho) - 1).min(self.rho_grid.len() - 2);
        let (h, c0, c1, m0, m1) = self.piece(k);
        Self::hermite(h, c0, c1, m0, m1, rho - self.rho_grid[k]).0
    }

    /// Inverse of the interpolated CDF.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.radial_cdf.len();
        if u <= 0.0 {
            return 0.0;
        }
        if u >= self.radial_cdf[n - 1] {
            return self.rho_grid[n - 1];
        }
        let k = (self.radial_cdf.partition_point(|&c| c <= u) - 1).min(n - 2);
        let (h, c0, c1, m0, m1) = self.piece(k);
        let (mut lo, mut hi) = (0.0, h);
        let mut x = h * (u - c0) / (c1 - c0).max(f64::MIN_POSITIVE);
        for _ in 0..60 {
            let (v, d) = Self::hermite(h, c0, c1, m0, m1, x);
            let f = v - u;
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            if f.abs() < 1e-15 || hi - lo < 1e-15 * h {
                break;
            }
            let newton = x - f / d;
            x = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        self.rho_grid[k] + x
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
        self.write_rows(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        self.write_rows(&mut w)?;
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }

    fn write_rows<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        for i in 0..self.rho_grid.len() {
            w.serialize(TableRow {
                rho: self.rho_grid[i],
                density: self.density[i],
                cdf: self.radial_cdf[i],
            })
            .map_err(|e| Error::Parse(e.to_string()))?;
        }
        Ok(())
    }
}
