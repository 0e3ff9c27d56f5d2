use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::ChartPoint;
use crate::error::{Error, Result};

type C = Complex64;

/// A point of the linear model `z ∂/∂z + λw ∂/∂w` on the unit bidisc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalModelPoint {
    lambda: C,
    z: C,
    w: C,
}

impl LocalModelPoint {
    pub fn new(lambda: C, z: C, w: C) -> Result<Self> {
        if !(lambda.im > 0.0) {
            return Err(Error::input(format!("λ = {lambda} must have positive imaginary part")));
        }
        if !(z.norm() < 1.0 && w.norm() < 1.0) {
            return Err(Error::input("point must lie in the unit bidisc"));
        }
        Ok(LocalModelPoint { lambda, z, w })
    }

    pub fn lambda(&self) -> C {
        self.lambda
    }

    pub fn z(&self) -> C {
        self.z
    }

    pub fn w(&self) -> C {
        self.w
    }

    pub fn chart_point(&self) -> ChartPoint {
        ChartPoint::plane(self.z, self.w)
    }

    /// The leaf through the point, `ζ ↦ (z e^{iζ}, w e^{iλζ})`.
    pub fn leaf(&self, zeta: C) -> (C, C) {
        let i = C::new(0.0, 1.0);
        (self.z * (i * zeta).exp(), self.w * (i * self.lambda * zeta).exp())
    }

    /// Whether the leaf parametrization at `ζ` stays in the bidisc.
    pub fn sector_contains(&self, zeta: C) -> bool {
        let (u, v) = (zeta.re, zeta.im);
        let first = self.z == C::new(0.0, 0.0) || v > self.z.norm().ln();
        let second = self.w == C::new(0.0, 0.0) || self.lambda.im * u + self.lambda.re * v > self.w.norm().ln();
        first && second
    }

    fn require_regular(&self) -> Result<()> {
        if self.z == C::new(0.0, 0.0) && self.w == C::new(0.0, 0.0) {
            return Err(Error::domain("(0, 0) is the singular point"));
        }
        Ok(())
    }

    /// Holonomy norm from the base point to `ψ(ζ)` in the Euclidean metric.
    pub fn holonomy(&self, zeta: C) -> Result<f64> {
        self.require_regular()?;
        let i = C::new(0.0, 1.0);
        let e1 = (i * zeta).exp();
        let e2 = (i * self.lambda * zeta).exp();
        let lw = self.lambda * self.w;
        let start = (self.z.norm_sqr() + lw.norm_sqr()).sqrt();
        let end = ((self.z * e1).norm_sqr() + (lw * e2).norm_sqr()).sqrt();
        Ok(e1.norm() * e2.norm() * start / end)
    }

    /// `(1/2π)·∂_ζ∂_ζ̄ log Φ(0) = −(|λ−1|²/4π)·|z|²|λw|²/(|z|²+|λw|²)²`.
    pub fn curvature_numerator(&self) -> Result<f64> {
        self.require_regular()?;
        let a = self.z.norm_sqr();
        let b = (self.lambda * self.w).norm_sqr();
        Ok(-(self.lambda - 1.0).norm_sqr() / (4.0 * PI) * a * b / ((a + b) * (a + b)))
    }
}
