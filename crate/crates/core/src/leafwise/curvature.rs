use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::flow::{flow_step_with, FlowOptions, TimeField};
use crate::error::{Error, Result};
use crate::foliation::{AmbientMetric, ChartPoint, PolyFoliation};

type C = Complex64;

/// Below this, a field component is not used as a section.
const SECTION_FLOOR: f64 = 1e-300;

/// Normal section used to trivialize the normal bundle near `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Section {
    /// `∂/∂x₁`, weighted by the second component.
    First,
    /// `∂/∂x₂`, weighted by the first component.
    Second,
}

impl Section {
    fn weight_index(self) -> usize {
        match self {
            Section::First => 1,
            Section::Second => 0,
        }
    }
}

/// Weight of the transversal metric in the given section, up to sign:
/// `½ log det G − log ‖Y‖_G + log |Y_c|`.
fn section_weight(tf: &TimeField<'_>, metric: AmbientMetric, p: &ChartPoint, section: Section) -> Result<f64> {
    let (y, _, _) = tf.eval(p.chart, p.coords)?;
    let yc = y[section.weight_index()].norm();
    if yc < SECTION_FLOOR {
        return Err(Error::domain("section component vanishes"));
    }
    let n2 = metric.norm_sq(p.coords, y);
    Ok(0.5 * metric.log_det(p.coords) - 0.5 * n2.ln() + yc.ln())
}

/// Flat Laplacian `4∂∂̄` in flow time of the section weight at `p`,
/// by Richardson-extrapolated five-point differences.
pub fn weight_laplacian(fol: &PolyFoliation, p: &ChartPoint, section: Section) -> Result<f64> {
    let tf = TimeField::new(fol, p.chart);
    let metric = fol.metric();
    let (y, _, j) = tf.eval(p.chart, p.coords)?;
    let speed = y[0].norm().hypot(y[1].norm());
    if speed < SECTION_FLOOR {
        return Err(Error::domain("field vanishes at the base point"));
    }
    let jn = j.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    // Flow-time scale over which the field changes by O(1).
    let scale = 1.0 / (jn + speed / (1.0 + p.max_modulus()));
    let h = 0.05 * scale;
    let opts = FlowOptions { rtol: 1e-14, atol: 1e-300, switch_radius: f64::INFINITY, ..FlowOptions::default() };
    let f0 = section_weight(&tf, metric, p, section)?;
    let lap = |h: f64| -> Result<f64> {
        let mut acc = -4.0 * f0;
        for dir in [C::new(1.0, 0.0), C::new(-1.0, 0.0), C::new(0.0, 1.0), C::new(0.0, -1.0)] {
            let seg = flow_step_with(fol, p, dir * h, &opts)?;
            acc += section_weight(&tf, metric, &seg.to, section)?;
        }
        Ok(acc / (h * h))
    };
    let coarse = lap(h)?;
    let fine = lap(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// The section whose weight is best conditioned at `p`.
pub fn preferred_section(fol: &PolyFoliation, p: &ChartPoint) -> Result<Section> {
    let y = fol.evaluate_field(p)?;
    if y[0].norm().max(y[1].norm()) < SECTION_FLOOR {
        return Err(Error::domain("field vanishes at the base point"));
    }
    Ok(if y[1].norm() >= y[0].norm() { Section::First } else { Section::Second })
}

/// `(η/‖Y‖_G)²` at `p`, converting flow-time Laplacians to the hyperbolic one.
fn clock_factor(fol: &PolyFoliation, p: &ChartPoint, eta: f64) -> Result<f64> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::input("eta must be positive"));
    }
    let y = fol.evaluate_field(p)?;
    let n2 = fol.metric().norm_sq(p.coords, y);
    if !(n2 > 0.0) {
        return Err(Error::domain("field vanishes at the base point"));
    }
    Ok(eta * eta / n2)
}

/// Curvature density of the normal bundle at `p` in hyperbolic-time units,
/// computed by finite differences along the leaf.
pub fn curvature_density(fol: &PolyFoliation, p: &ChartPoint, eta: f64) -> Result<f64> {
    let factor = clock_factor(fol, p, eta)?;
    let section = preferred_section(fol, p)?;
    Ok(factor * weight_laplacian(fol, p, section)?)
}

/// Same quantity from the closed-form Laplacian of the metric weight.
pub fn curvature_density_analytic(fol: &PolyFoliation, p: &ChartPoint, eta: f64) -> Result<f64> {
    let factor = clock_factor(fol, p, eta)?;
    Ok(factor * weight_laplacian_analytic(fol, p)?)
}

fn wedge3_sq(a: [C; 3], b: [C; 3]) -> f64 {
    let cross = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    cross.iter().map(|c| c.norm_sqr()).sum()
}

/// Closed-form `4∂∂̄` in flow time of `½ log det G − log ‖Y‖_G`.
pub fn weight_laplacian_analytic(fol: &PolyFoliation, p: &ChartPoint) -> Result<f64> {
    let tf = TimeField::new(fol, p.chart);
    let (y, _, j) = tf.eval(p.chart, p.coords)?;
    let yp = [j[0][0] * y[0] + j[0][1] * y[1], j[1][0] * y[0] + j[1][1] * y[1]];
    let x = p.coords;
    match fol.metric() {
        AmbientMetric::Euclidean => {
            let n2 = y[0].norm_sqr() + y[1].norm_sqr();
            if !(n2 > 0.0) {
                return Err(Error::domain("field vanishes at the base point"));
            }
            let w = (y[0] * yp[1] - y[1] * yp[0]).norm_sqr();
            Ok(-2.0 * w / (n2 * n2))
        }
        AmbientMetric::FubiniStudy => {
            let hat = [y[0], y[1], x[0] * y[1] - x[1] * y[0]];
            let hat_p = [yp[0], yp[1], x[0] * yp[1] - x[1] * yp[0]];
            let n2: f64 = hat.iter().map(|c| c.norm_sqr()).sum();
            if !(n2 > 0.0) {
                return Err(Error::domain("field vanishes at the base point"));
            }
            let q = 1.0 + x[0].norm_sqr() + x[1].norm_sqr();
            Ok(-2.0 * n2 / (q * q) - 2.0 * wedge3_sq(hat, hat_p) / (n2 * n2))
        }
    }
}

/// Closed-form `4∂∂̄` in flow time of `log ‖Y‖_G`, i.e. `−K·‖Y‖²_G` with `K`
/// the curvature of the metric the ambient metric induces on the leaf.
pub fn induced_curvature_term(fol: &PolyFoliation, p: &ChartPoint) -> Result<f64> {
    let tf = TimeField::new(fol, p.chart);
    let (y, _, _) = tf.eval(p.chart, p.coords)?;
    let lap_psi = weight_laplacian_analytic(fol, p)?;
    match fol.metric() {
        AmbientMetric::Euclidean => Ok(-lap_psi),
        AmbientMetric::FubiniStudy => {
            // ½·4∂∂̄ log det G = −6‖Y‖²_G for the Fubini–Study metric.
            let n2 = fol.metric().norm_sq(p.coords, y);
            Ok(-6.0 * n2 - lap_psi)
        }
    }
}

/// `−K·η²`: the rate at which true hyperbolic time accrues per unit of the
/// clock defined by the density estimate `eta`, in expectation along paths.
pub fn clock_density(fol: &PolyFoliation, p: &ChartPoint, eta: f64) -> Result<f64> {
    let factor = clock_factor(fol, p, eta)?;
    Ok(factor * induced_curvature_term(fol, p)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foliation::LocalModelPoint;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn linear_model_matches_closed_form() {
        let lam = c(0.3, 1.1);
        let f = PolyFoliation::linear_model(lam).unwrap();
        let m = LocalModelPoint::new(lam, c(0.2, 0.1), c(-0.3, 0.2)).unwrap();
        let p = m.chart_point();
        let numer = m.curvature_numerator().unwrap();
        let fd = weight_laplacian(&f, &p, Section::First).unwrap();
        let an = weight_laplacian_analytic(&f, &p).unwrap();
        assert!((fd - 8.0 * PI * numer).abs() < 1e-6 * numer.abs(), "{fd} {numer}");
        assert!((an - 8.0 * PI * numer).abs() < 1e-12 * numer.abs());
    }

    #[test]
    fn sections_agree() {
        let f = PolyFoliation::jouanolou(2).unwrap();
        let p = ChartPoint::affine(0, c(0.3, -0.2), c(0.5, 0.4));
        let a = weight_laplacian(&f, &p, Section::First).unwrap();
        let b = weight_laplacian(&f, &p, Section::Second).unwrap();
        assert!((a - b).abs() < 1e-5 * a.abs());
    }

    #[test]
    fn fubini_study_closed_form() {
        let f = PolyFoliation::jouanolou(3).unwrap();
        let p = ChartPoint::affine(1, c(0.4, 0.1), c(-0.2, 0.7));
        let fd = weight_laplacian(&f, &p, preferred_section(&f, &p).unwrap()).unwrap();
        let an = weight_laplacian_analytic(&f, &p).unwrap();
        assert!((fd - an).abs() < 1e-5 * an.abs(), "{fd} {an}");
    }

    #[test]
    fn induced_curvature_matches_finite_differences() {
        // Flat Laplacian of log ‖Y‖_G along the leaf, by Richardson differences.
        let f = PolyFoliation::jouanolou(2).unwrap();
        let p = ChartPoint::affine(0, c(0.35, -0.1), c(0.2, 0.6));
        let metric = f.metric();
        let g = |q: &ChartPoint| {
            let y = TimeField::new(&f, p.chart).eval(q.chart, q.coords).unwrap().0;
            0.5 * metric.norm_sq(q.coords, y).ln()
        };
        let opts = FlowOptions { rtol: 1e-14, atol: 1e-300, switch_radius: f64::INFINITY, ..FlowOptions::default() };
        let lap = |h: f64| {
            let mut acc = -4.0 * g(&p);
            for dir in [c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0)] {
                acc += g(&flow_step_with(&f, &p, dir * h, &opts).unwrap().to);
            }
            acc / (h * h)
        };
        let fd = (4.0 * lap(0.01) - lap(0.02)) / 3.0;
        let an = induced_curvature_term(&f, &p).unwrap();
        assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "{fd} {an}");
    }

    #[test]
    fn rejects_bad_eta() {
        let f = PolyFoliation::jouanolou(2).unwrap();
        let p = ChartPoint::affine(0, c(0.3, -0.2), c(0.5, 0.4));
        assert!(curvature_density(&f, &p, 0.0).is_err());
    }
}
