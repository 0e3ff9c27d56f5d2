use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{ChartField, ChartId, ChartPoint, PolyFoliation};
use crate::constants::TOL_IMAG;
use crate::error::{Error, Result};

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SingularityClass {
    Hyperbolic,
    NondegenerateNonhyperbolic,
    Degenerate,
}

/// A zero of the foliation's field with its linearization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingularityRecord {
    pub location: ChartPoint,
    pub eigenvalues: (C, C),
    pub ratio: C,
    pub classification: SingularityClass,
    /// Columns are the eigenvectors matching `eigenvalues`.
    pub eigenvectors: [[C; 2]; 2],
}

/// Seeds for the Newton search: `u = r₁e^{iθ₁}, v = r₂e^{iθ₂}` with θ on a
/// `per_axis × per_axis` grid and `(r₁, r₂)` ranging over `radii²`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedGrid {
    pub per_axis: usize,
    pub radii: Vec<f64>,
}

impl Default for SeedGrid {
    fn default() -> Self {
        SeedGrid {
            per_axis: 40,
            radii: vec![0.2, 0.6, 1.0],
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SingularSet {
    pub records: Vec<SingularityRecord>,
    /// Seeds from which Newton did not converge.
    pub failed_seeds: usize,
}

impl SingularSet {
    pub fn all_hyperbolic(&self) -> bool {
        self.records
            .iter()
            .all(|r| r.classification == SingularityClass::Hyperbolic)
    }

    /// First record that is not hyperbolic, if any.
    /// Distance from `p` to the nearest singular point, measured in `p`'s chart
    /// coordinates; infinite when there is none in that chart.
    pub fn distance_to(&self, p: &ChartPoint) -> f64 {
        self.records
            .iter()
            .filter_map(|r| r.location.to_chart(p.chart).ok())
            .map(|q| norm2([q.coords[0] - p.coords[0], q.coords[1] - p.coords[1]]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn first_non_hyperbolic(&self) -> Option<&SingularityRecord> {
        self.records
            .iter()
            .find(|r| r.classification != SingularityClass::Hyperbolic)
    }
}

fn solve2(j: &[[C; 2]; 2], r: [C; 2]) -> Option<[C; 2]> {
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if det.norm() < 1e-300 {
        return None;
    }
    Some([
        (j[1][1] * r[0] - j[0][1] * r[1]) / det,
        (j[0][0] * r[1] - j[1][0] * r[0]) / det,
    ])
}

fn norm2(z: [C; 2]) -> f64 {
    (z[0].norm_sqr() + z[1].norm_sqr()).sqrt()
}

/// Damped Newton iteration; returns the root and whether it converged.
fn newton(field: &ChartField, mut x: [C; 2]) -> Option<[C; 2]> {
    let (mut z, mut jac) = field.eval_jac(x);
    for _ in 0..50 {
        let res = norm2(z);
        if res < 1e-14 {
            break;
        }
        let step = solve2(&jac, z)?;
        let mut alpha = 1.0;
        loop {
            let cand = [x[0] - step[0] * alpha, x[1] - step[1] * alpha];
            let (zc, jc) = field.eval_jac(cand);
            if norm2(zc) < res || alpha < 1e-4 {
                x = cand;
                z = zc;
                jac = jc;
                break;
            }
            alpha *= 0.5;
        }
        if !(x[0].norm() < 1e6 && x[1].norm() < 1e6) {
            return None;
        }
    }
    let scale = 1.0 + jac.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
    (norm2(z) < 1e-8 * scale * 1e-3).then_some(x)
}

fn eigen2(j: &[[C; 2]; 2]) -> ((C, C), [[C; 2]; 2]) {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = (tr * tr * 0.25 - det).sqrt();
    let l1 = tr * 0.5 + disc;
    let l2 = tr * 0.5 - disc;
    let vec_for = |l: C| -> [C; 2] {
        // Rows of (J − l) annihilate the eigenvector; pick the better-conditioned row.
        let r0 = [j[0][0] - l, j[0][1]];
        let r1 = [j[1][0], j[1][1] - l];
        let r = if norm2(r0) >= norm2(r1) { r0 } else { r1 };
        let v = if norm2(r) < 1e-300 {
            [C::new(1.0, 0.0), C::new(0.0, 0.0)]
        } else {
            [-r[1], r[0]]
        };
        let n = norm2(v);
        [v[0] / n, v[1] / n]
    };
    let v1 = vec_for(l1);
    let v2 = vec_for(l2);
    ((l1, l2), [[v1[0], v2[0]], [v1[1], v2[1]]])
}

/// Linearization and classification of the field at a zero.
pub fn classify(field: &ChartField, location: ChartPoint) -> SingularityRecord {
    let (_, jac) = field.eval_jac(location.coords);
    let ((l1, l2), vecs) = eigen2(&jac);
    let scale = jac.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
    let degenerate = l1.norm() < 1e-10 * scale || l2.norm() < 1e-10 * scale;
    let ratio = if degenerate { C::new(0.0, 0.0) } else { l1 / l2 };
    let classification = if degenerate {
        SingularityClass::Degenerate
    } else if ratio.im.abs() > TOL_IMAG {
        SingularityClass::Hyperbolic
    } else {
        SingularityClass::NondegenerateNonhyperbolic
    };
    SingularityRecord {
        location,
        eigenvalues: (l1, l2),
        ratio,
        classification,
        eigenvectors: vecs,
    }
}

/// Projective distance between two points given in (possibly different) charts.
pub fn point_distance(a: &ChartPoint, b: &ChartPoint) -> f64 {
    match (a.to_homogeneous(), b.to_homogeneous()) {
        (Some(x), Some(y)) => {
            let nx: f64 = x.iter().map(|c| c.norm_sqr()).sum();
            let ny: f64 = y.iter().map(|c| c.norm_sqr()).sum();
            let cross: f64 = [(0, 1), (0, 2), (1, 2)]
                .iter()
                .map(|&(i, j)| (x[i] * y[j] - x[j] * y[i]).norm_sqr())
                .sum();
            (cross / (nx * ny)).sqrt()
        }
        _ => norm2([a.coords[0] - b.coords[0], a.coords[1] - b.coords[1]]),
    }
}

/// Newton search for the zeros of the field from a seed grid in every chart.
pub fn find_singularities(fol: &PolyFoliation, seeds: &SeedGrid) -> Result<SingularSet> {
    if seeds.per_axis == 0 || seeds.radii.is_empty() {
        return Err(Error::input("seed grid is empty"));
    }
    let n = seeds.per_axis;
    let mut found: Vec<SingularityRecord> = Vec::new();
    let mut failed = 0usize;
    for chart in fol.charts() {
        let field = fol.chart_field(chart)?;
        for &r1 in &seeds.radii {
            for &r2 in &seeds.radii {
                for a in 0..n {
                    for b in 0..n {
                        let t1 = 2.0 * PI * (a as f64 + 0.5) / n as f64;
                        let t2 = 2.0 * PI * (b as f64 + 0.5) / n as f64;
                        let x0 = [C::from_polar(r1, t1), C::from_polar(r2, t2)];
                        let Some(x) = newton(field, x0) else {
                            failed += 1;
                            continue;
                        };
                        let p = ChartPoint { chart, coords: x };
                        if chart == ChartId::Plane && !fol.contains(&p) {
                            continue;
                        }
                        if p.max_modulus() > 10.0 {
                            continue;
                        }
                        if found.iter().any(|r| point_distance(&r.location, &p) < 1e-8) {
                            continue;
                        }
                        let best = p.in_best_chart();
                        let bf = fol.chart_field(best.chart)?;
                        let polished = newton(bf, best.coords).unwrap_or(best.coords);
                        found.push(classify(bf, ChartPoint { chart: best.chart, coords: polished }));
                    }
                }
            }
        }
    }
    Ok(SingularSet {
        records: found,
        failed_seeds: failed,
    })
}
