//! Degree-d singular holomorphic foliations of the projective plane, given by
//! homogeneous vector fields, and planar reference foliations on the bidisc.

mod local_model;
mod poly;
mod singular;
mod spec_file;

pub use local_model::LocalModelPoint;
pub use poly::{HomogPoly, Poly2};
pub use singular::{find_singularities, point_distance, SeedGrid, SingularSet, SingularityClass, SingularityRecord};
pub use spec_file::FoliationSpec;

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

type C = Complex64;

/// Coordinate chart of a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ChartId {
    Aff0,
    Aff1,
    Aff2,
    Plane,
}

impl ChartId {
    pub fn affine(k: usize) -> ChartId {
        [ChartId::Aff0, ChartId::Aff1, ChartId::Aff2][k]
    }

    /// Index of the homogeneous coordinate set to 1; `None` for PLANE.
    pub fn homogeneous_index(self) -> Option<usize> {
        match self {
            ChartId::Aff0 => Some(0),
            ChartId::Aff1 => Some(1),
            ChartId::Aff2 => Some(2),
            ChartId::Plane => None,
        }
    }

    /// Numeric label used in CSV artifacts.
    pub fn code(self) -> u8 {
        match self {
            ChartId::Aff0 => 0,
            ChartId::Aff1 => 1,
            ChartId::Aff2 => 2,
            ChartId::Plane => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<ChartId> {
        match code {
            0 => Some(ChartId::Aff0),
            1 => Some(ChartId::Aff1),
            2 => Some(ChartId::Aff2),
            3 => Some(ChartId::Plane),
            _ => None,
        }
    }
}

/// The two homogeneous indices that become affine coordinates in chart `k`.
pub fn affine_indices(k: usize) -> [usize; 2] {
    match k {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    }
}

/// A point given in one chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub chart: ChartId,
    pub coords: [C; 2],
}

impl ChartPoint {
    pub fn new(chart: ChartId, coords: [C; 2]) -> Result<Self> {
        if coords.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::input("chart coordinates must be finite"));
        }
        Ok(ChartPoint { chart, coords })
    }

    pub fn plane(z: C, w: C) -> Self {
        ChartPoint {
            chart: ChartId::Plane,
            coords: [z, w],
        }
    }

    pub fn affine(k: usize, u: C, v: C) -> Self {
        ChartPoint {
            chart: ChartId::affine(k),
            coords: [u, v],
        }
    }

    pub fn max_modulus(&self) -> f64 {
        self.coords[0].norm().max(self.coords[1].norm())
    }

    /// Homogeneous representative with the chart coordinate equal to 1.
    pub fn to_homogeneous(&self) -> Option<[C; 3]> {
        let k = self.chart.homogeneous_index()?;
        let mut z = [C::new(0.0, 0.0); 3];
        z[k] = C::new(1.0, 0.0);
        let [a, b] = affine_indices(k);
        z[a] = self.coords[0];
        z[b] = self.coords[1];
        Some(z)
    }

    pub fn from_homogeneous(z: [C; 3], k: usize) -> Result<Self> {
        if z[k].norm() == 0.0 {
            return Err(Error::domain(format!("point lies on the line z{k} = 0")));
        }
        let [a, b] = affine_indices(k);
        Ok(ChartPoint::affine(k, z[a] / z[k], z[b] / z[k]))
    }

    /// Same point in the chart whose homogeneous coordinate is largest, so
    /// that both affine coordinates have modulus at most 1.
    pub fn in_best_chart(&self) -> Self {
        match self.to_homogeneous() {
            None => *self,
            Some(z) => {
                let k = best_index(&z);
                if Some(k) == self.chart.homogeneous_index() {
                    *self
                } else {
                    ChartPoint::from_homogeneous(z, k).expect("largest coordinate is nonzero")
                }
            }
        }
    }

    pub fn to_chart(&self, target: ChartId) -> Result<Self> {
        if target == self.chart {
            return Ok(*self);
        }
        match (self.to_homogeneous(), target.homogeneous_index()) {
            (Some(z), Some(k)) => ChartPoint::from_homogeneous(z, k),
            _ => Err(Error::ChartFailure(format!("no transition {:?} → {:?}", self.chart, target))),
        }
    }
}

pub(crate) fn best_index(z: &[C; 3]) -> usize {
    let m: Vec<f64> = z.iter().map(|c| c.norm_sqr()).collect();
    if m[0] >= m[1] && m[0] >= m[2] {
        0
    } else if m[1] >= m[2] {
        1
    } else {
        2
    }
}

/// Vector field on a chart with its partial derivatives.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChartField {
    comps: [Poly2; 2],
    d_u: [Poly2; 2],
    d_v: [Poly2; 2],
    degree: usize,
}

impl ChartField {
    pub fn new(comps: [Poly2; 2]) -> Self {
        let d_u = [comps[0].d_u(), comps[1].d_u()];
        let d_v = [comps[0].d_v(), comps[1].d_v()];
        let degree = comps[0].degree().max(comps[1].degree()) as usize;
        ChartField { comps, d_u, d_v, degree }
    }

    pub fn components(&self) -> &[Poly2; 2] {
        &self.comps
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    #[inline]
    pub fn eval(&self, x: [C; 2]) -> [C; 2] {
        let (pu, pv) = poly::powers(x[0], x[1], self.degree);
        [self.comps[0].eval_with(&pu, &pv), self.comps[1].eval_with(&pu, &pv)]
    }

    /// Value and Jacobian `jac[i][j] = ∂Z_i/∂x_j`.
    #[inline]
    pub fn eval_jac(&self, x: [C; 2]) -> ([C; 2], [[C; 2]; 2]) {
        let (pu, pv) = poly::powers(x[0], x[1], self.degree);
        let z = [self.comps[0].eval_with(&pu, &pv), self.comps[1].eval_with(&pu, &pv)];
        let jac = [
            [self.d_u[0].eval_with(&pu, &pv), self.d_v[0].eval_with(&pu, &pv)],
            [self.d_u[1].eval_with(&pu, &pv), self.d_v[1].eval_with(&pu, &pv)],
        ];
        (z, jac)
    }
}

/// Hermitian metric used to measure field and normal vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AmbientMetric {
    /// Chart-local Euclidean metric.
    Euclidean,
    /// Fubini–Study metric `i∂∂̄ log(1 + |x|²)` in affine coordinates.
    FubiniStudy,
}

impl AmbientMetric {
    pub fn norm_sq(self, x: [C; 2], v: [C; 2]) -> f64 {
        let e = v[0].norm_sqr() + v[1].norm_sqr();
        match self {
            AmbientMetric::Euclidean => e,
            AmbientMetric::FubiniStudy => {
                let s = 1.0 + x[0].norm_sqr() + x[1].norm_sqr();
                let cross = (x[0] * v[1] - x[1] * v[0]).norm_sqr();
                (e + cross) / (s * s)
            }
        }
    }

    /// `log det G` at `x`.
    pub fn log_det(self, x: [C; 2]) -> f64 {
        match self {
            AmbientMetric::Euclidean => 0.0,
            AmbientMetric::FubiniStudy => -3.0 * (x[0].norm_sqr() + x[1].norm_sqr()).ln_1p(),
        }
    }
}

/// Region of definition of a planar foliation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PlanarDomain {
    /// The unit bidisc `{|z| < 1, |w| < 1}`.
    Bidisc,
    /// All of `C²`.
    Unbounded,
}

impl PlanarDomain {
    pub fn contains(self, x: [C; 2]) -> bool {
        match self {
            PlanarDomain::Bidisc => x[0].norm() < 1.0 && x[1].norm() < 1.0,
            PlanarDomain::Unbounded => true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum FoliationKind {
    Projective {
        homog: [HomogPoly; 3],
        charts: [ChartField; 3],
    },
    Planar {
        field: ChartField,
        domain: PlanarDomain,
    },
}

/// A singular holomorphic foliation with polynomial defining field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolyFoliation {
    name: String,
    degree: u32,
    kind: FoliationKind,
}

impl PolyFoliation {
    /// Foliation of the projective plane induced by `Σ F_j ∂/∂z_j`.
    pub fn projective(name: impl Into<String>, degree: u32, homog: [HomogPoly; 3]) -> Result<Self> {
        if degree < 1 {
            return Err(Error::input("degree must be ≥ 1"));
        }
        if homog.iter().any(|h| h.degree() != degree) {
            return Err(Error::input(format!("all components must have degree {degree}")));
        }
        let charts = [0, 1, 2].map(|k| chart_field_from_homog(&homog, k));
        if charts[0].components().iter().all(|p| p.is_zero()) {
            return Err(Error::input("the field is radial and defines no foliation"));
        }
        Ok(PolyFoliation {
            name: name.into(),
            degree,
            kind: FoliationKind::Projective { homog, charts },
        })
    }

    /// Foliation of a planar domain by the integral curves of `field`.
    pub fn planar(name: impl Into<String>, field: [Poly2; 2], domain: PlanarDomain) -> Result<Self> {
        if field.iter().all(|p| p.is_zero()) {
            return Err(Error::input("the zero field defines no foliation"));
        }
        let degree = field[0].degree().max(field[1].degree());
        Ok(PolyFoliation {
            name: name.into(),
            degree,
            kind: FoliationKind::Planar {
                field: ChartField::new(field),
                domain,
            },
        })
    }

    /// `F = (z₁^d, z₂^d, z₀^d)`.
    pub fn jouanolou(degree: u32) -> Result<Self> {
        if degree < 1 {
            return Err(Error::input("degree must be ≥ 1"));
        }
        let d = degree;
        let homog = [
            HomogPoly::monomial(d, 0, d, 0).unwrap(),
            HomogPoly::monomial(d, 0, 0, d).unwrap(),
            HomogPoly::monomial(d, d, 0, 0).unwrap(),
        ];
        PolyFoliation::projective(format!("jouanolou-{d}"), d, homog)
    }

    /// Linear hyperbolic model `z ∂/∂z + λ w ∂/∂w` on the unit bidisc.
    pub fn linear_model(lambda: C) -> Result<Self> {
        if !(lambda.im > 0.0) {
            return Err(Error::input(format!("λ = {lambda} must have positive imaginary part")));
        }
        let one = C::new(1.0, 0.0);
        PolyFoliation::planar(
            format!("linear-model({},{})", lambda.re, lambda.im),
            [Poly2::from_terms([(1, 0, one)]), Poly2::from_terms([(0, 1, lambda)])],
            PlanarDomain::Bidisc,
        )
    }

    /// Horizontal foliation of the bidisc with leaves `D × {w}`.
    pub fn product_disc() -> Self {
        PolyFoliation::planar(
            "product-disc",
            [Poly2::from_terms([(0, 0, C::new(1.0, 0.0))]), Poly2::zero()],
            PlanarDomain::Bidisc,
        )
        .expect("nonzero field")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn kind(&self) -> &FoliationKind {
        &self.kind
    }

    pub fn is_projective(&self) -> bool {
        matches!(self.kind, FoliationKind::Projective { .. })
    }

    pub fn metric(&self) -> AmbientMetric {
        match self.kind {
            FoliationKind::Projective { .. } => AmbientMetric::FubiniStudy,
            FoliationKind::Planar { .. } => AmbientMetric::Euclidean,
        }
    }

    pub fn planar_domain(&self) -> Option<PlanarDomain> {
        match self.kind {
            FoliationKind::Planar { domain, .. } => Some(domain),
            FoliationKind::Projective { .. } => None,
        }
    }

    /// Charts in which points of this foliation live.
    pub fn charts(&self) -> Vec<ChartId> {
        match self.kind {
            FoliationKind::Projective { .. } => vec![ChartId::Aff0, ChartId::Aff1, ChartId::Aff2],
            FoliationKind::Planar { .. } => vec![ChartId::Plane],
        }
    }

    pub fn chart_field(&self, chart: ChartId) -> Result<&ChartField> {
        match (&self.kind, chart.homogeneous_index()) {
            (FoliationKind::Projective { charts, .. }, Some(k)) => Ok(&charts[k]),
            (FoliationKind::Planar { field, .. }, None) => Ok(field),
            _ => Err(Error::ChartFailure(format!("chart {chart:?} does not belong to {}", self.name))),
        }
    }

    /// The induced field in the chart of `p`.
    pub fn evaluate_field(&self, p: &ChartPoint) -> Result<[C; 2]> {
        Ok(self.chart_field(p.chart)?.eval(p.coords))
    }

    /// Whether `p` lies in the region where the foliation is defined.
    pub fn contains(&self, p: &ChartPoint) -> bool {
        match self.kind {
            FoliationKind::Planar { domain, .. } => p.chart == ChartId::Plane && domain.contains(p.coords),
            FoliationKind::Projective { .. } => p.chart != ChartId::Plane,
        }
    }

    /// Hex digest identifying the foliation's coefficients.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.name.as_bytes());
        h.update(self.degree.to_le_bytes());
        match &self.kind {
            FoliationKind::Projective { homog, .. } => {
                for p in homog {
                    for (a, b, c, coef) in p.terms() {
                        h.update(format!("{a},{b},{c},{:e},{:e};", coef.re, coef.im).as_bytes());
                    }
                    h.update(b"|");
                }
            }
            FoliationKind::Planar { field, domain } => {
                for p in field.components() {
                    for &(i, j, coef) in p.terms() {
                        h.update(format!("{i},{j},{:e},{:e};", coef.re, coef.im).as_bytes());
                    }
                    h.update(b"|");
                }
                h.update(format!("{domain:?}").as_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `(F_a − x_a F_k, F_b − x_b F_k)` restricted to `z_k = 1`.
fn chart_field_from_homog(homog: &[HomogPoly; 3], k: usize) -> ChartField {
    let [a, b] = affine_indices(k);
    let fk = homog[k].dehomogenize(k);
    let minus = C::new(-1.0, 0.0);
    let first = homog[a].dehomogenize(k).add(&fk.shift(1, 0).scale(minus));
    let second = homog[b].dehomogenize(k).add(&fk.shift(0, 1).scale(minus));
    ChartField::new([first, second])
}
