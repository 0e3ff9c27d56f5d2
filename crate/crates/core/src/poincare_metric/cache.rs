//! Lazily filled grid of chain-refined η estimates.
//!
//! Nodes live on a 4-d grid `(|u|, |v|, arg u, arg v)` in one affine chart.
//! For projective foliations the grid covers the closed polydisc
//! `|u|, |v| ≤ 1`, which reaches every point once the largest homogeneous
//! coordinate is put in front; finite symmetry groups of the foliation
//! (cyclic coordinate shifts, diagonal roots of unity) fold the grid further.
//! The interpolated quantity is `ln(η/‖Y‖)`, which stays bounded away from
//! the singular set.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::disc::{eta_chain_refine_with, field_speed, DiscConfig, EtaEstimate, EtaMethod};
use crate::constants::constants_hash;
use crate::error::{Error, Result};
use crate::foliation::{ChartId, ChartPoint, FoliationKind, HomogPoly, PlanarDomain, PolyFoliation, SingularSet};
use crate::leafwise::EtaProvider;

type C = Complex64;

const UNSET: u64 = u64::MAX;

/// `1 + |ln s|`.
pub fn log_star(s: f64) -> f64 {
    1.0 + s.ln().abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Nodes per radial axis.
    pub radial: usize,
    /// Cells of the full circle on the `arg v` axis; the `arg u` axis gets
    /// proportionally fewer after symmetry folding.
    pub phase: usize,
    /// Largest modulus covered on planar domains (projective grids always reach 1).
    pub planar_radius: f64,
    /// Chain-refinement depth of every node.
    pub depth: u32,
    /// Below this distance to the singular set queries use the asymptotic model.
    pub near_singular: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { radial: 13, phase: 24, planar_radius: 0.95, depth: 8, near_singular: 0.05 }
    }
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        if self.radial < 2 || self.phase < 3 {
            return Err(Error::input("eta grid needs at least 2 radial nodes and 3 phase cells"));
        }
        if !(self.planar_radius > 0.0 && self.planar_radius < 1.0) {
            return Err(Error::input("planar_radius must lie in (0, 1)"));
        }
        if !(self.near_singular >= 0.0) {
            return Err(Error::input("near_singular must be nonnegative"));
        }
        Ok(())
    }
}

fn det3(a: [C; 3], b: [C; 3], c: [C; 3]) -> C {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// True when the linear map `map` sends leaves to leaves: `F(Az)` lies in the
/// span of `Az` and `AF(z)` at a handful of fixed test points.
fn is_symmetry(homog: &[HomogPoly; 3], map: impl Fn([C; 3]) -> [C; 3]) -> bool {
    let tests = [
        [C::new(0.7, 0.2), C::new(-0.3, 0.5), C::new(0.4, -0.6)],
        [C::new(-0.2, 0.9), C::new(0.6, 0.1), C::new(0.3, 0.3)],
        [C::new(0.5, -0.5), C::new(0.2, -0.7), C::new(-0.8, 0.1)],
    ];
    let f = |z: [C; 3]| [homog[0].eval(z), homog[1].eval(z), homog[2].eval(z)];
    tests.iter().all(|&z| {
        let az = map(z);
        let afz = map(f(z));
        let faz = f(az);
        let scale = (az.iter().map(|c| c.norm_sqr()).sum::<f64>()
            * afz.iter().map(|c| c.norm_sqr()).sum::<f64>()
            * faz.iter().map(|c| c.norm_sqr()).sum::<f64>())
        .sqrt();
        det3(az, afz, faz).norm() <= 1e-10 * scale.max(1e-300)
    })
}

/// How a point is moved into the grid's fundamental domain.
#[derive(Debug, Clone, Copy)]
enum Reduction {
    /// One grid per affine chart; points go to their best chart.
    PerChart,
    /// Cyclic coordinate shifts are symmetries: one grid in chart 0.
    Cyclic { fold: usize, v_power: i64 },
    Planar,
}

#[derive(Debug, Clone, Copy)]
struct Axes {
    slots: usize,
    radial: usize,
    u_nodes: usize,
    v_cells: usize,
    r_max: f64,
    u_span: f64,
    /// Radial nodes evenly spaced in hyperbolic distance `ln((1+r)/(1-r))`
    /// rather than in `r`; used on the bidisc, where `ln η` bends at the rim.
    hyperbolic: bool,
}

impl Axes {
    fn len(&self) -> usize {
        self.slots * self.radial * self.radial * self.u_nodes * self.v_cells
    }

    fn index(&self, slot: usize, iu: usize, iv: usize, ju: usize, jv: usize) -> usize {
        (((slot * self.radial + iu) * self.radial + iv) * self.u_nodes + ju) * self.v_cells + jv
    }

    fn unpack(&self, mut idx: usize) -> (usize, usize, usize, usize, usize) {
        let jv = idx % self.v_cells;
        idx /= self.v_cells;
        let ju = idx % self.u_nodes;
        idx /= self.u_nodes;
        let iv = idx % self.radial;
        idx /= self.radial;
        let iu = idx % self.radial;
        (idx / self.radial, iu, iv, ju, jv)
    }

    fn radial_coord(&self, r: f64) -> f64 {
        if self.hyperbolic {
            ((1.0 + r) / (1.0 - r)).ln()
        } else {
            r
        }
    }

    fn dr(&self) -> f64 {
        self.radial_coord(self.r_max) / (self.radial - 1) as f64
    }

    fn radius(&self, i: usize) -> f64 {
        let x = i as f64 * self.dr();
        if self.hyperbolic {
            (x / 2.0).tanh()
        } else {
            x
        }
    }

    fn du(&self) -> f64 {
        self.u_span / (self.u_nodes - 1).max(1) as f64
    }

    fn dv(&self) -> f64 {
        std::f64::consts::TAU / self.v_cells as f64
    }
}

/// Worst-case comparison of the cache against direct estimates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheValidation {
    pub samples: usize,
    pub max_relative_defect: f64,
    pub mean_relative_defect: f64,
}

/// Asymptotic constant `c` in `η ≈ c·s·log*(s)` near one singular point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub location: ChartPoint,
    pub c: f64,
    /// Fits from the windows `[1e-4, 1e-2]` and `[1e-3, 1e-1]`.
    pub c_low: f64,
    pub c_high: f64,
}

/// Summary of a cache for reporting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheSummary {
    pub foliation: String,
    pub spec: GridSpec,
    pub nodes: usize,
    pub computed: usize,
    pub failed: usize,
    /// Largest η over computed nodes: the finite Brody supremum of the cache.
    pub sup_eta: f64,
    pub asymptotic: Vec<AsymptoticFit>,
}

pub struct EtaCache {
    fol: PolyFoliation,
    singular: SingularSet,
    spec: GridSpec,
    disc: DiscConfig,
    reduction: Reduction,
    axes: Axes,
    nodes: Vec<AtomicU64>,
    fits: Vec<AsymptoticFit>,
}

impl EtaCache {
    /// Empty cache; nodes are computed on first use. The asymptotic constants
    /// near each singular point are fitted here.
    pub fn new(fol: &PolyFoliation, singular: &SingularSet, spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let reduction = match fol.kind() {
            FoliationKind::Planar { domain: PlanarDomain::Bidisc, .. } => Reduction::Planar,
            FoliationKind::Planar { .. } => {
                return Err(Error::Unsupported("eta cache needs a bounded planar domain".into()))
            }
            FoliationKind::Projective { homog, .. } => projective_reduction(homog, fol.degree()),
        };
        let (slots, fold, r_max) = match reduction {
            Reduction::PerChart => (3, 1, 1.0),
            Reduction::Cyclic { fold, .. } => (1, fold, 1.0),
            Reduction::Planar => (1, 1, spec.planar_radius),
        };
        let u_cells = ((spec.phase as f64 / fold as f64).round() as usize).max(1);
        let (u_nodes, u_span) = if fold == 1 {
            // No folding: the u phase axis is periodic like the v axis; store
            // the closing node too so that both axes share one code path.
            (spec.phase + 1, std::f64::consts::TAU)
        } else {
            (u_cells + 1, std::f64::consts::TAU / fold as f64)
        };
        let hyperbolic = matches!(reduction, Reduction::Planar);
        let axes = Axes { slots, radial: spec.radial, u_nodes, v_cells: spec.phase, r_max, u_span, hyperbolic };
        let nodes = (0..axes.len()).map(|_| AtomicU64::new(UNSET)).collect();
        let mut cache = EtaCache {
            fol: fol.clone(),
            singular: singular.clone(),
            spec,
            disc: DiscConfig::default(),
            reduction,
            axes,
            nodes,
            fits: Vec::new(),
        };
        cache.fits = singular.records.iter().filter_map(|r| cache.fit_asymptotic(&r.location).ok()).collect();
        Ok(cache)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn foliation(&self) -> &PolyFoliation {
        &self.fol
    }

    pub fn asymptotic_fits(&self) -> &[AsymptoticFit] {
        &self.fits
    }

    /// Key identifying the cache contents on disk.
    pub fn key(&self) -> String {
        let s = &self.spec;
        format!(
            "{}:r{}{}:p{}:pr{}:d{}:{}",
            self.fol.fingerprint(),
            s.radial,
            if self.axes.hyperbolic { "h" } else { "" },
            s.phase,
            s.planar_radius,
            s.depth,
            &constants_hash()[..16]
        )
    }

    fn direct(&self, p: &ChartPoint) -> Result<f64> {
        eta_chain_refine_with(&self.fol, p, self.spec.depth, &self.disc).map(|e| e.lower)
    }

    fn node_point(&self, idx: usize) -> ChartPoint {
        let a = &self.axes;
        let (slot, iu, iv, ju, jv) = a.unpack(idx);
        let u = C::from_polar(a.radius(iu), ju as f64 * a.du());
        let v = C::from_polar(a.radius(iv), jv as f64 * a.dv());
        match self.reduction {
            Reduction::Planar => ChartPoint::plane(u, v),
            Reduction::PerChart => ChartPoint::affine(slot, u, v),
            Reduction::Cyclic { .. } => ChartPoint::affine(0, u, v),
        }
    }

    /// `ln(η/‖Y‖)` at a node, NaN where no estimate exists.
    fn node(&self, idx: usize) -> f64 {
        let bits = self.nodes[idx].load(Ordering::Relaxed);
        if bits != UNSET {
            return f64::from_bits(bits);
        }
        let p = self.node_point(idx);
        let value = if self.fol.contains(&p) {
            match (self.direct(&p), field_speed(&self.fol, &p)) {
                (Ok(eta), Ok(speed)) => (eta / speed).ln(),
                _ => f64::NAN,
            }
        } else {
            f64::NAN
        };
        self.nodes[idx].store(value.to_bits(), Ordering::Relaxed);
        value
    }

    /// Computes every node, in parallel.
    pub fn fill(&self) {
        (0..self.nodes.len()).into_par_iter().for_each(|i| {
            self.node(i);
        });
    }

    /// Moves `p` into the fundamental domain; `None` outside the grid region.
    fn reduce(&self, p: &ChartPoint) -> Option<(usize, ChartPoint)> {
        match self.reduction {
            Reduction::Planar => {
                let r = p.coords[0].norm().max(p.coords[1].norm());
                (p.chart == ChartId::Plane && r <= self.axes.r_max).then_some((0, *p))
            }
            Reduction::PerChart => {
                let q = p.in_best_chart();
                Some((q.chart.homogeneous_index()?, q))
            }
            Reduction::Cyclic { fold, v_power } => {
                let z = p.to_homogeneous()?;
                let k = (0..3).max_by(|&a, &b| z[a].norm().total_cmp(&z[b].norm()))?;
                let (mut u, mut v) = (z[(k + 1) % 3] / z[k], z[(k + 2) % 3] / z[k]);
                let span = std::f64::consts::TAU / fold as f64;
                let j = (u.arg().rem_euclid(std::f64::consts::TAU) / span).floor() as i64;
                if u.norm() > 0.0 && j > 0 {
                    u *= C::from_polar(1.0, -(j as f64) * span);
                    v *= C::from_polar(1.0, -((j * v_power).rem_euclid(fold as i64) as f64) * span);
                }
                Some((0, ChartPoint::affine(0, u, v)))
            }
        }
    }

    /// Multilinear interpolation of `ln(η/‖Y‖)`; NaN when a corner is missing.
    fn interpolate(&self, slot: usize, q: &ChartPoint) -> f64 {
        let a = self.axes;
        let [u, v] = q.coords;
        let frac = |x: f64, step: f64, top: usize| -> (usize, f64) {
            let t = (x / step).clamp(0.0, (top - 1) as f64);
            let i = (t.floor() as usize).min(top - 2);
            (i, t - i as f64)
        };
        let (iu, fu) = frac(a.radial_coord(u.norm()), a.dr(), a.radial);
        let (iv, fv) = frac(a.radial_coord(v.norm()), a.dr(), a.radial);
        let (ju, gu) = frac(u.arg().rem_euclid(std::f64::consts::TAU).min(a.u_span), a.du(), a.u_nodes);
        let tv = v.arg().rem_euclid(std::f64::consts::TAU) / a.dv();
        let jv = (tv.floor() as usize) % a.v_cells;
        let gv = tv - tv.floor();
        let mut acc = 0.0;
        for corner in 0..16u32 {
            let bit = |k: u32| (corner >> k) & 1;
            let w = [(fu, 0), (fv, 1), (gu, 2), (gv, 3)]
                .iter()
                .map(|&(f, k)| if bit(k) == 1 { f } else { 1.0 - f })
                .product::<f64>();
            if w == 0.0 {
                continue;
            }
            let idx = a.index(
                slot,
                iu + bit(0) as usize,
                iv + bit(1) as usize,
                ju + bit(2) as usize,
                (jv + bit(3) as usize) % a.v_cells,
            );
            acc += w * self.node(idx);
        }
        acc
    }

    fn asymptotic(&self, p: &ChartPoint) -> Result<EtaEstimate> {
        let (fit, s) = self
            .fits
            .iter()
            .filter_map(|f| {
                let q = f.location.to_chart(p.chart).ok()?;
                Some((f, (q.coords[0] - p.coords[0]).norm().hypot((q.coords[1] - p.coords[1]).norm())))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or_else(|| Error::domain("no asymptotic fit covers this point"))?;
        if !(s > 0.0) {
            return Err(Error::domain("point is singular"));
        }
        Ok(EtaEstimate {
            point: *p,
            lower: fit.c * s * log_star(s),
            method: EtaMethod::AsymptoticModel,
            iterations: 0,
            converged: true,
        })
    }

    /// Cached estimate at `p`; falls back to the asymptotic model near the
    /// singular set and to a direct computation outside the grid region.
    pub fn estimate(&self, p: &ChartPoint) -> Result<EtaEstimate> {
        let pb = if self.fol.is_projective() { p.in_best_chart() } else { *p };
        if self.singular.distance_to(&pb) < self.spec.near_singular {
            if let Ok(e) = self.asymptotic(&pb) {
                return Ok(e);
            }
        }
        let Some((slot, q)) = self.reduce(&pb) else {
            let lower = self.direct(&pb)?;
            return Ok(EtaEstimate { point: *p, lower, method: EtaMethod::ChainRefined, iterations: 0, converged: true });
        };
        let h = self.interpolate(slot, &q);
        if !h.is_finite() {
            return match self.asymptotic(&pb) {
                Ok(e) => Ok(e),
                Err(_) => self.direct(&pb).map(|lower| EtaEstimate {
                    point: *p,
                    lower,
                    method: EtaMethod::ChainRefined,
                    iterations: 0,
                    converged: true,
                }),
            };
        }
        let lower = h.exp() * field_speed(&self.fol, &q)?;
        Ok(EtaEstimate { point: *p, lower, method: EtaMethod::ChainRefined, iterations: self.spec.depth, converged: true })
    }

    /// Fits `c` from chain estimates at distances spread over two windows.
    fn fit_asymptotic(&self, e: &ChartPoint) -> Result<AsymptoticFit> {
        let dirs = [
            [C::new(1.0, 0.0), C::new(0.0, 0.0)],
            [C::new(0.0, 0.0), C::new(1.0, 0.0)],
            [C::new(0.6, 0.0), C::new(0.0, 0.8)],
            [C::new(0.0, -0.6), C::new(0.8, 0.0)],
            [C::new(0.5, 0.5), C::new(-0.5, 0.5)],
            [C::new(-0.3, 0.4), C::new(0.5, -0.7)],
        ];
        let window = |lo: f64, hi: f64| -> Option<f64> {
            let mut ratios = Vec::new();
            for k in 0..4 {
                let s_mag = lo * (hi / lo).powf(k as f64 / 3.0);
                for d in &dirs {
                    let n = d[0].norm().hypot(d[1].norm());
                    let q = ChartPoint { chart: e.chart, coords: [e.coords[0] + d[0] * (s_mag / n), e.coords[1] + d[1] * (s_mag / n)] };
                    if !self.fol.contains(&q) {
                        continue;
                    }
                    if let Ok(v) = eta_chain_refine_with(&self.fol, &q, 2, &self.disc) {
                        ratios.push(v.lower / (s_mag * log_star(s_mag)));
                    }
                }
            }
            (!ratios.is_empty()).then(|| crate::stats::quantile(&ratios, 0.5))
        };
        let c_low = window(1e-4, 1e-2).ok_or_else(|| Error::domain("asymptotic fit failed"))?;
        let c_high = window(1e-3, 1e-1).ok_or_else(|| Error::domain("asymptotic fit failed"))?;
        Ok(AsymptoticFit { location: *e, c: c_low, c_low, c_high })
    }

    pub fn summary(&self) -> CacheSummary {
        let mut computed = 0;
        let mut failed = 0;
        let mut sup_eta: f64 = 0.0;
        for (i, n) in self.nodes.iter().enumerate() {
            let bits = n.load(Ordering::Relaxed);
            if bits == UNSET {
                continue;
            }
            computed += 1;
            let h = f64::from_bits(bits);
            if !h.is_finite() {
                failed += 1;
                continue;
            }
            if let Ok(speed) = field_speed(&self.fol, &self.node_point(i)) {
                sup_eta = sup_eta.max(h.exp() * speed);
            }
        }
        CacheSummary {
            foliation: self.fol.name().to_string(),
            spec: self.spec,
            nodes: self.nodes.len(),
            computed,
            failed,
            sup_eta,
            asymptotic: self.fits.clone(),
        }
    }

    /// Compares the cache with direct estimates at the given points, skipping
    /// points inside the asymptotic zone.
    pub fn validate(&self, points: &[ChartPoint]) -> Result<CacheValidation> {
        let defects: Vec<f64> = points
            .par_iter()
            .filter_map(|p| {
                let cached = self.estimate(p).ok().filter(|e| e.method == EtaMethod::ChainRefined)?;
                let direct = self.direct(p).ok()?;
                Some((cached.lower - direct).abs() / direct)
            })
            .collect();
        if defects.is_empty() {
            return Err(Error::domain("no validation point inside the grid region"));
        }
        Ok(CacheValidation {
            samples: defects.len(),
            max_relative_defect: defects.iter().cloned().fold(0.0, f64::max),
            mean_relative_defect: defects.iter().sum::<f64>() / defects.len() as f64,
        })
    }

    /// Writes the computed nodes as CSV (`index,value`) under a key header.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "# key={}", self.key())?;
        writeln!(out, "index,value")?;
        for (i, n) in self.nodes.iter().enumerate() {
            let bits = n.load(Ordering::Relaxed);
            if bits != UNSET {
                writeln!(out, "{i},{:e}", f64::from_bits(bits))?;
            }
        }
        Ok(())
    }

    /// Loads nodes saved by [`EtaCache::save`]; returns the number loaded, or
    /// zero when the file's key does not match this cache.
    pub fn load(&self, path: &Path) -> Result<usize> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut lines = file.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != format!("# key={}", self.key()) {
            return Ok(0);
        }
        let mut loaded = BTreeMap::new();
        for line in lines.skip(1) {
            let line = line?;
            let Some((i, v)) = line.split_once(',') else { continue };
            let i: usize = i.trim().parse().map_err(|_| Error::input(format!("bad cache line: {line}")))?;
            let v: f64 = v.trim().parse().map_err(|_| Error::input(format!("bad cache line: {line}")))?;
            if i >= self.nodes.len() {
                return Err(Error::input(format!("cache index {i} out of range")));
            }
            loaded.insert(i, v);
        }
        for (&i, &v) in &loaded {
            self.nodes[i].store(v.to_bits(), Ordering::Relaxed);
        }
        Ok(loaded.len())
    }
}

impl EtaProvider for EtaCache {
    fn eta(&self, _fol: &PolyFoliation, p: &ChartPoint) -> Result<f64> {
        self.estimate(p).map(|e| e.lower)
    }
}

fn projective_reduction(homog: &[HomogPoly; 3], degree: u32) -> Reduction {
    let shift = |z: [C; 3]| [z[1], z[2], z[0]];
    if !is_symmetry(homog, shift) {
        return Reduction::PerChart;
    }
    // Diagonal symmetries diag(1, α, α^b) with α a primitive root of unity.
    let n = (degree * degree + degree + 1) as usize;
    let alpha = C::from_polar(1.0, std::f64::consts::TAU / n as f64);
    for b in 0..n as i64 {
        let beta = alpha.powi(b as i32);
        if is_symmetry(homog, |z| [z[0], alpha * z[1], beta * z[2]]) {
            return Reduction::Cyclic { fold: n, v_power: b };
        }
    }
    Reduction::Cyclic { fold: 1, v_power: 0 }
}
