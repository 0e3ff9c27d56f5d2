use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::foliation::{ChartId, ChartPoint, PolyFoliation, SingularSet};
use crate::leafwise::{path_rng, EtaProvider, LeafSampler, PathSample, SamplerConfig};
use crate::poincare_metric::log_star;

/// Binning of occupation time: per chart, a square grid over `(|x₁|, |x₂|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccupationSpec {
    pub bins: usize,
    /// Occupation points are stored every this much time (for resampling).
    pub reservoir_interval: f64,
}

impl Default for OccupationSpec {
    fn default() -> Self {
        OccupationSpec { bins: 32, reservoir_interval: 1.0 }
    }
}

/// Empirical harmonic measure: time spent in each cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationGrid {
    pub bins: usize,
    pub charts: Vec<ChartId>,
    /// Indexed by `chart_slot · bins² + i · bins + j`.
    pub weights: Vec<f64>,
    pub total_time: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub starts: Vec<ChartPoint>,
    /// Time integral of `log* dist(·, E)`.
    pub log_star_time: f64,
    /// Time integral of the weight `W`.
    pub weight_w_time: f64,
    /// Points recorded at regular time intervals, each standing for equal time.
    pub reservoir: Vec<ChartPoint>,
    pub reservoir_interval: f64,
}

impl OccupationGrid {
    pub fn empty(fol: &PolyFoliation, spec: &OccupationSpec) -> Self {
        OccupationGrid {
            bins: spec.bins.max(1),
            charts: fol.charts(),
            weights: vec![0.0; fol.charts().len() * spec.bins.max(1).pow(2)],
            total_time: 0.0,
            horizon: 0.0,
            n_paths: 0,
            starts: Vec::new(),
            log_star_time: 0.0,
            weight_w_time: 0.0,
            reservoir: Vec::new(),
            reservoir_interval: spec.reservoir_interval,
        }
    }

    /// Cell containing `p`; projective points are first moved to their best chart.
    pub fn cell_of(&self, p: &ChartPoint) -> Option<usize> {
        let q = if p.chart == ChartId::Plane { *p } else { p.in_best_chart() };
        let slot = self.charts.iter().position(|&c| c == q.chart)?;
        let b = self.bins;
        let bin = |x: f64| ((x * b as f64).floor().max(0.0) as usize).min(b - 1);
        let (i, j) = (bin(q.coords[0].norm()), bin(q.coords[1].norm()));
        (q.coords[0].norm() <= 1.0 && q.coords[1].norm() <= 1.0).then_some(slot * b * b + i * b + j)
    }

    /// Adds `dt` of occupation time at `p`.
    pub fn add(&mut self, p: &ChartPoint, dt: f64) {
        if let Some(c) = self.cell_of(p) {
            self.weights[c] += dt;
            self.total_time += dt;
        }
    }

    /// Appends `other` (same layout) to this grid.
    pub fn merge(&mut self, other: &OccupationGrid) -> Result<()> {
        if other.bins != self.bins || other.charts != self.charts {
            return Err(Error::input("occupation grids have different layouts"));
        }
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        self.total_time += other.total_time;
        self.n_paths += other.n_paths;
        self.horizon = self.horizon.max(other.horizon);
        self.starts.extend_from_slice(&other.starts);
        self.log_star_time += other.log_star_time;
        self.weight_w_time += other.weight_w_time;
        self.reservoir.extend_from_slice(&other.reservoir);
        Ok(())
    }

    /// Same charts and reservoir on a `bins × bins` layout, with weights
    /// rebuilt from the reservoir. Diffusion checks use coarse layouts so
    /// that a few thousand points resolve the cell probabilities.
    pub fn rebinned(&self, bins: usize) -> OccupationGrid {
        let b = bins.max(1);
        let mut g = OccupationGrid {
            bins: b,
            weights: vec![0.0; self.charts.len() * b * b],
            total_time: 0.0,
            ..self.clone()
        };
        for p in &self.reservoir {
            g.add(p, self.reservoir_interval);
        }
        g
    }

    /// Cell probabilities.
    pub fn normalized(&self) -> Vec<f64> {
        let s: f64 = self.weights.iter().sum();
        if s > 0.0 {
            self.weights.iter().map(|w| w / s).collect()
        } else {
            self.weights.clone()
        }
    }

    /// Fraction of reservoir points within `r` of `a` (in `a`'s chart).
    pub fn ball_mass(&self, a: &ChartPoint, r: f64) -> f64 {
        if self.reservoir.is_empty() {
            return 0.0;
        }
        let inside = self
            .reservoir
            .iter()
            .filter_map(|p| p.to_chart(a.chart).ok())
            .filter(|p| (p.coords[0] - a.coords[0]).norm().hypot((p.coords[1] - a.coords[1]).norm()) < r)
            .count();
        inside as f64 / self.reservoir.len() as f64
    }

    /// CSV with columns `chart,i,j,weight`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["chart", "i", "j", "weight"]).map_err(|e| Error::Io(e.into()))?;
        let b = self.bins;
        for (slot, chart) in self.charts.iter().enumerate() {
            for i in 0..b {
                for j in 0..b {
                    let v = self.weights[slot * b * b + i * b + j];
                    w.write_record([chart.code().to_string(), i.to_string(), j.to_string(), format!("{v:e}")])
                        .map_err(|e| Error::Io(e.into()))?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a grid written by [`OccupationGrid::write_csv`]; only the cell
    /// weights round-trip. Lines starting with `#` are skipped.
    pub fn read_csv<R: Read>(input: R, fol: &PolyFoliation, bins: usize) -> Result<Self> {
        let mut grid = OccupationGrid::empty(fol, &OccupationSpec { bins, ..OccupationSpec::default() });
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let field = |k: usize| rec.get(k).ok_or_else(|| Error::Parse("short occupation row".into()));
            let chart = field(0)?.parse::<u8>().ok().and_then(ChartId::from_code);
            let slot = chart
                .and_then(|c| grid.charts.iter().position(|&x| x == c))
                .ok_or_else(|| Error::Parse(format!("unknown chart {:?}", rec.get(0))))?;
            let i: usize = field(1)?.parse().map_err(|_| Error::Parse("bad row index".into()))?;
            let j: usize = field(2)?.parse().map_err(|_| Error::Parse("bad column index".into()))?;
            let v: f64 = field(3)?.parse().map_err(|_| Error::Parse("bad weight".into()))?;
            if i >= bins || j >= bins || !(v >= 0.0) {
                return Err(Error::Parse(format!("cell ({i},{j}) weight {v} out of range")));
            }
            grid.weights[slot * bins * bins + i * bins + j] = v;
            grid.total_time += v;
        }
        Ok(grid)
    }

    /// Reservoir points as CSV with columns `chart,x1_re,x1_im,x2_re,x2_im`.
    pub fn write_reservoir_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["chart", "x1_re", "x1_im", "x2_re", "x2_im"]).map_err(|e| Error::Io(e.into()))?;
        for p in &self.reservoir {
            let [a, b] = p.coords;
            w.write_record([
                p.chart.code().to_string(),
                format!("{:e}", a.re),
                format!("{:e}", a.im),
                format!("{:e}", b.re),
                format!("{:e}", b.im),
            ])
            .map_err(|e| Error::Io(e.into()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Replaces the reservoir by points read from [`OccupationGrid::write_reservoir_csv`] output.
    pub fn read_reservoir_csv<R: Read>(&mut self, input: R) -> Result<usize> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let mut points = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let num = |k: usize| -> Result<f64> {
                rec.get(k).and_then(|v| v.parse().ok()).ok_or_else(|| Error::Parse("bad reservoir row".into()))
            };
            let chart = rec
                .get(0)
                .and_then(|c| c.parse::<u8>().ok())
                .and_then(ChartId::from_code)
                .filter(|c| self.charts.contains(c))
                .ok_or_else(|| Error::Parse(format!("unknown chart {:?}", rec.get(0))))?;
            let coords = [num_complex::Complex64::new(num(1)?, num(2)?), num_complex::Complex64::new(num(3)?, num(4)?)];
            points.push(ChartPoint::new(chart, coords)?);
        }
        self.reservoir = points;
        Ok(self.reservoir.len())
    }
}

/// Total-variation distance between normalized grids, in `[0, 1]`.
pub fn tv_distance(a: &OccupationGrid, b: &OccupationGrid) -> Result<f64> {
    if a.bins != b.bins || a.charts != b.charts {
        return Err(Error::input("occupation grids have different layouts"));
    }
    Ok(tv_of(&a.normalized(), &b.normalized()))
}

fn tv_of(p: &[f64], q: &[f64]) -> f64 {
    (0.5 * p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum::<f64>()).clamp(0.0, 1.0)
}

fn midpoint(a: &ChartPoint, b: &ChartPoint) -> ChartPoint {
    match a.to_chart(b.chart) {
        Ok(a) => ChartPoint { chart: b.chart, coords: [(a.coords[0] + b.coords[0]) * 0.5, (a.coords[1] + b.coords[1]) * 0.5] },
        Err(_) => *b,
    }
}

/// Weight `log* s + (|z|²|w|²/(|z|²+|w|²)²)·(log* s)²` in the eigen-coordinates
/// `(z, w)` of the nearest singular point, `s` the distance to it.
pub fn weight_w(singular: &SingularSet, p: &ChartPoint) -> f64 {
    let best = singular
        .records
        .iter()
        .filter_map(|r| {
            let q = p.to_chart(r.location.chart).ok()?;
            let d = [q.coords[0] - r.location.coords[0], q.coords[1] - r.location.coords[1]];
            Some((r, d, d[0].norm().hypot(d[1].norm())))
        })
        .min_by(|a, b| a.2.total_cmp(&b.2));
    let Some((rec, d, s)) = best else { return 1.0 };
    let near = singular.distance_to(p);
    let ls = log_star(if near.is_finite() { near } else { s });
    let m = rec.eigenvectors;
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.norm() < 1e-300 {
        return ls;
    }
    let z = (m[1][1] * d[0] - m[0][1] * d[1]) / det;
    let w = (m[0][0] * d[1] - m[1][0] * d[0]) / det;
    let (a, b) = (z.norm_sqr(), w.norm_sqr());
    let mix = if a + b > 0.0 { a * b / ((a + b) * (a + b)) } else { 0.0 };
    ls + mix * ls * ls
}

/// Accumulates one step into the grid: time at the step midpoint, plus the
/// integrability observables and the reservoir.
pub(crate) fn record_step(
    grid: &mut OccupationGrid,
    singular: &SingularSet,
    from: &ChartPoint,
    to: &ChartPoint,
    t: f64,
    dt: f64,
) {
    let mid = midpoint(from, to);
    grid.add(&mid, dt);
    let pb = if mid.chart == ChartId::Plane { mid } else { mid.in_best_chart() };
    let s = singular.distance_to(&pb);
    if s.is_finite() {
        grid.log_star_time += dt * log_star(s);
        grid.weight_w_time += dt * weight_w(singular, &pb);
    } else {
        grid.log_star_time += dt;
        grid.weight_w_time += dt;
    }
    let every = grid.reservoir_interval;
    if every > 0.0 && (t / every).floor() != ((t + dt) / every).floor() {
        grid.reservoir.push(*to);
    }
}

/// Occupation measure of stored paths, binning each increment at its midpoint.
pub fn occupation_measure(fol: &PolyFoliation, singular: &SingularSet, paths: &[PathSample], spec: &OccupationSpec) -> Result<OccupationGrid> {
    if paths.is_empty() {
        return Err(Error::input("no paths to bin"));
    }
    let mut grid = OccupationGrid::empty(fol, spec);
    for ps in paths {
        for w in ps.nodes.windows(2) {
            record_step(&mut grid, singular, &w[0].point, &w[1].point, w[0].t, w[1].t - w[0].t);
        }
        grid.horizon = grid.horizon.max(ps.total_time());
        grid.n_paths += 1;
        grid.starts.push(ps.start);
    }
    Ok(grid)
}

/// Integral of `log* dist(·, E)` against the normalized occupation measure.
pub fn integrability_diagnostic(grid: &OccupationGrid) -> Result<f64> {
    if !(grid.total_time > 0.0) {
        return Err(Error::input("empty occupation grid"));
    }
    Ok(grid.log_star_time / grid.total_time)
}

/// Integral of the weight `W` against the normalized occupation measure.
pub fn weight_w_diagnostic(grid: &OccupationGrid) -> Result<f64> {
    if !(grid.total_time > 0.0) {
        return Err(Error::input("empty occupation grid"));
    }
    Ok(grid.weight_w_time / grid.total_time)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvarianceReport {
    /// TV between the resampled grid and its image after diffusion.
    pub tv: f64,
    /// TV between two independent resamples of the same grid.
    pub noise_floor: f64,
    pub excess: f64,
    pub n: usize,
    pub time: f64,
    /// Resampled points whose diffusion ended early.
    pub incomplete: usize,
}

/// Uniform points on the cells of a grid layout: a cell at random, moduli
/// uniform inside it, phases uniform.
pub fn uniform_grid_points<R: Rng + ?Sized>(grid: &OccupationGrid, n: usize, rng: &mut R) -> Vec<ChartPoint> {
    let b = grid.bins;
    (0..n)
        .map(|_| {
            let slot = rng.random_range(0..grid.charts.len());
            let (i, j) = (rng.random_range(0..b), rng.random_range(0..b));
            let r1 = (i as f64 + rng.random::<f64>()) / b as f64;
            let r2 = (j as f64 + rng.random::<f64>()) / b as f64;
            let c1 = num_complex::Complex64::from_polar(r1, rng.random::<f64>() * std::f64::consts::TAU);
            let c2 = num_complex::Complex64::from_polar(r2, rng.random::<f64>() * std::f64::consts::TAU);
            ChartPoint { chart: grid.charts[slot], coords: [c1, c2] }
        })
        .collect()
}

/// Bins `points` with equal weights.
fn bin_points(template: &OccupationGrid, points: &[ChartPoint]) -> OccupationGrid {
    let mut g = OccupationGrid { weights: vec![0.0; template.weights.len()], total_time: 0.0, reservoir: Vec::new(), ..template.clone() };
    for p in points {
        g.add(p, 1.0);
    }
    g
}

/// Diffuses points for time `t` and compares before/after grids. `points`
/// are the initial sample; the noise floor compares `points` with `reference`,
/// an independent sample of the same measure.
#[allow(clippy::too_many_arguments)]
pub fn diffusion_check_points(
    fol: &PolyFoliation,
    singular: &SingularSet,
    eta: &dyn EtaProvider,
    template: &OccupationGrid,
    points: &[ChartPoint],
    reference: &[ChartPoint],
    t: f64,
    seed: u64,
) -> Result<InvarianceReport> {
    use rayon::prelude::*;
    if !(t >= 0.0) {
        return Err(Error::input("diffusion time must be nonnegative"));
    }
    let before = bin_points(template, points);
    let floor = tv_distance(&before, &bin_points(template, reference))?;
    let config = SamplerConfig { horizon: t, stride: usize::MAX, ..SamplerConfig::default() };
    let sampler = LeafSampler { fol, singular, eta, config };
    let ends: Vec<(ChartPoint, bool)> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            if t == 0.0 {
                return (*p, true);
            }
            let ps = sampler.sample(p, &mut path_rng(seed, i as u64), i as u64);
            let last = ps.nodes.last().map_or(*p, |n| n.point);
            (last, (ps.total_time() - t).abs() <= 1e-9 * (1.0 + t))
        })
        .collect();
    let incomplete = ends.iter().filter(|e| !e.1).count();
    let after_points: Vec<ChartPoint> = ends.into_iter().map(|e| e.0).collect();
    let tv = tv_distance(&before, &bin_points(template, &after_points))?;
    Ok(InvarianceReport { tv, noise_floor: floor, excess: tv - floor, n: points.len(), time: t, incomplete })
}

/// Draws `n` points from the grid's reservoir, diffuses them for time `t`
/// and returns the TV between the before and after grids. The noise floor
/// compares the draw with a disjoint second draw, so the reservoir must hold
/// at least `2n` points; drawing with replacement would let the two samples
/// share points and understate the floor.
pub fn diffusion_invariance_check(
    grid: &OccupationGrid,
    fol: &PolyFoliation,
    singular: &SingularSet,
    eta: &dyn EtaProvider,
    t: f64,
    n: usize,
    seed: u64,
) -> Result<InvarianceReport> {
    use rand::seq::SliceRandom;
    if n == 0 || grid.reservoir.len() < 2 * n {
        return Err(Error::input(format!(
            "need at least {} reservoir points for {n} draws, found {}",
            2 * n,
            grid.reservoir.len()
        )));
    }
    let mut rng = path_rng(seed, u64::MAX);
    let mut order: Vec<usize> = (0..grid.reservoir.len()).collect();
    order.shuffle(&mut rng);
    let points: Vec<ChartPoint> = order[..n].iter().map(|&i| grid.reservoir[i]).collect();
    let reference: Vec<ChartPoint> = order[n..2 * n].iter().map(|&i| grid.reservoir[i]).collect();
    diffusion_check_points(fol, singular, eta, grid, &points, &reference, t, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C;

    #[test]
    fn tv_is_a_distance() {
        let f = PolyFoliation::jouanolou(2).unwrap();
        let mut a = OccupationGrid::empty(&f, &OccupationSpec::default());
        let mut b = a.clone();
        a.add(&ChartPoint::affine(0, C::new(0.1, 0.0), C::new(0.2, 0.0)), 1.0);
        b.add(&ChartPoint::affine(1, C::new(0.5, 0.0), C::new(0.2, 0.3)), 2.0);
        assert_eq!(tv_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(tv_distance(&a, &b).unwrap(), tv_distance(&b, &a).unwrap());
        assert!((tv_distance(&a, &b).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let f = PolyFoliation::jouanolou(2).unwrap();
        let mut a = OccupationGrid::empty(&f, &OccupationSpec { bins: 4, ..OccupationSpec::default() });
        a.add(&ChartPoint::affine(2, C::new(0.3, 0.1), C::new(-0.7, 0.0)), 0.25);
        a.add(&ChartPoint::affine(0, C::new(0.9, 0.1), C::new(0.0, 0.0)), 0.5);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let b = OccupationGrid::read_csv(&buf[..], &f, 4).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.total_time, b.total_time);
        a.reservoir = vec![ChartPoint::affine(1, C::new(0.25, -0.5), C::new(0.125, 0.0))];
        let mut buf = Vec::new();
        a.write_reservoir_csv(&mut buf).unwrap();
        let mut b = b;
        assert_eq!(b.read_reservoir_csv(&buf[..]).unwrap(), 1);
        assert_eq!(a.reservoir, b.reservoir);
    }

    #[test]
    fn weight_bounds() {
        let f = PolyFoliation::jouanolou(2).unwrap();
        let sing = crate::foliation::find_singularities(&f, &crate::foliation::SeedGrid::default()).unwrap();
        for p in [ChartPoint::affine(0, C::new(0.3, 0.1), C::new(-0.2, 0.4)), ChartPoint::affine(0, C::new(0.999, 0.0), C::new(1.0, 0.002))] {
            let pb = p.in_best_chart();
            let ls = log_star(sing.distance_to(&pb));
            let w = weight_w(&sing, &pb);
            assert!(w >= ls && w <= 2.0 * ls * ls, "{w} {ls}");
        }
    }
}
