use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::flow::{flow_step, FlowSegment};
use crate::constants::{C0_STEP_VARIANCE, DT_BETA, DT_MAX, PROXIMITY_RADIUS};
use crate::error::{Error, Result};
use crate::foliation::{ChartPoint, PolyFoliation, SingularSet};
use crate::quad::KahanAcc;

type C = Complex64;

/// Source of the Poincaré density η along leaves.
pub trait EtaProvider: Send + Sync {
    fn eta(&self, fol: &PolyFoliation, p: &ChartPoint) -> Result<f64>;
}

impl<F> EtaProvider for F
where
    F: Fn(&PolyFoliation, &ChartPoint) -> Result<f64> + Send + Sync,
{
    fn eta(&self, fol: &PolyFoliation, p: &ChartPoint) -> Result<f64> {
        self(fol, p)
    }
}

/// One leafwise Brownian increment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafStep {
    pub segment: FlowSegment,
    /// Hyperbolic time consumed.
    pub dt: f64,
}

/// Gaussian flow-time increment whose hyperbolic variance is `dt`.
pub fn draw_increment<R: Rng + ?Sized>(fol: &PolyFoliation, p: &ChartPoint, dt: f64, eta: f64, rng: &mut R) -> Result<C> {
    if !(dt > 0.0) || !(eta > 0.0) {
        return Err(Error::input("time step and eta must be positive"));
    }
    let y = fol.evaluate_field(p)?;
    let speed = fol.metric().norm_sq(p.coords, y).sqrt();
    if !(speed > 0.0) {
        return Err(Error::SingularProximity { distance: 0.0 });
    }
    let sigma = (C0_STEP_VARIANCE * dt).sqrt() * eta / speed;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Ok(C::new(re, im) * sigma)
}

/// Advances `p` by one Brownian step of hyperbolic time `dt`.
pub fn bm_step_leafwise<R: Rng + ?Sized>(
    fol: &PolyFoliation,
    p: &ChartPoint,
    dt: f64,
    eta: f64,
    rng: &mut R,
) -> Result<LeafStep> {
    if dt > DT_MAX * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!("dt {dt} exceeds the cap {DT_MAX}")));
    }
    let dtau = draw_increment(fol, p, dt, eta, rng)?;
    let segment = flow_step(fol, p, dtau)?;
    Ok(LeafStep { segment, dt })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Termination {
    Horizon,
    SingularProximity,
    /// Chart bookkeeping failed, or a planar path could not stay in its domain.
    ChartFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathNode {
    /// Accumulated hyperbolic time.
    pub t: f64,
    pub point: ChartPoint,
    pub log_h: f64,
    /// Accumulated flow time since the last chart change.
    pub tau: C,
}

/// One accepted step as seen by a sampling observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// Time at the start of the step.
    pub t: f64,
    pub dt: f64,
    /// η used for the step, evaluated at `from`.
    pub eta: f64,
    pub from: ChartPoint,
    pub to: ChartPoint,
    pub log_holonomy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub start: ChartPoint,
    pub nodes: Vec<PathNode>,
    pub termination: Termination,
    pub rng_stream_id: u64,
}

impl PathSample {
    pub fn total_time(&self) -> f64 {
        self.nodes.last().map_or(0.0, |n| n.t)
    }

    pub fn log_holonomy(&self) -> f64 {
        match (self.nodes.first(), self.nodes.last()) {
            (Some(a), Some(b)) => b.log_h - a.log_h,
            _ => 0.0,
        }
    }

    /// Node at which the path is cut when shifted by `s`.
    fn cut_index(&self, s: f64) -> Option<usize> {
        let tol = 1e-12 * (1.0 + s.abs());
        self.nodes.iter().position(|n| n.t >= s - tol)
    }

    /// Suffix of the path after time `s`, with times measured from `s` and the
    /// holonomy re-zeroed at the first retained node.
    pub fn shifted(&self, s: f64) -> Result<PathSample> {
        if !(s >= 0.0) {
            return Err(Error::domain("shift must be non-negative"));
        }
        let i = self
            .cut_index(s)
            .ok_or_else(|| Error::domain(format!("shift {s} beyond the path horizon {}", self.total_time())))?;
        let base = self.nodes[i];
        let nodes = self.nodes[i..]
            .iter()
            .map(|n| PathNode { t: (n.t - s).max(0.0), point: n.point, log_h: n.log_h - base.log_h, tau: n.tau })
            .collect();
        Ok(PathSample { start: base.point, nodes, termination: self.termination, rng_stream_id: self.rng_stream_id })
    }

    /// Log holonomy accumulated up to the last node at or before time `t`.
    pub fn log_holonomy_at(&self, t: f64) -> f64 {
        let first = self.nodes.first().map_or(0.0, |n| n.log_h);
        let tol = 1e-12 * (1.0 + t.abs());
        self.nodes.iter().take_while(|n| n.t <= t + tol).last().map_or(first, |n| n.log_h) - first
    }
}

pub fn shift_path(ps: &PathSample, s: f64) -> Result<PathSample> {
    ps.shifted(s)
}

/// Anything carrying a log holonomy norm.
pub trait Holonomic {
    fn log_holonomy_norm(&self) -> f64;
}

impl Holonomic for FlowSegment {
    fn log_holonomy_norm(&self) -> f64 {
        self.log_holonomy
    }
}

impl Holonomic for [FlowSegment] {
    fn log_holonomy_norm(&self) -> f64 {
        let mut acc = KahanAcc::default();
        for s in self {
            acc.add(s.log_holonomy);
        }
        acc.value()
    }
}

impl Holonomic for PathSample {
    fn log_holonomy_norm(&self) -> f64 {
        self.log_holonomy()
    }
}

pub fn holonomy_along<H: Holonomic + ?Sized>(h: &H) -> f64 {
    h.log_holonomy_norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub horizon: f64,
    pub dt_max: f64,
    pub beta: f64,
    pub proximity_radius: f64,
    /// Record every `stride`-th step (the final state is always recorded).
    pub stride: usize,
    /// Redraws allowed for a step that leaves a bounded planar domain.
    pub max_resamples: usize,
    pub max_steps: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            horizon: 1.0,
            dt_max: DT_MAX,
            beta: DT_BETA,
            proximity_radius: PROXIMITY_RADIUS,
            stride: 1,
            max_resamples: 64,
            max_steps: 50_000_000,
        }
    }
}

/// Deterministic per-path generator.
pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Chained Brownian sampler on the leaves of one foliation.
pub struct LeafSampler<'a> {
    pub fol: &'a PolyFoliation,
    pub singular: &'a SingularSet,
    pub eta: &'a dyn EtaProvider,
    pub config: SamplerConfig,
}

fn termination_of(e: &Error) -> Termination {
    match e {
        Error::ChartFailure(_) => Termination::ChartFailure,
        _ => Termination::SingularProximity,
    }
}

impl<'a> LeafSampler<'a> {
    /// Time step allowed at `p` given the local η.
    pub fn time_step(&self, p: &ChartPoint, eta: f64) -> f64 {
        let s = self.singular.distance_to(p);
        let cap = self.config.beta * s * s / (eta * eta);
        self.config.dt_max.min(cap)
    }

    pub fn sample<R: Rng + ?Sized>(&self, start: &ChartPoint, rng: &mut R, stream_id: u64) -> PathSample {
        self.sample_observed(start, rng, stream_id, &mut |_: &StepRecord| {})
    }

    /// Like [`LeafSampler::sample`], calling `observer` after every accepted step.
    pub fn sample_observed<R: Rng + ?Sized>(
        &self,
        start: &ChartPoint,
        rng: &mut R,
        stream_id: u64,
        observer: &mut dyn FnMut(&StepRecord),
    ) -> PathSample {
        let cfg = &self.config;
        let mut nodes = vec![PathNode { t: 0.0, point: *start, log_h: 0.0, tau: C::new(0.0, 0.0) }];
        let mut p = *start;
        let mut t = KahanAcc::default();
        let mut log_h = KahanAcc::default();
        let mut tau = C::new(0.0, 0.0);
        let stride = cfg.stride.max(1);
        let mut steps = 0usize;
        let finish = |mut nodes: Vec<PathNode>, last: PathNode, why: Termination| {
            if nodes.last().map_or(true, |n| n.t < last.t) {
                nodes.push(last);
            }
            PathSample { start: *start, nodes, termination: why, rng_stream_id: stream_id }
        };
        loop {
            let now = t.value();
            let here = PathNode { t: now, point: p, log_h: log_h.value(), tau };
            let remaining = cfg.horizon - now;
            if remaining <= 1e-12 * (1.0 + cfg.horizon) {
                return finish(nodes, here, Termination::Horizon);
            }
            if steps >= cfg.max_steps {
                return finish(nodes, here, Termination::ChartFailure);
            }
            if self.singular.distance_to(&p) < cfg.proximity_radius {
                return finish(nodes, here, Termination::SingularProximity);
            }
            let eta = match self.eta.eta(self.fol, &p) {
                Ok(v) if v > 0.0 && v.is_finite() => v,
                Ok(_) => return finish(nodes, here, Termination::SingularProximity),
                Err(e) => return finish(nodes, here, termination_of(&e)),
            };
            let mut dt = self.time_step(&p, eta).min(remaining);
            // Avoid leaving a sliver that would need a tiny final step.
            if remaining - dt < 1e-9 {
                dt = remaining;
            }
            let mut attempt = 0;
            let step = loop {
                let r = draw_increment(self.fol, &p, dt, eta, rng).and_then(|dtau| flow_step(self.fol, &p, dtau));
                match r {
                    Ok(seg) if self.fol.contains(&seg.to) => break Ok(seg),
                    Ok(_) => {
                        attempt += 1;
                        if attempt > cfg.max_resamples {
                            break Err(Termination::ChartFailure);
                        }
                    }
                    Err(e) => break Err(termination_of(&e)),
                }
            };
            let seg = match step {
                Ok(s) => s,
                Err(why) => return finish(nodes, here, why),
            };
            steps += 1;
            observer(&StepRecord { t: now, dt, eta, from: p, to: seg.to, log_holonomy: seg.log_holonomy });
            t.add(dt);
            log_h.add(seg.log_holonomy);
            tau = if seg.to.chart == p.chart { tau + seg.dtau } else { C::new(0.0, 0.0) };
            p = seg.to;
            if steps % stride == 0 {
                nodes.push(PathNode { t: t.value(), point: p, log_h: log_h.value(), tau });
            }
        }
    }
}

pub fn sample_leaf_path<R: Rng + ?Sized>(
    fol: &PolyFoliation,
    singular: &SingularSet,
    start: &ChartPoint,
    config: SamplerConfig,
    eta: &dyn EtaProvider,
    rng: &mut R,
    stream_id: u64,
) -> PathSample {
    LeafSampler { fol, singular, eta, config }.sample(start, rng, stream_id)
}

/// Writes path nodes as CSV with columns
/// `path_id,t,chart,re0,im0,re1,im1,logH`.
pub fn write_paths_csv<W: Write>(paths: &[PathSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["path_id", "t", "chart", "re0", "im0", "re1", "im1", "logH"])
        .map_err(|e| Error::Io(e.into()))?;
    for ps in paths {
        for n in &ps.nodes {
            let c = n.point.coords;
            w.write_record([
                ps.rng_stream_id.to_string(),
                format!("{:e}", n.t),
                n.point.chart.code().to_string(),
                format!("{:e}", c[0].re),
                format!("{:e}", c[0].im),
                format!("{:e}", c[1].re),
                format!("{:e}", c[1].im),
                format!("{:e}", n.log_h),
            ])
            .map_err(|e| Error::Io(e.into()))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc_eta(_: &PolyFoliation, p: &ChartPoint) -> Result<f64> {
        Ok(0.5 * (1.0 - p.coords[0].norm_sqr()))
    }

    fn product() -> (PolyFoliation, SingularSet) {
        (PolyFoliation::product_disc(), SingularSet::default())
    }

    #[test]
    fn zero_horizon_is_single_node() {
        let (f, sing) = product();
        let cfg = SamplerConfig { horizon: 0.0, ..Default::default() };
        let ps = sample_leaf_path(&f, &sing, &ChartPoint::plane(C::new(0.1, 0.0), C::new(0.2, 0.0)), cfg, &disc_eta, &mut path_rng(1, 0), 0);
        assert_eq!(ps.nodes.len(), 1);
        assert_eq!(ps.log_holonomy(), 0.0);
        assert_eq!(ps.termination, Termination::Horizon);
    }

    #[test]
    fn shifts_compose() {
        let (f, sing) = product();
        let cfg = SamplerConfig { horizon: 0.5, ..Default::default() };
        let ps = sample_leaf_path(&f, &sing, &ChartPoint::plane(C::new(0.1, 0.0), C::new(0.2, 0.0)), cfg, &disc_eta, &mut path_rng(2, 0), 0);
        assert_eq!(ps.termination, Termination::Horizon);
        assert!((ps.total_time() - 0.5).abs() < 1e-12);
        assert_eq!(ps.shifted(0.0).unwrap(), ps);
        let a = ps.shifted(0.1).unwrap().shifted(0.2).unwrap();
        let b = ps.shifted(0.3).unwrap();
        assert_eq!(a.nodes.len(), b.nodes.len());
        for (x, y) in a.nodes.iter().zip(&b.nodes) {
            assert!((x.t - y.t).abs() < 1e-12);
            assert_eq!(x.point, y.point);
        }
        assert!(ps.shifted(0.6).is_err());
        let w: Vec<f64> = ps.nodes.windows(2).map(|w| w[1].t - w[0].t).collect();
        assert!(w.iter().all(|&d| d > 0.0));
    }

    #[test]
    fn step_cap_is_enforced() {
        let f = PolyFoliation::product_disc();
        let p = ChartPoint::plane(C::new(0.1, 0.0), C::new(0.2, 0.0));
        assert!(bm_step_leafwise(&f, &p, 0.5, 0.4, &mut path_rng(3, 0)).is_err());
        let s = bm_step_leafwise(&f, &p, 0.01, 0.4, &mut path_rng(3, 0)).unwrap();
        assert_eq!(s.segment.from, p);
    }
}
