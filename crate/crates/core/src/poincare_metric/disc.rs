use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::taylor::{eval_series, flow_taylor, radius_from_coefficients};
use crate::constants::C_LEN;
use crate::error::{Error, Result};
use crate::foliation::{point_distance, ChartId, ChartPoint, FoliationKind, PlanarDomain, PolyFoliation};
use crate::leafwise::{flow_step, flow_step_with, FlowOptions};

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EtaMethod {
    FlowDisc,
    ChainRefined,
    ReferenceExact,
    AsymptoticModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaEstimate {
    pub point: ChartPoint,
    /// Lower bound for η (up to the length convention).
    pub lower: f64,
    pub method: EtaMethod,
    pub iterations: u32,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscConfig {
    /// Taylor order used for the radius of convergence.
    pub order: usize,
    /// Rays used to validate the series and to locate domain exits.
    pub angular_probes: usize,
    /// Radii are rounded down onto a dyadic grid with this many cells per octave.
    pub radial_resolution: u32,
    /// Radii below this (in flow time times field speed) are rejected.
    pub floor: f64,
}

impl Default for DiscConfig {
    fn default() -> Self {
        DiscConfig { order: 64, angular_probes: 12, radial_resolution: 1024, floor: 1e-12 }
    }
}

/// Speed of the flow-time field of `q`'s chart in the ambient metric.
pub(crate) fn field_speed(fol: &PolyFoliation, q: &ChartPoint) -> Result<f64> {
    let y = fol.evaluate_field(q)?;
    let s = fol.metric().norm_sq(q.coords, y).sqrt();
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::domain("field vanishes at the point"));
    }
    Ok(s)
}

fn quantize(r: f64, resolution: u32) -> f64 {
    if !(r > 0.0) || !r.is_finite() {
        return r;
    }
    let top = 2f64.powi(r.log2().ceil() as i32);
    let m = resolution.max(1) as f64;
    (r / top * m).floor() / m * top
}

/// Largest flow time along the ray `θ` from `q` that stays inside the bidisc,
/// searched up to `r_max`.
fn ray_exit(fol: &PolyFoliation, q: &ChartPoint, theta: f64, r_max: f64) -> f64 {
    let dir = C::from_polar(1.0, theta);
    let mut here = *q;
    let mut done = 0.0;
    let mut last_step = r_max;
    while done < r_max {
        let speed = fol.evaluate_field(&here).map(|y| y[0].norm().hypot(y[1].norm())).unwrap_or(0.0);
        let room = 1.0 - here.max_modulus();
        let h = (0.25 * room / speed.max(1e-300)).max(1e-6 * r_max).min(r_max - done);
        match flow_step(fol, &here, dir * h) {
            Ok(seg) if fol.contains(&seg.to) => {
                here = seg.to;
                done += h;
            }
            _ => {
                last_step = h;
                break;
            }
        }
    }
    if done >= r_max {
        return r_max;
    }
    // Bisect within the failing substep.
    let (mut lo, mut hi) = (0.0, last_step);
    for _ in 0..48 {
        let mid = 0.5 * (lo + hi);
        match flow_step(fol, &here, dir * mid) {
            Ok(seg) if fol.contains(&seg.to) => lo = mid,
            _ => hi = mid,
        }
        if hi - lo <= 1e-13 * (done + hi) {
            break;
        }
    }
    done + lo
}

/// Smallest ray exit over all directions: coarse angular scan then a
/// golden-section refinement around the best ray.
fn domain_exit(fol: &PolyFoliation, q: &ChartPoint, r_max: f64, probes: usize) -> f64 {
    let n = probes.max(4);
    let step = std::f64::consts::TAU / n as f64;
    let mut best = (0.0, f64::INFINITY);
    for k in 0..n {
        let th = k as f64 * step;
        let r = ray_exit(fol, q, th, r_max);
        if r < best.1 {
            best = (th, r);
        }
    }
    if best.1 >= r_max {
        return r_max;
    }
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = ray_exit(fol, q, c, r_max);
    let mut fd = ray_exit(fol, q, d, r_max);
    for _ in 0..30 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = ray_exit(fol, q, c, r_max);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = ray_exit(fol, q, d, r_max);
        }
    }
    best.1.min(fc).min(fd)
}

/// Radius, in the flow time of `q`'s chart, of the largest disc centred at
/// `q` on which the flow map is holomorphic and stays in the domain.
pub fn flow_radius(fol: &PolyFoliation, q: &ChartPoint, cfg: &DiscConfig) -> Result<f64> {
    flow_radius_inner(fol, q, cfg, true)
}

fn flow_radius_inner(fol: &PolyFoliation, q: &ChartPoint, cfg: &DiscConfig, validate: bool) -> Result<f64> {
    let field = fol.chart_field(q.chart)?;
    let (y, j) = field.eval_jac(q.coords);
    let speed = y[0].norm().hypot(y[1].norm());
    if !(speed > 0.0) {
        return Err(Error::domain("field vanishes at the point"));
    }
    let jn = j.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let sigma = 1.0 / (jn + speed / (1.0 + q.max_modulus()));
    let coeffs = flow_taylor(field, q.coords, sigma, cfg.order);
    let mut radius = radius_from_coefficients(&coeffs).map(|r| r * sigma);
    if let Some(r) = radius.as_mut().filter(|_| validate) {
        // Validate: inside 0.8 of the fitted radius the series must match the flow.
        let opts = FlowOptions { switch_radius: 1e3, ..FlowOptions::default() };
        let mut tries = 0;
        'outer: while tries < 12 {
            let r0 = 0.8 * *r;
            for k in 0..cfg.angular_probes.max(4) {
                let th = std::f64::consts::TAU * (k as f64 + 0.5) / cfg.angular_probes.max(4) as f64;
                let dtau = C::from_polar(r0, th);
                let series = eval_series(&coeffs, dtau / sigma);
                let ok = match flow_step_with(fol, q, dtau, &opts) {
                    Ok(seg) => {
                        let sp = ChartPoint { chart: q.chart, coords: series };
                        series.iter().all(|c| c.re.is_finite() && c.im.is_finite())
                            && point_distance(&sp, &seg.to) < 1e-6
                    }
                    Err(_) => false,
                };
                if !ok {
                    *r *= 0.8;
                    tries += 1;
                    continue 'outer;
                }
            }
            break;
        }
        if tries == 12 {
            return Err(Error::numerical("flow series could not be validated", *r));
        }
    }
    let r = match (fol.kind(), radius) {
        (FoliationKind::Planar { domain: PlanarDomain::Bidisc, .. }, r) => {
            let cap = r.unwrap_or(f64::INFINITY).min(8.0 / speed);
            domain_exit(fol, q, cap, cfg.angular_probes)
        }
        (_, Some(r)) => r,
        (_, None) => return Err(Error::domain("flow is entire: the leaf is not hyperbolic near this point")),
    };
    if !(r * speed > cfg.floor) {
        return Err(Error::domain("no admissible flow disc above the floor"));
    }
    Ok(r)
}

/// Charts whose flow time can centre a disc at `p`.
fn candidate_charts(fol: &PolyFoliation, p: &ChartPoint) -> Vec<ChartPoint> {
    fol.charts()
        .into_iter()
        .filter_map(|c| p.to_chart(c).ok())
        .filter(|q| q.max_modulus() < 1e4)
        .collect()
}

/// Lower bound for η from flow discs centred at `p`, maximized over charts.
pub fn eta_flow_disc(fol: &PolyFoliation, p: &ChartPoint) -> Result<EtaEstimate> {
    eta_flow_disc_with(fol, p, &DiscConfig::default())
}

pub fn eta_flow_disc_with(fol: &PolyFoliation, p: &ChartPoint, cfg: &DiscConfig) -> Result<EtaEstimate> {
    let mut best: Option<f64> = None;
    let mut last_err = None;
    for q in candidate_charts(fol, p) {
        match flow_radius(fol, &q, cfg).and_then(|r| Ok(C_LEN * quantize(r, cfg.radial_resolution) * field_speed(fol, &q)?)) {
            Ok(v) => best = Some(best.map_or(v, |b: f64| b.max(v))),
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some(lower) if lower > 0.0 => {
            Ok(EtaEstimate { point: *p, lower, method: EtaMethod::FlowDisc, iterations: 0, converged: true })
        }
        _ => Err(last_err.unwrap_or_else(|| Error::domain("no chart admits a flow disc"))),
    }
}

/// Chain of off-centre flow discs in one chart's flow time: the disc of
/// radius `radius` centred at `centre` contains `p` at time offset `offset`.
#[derive(Debug, Clone, Copy)]
struct ChainState {
    centre: ChartPoint,
    offset: C,
    radius: f64,
    bound: f64,
}

/// Lower bound from a disc of radius `r` containing `p` at offset `o`: the
/// hyperbolic density of that disc at `o` is `2r/(r² − |o|²)`.
fn disc_bound(speed_at_p: f64, r: f64, o: C) -> f64 {
    speed_at_p * (r * r - o.norm_sqr()) / (2.0 * r)
}

fn refine_in_chart(fol: &PolyFoliation, p: &ChartPoint, depth: u32, cfg: &DiscConfig) -> Result<(f64, u32, bool)> {
    let speed = field_speed(fol, p)?;
    let r0 = quantize(flow_radius(fol, p, cfg)?, cfg.radial_resolution);
    let mut st = ChainState { centre: *p, offset: C::new(0.0, 0.0), radius: r0, bound: disc_bound(speed, r0, C::new(0.0, 0.0)) };
    let dirs = 8;
    // Projective candidates use the unvalidated series radius; the final
    // centre is validated below.
    let fast = !fol.is_projective();
    let mut alpha: f64 = 0.4;
    let mut iters = 0;
    let mut converged = false;
    while iters < depth {
        iters += 1;
        let mut best: Option<ChainState> = None;
        for k in 0..dirs {
            let th = std::f64::consts::TAU * k as f64 / dirs as f64;
            let delta = C::from_polar(alpha * st.radius, th);
            let Ok(seg) = flow_step(fol, &st.centre, delta) else { continue };
            let Ok(centre) = seg.to.to_chart(p.chart) else { continue };
            let offset = st.offset - delta;
            let Ok(r) = flow_radius_inner(fol, &centre, cfg, fast) else { continue };
            let r = quantize(r, cfg.radial_resolution);
            if offset.norm() >= r {
                continue;
            }
            let b = disc_bound(speed, r, offset);
            if best.map_or(true, |s| b > s.bound) {
                best = Some(ChainState { centre, offset, radius: r, bound: b });
            }
        }
        // Validate the winning candidate's radius before accepting it.
        if let (Some(s), false) = (best.as_mut(), fast) {
            match flow_radius(fol, &s.centre, cfg) {
                Ok(r) => {
                    let r = quantize(r, cfg.radial_resolution).min(s.radius);
                    s.radius = r;
                    s.bound = if s.offset.norm() < r { disc_bound(speed, r, s.offset) } else { 0.0 };
                }
                Err(_) => best = None,
            }
        }
        match best {
            Some(s) if s.bound > st.bound * (1.0 + 1e-3) => {
                st = s;
                alpha = (alpha * 1.5).min(0.6);
            }
            Some(s) if s.bound > st.bound => {
                st = s;
                converged = true;
                break;
            }
            _ => {
                alpha *= 0.5;
                if alpha < 0.02 {
                    converged = true;
                    break;
                }
            }
        }
    }
    Ok((C_LEN * 2.0 * st.bound, iters, converged))
}

/// Improves the flow-disc bound by moving the disc centre along the leaf so
/// that larger discs still contain `p`. Never below [`eta_flow_disc`].
pub fn eta_chain_refine(fol: &PolyFoliation, p: &ChartPoint, depth: u32) -> Result<EtaEstimate> {
    eta_chain_refine_with(fol, p, depth, &DiscConfig::default())
}

pub fn eta_chain_refine_with(fol: &PolyFoliation, p: &ChartPoint, depth: u32, cfg: &DiscConfig) -> Result<EtaEstimate> {
    let base = eta_flow_disc_with(fol, p, cfg)?;
    if depth == 0 {
        return Ok(base);
    }
    let mut best = base.lower;
    let mut iterations = 0;
    let mut converged = true;
    for q in candidate_charts(fol, p) {
        if let Ok((v, it, conv)) = refine_in_chart(fol, &q, depth, cfg) {
            if v > best {
                best = v;
                iterations = it;
                converged = conv;
            }
        }
    }
    Ok(EtaEstimate { point: *p, lower: best, method: EtaMethod::ChainRefined, iterations, converged })
}

/// Exact η for the reference foliations: the product disc and the linear model.
pub fn eta_reference_exact(fol: &PolyFoliation, p: &ChartPoint) -> Result<EtaEstimate> {
    let value = reference_value(fol, p)?;
    Ok(EtaEstimate { point: *p, lower: value, method: EtaMethod::ReferenceExact, iterations: 0, converged: true })
}

fn reference_value(fol: &PolyFoliation, p: &ChartPoint) -> Result<f64> {
    if p.chart != ChartId::Plane || !fol.contains(p) {
        return Err(Error::domain("reference values live on the bidisc"));
    }
    let [z, w] = p.coords;
    let FoliationKind::Planar { field, domain: PlanarDomain::Bidisc } = fol.kind() else {
        return Err(Error::Unsupported(format!("no exact η for foliation {}", fol.name())));
    };
    let [f0, f1] = field.components();
    let one = C::new(1.0, 0.0);
    match (f0.terms(), f1.terms()) {
        ([(0, 0, a)], []) if *a == one => Ok(0.5 * (1.0 - z.norm_sqr())),
        ([(1, 0, a)], [(0, 1, lam)]) if *a == one => linear_model_eta(*lam, z, w),
        _ => Err(Error::Unsupported(format!("no exact η for foliation {}", fol.name()))),
    }
}

/// η on the leaf of `z∂z + λw∂w` through `(z, w)`, leaves cut by the unit bidisc.
pub fn linear_model_eta(lam: C, z: C, w: C) -> Result<f64> {
    let (az, aw) = (z.norm(), w.norm());
    if az == 0.0 && aw == 0.0 {
        return Err(Error::domain("the origin is singular"));
    }
    if az == 0.0 {
        return Ok(aw * (1.0 / aw).ln());
    }
    if aw == 0.0 {
        return Ok(az * (1.0 / az).ln());
    }
    // The leaf is the wedge {Im ζ > ln|z|, Im(λζ) > ln|w|} with ζ = 0 at the point.
    let (a, b) = (az.ln(), aw.ln());
    let apex = C::new((b - lam.re * a) / lam.im, a);
    let alpha = std::f64::consts::PI - lam.arg();
    let v = -apex;
    let (rho, th) = (v.norm(), v.arg().rem_euclid(std::f64::consts::TAU));
    if !(th > 0.0 && th < alpha) {
        return Err(Error::domain("point outside its own leaf wedge"));
    }
    let k = std::f64::consts::PI / alpha;
    let speed = z.norm().hypot((lam * w).norm());
    Ok(speed * rho * (k * th).sin() / k)
}
