use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::FLOW_RTOL;
use crate::error::{Error, Result};
use crate::foliation::{affine_indices, AmbientMetric, ChartId, ChartPoint, FoliationKind, PolyFoliation};

type C = Complex64;

/// A straight segment in complex flow time with its variational data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSegment {
    pub from: ChartPoint,
    pub dtau: C,
    pub to: ChartPoint,
    /// `∫ tr DY dτ` of the flow-time field `Y` along the segment.
    pub trace_integral: C,
    /// Log of the holonomy norm between the transversals at the endpoints.
    pub log_holonomy: f64,
    /// Chart whose field defines the flow time.
    pub time_chart: ChartId,
    pub chart_switches: u32,
}

#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Affine charts are changed once a coordinate exceeds this modulus.
    pub switch_radius: f64,
    pub max_switches: u32,
    pub max_steps: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            rtol: FLOW_RTOL,
            atol: 1e-13,
            switch_radius: 2.0,
            max_switches: 32,
            max_steps: 200_000,
        }
    }
}

/// Field whose flow is `τ_time`-time, expressed in the coordinates of `coord_chart`,
/// together with the trace of its Jacobian.
pub(crate) struct TimeField<'a> {
    fol: &'a PolyFoliation,
    time_chart: ChartId,
}

impl<'a> TimeField<'a> {
    pub(crate) fn new(fol: &'a PolyFoliation, time_chart: ChartId) -> Self {
        TimeField { fol, time_chart }
    }

    /// Returns `(Y, tr DY)`; also the full Jacobian when `jac` is requested.
    #[inline]
    pub(crate) fn eval(&self, coord_chart: ChartId, x: [C; 2]) -> Result<([C; 2], C, [[C; 2]; 2])> {
        let field = self.fol.chart_field(coord_chart)?;
        let (z, j) = field.eval_jac(x);
        let tr = j[0][0] + j[1][1];
        if coord_chart == self.time_chart {
            return Ok((z, tr, j));
        }
        let (FoliationKind::Projective { .. }, Some(tk), Some(ck)) = (
            self.fol.kind(),
            self.time_chart.homogeneous_index(),
            coord_chart.homogeneous_index(),
        ) else {
            return Err(Error::ChartFailure("time chart mismatch on a planar foliation".into()));
        };
        let pos = affine_indices(ck).iter().position(|&i| i == tk).expect("distinct charts");
        let d = self.fol.degree() as i32;
        let xk = x[pos];
        if xk.norm() == 0.0 {
            return Err(Error::ChartFailure("flow time is singular on this chart's line at infinity".into()));
        }
        let g = xk.powi(-(d - 1));
        let y = [z[0] * g, z[1] * g];
        let tr_y = g * (tr - z[pos] * (d - 1) as f64 / xk);
        // D(gZ) = g DZ + Z ⊗ ∇g with ∇g = −(d−1) g/x_k e_pos.
        let dg = -g * (d - 1) as f64 / xk;
        let mut jy = [[j[0][0] * g, j[0][1] * g], [j[1][0] * g, j[1][1] * g]];
        for (i, row) in jy.iter_mut().enumerate() {
            row[pos] += z[i] * dg;
        }
        Ok((y, tr_y, jy))
    }

    /// `½ log det G − log ‖Y‖_G`.
    pub(crate) fn psi(&self, coord_chart: ChartId, x: [C; 2]) -> Result<f64> {
        let (y, _, _) = self.eval(coord_chart, x)?;
        let metric = self.fol.metric();
        let n2 = metric.norm_sq(x, y);
        if !(n2 > 0.0) {
            return Err(Error::domain("field vanishes at a segment endpoint"));
        }
        Ok(0.5 * metric.log_det(x) - 0.5 * n2.ln())
    }
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

type State = [C; 3];

#[inline]
fn comb(y: &State, h: f64, ks: &[(&State, f64)]) -> State {
    let mut out = *y;
    for (k, a) in ks {
        for i in 0..3 {
            out[i] += k[i] * (a * h);
        }
    }
    out
}

/// Integrates the flow of the foliation's field from `p` along the straight
/// flow-time segment `[0, dtau]`, in the time of `p`'s chart.
pub fn flow_step(fol: &PolyFoliation, p: &ChartPoint, dtau: C) -> Result<FlowSegment> {
    flow_step_with(fol, p, dtau, &FlowOptions::default())
}

pub fn flow_step_with(fol: &PolyFoliation, p: &ChartPoint, dtau: C, opts: &FlowOptions) -> Result<FlowSegment> {
    let time_chart = p.chart;
    let tf = TimeField::new(fol, time_chart);
    let (y0, _, _) = tf.eval(p.chart, p.coords)?;
    if y0[0].norm() == 0.0 && y0[1].norm() == 0.0 {
        return Err(Error::SingularProximity { distance: 0.0 });
    }
    if dtau == C::new(0.0, 0.0) {
        return Ok(FlowSegment {
            from: *p,
            dtau,
            to: *p,
            trace_integral: C::new(0.0, 0.0),
            log_holonomy: 0.0,
            time_chart,
            chart_switches: 0,
        });
    }
    let projective = fol.is_projective();
    let mut chart = p.chart;
    let mut psi_sum = -tf.psi(chart, p.coords)?;
    let mut y: State = [p.coords[0], p.coords[1], C::new(0.0, 0.0)];
    let rhs = |chart: ChartId, y: &State| -> Result<State> {
        let (f, tr, _) = tf.eval(chart, [y[0], y[1]])?;
        Ok([f[0] * dtau, f[1] * dtau, tr * dtau])
    };
    let mut k1 = rhs(chart, &y)?;
    let scale = k1[0].norm() + k1[1].norm() + k1[2].norm();
    let mut h: f64 = if scale > 0.0 { (0.05 / scale).min(1.0) } else { 1.0 };
    let mut s = 0.0;
    let mut switches = 0u32;
    let mut steps = 0usize;
    let mut min_speed = f64::INFINITY;
    while s < 1.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::numerical("flow step budget exhausted", 1.0 - s));
        }
        if h < 1e-13 {
            return Err(Error::SingularProximity { distance: min_speed });
        }
        let h_now = h.min(1.0 - s);
        let k2 = rhs(chart, &comb(&y, h_now, &[(&k1, A21)]))?;
        let k3 = rhs(chart, &comb(&y, h_now, &[(&k1, A31), (&k2, A32)]))?;
        let k4 = rhs(chart, &comb(&y, h_now, &[(&k1, A41), (&k2, A42), (&k3, A43)]))?;
        let k5 = rhs(chart, &comb(&y, h_now, &[(&k1, A51), (&k2, A52), (&k3, A53), (&k4, A54)]))?;
        let k6 = rhs(
            chart,
            &comb(&y, h_now, &[(&k1, A61), (&k2, A62), (&k3, A63), (&k4, A64), (&k5, A65)]),
        )?;
        let y_new = comb(&y, h_now, &[(&k1, B1), (&k3, B3), (&k4, B4), (&k5, B5), (&k6, B6)]);
        let finite = y_new.iter().all(|c| c.re.is_finite() && c.im.is_finite());
        let k7 = if finite { rhs(chart, &y_new).ok() } else { None };
        let Some(k7) = k7 else {
            h *= 0.25;
            continue;
        };
        let mut err: f64 = 0.0;
        for i in 0..3 {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h_now;
            let sc = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
            err = err.max(e.norm() / sc);
        }
        if err <= 1.0 {
            s += h_now;
            y = y_new;
            k1 = k7;
            min_speed = min_speed.min(k1[0].norm() + k1[1].norm());
            if projective && (y[0].norm() > opts.switch_radius || y[1].norm() > opts.switch_radius) {
                let here = ChartPoint { chart, coords: [y[0], y[1]] };
                let next = here.in_best_chart();
                if next.chart != chart {
                    switches += 1;
                    if switches > opts.max_switches {
                        return Err(Error::ChartFailure(format!("more than {} chart changes", opts.max_switches)));
                    }
                    psi_sum += tf.psi(chart, here.coords)?;
                    chart = next.chart;
                    y[0] = next.coords[0];
                    y[1] = next.coords[1];
                    psi_sum -= tf.psi(chart, next.coords)?;
                    k1 = rhs(chart, &y)?;
                }
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = h_now * fac;
        } else {
            h = h_now * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    let to = ChartPoint { chart, coords: [y[0], y[1]] };
    psi_sum += tf.psi(chart, to.coords)?;
    Ok(FlowSegment {
        from: *p,
        dtau,
        to,
        trace_integral: y[2],
        log_holonomy: y[2].re + psi_sum,
        time_chart,
        chart_switches: switches,
    })
}

/// Holonomy along `dtau` by integrating the full variational equation
/// `V' = DY·V` with classical fixed-step RK4 and measuring the quotient norm
/// `√det G·|det(V, Y)| / ‖Y‖_G`. No chart changes; used as an internal oracle.
pub fn holonomy_variational(fol: &PolyFoliation, p: &ChartPoint, dtau: C, steps: usize) -> Result<f64> {
    let tf = TimeField::new(fol, p.chart);
    let metric: AmbientMetric = fol.metric();
    let chart = p.chart;
    // State: x (2), V (2).
    let f = |s: &[C; 4]| -> Result<[C; 4]> {
        let (y, _, j) = tf.eval(chart, [s[0], s[1]])?;
        Ok([
            y[0] * dtau,
            y[1] * dtau,
            (j[0][0] * s[2] + j[0][1] * s[3]) * dtau,
            (j[1][0] * s[2] + j[1][1] * s[3]) * dtau,
        ])
    };
    let quotient = |s: &[C; 4]| -> Result<f64> {
        let x = [s[0], s[1]];
        let (y, _, _) = tf.eval(chart, x)?;
        let wedge = (s[2] * y[1] - s[3] * y[0]).norm();
        Ok((0.5 * metric.log_det(x)).exp() * wedge / metric.norm_sq(x, y).sqrt())
    };
    let (y0, _, _) = tf.eval(chart, p.coords)?;
    // A vector transverse to the field.
    let v0 = [-y0[1].conj(), y0[0].conj()];
    let mut s = [p.coords[0], p.coords[1], v0[0], v0[1]];
    let q0 = quotient(&s)?;
    let h = 1.0 / steps as f64;
    let add = |a: &[C; 4], b: &[C; 4], c: f64| [a[0] + b[0] * c, a[1] + b[1] * c, a[2] + b[2] * c, a[3] + b[3] * c];
    for _ in 0..steps {
        let k1 = f(&s)?;
        let k2 = f(&add(&s, &k1, 0.5 * h))?;
        let k3 = f(&add(&s, &k2, 0.5 * h))?;
        let k4 = f(&add(&s, &k3, h))?;
        for i in 0..4 {
            s[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
        }
    }
    Ok((quotient(&s)? / q0).ln())
}
