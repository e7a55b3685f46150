//! Integration of Hamilton's equations for optimal paths.
//!
//! Two steppers are available: classical fixed-step RK4 and an adaptive
//! Gragg–Bulirsch–Stoer extrapolation scheme with order control. Both refuse
//! to step across the edge of a kick window and cap their step inside it so
//! that every kick is resolved by at least `kick_min_steps` accepted steps.
//!
//! Divergence of the momentum is treated as data: the path is truncated and
//! tagged [`PathStatus::Diverged`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{h_star_grad, MeasurementSchedule, PhasePoint};

pub type State = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rk4,
    BulirschStoer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Fixed step for RK4, initial step for Bulirsch–Stoer (μs).
    pub dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Divergence cutoff on |p|.
    pub p_max: f64,
    pub max_steps: usize,
    /// Minimum number of accepted steps per kick window.
    pub kick_min_steps: usize,
    /// Kick window half-width in units of τm.
    pub kick_window: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::BulirschStoer,
            dt: 1e-3,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            p_max: 1000.0,
            max_steps: 2_000_000,
            kick_min_steps: 20,
            kick_window: 3.0,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(dt: f64) -> Self {
        Self {
            method: Method::Rk4,
            dt,
            ..Self::default()
        }
    }

    pub fn bulirsch_stoer(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            method: Method::BulirschStoer,
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, v: f64| Error::InvalidParameter {
            name,
            reason: format!("must be finite and > 0, got {v}"),
        };
        for (name, v) in [
            ("dt", self.dt),
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("p_max", self.p_max),
            ("kick_window", self.kick_window),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(bad(name, v));
            }
        }
        if self.max_steps == 0 || self.kick_min_steps == 0 {
            return Err(Error::InvalidParameter {
                name: "max_steps",
                reason: "step counts must be >= 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PathStatus {
    Completed,
    Diverged { t: f64 },
}

impl PathStatus {
    pub fn is_diverged(&self) -> bool {
        matches!(self, PathStatus::Diverged { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            PathStatus::Completed => "ok",
            PathStatus::Diverged { .. } => "diverged",
        }
    }
}

/// A time-sampled optimal path.
#[derive(Debug, Clone, PartialEq)]
pub struct OpPath {
    pub samples: Vec<(f64, PhasePoint)>,
    pub status: PathStatus,
}

impl OpPath {
    pub fn last(&self) -> Option<&(f64, PhasePoint)> {
        self.samples.last()
    }

    /// Sample at exactly `t`, if present.
    pub fn at(&self, t: f64) -> Option<PhasePoint> {
        self.samples
            .iter()
            .find(|(s, _)| (*s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .map(|(_, pt)| *pt)
    }
}

/// Endpoint of a flow map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowEnd {
    Point(PhasePoint),
    Diverged { t: f64 },
}

impl FlowEnd {
    pub fn point(self) -> Option<PhasePoint> {
        match self {
            FlowEnd::Point(p) => Some(p),
            FlowEnd::Diverged { .. } => None,
        }
    }
}

/// A time-dependent planar vector field with optional step-capping windows.
pub trait VectorField {
    fn rhs(&self, t: f64, y: State) -> State;

    /// `(period, centre offset, half width)` of windows that must be resolved.
    fn windows(&self) -> Option<(f64, f64, f64)> {
        None
    }
}

/// Hamilton's equations for `H*` under a kick schedule.
pub struct HamiltonField<'a> {
    pub sched: &'a MeasurementSchedule,
    pub half_window: f64,
}

impl<'a> HamiltonField<'a> {
    pub fn new(sched: &'a MeasurementSchedule, cfg: &IntegratorConfig) -> Self {
        Self {
            sched,
            half_window: cfg.kick_window * sched.tau_m,
        }
    }
}

impl VectorField for HamiltonField<'_> {
    #[inline]
    fn rhs(&self, t: f64, y: State) -> State {
        let (dtheta, dp) = hamilton_rhs(PhasePoint::new(y[0], y[1]), t, self.sched);
        [dtheta, dp]
    }

    fn windows(&self) -> Option<(f64, f64, f64)> {
        if self.sched.epsilon == 0.0 {
            None
        } else {
            Some((self.sched.period, 0.5 * self.sched.period, self.half_window))
        }
    }
}

/// The Hamiltonian field with time frozen at `t_frozen` (autonomous).
pub struct FrozenField<'a> {
    pub sched: &'a MeasurementSchedule,
    pub t_frozen: f64,
}

impl VectorField for FrozenField<'_> {
    fn rhs(&self, _t: f64, y: State) -> State {
        let (dtheta, dp) = hamilton_rhs(PhasePoint::new(y[0], y[1]), self.t_frozen, self.sched);
        [dtheta, dp]
    }
}

/// `(dθ/dt, dp/dt) = (∂H*/∂p, −∂H*/∂θ)`.
#[inline]
pub fn hamilton_rhs(pt: PhasePoint, t: f64, sched: &MeasurementSchedule) -> (f64, f64) {
    let (dh_dtheta, dh_dp) = h_star_grad(pt, t, sched);
    (dh_dp, -dh_dtheta)
}

/// Integrates from `t0` to `t_end`, recording every accepted step.
pub fn integrate(
    start: PhasePoint,
    t0: f64,
    t_end: f64,
    sched: &MeasurementSchedule,
    cfg: &IntegratorConfig,
) -> Result<OpPath> {
    if !(t_end > t0) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            reason: format!("must exceed t0 ({t_end} <= {t0})"),
        });
    }
    let field = HamiltonField::new(sched, cfg);
    let mut samples = vec![(t0, start)];
    let status = drive(&field, start, t0, t_end, cfg, |seg| {
        samples.push((seg.t1, PhasePoint::new(seg.y1[0], seg.y1[1])));
    })?;
    Ok(OpPath { samples, status })
}

/// Integrates from `t0` and records the state at each of `times`
/// (ascending, all `≥ t0`) by cubic Hermite interpolation between accepted
/// steps. Sampling stops at divergence.
pub fn integrate_sampled(
    start: PhasePoint,
    t0: f64,
    times: &[f64],
    sched: &MeasurementSchedule,
    cfg: &IntegratorConfig,
) -> Result<OpPath> {
    let field = HamiltonField::new(sched, cfg);
    integrate_field_sampled(&field, start, t0, times, cfg)
}

pub fn integrate_field_sampled<F: VectorField>(
    field: &F,
    start: PhasePoint,
    t0: f64,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<OpPath> {
    if times.windows(2).any(|w| w[1] <= w[0]) || times.first().is_some_and(|t| *t < t0) {
        return Err(Error::InvalidParameter {
            name: "times",
            reason: "sample times must be strictly increasing and >= t0".into(),
        });
    }
    let mut samples = Vec::with_capacity(times.len());
    let mut next = 0;
    while next < times.len() && times[next] == t0 {
        samples.push((t0, start));
        next += 1;
    }
    let Some(&t_end) = times.last() else {
        return Ok(OpPath {
            samples,
            status: PathStatus::Completed,
        });
    };
    if next == times.len() {
        return Ok(OpPath {
            samples,
            status: PathStatus::Completed,
        });
    }
    let status = drive(field, start, t0, t_end, cfg, |seg| {
        while next < times.len() && times[next] <= seg.t1 {
            let t = times[next];
            let y = if t == seg.t1 { seg.y1 } else { seg.hermite(t) };
            samples.push((t, PhasePoint::new(y[0], y[1])));
            next += 1;
        }
    })?;
    Ok(OpPath { samples, status })
}

/// Endpoint of the flow from `t0` to `t_end` (either direction).
pub fn flow_map(
    start: PhasePoint,
    t0: f64,
    t_end: f64,
    sched: &MeasurementSchedule,
    cfg: &IntegratorConfig,
) -> Result<FlowEnd> {
    let field = HamiltonField::new(sched, cfg);
    flow_field(&field, start, t0, t_end, cfg)
}

pub fn flow_field<F: VectorField>(
    field: &F,
    start: PhasePoint,
    t0: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<FlowEnd> {
    let mut last = [start.theta, start.p];
    let status = drive(field, start, t0, t_end, cfg, |seg| last = seg.y1)?;
    Ok(match status {
        PathStatus::Completed => FlowEnd::Point(PhasePoint::new(last[0], last[1])),
        PathStatus::Diverged { t } => FlowEnd::Diverged { t },
    })
}

/// One accepted step, with endpoint derivatives for dense output.
pub struct Segment {
    pub t0: f64,
    pub y0: State,
    pub f0: State,
    pub t1: f64,
    pub y1: State,
    pub f1: State,
}

impl Segment {
    /// Cubic Hermite interpolant.
    pub fn hermite(&self, t: f64) -> State {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let mut out = [0.0; 2];
        for i in 0..2 {
            out[i] = h00 * self.y0[i] + h10 * h * self.f0[i] + h01 * self.y1[i] + h11 * h * self.f1[i];
        }
        out
    }
}

fn diverged(y: &State, p_max: f64) -> bool {
    !(y[0].is_finite() && y[1].is_finite()) || y[1].abs() > p_max
}

/// Largest step allowed from `t` towards `t_end` (direction `dir`), honouring
/// kick windows: no step crosses a window edge, and steps inside a window are
/// capped at `2w / kick_min_steps`.
fn step_limit<F: VectorField>(field: &F, cfg: &IntegratorConfig, t: f64, t_end: f64, dir: f64) -> f64 {
    let mut limit = (t_end - t) * dir;
    if let Some((period, centre, w)) = field.windows() {
        let cap = 2.0 * w / cfg.kick_min_steps as f64;
        let phase = (t - centre).rem_euclid(period);
        // Distance to the nearest window centre at or before/after t.
        let rel = if phase > 0.5 * period { phase - period } else { phase };
        let tol = 1e-12 * period;
        let inside = rel.abs() < w - tol || (rel.abs() <= w + tol && (rel * dir) < 0.0);
        let to_edge = if inside {
            // Distance to the exit edge in the direction of travel.
            if dir > 0.0 {
                w - rel
            } else {
                w + rel
            }
        } else if dir > 0.0 {
            // Next window start.
            let d = -w - rel;
            if d > tol {
                d
            } else {
                period - w - rel
            }
        } else {
            let d = rel - w;
            if d > tol {
                d
            } else {
                rel + period - w
            }
        };
        if to_edge > tol {
            limit = limit.min(to_edge);
        }
        if inside {
            limit = limit.min(cap);
        }
    }
    limit
}

/// Advances the field from `t0` to `t_end`, calling `on_step` for every
/// accepted step.
pub fn drive<F: VectorField>(
    field: &F,
    start: PhasePoint,
    t0: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
    mut on_step: impl FnMut(&Segment),
) -> Result<PathStatus> {
    let mut y = [start.theta, start.p];
    if diverged(&y, cfg.p_max) {
        return Ok(PathStatus::Diverged { t: t0 });
    }
    if t_end == t0 {
        return Ok(PathStatus::Completed);
    }
    let dir = (t_end - t0).signum();
    let mut t = t0;
    let mut f = field.rhs(t, y);
    let mut steps = 0usize;
    let mut bs = BsState::new(cfg);
    let span = (t_end - t0).abs();
    let end_tol = 1e-13 * span.max(1.0);

    while (t_end - t) * dir > end_tol {
        steps += 1;
        if steps > cfg.max_steps {
            return Err(Error::MaxStepsExceeded {
                theta0: start.theta,
                p0: start.p,
                max_steps: cfg.max_steps,
                t,
            });
        }
        let limit = step_limit(field, cfg, t, t_end, dir);
        let (h, y1) = match cfg.method {
            Method::Rk4 => {
                let h = limit.min(cfg.dt);
                (h, rk4_step(field, t, y, f, h * dir))
            }
            Method::BulirschStoer => match bs.step(field, t, y, f, limit, dir) {
                Some(r) => r,
                None => return Ok(PathStatus::Diverged { t }),
            },
        };
        // Land exactly on the endpoint when within rounding of it.
        let t1 = if ((t_end - t) * dir - h).abs() <= end_tol {
            t_end
        } else {
            t + h * dir
        };
        if diverged(&y1, cfg.p_max) {
            return Ok(PathStatus::Diverged { t: t1 });
        }
        let f1 = field.rhs(t1, y1);
        on_step(&Segment {
            t0: t,
            y0: y,
            f0: f,
            t1,
            y1,
            f1,
        });
        t = t1;
        y = y1;
        f = f1;
    }
    Ok(PathStatus::Completed)
}

#[inline]
fn axpy(y: &State, a: f64, k: &State) -> State {
    [y[0] + a * k[0], y[1] + a * k[1]]
}

fn rk4_step<F: VectorField>(field: &F, t: f64, y: State, f: State, h: f64) -> State {
    let k1 = f;
    let k2 = field.rhs(t + 0.5 * h, axpy(&y, 0.5 * h, &k1));
    let k3 = field.rhs(t + 0.5 * h, axpy(&y, 0.5 * h, &k2));
    let k4 = field.rhs(t + h, axpy(&y, h, &k3));
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

const KMAX: usize = 8;
const NSEQ: [usize; KMAX + 1] = [2, 4, 6, 8, 10, 12, 14, 16, 18];
const STEP_SAFE: f64 = 0.94;
const STEP_SAFE2: f64 = 0.65;
const MIN_SCALE: f64 = 0.02;
const MAX_SCALE: f64 = 4.0;

/// Step-size and order controller for Bulirsch–Stoer.
struct BsState {
    rel_tol: f64,
    abs_tol: f64,
    h_next: f64,
    k_target: usize,
    cost: [f64; KMAX + 1],
    coeff: [[f64; KMAX + 1]; KMAX + 1],
}

impl BsState {
    fn new(cfg: &IntegratorConfig) -> Self {
        let mut cost = [0.0; KMAX + 1];
        cost[0] = NSEQ[0] as f64 + 1.0;
        for k in 1..=KMAX {
            cost[k] = cost[k - 1] + NSEQ[k] as f64;
        }
        let mut coeff = [[0.0; KMAX + 1]; KMAX + 1];
        for k in 1..=KMAX {
            for l in 0..k {
                let ratio = NSEQ[k] as f64 / NSEQ[l] as f64;
                coeff[k][l] = 1.0 / (ratio * ratio - 1.0);
            }
        }
        let log_tol = -(cfg.rel_tol.max(1e-15)).log10() * 0.6 + 0.5;
        let k_target = (log_tol.floor() as usize).clamp(1, KMAX - 1);
        Self {
            rel_tol: cfg.rel_tol,
            abs_tol: cfg.abs_tol,
            h_next: cfg.dt,
            k_target,
            cost,
            coeff,
        }
    }

    fn midpoint<F: VectorField>(field: &F, t: f64, y: State, f: State, h: f64, n: usize) -> State {
        let sub = h / n as f64;
        let mut ym = y;
        let mut yn = axpy(&y, sub, &f);
        for i in 1..n {
            let fn_ = field.rhs(t + sub * i as f64, yn);
            let swap = axpy(&ym, 2.0 * sub, &fn_);
            ym = yn;
            yn = swap;
        }
        let fend = field.rhs(t + h, yn);
        [
            0.5 * (ym[0] + yn[0] + sub * fend[0]),
            0.5 * (ym[1] + yn[1] + sub * fend[1]),
        ]
    }

    fn error(&self, y0: &State, a: &State, b: &State) -> f64 {
        let mut acc = 0.0;
        for i in 0..2 {
            let sc = self.abs_tol + self.rel_tol * y0[i].abs().max(a[i].abs());
            let d = (a[i] - b[i]) / sc;
            acc += d * d;
        }
        (acc / 2.0).sqrt()
    }

    /// Attempts steps until one is accepted. Returns `(h, y1)` or `None` if the
    /// step size collapses (the solution blows up inside the step).
    fn step<F: VectorField>(&mut self, field: &F, t: f64, y: State, f: State, limit: f64, dir: f64) -> Option<(f64, State)> {
        let mut h = self.h_next.min(limit);
        let h_floor = 1e-14 * t.abs().max(1.0);
        let mut table = [[0.0f64; 2]; KMAX + 1];
        let mut hnew = [0.0f64; KMAX + 1];
        let mut work = [f64::INFINITY; KMAX + 1];
        loop {
            if h < h_floor {
                return None;
            }
            let hs = h * dir;
            let mut accepted = None;
            let mut reject = false;
            let mut k_used = 0;
            let mut err_ok = true;
            for k in 0..=(self.k_target + 1).min(KMAX) {
                let yk = Self::midpoint(field, t, y, f, hs, NSEQ[k]);
                if !(yk[0].is_finite() && yk[1].is_finite()) {
                    err_ok = false;
                    break;
                }
                table[k] = yk;
                if k == 0 {
                    continue;
                }
                // Aitken–Neville extrapolation in h².
                for j in (0..k).rev() {
                    for i in 0..2 {
                        table[j][i] = table[j + 1][i] + self.coeff[k][j] * (table[j + 1][i] - table[j][i]);
                    }
                }
                let err = self.error(&y, &table[0], &table[1]);
                let expo = 1.0 / (2 * k + 1) as f64;
                let facmin = STEP_SAFE2.powf(expo);
                let fac = if err == 0.0 {
                    1.0 / facmin
                } else {
                    (STEP_SAFE2 / err).powf(expo) * STEP_SAFE
                };
                let fac = fac.clamp(facmin / MAX_SCALE, 1.0 / facmin);
                hnew[k] = h * fac;
                work[k] = self.cost[k] / hnew[k];
                k_used = k;
                if k + 1 >= self.k_target || k == KMAX {
                    if err <= 1.0 {
                        accepted = Some(table[0]);
                        break;
                    }
                    if k == KMAX || k == self.k_target + 1 {
                        reject = true;
                        break;
                    }
                    // Would convergence still be plausible at higher order?
                    let ratio = NSEQ[self.k_target + 1] as f64 / NSEQ[0] as f64;
                    if k == self.k_target && err > (ratio * ratio).max(1.0) * 4.0 {
                        reject = true;
                        break;
                    }
                }
            }
            if !err_ok {
                h *= 0.25;
                continue;
            }
            match accepted {
                Some(y1) if !reject => {
                    // Order selection for the next step.
                    let k = k_used;
                    let mut kopt = k;
                    if k >= 2 && work[k - 1] < 0.8 * work[k] {
                        kopt = k - 1;
                    } else if k >= 1 && work[k] < 0.9 * work[k - 1] && k + 1 <= KMAX {
                        kopt = k + 1;
                    }
                    let mut hn = if kopt == k + 1 {
                        hnew[k] * self.cost[kopt] / self.cost[k]
                    } else {
                        hnew[kopt.min(k)]
                    };
                    hn = hn.min(h * MAX_SCALE).max(h * MIN_SCALE);
                    self.k_target = kopt.clamp(1, KMAX - 1);
                    // Do not let a window-clipped step shrink the next guess.
                    self.h_next = if h < limit * 0.999 { hn } else { hn.max(self.h_next) };
                    return Some((h, y1));
                }
                _ => {
                    let k = k_used.max(1);
                    h = hnew[k].min(h * 0.5).max(h * MIN_SCALE);
                    self.k_target = k.min(self.k_target).clamp(1, KMAX - 1);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn standard(eps: f64) -> MeasurementSchedule {
        MeasurementSchedule::standard(eps).unwrap()
    }

    #[test]
    fn rhs_examples() {
        let (dt, dp) = hamilton_rhs(PhasePoint::new(0.9, 1.3), 0.4, &standard(0.0));
        assert!((dt - 1.3).abs() < 1e-15 && dp == 0.0);
        let (dt, dp) = hamilton_rhs(PhasePoint::new(0.0, 0.0), 0.5, &standard(0.99));
        assert_eq!((dt, dp), (0.0, 0.0));
    }

    #[test]
    fn rotor_is_exact() {
        for cfg in [IntegratorConfig::default(), IntegratorConfig::rk4(1e-2)] {
            let path = integrate(PhasePoint::new(0.0, PI), 0.0, 1.0, &standard(0.0), &cfg).unwrap();
            let (t, pt) = *path.last().unwrap();
            assert_eq!(t, 1.0);
            assert!((pt.theta - PI).abs() < 1e-9);
            assert!((pt.p - PI).abs() < 1e-9);
            assert_eq!(path.status, PathStatus::Completed);
        }
    }

    #[test]
    fn immediate_divergence() {
        let cfg = IntegratorConfig::default();
        let path = integrate(PhasePoint::new(0.0, cfg.p_max + 1.0), 0.0, 1.0, &standard(0.5), &cfg).unwrap();
        assert_eq!(path.status, PathStatus::Diverged { t: 0.0 });
        assert_eq!(path.samples.len(), 1);
    }

    #[test]
    fn invalid_interval() {
        assert!(integrate(PhasePoint::new(0.0, 0.0), 1.0, 1.0, &standard(0.5), &IntegratorConfig::default()).is_err());
    }

    #[test]
    fn kick_window_is_resolved() {
        let cfg = IntegratorConfig::default();
        let s = standard(0.99);
        let path = integrate(PhasePoint::new(0.286, 1.227), 0.0, 3.0, &s, &cfg).unwrap();
        for n in 0..3 {
            let c = n as f64 + 0.5;
            let inside = path
                .samples
                .iter()
                .filter(|(t, _)| *t > c - 0.075 + 1e-12 && *t <= c + 0.075 + 1e-12)
                .count();
            assert!(inside >= 20, "kick {n}: {inside} steps");
        }
        // Window edges are hit exactly.
        assert!(path.samples.iter().any(|(t, _)| (t - 0.425).abs() < 1e-12));
    }

    #[test]
    fn max_steps_error_names_start() {
        let cfg = IntegratorConfig {
            max_steps: 3,
            ..IntegratorConfig::rk4(1e-3)
        };
        let err = integrate(PhasePoint::new(0.1, 0.2), 0.0, 1.0, &standard(0.5), &cfg).unwrap_err();
        assert!(err.to_string().contains("theta0=0.1"));
    }

    #[test]
    fn sampled_matches_flow_map() {
        let s = standard(0.5);
        let cfg = IntegratorConfig::default();
        let start = PhasePoint::new(0.7, 0.9);
        let times: Vec<f64> = (1..=4).map(|n| n as f64).collect();
        let path = integrate_sampled(start, 0.0, &times, &s, &cfg).unwrap();
        assert_eq!(path.samples.len(), 4);
        for (t, pt) in &path.samples {
            let end = flow_map(start, 0.0, *t, &s, &cfg).unwrap().point().unwrap();
            assert!((end.theta - pt.theta).abs() < 1e-8 && (end.p - pt.p).abs() < 1e-8);
        }
        // Off-grid sample through Hermite interpolation of a long rotor step.
        let mid = integrate_sampled(start, 0.0, &[0.2], &s, &cfg).unwrap();
        let end = flow_map(start, 0.0, 0.2, &s, &cfg).unwrap().point().unwrap();
        assert!((mid.samples[0].1.theta - end.theta).abs() < 1e-8);
    }
}
