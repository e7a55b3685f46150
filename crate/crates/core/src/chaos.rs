//! Path-triplet distances, finite-time Lyapunov exponents and stroboscopic
//! phase portraits.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{integrate_sampled, IntegratorConfig, OpPath, PathStatus};
use crate::model::{MeasurementSchedule, PhasePoint};

pub const DEFAULT_DELTA_THETA0: f64 = 0.01;

/// Chord length between two points on the xz great circle of the Bloch sphere.
#[inline]
pub fn bloch_distance(theta_a: f64, theta_b: f64) -> f64 {
    2.0 * (0.5 * (theta_a - theta_b)).sin().abs()
}

/// A main path and two auxiliaries started at `θ₀ ± δθ₀` with the same `p₀`,
/// all sampled on one time grid.
#[derive(Debug, Clone)]
pub struct PathTriplet {
    pub main: OpPath,
    pub plus: OpPath,
    pub minus: OpPath,
    pub delta_theta0: f64,
}

impl PathTriplet {
    /// Integrates the three paths from `t = 0`, sampling at `times`.
    pub fn integrate(
        start: PhasePoint,
        delta_theta0: f64,
        times: &[f64],
        sched: &MeasurementSchedule,
        cfg: &IntegratorConfig,
    ) -> Result<Self> {
        if !(delta_theta0 > 0.0) {
            return Err(Error::InvalidParameter {
                name: "delta_theta0",
                reason: format!("must be positive, got {delta_theta0}"),
            });
        }
        let shifted = |d: f64| PhasePoint::new(start.theta + d, start.p);
        Ok(Self {
            main: integrate_sampled(start, 0.0, times, sched, cfg)?,
            plus: integrate_sampled(shifted(delta_theta0), 0.0, times, sched, cfg)?,
            minus: integrate_sampled(shifted(-delta_theta0), 0.0, times, sched, cfg)?,
            delta_theta0,
        })
    }

    /// Distance at `t = 0`.
    pub fn d0(&self) -> f64 {
        bloch_distance(0.0, self.delta_theta0)
    }
}

fn sample(path: &OpPath, name: &'static str, t: f64) -> Result<PhasePoint> {
    if let Some(pt) = path.at(t) {
        return Ok(pt);
    }
    match path.status {
        PathStatus::Diverged { t: t_div } if t_div <= t => Err(Error::PathDiverged { path: name, t_div, t }),
        _ => Err(Error::TimeNotSampled { t }),
    }
}

/// `D(t)`: mean Bloch distance from the main path to each auxiliary.
pub fn triplet_distance(trip: &PathTriplet, t: f64) -> Result<f64> {
    let m = sample(&trip.main, "main", t)?;
    let p = sample(&trip.plus, "plus", t)?;
    let n = sample(&trip.minus, "minus", t)?;
    Ok(0.5 * bloch_distance(m.theta, p.theta) + 0.5 * bloch_distance(m.theta, n.theta))
}

/// Finite-time Lyapunov exponent `λ(t) = ln(D(t)/D₀)/t`.
pub fn lyapunov(trip: &PathTriplet, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("Lyapunov exponent needs t > 0, got {t}"),
        });
    }
    Ok((triplet_distance(trip, t)? / trip.d0()).ln() / t)
}

/// Upper bound on `λ(t)` from `D ≤ 2`.
pub fn lyapunov_ceiling(d0: f64, t: f64) -> f64 {
    (2.0 / d0).ln() / t
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LyapunovSeries {
    pub times: Vec<f64>,
    pub d: Vec<f64>,
    pub lambda: Vec<f64>,
}

/// `D` and `λ` at every positive sample time where all three paths are live.
pub fn lyapunov_series(trip: &PathTriplet) -> LyapunovSeries {
    let d0 = trip.d0();
    let mut out = LyapunovSeries::default();
    for &(t, _) in &trip.main.samples {
        if t <= 0.0 {
            continue;
        }
        let Ok(d) = triplet_distance(trip, t) else {
            break;
        };
        out.times.push(t);
        out.d.push(d);
        out.lambda.push((d / d0).ln() / t);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordStatus {
    Ok,
    /// Main path live, but an auxiliary diverged so `λ` is unavailable.
    AuxDiverged,
    /// The main path diverged before this strobe; the last record of its IC.
    Diverged,
}

impl RecordStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RecordStatus::Ok => "ok",
            RecordStatus::AuxDiverged => "aux-diverged",
            RecordStatus::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PortraitRecord {
    pub theta0: f64,
    pub p0: f64,
    pub n: usize,
    pub theta_mod_2pi: f64,
    pub p: f64,
    pub lambda: f64,
    pub status: RecordStatus,
}

/// Strobes are taken at `t = nΛ`, halfway between kicks.
#[derive(Debug, Clone, Default, Serialize)]
pub struct StroboscopicPortrait {
    pub records: Vec<PortraitRecord>,
}

impl StroboscopicPortrait {
    pub fn live(&self) -> impl Iterator<Item = &PortraitRecord> {
        self.records.iter().filter(|r| r.status != RecordStatus::Diverged)
    }
}

fn portrait_one(
    ic: PhasePoint,
    times: &[f64],
    sched: &MeasurementSchedule,
    cfg: &IntegratorConfig,
    delta_theta0: f64,
) -> Result<Vec<PortraitRecord>> {
    let trip = PathTriplet::integrate(ic, delta_theta0, times, sched, cfg)?;
    let mut out = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        let n = i + 1;
        let Some(pt) = trip.main.at(t) else {
            out.push(PortraitRecord {
                theta0: ic.theta,
                p0: ic.p,
                n,
                theta_mod_2pi: f64::NAN,
                p: f64::NAN,
                lambda: f64::NAN,
                status: RecordStatus::Diverged,
            });
            break;
        };
        let (lambda, status) = match lyapunov(&trip, t) {
            Ok(l) => (l, RecordStatus::Ok),
            Err(_) => (f64::NAN, RecordStatus::AuxDiverged),
        };
        out.push(PortraitRecord {
            theta0: ic.theta,
            p0: ic.p,
            n,
            theta_mod_2pi: pt.theta.rem_euclid(TAU),
            p: pt.p,
            lambda,
            status,
        });
    }
    Ok(out)
}

/// Integrates every initial condition (with its auxiliary pair) in parallel
/// and records the state and `λ` at strobes `n = 1..=n_strobes`.
pub fn portrait(
    ics: &[PhasePoint],
    n_strobes: usize,
    sched: &MeasurementSchedule,
    cfg: &IntegratorConfig,
    delta_theta0: f64,
) -> Result<StroboscopicPortrait> {
    if n_strobes == 0 {
        return Err(Error::InvalidParameter {
            name: "n_strobes",
            reason: "need at least one strobe".into(),
        });
    }
    sched.validate()?;
    cfg.validate()?;
    let times: Vec<f64> = (1..=n_strobes).map(|n| n as f64 * sched.period).collect();
    let chunks: Vec<Vec<PortraitRecord>> = ics
        .par_iter()
        .map(|&ic| portrait_one(ic, &times, sched, cfg, delta_theta0))
        .collect::<Result<_>>()?;
    Ok(StroboscopicPortrait {
        records: chunks.into_iter().flatten().collect(),
    })
}

/// Initial conditions spread evenly over `θ ∈ [0, 2π)` on each momentum line.
pub fn line_ics(momenta: &[f64], per_line: usize) -> Vec<PhasePoint> {
    momenta
        .iter()
        .flat_map(|&p| (0..per_line).map(move |i| PhasePoint::new(TAU * i as f64 / per_line as f64, p)))
        .collect()
}
