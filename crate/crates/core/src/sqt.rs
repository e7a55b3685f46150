//! Stochastic quantum trajectories under simultaneous x and z monitoring,
//! updated by exact Gaussian Kraus operators, plus post-selected densities
//! and ridge extraction.

use std::f64::consts::{PI, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MeasurementSchedule, Readouts};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SqtConfig {
    pub dt: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub theta0: f64,
    pub t0: f64,
    /// Sub-steps per `dt` inside kick windows.
    pub kick_substeps: usize,
    /// Kick window half width in units of `τm`.
    pub kick_window: f64,
    /// Approximate number of stored time samples per trajectory.
    pub store_points: usize,
}

impl Default for SqtConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            n_traj: 10_000,
            seed: 0,
            theta0: 0.0,
            t0: 0.0,
            kick_substeps: 10,
            kick_window: 3.0,
            store_points: 400,
        }
    }
}

impl SqtConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(self.dt > 0.0) {
            return bad("dt", format!("must be positive, got {}", self.dt));
        }
        if self.n_traj == 0 {
            return bad("n_traj", "need at least one trajectory".into());
        }
        if self.kick_substeps == 0 {
            return bad("kick_substeps", "must be at least 1".into());
        }
        if !self.theta0.is_finite() || !self.t0.is_finite() {
            return bad("theta0", "initial angle and time must be finite".into());
        }
        Ok(())
    }

    /// True when a step of `dt` would be coarse against the shortest `τz`.
    pub fn too_coarse(&self, sched: &MeasurementSchedule) -> bool {
        let fine = if sched.epsilon > 0.0 {
            self.dt / self.kick_substeps as f64
        } else {
            self.dt
        };
        fine > sched.min_tau_z() / 10.0
    }
}

/// Draws `r_x ~ N(sinθ, τx/dt)` and `r_z ~ N(cosθ, τz/dt)`.
pub fn sample_readout<R: rand::Rng + ?Sized>(theta: f64, dt: f64, tau_x: f64, tau_z: f64, rng: &mut R) -> Readouts {
    let nx: f64 = StandardNormal.sample(rng);
    let nz: f64 = StandardNormal.sample(rng);
    Readouts {
        r_x: theta.sin() + (tau_x / dt).sqrt() * nx,
        r_z: theta.cos() + (tau_z / dt).sqrt() * nz,
    }
}

/// Applies the x then z Kraus operators `cosh c·I + sinh c·σ` with
/// `c = r·dt/(2τ)` to the real state `(cos θ/2, sin θ/2)`, renormalises, and
/// returns the new angle on the branch nearest `theta`.
pub fn bayes_step(theta: f64, r: Readouts, dt: f64, sched: &MeasurementSchedule, t: f64) -> f64 {
    let (theta1, _) = bayes_step_checked(theta, r, dt, sched.tau_x, sched.tau_z(t));
    theta1
}

/// As [`bayes_step`], also returning `|x² + z² − 1|` of the updated state.
fn bayes_step_checked(theta: f64, r: Readouts, dt: f64, tau_x: f64, tau_z: f64) -> (f64, f64) {
    let (s, c) = (0.5 * theta).sin_cos();
    let cx = r.r_x * dt / (2.0 * tau_x);
    let cz = r.r_z * dt / (2.0 * tau_z);
    // Work with the operators divided by cosh, so large arguments stay finite.
    let tx = cx.tanh();
    let (a0, a1) = (c + tx * s, s + tx * c);
    let tz = cz.tanh();
    let (b0, b1) = (a0 * (1.0 + tz), a1 * (1.0 - tz));
    let norm = b0.hypot(b1);
    let (u0, u1) = (b0 / norm, b1 / norm);
    let x = 2.0 * u0 * u1;
    let z = u0 * u0 - u1 * u1;
    let residual = (x * x + z * z - 1.0).abs();
    let raw = 2.0 * u1.atan2(u0);
    (raw + TAU * ((theta - raw) / TAU).round(), residual)
}

/// Kraus update of a full Bloch vector `(x, y, z)`.
pub fn bloch_update(v: [f64; 3], r: Readouts, dt: f64, sched: &MeasurementSchedule, t: f64) -> [f64; 3] {
    let along = |v: [f64; 3], k: usize, c: f64| {
        let (ch, sh) = ((2.0 * c).cosh(), (2.0 * c).sinh());
        let norm = ch + v[k] * sh;
        let mut out = [v[0] / norm, v[1] / norm, v[2] / norm];
        out[k] = (sh + v[k] * ch) / norm;
        out
    };
    let v = along(v, 0, r.r_x * dt / (2.0 * sched.tau_x));
    along(v, 2, r.r_z * dt / (2.0 * sched.tau_z(t)))
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryEnsemble {
    pub theta0: f64,
    /// Stored sample times, shared by all trajectories.
    pub times: Vec<f64>,
    /// Row-major `n_traj × times.len()` unwrapped angles.
    pub theta: Vec<f64>,
    pub n_traj: usize,
    /// Largest `|x² + z² − 1|` seen over every update.
    pub max_purity_residual: f64,
}

impl TrajectoryEnsemble {
    pub fn trajectory(&self, i: usize) -> &[f64] {
        let n = self.times.len();
        &self.theta[i * n..(i + 1) * n]
    }

    pub fn final_thetas(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_traj).map(|i| *self.trajectory(i).last().unwrap())
    }

    /// Fractions ending with `z > 0` and `z < 0`.
    pub fn branch_fractions(&self) -> (f64, f64) {
        let up = self.final_thetas().filter(|th| th.cos() > 0.0).count() as f64;
        let n = self.n_traj as f64;
        (up / n, 1.0 - up / n)
    }

    /// Fraction ending within `tol` of either z eigenstate.
    pub fn near_eigenstate_fraction(&self, tol: f64) -> f64 {
        let near = self
            .final_thetas()
            .filter(|th| {
                let d = th.rem_euclid(PI);
                d.min(PI - d) < tol
            })
            .count();
        near as f64 / self.n_traj as f64
    }
}

fn rng_for(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Runs `cfg.n_traj` independent trajectories from `cfg.t0` to `t_end`.
/// Trajectory `i` draws from its own stream derived from `(seed, i)`, so the
/// ensemble does not depend on the thread count.
pub fn simulate_ensemble(cfg: &SqtConfig, t_end: f64, sched: &MeasurementSchedule) -> Result<TrajectoryEnsemble> {
    cfg.validate()?;
    sched.validate()?;
    if !(t_end > cfg.t0) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            reason: format!("must exceed t0 = {}", cfg.t0),
        });
    }
    let steps = ((t_end - cfg.t0) / cfg.dt).round().max(1.0) as usize;
    let stride = steps.div_ceil(cfg.store_points.max(1)).max(1);
    let stored: Vec<usize> = (0..=steps).filter(|k| k % stride == 0 || *k == steps).collect();
    let times: Vec<f64> = stored.iter().map(|&k| cfg.t0 + k as f64 * cfg.dt).collect();
    let half = cfg.kick_window * sched.tau_m;
    let kicked = sched.epsilon > 0.0;

    let runs: Vec<(Vec<f64>, f64)> = (0..cfg.n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(cfg.seed, i);
            let mut theta = cfg.theta0;
            let mut worst = 0.0f64;
            let mut out = Vec::with_capacity(stored.len());
            out.push(theta);
            let mut next = 1;
            for k in 0..steps {
                let t = cfg.t0 + k as f64 * cfg.dt;
                let sub = if kicked && (sched.in_kick_window(t, half) || sched.in_kick_window(t + cfg.dt, half)) {
                    cfg.kick_substeps
                } else {
                    1
                };
                let h = cfg.dt / sub as f64;
                for j in 0..sub {
                    let ts = t + j as f64 * h;
                    let tau_z = sched.tau_z(ts + 0.5 * h);
                    let r = sample_readout(theta, h, sched.tau_x, tau_z, &mut rng);
                    let (th, res) = bayes_step_checked(theta, r, h, sched.tau_x, tau_z);
                    theta = th;
                    worst = worst.max(res);
                }
                if next < stored.len() && stored[next] == k + 1 {
                    out.push(theta);
                    next += 1;
                }
            }
            (out, worst)
        })
        .collect();
    let max_purity_residual = runs.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(TrajectoryEnsemble {
        theta0: cfg.theta0,
        times,
        theta: runs.into_iter().flat_map(|r| r.0).collect(),
        n_traj: cfg.n_traj,
        max_purity_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostSelection {
    pub theta_f: f64,
    pub window: f64,
}

impl PostSelection {
    pub fn accepts(&self, theta: f64) -> bool {
        let d = (theta - self.theta_f).rem_euclid(TAU);
        d.min(TAU - d) < self.window
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityHistogram {
    pub t_edges: Vec<f64>,
    pub theta_edges: Vec<f64>,
    /// Row-major `time bins × θ bins`, scaled so the largest bin is 1.
    pub density: Vec<f64>,
    pub survivors: usize,
    pub n_traj: usize,
}

impl DensityHistogram {
    pub fn is_empty(&self) -> bool {
        self.survivors == 0
    }

    pub fn n_t(&self) -> usize {
        self.t_edges.len().saturating_sub(1)
    }

    pub fn n_theta(&self) -> usize {
        self.theta_edges.len().saturating_sub(1)
    }

    pub fn at(&self, it: usize, ith: usize) -> f64 {
        self.density[it * self.n_theta() + ith]
    }
}

fn edges(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

fn bin(x: f64, lo: f64, hi: f64, n: usize) -> usize {
    (((x - lo) / (hi - lo) * n as f64).floor().max(0.0) as usize).min(n - 1)
}

/// Indices of trajectories whose final angle passes `sel`.
pub fn survivors(ens: &TrajectoryEnsemble, sel: &PostSelection) -> Vec<usize> {
    (0..ens.n_traj)
        .filter(|&i| sel.accepts(*ens.trajectory(i).last().unwrap()))
        .collect()
}

fn histogram(ens: &TrajectoryEnsemble, members: &[usize], bins: (usize, usize)) -> DensityHistogram {
    let n_t = bins.0.clamp(1, ens.times.len().max(1));
    let n_th = bins.1.max(1);
    let t_lo = ens.times[0];
    let t_hi = *ens.times.last().unwrap();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &i in members {
        for &th in ens.trajectory(i) {
            lo = lo.min(th);
            hi = hi.max(th);
        }
    }
    if members.is_empty() {
        (lo, hi) = (ens.theta0 - PI, ens.theta0 + PI);
    }
    if hi - lo < 1e-9 {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let mut counts = vec![0.0f64; n_t * n_th];
    for &i in members {
        for (k, &th) in ens.trajectory(i).iter().enumerate() {
            let it = bin(ens.times[k], t_lo, t_hi.max(t_lo + 1e-300), n_t);
            counts[it * n_th + bin(th, lo, hi, n_th)] += 1.0;
        }
    }
    let peak = counts.iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        counts.iter_mut().for_each(|c| *c /= peak);
    }
    DensityHistogram {
        t_edges: edges(t_lo, t_hi, n_t),
        theta_edges: edges(lo, hi, n_th),
        density: counts,
        survivors: members.len(),
        n_traj: ens.n_traj,
    }
}

/// Histogram over `(t, θ)` of the trajectories that pass `sel`, normalised to
/// a peak of 1. No survivors gives an all-zero histogram.
pub fn postselect_density(ens: &TrajectoryEnsemble, sel: &PostSelection, bins: (usize, usize)) -> DensityHistogram {
    histogram(ens, &survivors(ens, sel), bins)
}

#[derive(Debug, Clone, Serialize)]
pub struct Ridge {
    pub winding: i64,
    pub population: usize,
    pub times: Vec<f64>,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RidgeSet {
    pub ridges: Vec<Ridge>,
    /// Winding groups dropped for having fewer than the minimum population.
    pub omitted: Vec<(i64, usize)>,
}

fn median3(a: f64, b: f64, c: f64) -> f64 {
    a.max(b).min(a.min(b).max(c))
}

/// Groups post-selected trajectories by `floor((θ_T − θ₀)/2π)` and returns,
/// per group, the density maximum in each time bin smoothed by a 3-bin
/// running median.
pub fn extract_mlps(
    ens: &TrajectoryEnsemble,
    sel: &PostSelection,
    bins: (usize, usize),
    min_population: usize,
) -> Result<RidgeSet> {
    let kept = survivors(ens, sel);
    if kept.is_empty() {
        return Err(Error::InvalidParameter {
            name: "selection",
            reason: "no trajectories survive post-selection".into(),
        });
    }
    let mut groups: std::collections::BTreeMap<i64, Vec<usize>> = Default::default();
    for i in kept {
        let th = *ens.trajectory(i).last().unwrap();
        groups.entry(((th - ens.theta0) / TAU).floor() as i64).or_default().push(i);
    }
    let mut out = RidgeSet::default();
    for (winding, members) in groups {
        if members.len() < min_population {
            out.omitted.push((winding, members.len()));
            continue;
        }
        let h = histogram(ens, &members, bins);
        let (n_t, n_th) = (h.n_t(), h.n_theta());
        let raw: Vec<f64> = (0..n_t)
            .map(|it| {
                let best = (0..n_th).max_by(|&a, &b| h.at(it, a).total_cmp(&h.at(it, b))).unwrap();
                0.5 * (h.theta_edges[best] + h.theta_edges[best + 1])
            })
            .collect();
        let theta: Vec<f64> = (0..n_t)
            .map(|i| {
                if i == 0 || i + 1 == n_t {
                    raw[i]
                } else {
                    median3(raw[i - 1], raw[i], raw[i + 1])
                }
            })
            .collect();
        let times = (0..n_t).map(|i| 0.5 * (h.t_edges[i] + h.t_edges[i + 1])).collect();
        out.ridges.push(Ridge {
            winding,
            population: members.len(),
            times,
            theta,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn noiseless_readout_barely_moves_state() {
        let s = MeasurementSchedule::standard(0.5).unwrap();
        for theta in [0.3, 1.2, 2.5, -0.7] {
            let r = Readouts {
                r_x: f64::sin(theta),
                r_z: f64::cos(theta),
            };
            let dt = 1e-4;
            let next = bayes_step(theta, r, dt, &s, 0.2);
            assert!((next - theta).abs() < 10.0 * dt * dt, "{theta}: {}", next - theta);
        }
    }

    #[test]
    fn z_eigenstate_moves_only_by_x_channel() {
        let s = MeasurementSchedule::rotor(1.0);
        let r = Readouts { r_x: 0.7, r_z: 3.0 };
        let dt = 1e-4;
        let next = bayes_step(0.0, r, dt, &s, 0.0);
        assert!((next - 0.7 * dt).abs() < 5.0 * dt * dt);
        let still = bayes_step(0.0, Readouts { r_x: 0.0, r_z: 3.0 }, dt, &s, 0.0);
        assert_eq!(still, 0.0);
    }

    #[test]
    fn bloch_and_angle_updates_agree() {
        let s = MeasurementSchedule::standard(0.9).unwrap();
        let mut rng = rng_for(7, 0);
        let mut theta = 0.4f64;
        let mut v = [theta.sin(), 0.0, theta.cos()];
        for k in 0..2000 {
            let t = k as f64 * 1e-3;
            let r = sample_readout(theta, 1e-3, s.tau_x, s.tau_z(t), &mut rng);
            theta = bayes_step(theta, r, 1e-3, &s, t);
            v = bloch_update(v, r, 1e-3, &s, t);
            assert_eq!(v[1], 0.0);
        }
        assert_relative_eq!(v[0], theta.sin(), epsilon = 1e-9);
        assert_relative_eq!(v[2], theta.cos(), epsilon = 1e-9);
    }

    #[test]
    fn readout_variance_shrinks_at_kick() {
        let s = MeasurementSchedule::standard(0.99).unwrap();
        let mut rng = rng_for(1, 0);
        let n = 200_000;
        let var = |tau_z: f64, rng: &mut ChaCha8Rng| {
            let xs: Vec<f64> = (0..n).map(|_| sample_readout(0.0, 1e-3, 1.0, tau_z, rng).r_z).collect();
            let m = xs.iter().sum::<f64>() / n as f64;
            xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64
        };
        let off = var(s.tau_z(0.0), &mut rng);
        let on = var(s.tau_z(0.5), &mut rng);
        assert!((off / 1000.0 - 1.0).abs() < 0.02);
        assert!((off / on / 100.0 - 1.0).abs() < 0.03);
    }

    #[test]
    fn ensembles_are_reproducible() {
        let s = MeasurementSchedule::standard(0.5).unwrap();
        let cfg = SqtConfig {
            n_traj: 16,
            seed: 99,
            theta0: 0.3,
            ..Default::default()
        };
        let a = simulate_ensemble(&cfg, 0.2, &s).unwrap();
        let b = simulate_ensemble(&cfg, 0.2, &s).unwrap();
        assert_eq!(a.theta, b.theta);
        assert_ne!(a.trajectory(0), a.trajectory(1));
        assert!(a.max_purity_residual < 1e-12);
    }

    #[test]
    fn selection_window() {
        let sel = PostSelection {
            theta_f: PI,
            window: 0.1,
        };
        assert!(sel.accepts(-PI + 0.05));
        assert!(sel.accepts(3.0 * PI));
        assert!(!sel.accepts(0.0));
    }

    #[test]
    fn full_window_keeps_everything() {
        let s = MeasurementSchedule::rotor(1.0);
        let cfg = SqtConfig {
            n_traj: 200,
            ..Default::default()
        };
        let ens = simulate_ensemble(&cfg, 0.1, &s).unwrap();
        let all = postselect_density(&ens, &PostSelection { theta_f: 0.0, window: PI + 1e-9 }, (20, 20));
        assert_eq!(all.survivors, 200);
        let peak = all.density.iter().cloned().fold(0.0, f64::max);
        assert_eq!(peak, 1.0);
        let none = postselect_density(&ens, &PostSelection { theta_f: PI, window: 1e-6 }, (20, 20));
        assert!(none.is_empty());
    }

    fn step_moments(theta: f64, dt: f64, t: f64, s: &MeasurementSchedule, n: usize) -> (f64, f64) {
        let mut rng = rng_for(11, 0);
        let steps: Vec<f64> = (0..n)
            .map(|_| {
                let r = sample_readout(theta, dt, s.tau_x, s.tau_z(t), &mut rng);
                bayes_step(theta, r, dt, s, t) - theta
            })
            .collect();
        let mean = steps.iter().sum::<f64>() / n as f64;
        let var = steps.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (mean, var)
    }

    #[test]
    fn equal_rates_diffuse_without_drift() {
        let s = MeasurementSchedule::rotor(1.0);
        let (dt, n) = (1e-4, 200_000);
        for theta in [0.0, 0.7, 2.0] {
            let (mean, var) = step_moments(theta, dt, 0.0, &s, n);
            let se = (dt / n as f64).sqrt();
            assert!(mean.abs() < 5.0 * se, "drift {mean} at {theta}");
            assert_relative_eq!(var / dt, 1.0, max_relative = 0.02);
        }
    }

    #[test]
    fn kick_drifts_toward_z_eigenstates() {
        let s = MeasurementSchedule::standard(0.9).unwrap();
        let (dt, n) = (1e-4, 2_000_000);
        let peak = 0.5 * s.period;
        let (up, _) = step_moments(PI / 4.0, dt, peak, &s, n);
        let (down, _) = step_moments(3.0 * PI / 4.0, dt, peak, &s, n);
        let se = (dt / s.tau_z(peak) / n as f64).sqrt();
        assert!(up < -5.0 * se, "{up}");
        assert!(down > 5.0 * se, "{down}");
        let (flat, _) = step_moments(PI / 4.0, dt, 0.0, &s, n);
        assert!(flat.abs() < up.abs() / 10.0);
    }
}
