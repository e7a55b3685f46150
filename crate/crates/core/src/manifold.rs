//! Lagrange manifolds: every `p₀` launched from one `θ₀`, refined until the
//! image at the final time has no large gaps.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::bloch_distance;
use crate::error::{Error, Result};
use crate::integrator::{flow_map, integrate_sampled, FlowEnd, IntegratorConfig, PathStatus};
use crate::model::{MeasurementSchedule, PhasePoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineConfig {
    pub max_gap_theta: f64,
    pub max_gap_p: f64,
    pub min_dp0: f64,
    pub max_points: usize,
    pub max_iterations: usize,
    pub seed_points: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            max_gap_theta: 0.02,
            max_gap_p: 0.05,
            min_dp0: 1e-12,
            max_points: 2_000_000,
            max_iterations: 200,
            seed_points: 101,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.into(),
            })
        };
        if !(self.max_gap_theta > 0.0) {
            return bad("max_gap_theta", "must be positive");
        }
        if !(self.max_gap_p > 0.0) {
            return bad("max_gap_p", "must be positive");
        }
        if !(self.min_dp0 > 0.0) {
            return bad("min_dp0", "must be positive");
        }
        if self.seed_points < 2 {
            return bad("seed_points", "need at least two seed points");
        }
        if self.max_points < self.seed_points {
            return bad("max_points", "must be at least seed_points");
        }
        Ok(())
    }
}

/// One manifold point at a fixed time. `theta` and `p` are NaN when the path
/// has diverged by then.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ManifoldPoint {
    pub p0: f64,
    pub theta: f64,
    pub p: f64,
    pub status: PathStatus,
}

impl ManifoldPoint {
    pub fn is_live(&self) -> bool {
        !self.status.is_diverged()
    }

    /// `floor((θ_T − θ₀)/2π)`.
    pub fn winding(&self, theta0: f64) -> Option<i64> {
        self.is_live().then(|| ((self.theta - theta0) / TAU).floor() as i64)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RefineStats {
    pub iterations: usize,
    pub integrations: usize,
    /// The point or iteration budget ran out before every gap passed.
    pub truncated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifold {
    pub theta0: f64,
    pub t: f64,
    /// Strictly ascending in `p0`.
    pub points: Vec<ManifoldPoint>,
    pub stats: RefineStats,
}

struct Node {
    p0: f64,
    states: Vec<PhasePoint>,
    status: PathStatus,
}

fn launch(
    theta0: f64,
    p0: f64,
    times: &[f64],
    sched: &MeasurementSchedule,
    cfg: &IntegratorConfig,
) -> Result<Node> {
    let path = integrate_sampled(PhasePoint::new(theta0, p0), 0.0, times, sched, cfg)?;
    let mut states: Vec<PhasePoint> = path.samples.iter().map(|s| s.1).collect();
    states.resize(times.len(), PhasePoint::new(f64::NAN, f64::NAN));
    Ok(Node {
        p0,
        states,
        status: path.status,
    })
}

fn needs_split(a: &Node, b: &Node, refine: &RefineConfig) -> bool {
    if b.p0 - a.p0 <= refine.min_dp0 {
        return false;
    }
    a.states.iter().zip(&b.states).any(|(x, y)| match (x.is_finite(), y.is_finite()) {
        (true, true) => (x.theta - y.theta).abs() > refine.max_gap_theta || (x.p - y.p).abs() > refine.max_gap_p,
        (true, false) | (false, true) => true,
        (false, false) => false,
    })
}

fn check_range(p0_range: (f64, f64)) -> Result<()> {
    if !(p0_range.0 < p0_range.1) || !p0_range.0.is_finite() || !p0_range.1.is_finite() {
        return Err(Error::InvalidParameter {
            name: "p0_range",
            reason: format!("need a finite, nonempty interval, got {p0_range:?}"),
        });
    }
    Ok(())
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() || times[0] <= 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter {
            name: "times",
            reason: "need strictly increasing positive times".into(),
        });
    }
    Ok(())
}

/// Propagates the manifold and refines it until adjacent live points are
/// within the gap bounds at every one of `times`. Returns one [`Manifold`]
/// per time, all sharing the same `p₀` grid.
pub fn propagate_series(
    theta0: f64,
    p0_range: (f64, f64),
    times: &[f64],
    sched: &MeasurementSchedule,
    cfg: &IntegratorConfig,
    refine: &RefineConfig,
) -> Result<Vec<Manifold>> {
    check_range(p0_range)?;
    check_times(times)?;
    refine.validate()?;
    sched.validate()?;
    cfg.validate()?;
    let (lo, hi) = p0_range;
    let n = refine.seed_points;
    let seeds: Vec<f64> = (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect();
    let mut nodes: Vec<Node> = seeds
        .par_iter()
        .map(|&p0| launch(theta0, p0, times, sched, cfg))
        .collect::<Result<_>>()?;
    let mut stats = RefineStats {
        integrations: nodes.len(),
        ..Default::default()
    };

    loop {
        let mut mids: Vec<(usize, f64)> = nodes
            .windows(2)
            .enumerate()
            .filter(|(_, w)| needs_split(&w[0], &w[1], refine))
            .map(|(i, w)| (i, 0.5 * (w[0].p0 + w[1].p0)))
            .filter(|&(i, m)| m > nodes[i].p0 && m < nodes[i + 1].p0)
            .collect();
        if mids.is_empty() {
            break;
        }
        if stats.iterations >= refine.max_iterations {
            stats.truncated = true;
            break;
        }
        let room = refine.max_points.saturating_sub(nodes.len());
        if mids.len() > room {
            mids.truncate(room);
            stats.truncated = true;
            if mids.is_empty() {
                break;
            }
        }
        let fresh: Vec<Node> = mids
            .par_iter()
            .map(|&(_, p0)| launch(theta0, p0, times, sched, cfg))
            .collect::<Result<_>>()?;
        stats.iterations += 1;
        stats.integrations += fresh.len();

        let mut merged = Vec::with_capacity(nodes.len() + fresh.len());
        let mut fresh = mids.iter().map(|m| m.0).zip(fresh).peekable();
        for (i, node) in nodes.into_iter().enumerate() {
            merged.push(node);
            if fresh.peek().is_some_and(|(j, _)| *j == i) {
                merged.push(fresh.next().unwrap().1);
            }
        }
        nodes = merged;
        if stats.truncated {
            break;
        }
    }

    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &t)| Manifold {
            theta0,
            t,
            points: nodes
                .iter()
                .map(|nd| {
                    let s = nd.states[k];
                    let status = match nd.status {
                        PathStatus::Diverged { t: td } if !s.is_finite() => PathStatus::Diverged { t: td },
                        _ => PathStatus::Completed,
                    };
                    ManifoldPoint {
                        p0: nd.p0,
                        theta: s.theta,
                        p: s.p,
                        status,
                    }
                })
                .collect(),
            stats,
        })
        .collect())
}

/// Single-time form of [`propagate_series`].
pub fn propagate(
    theta0: f64,
    p0_range: (f64, f64),
    t: f64,
    sched: &MeasurementSchedule,
    cfg: &IntegratorConfig,
    refine: &RefineConfig,
) -> Result<Manifold> {
    Ok(propagate_series(theta0, p0_range, &[t], sched, cfg, refine)?.remove(0))
}

impl Manifold {
    /// Maximal runs of consecutive live points, as index ranges.
    pub fn segments(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = None;
        for (i, pt) in self.points.iter().enumerate() {
            match (pt.is_live(), start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    out.push(s..i);
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push(s..self.points.len());
        }
        out
    }

    /// Point reflection `(θ, p, p₀) → (2θ₀ − θ, −p, −p₀)`; maps the manifold
    /// from `θ₀` onto the one from `−θ₀`.
    pub fn mirrored(&self) -> Manifold {
        let points = self
            .points
            .iter()
            .rev()
            .map(|pt| ManifoldPoint {
                p0: -pt.p0,
                theta: -pt.theta,
                p: -pt.p,
                status: pt.status,
            })
            .collect();
        Manifold {
            theta0: -self.theta0,
            t: self.t,
            points,
            stats: self.stats,
        }
    }

    /// Concatenates two manifolds from the same `θ₀` whose `p₀` ranges meet
    /// or are disjoint; a shared endpoint is kept once.
    pub fn join(mut self, other: &Manifold) -> Manifold {
        let last = self.points.last().map(|pt| pt.p0);
        for pt in &other.points {
            if last.is_some_and(|l| pt.p0 <= l) {
                continue;
            }
            self.points.push(*pt);
        }
        self.stats.integrations += other.stats.integrations;
        self.stats.iterations = self.stats.iterations.max(other.stats.iterations);
        self.stats.truncated |= other.stats.truncated;
        self
    }
}

/// One-sided secant Jacobians at an interior point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JacobianPoint {
    pub index: usize,
    pub p0: f64,
    pub j_plus: f64,
    pub j_minus: f64,
    /// Secant of `J` across the point.
    pub curvature: f64,
    /// `½(p₀^{i+1} − p₀^{i−1})`.
    pub weight: f64,
}

/// Secant Jacobians for every interior point of each live segment with at
/// least three points.
pub fn jacobians(m: &Manifold) -> Vec<JacobianPoint> {
    let pts = &m.points;
    let mut out = Vec::new();
    for seg in m.segments() {
        if seg.len() < 3 {
            continue;
        }
        for i in seg.start + 1..seg.end - 1 {
            let (a, b, c) = (&pts[i - 1], &pts[i], &pts[i + 1]);
            let j_minus = (b.theta - a.theta) / (b.p0 - a.p0);
            let j_plus = (c.theta - b.theta) / (c.p0 - b.p0);
            let weight = 0.5 * (c.p0 - a.p0);
            out.push(JacobianPoint {
                index: i,
                p0: b.p0,
                j_plus,
                j_minus,
                curvature: (j_plus - j_minus) / weight,
                weight,
            });
        }
    }
    out
}

fn sign_changes(values: impl Iterator<Item = f64>) -> usize {
    let mut last = 0.0f64;
    let mut count = 0;
    for v in values {
        if v == 0.0 || v.is_nan() {
            continue;
        }
        if last != 0.0 && v.signum() != last.signum() {
            count += 1;
        }
        last = v;
    }
    count
}

/// Number of folds: sign changes of the secant Jacobian along live segments.
pub fn catastrophe_count(m: &Manifold) -> usize {
    let pts = &m.points;
    m.segments()
        .into_iter()
        .map(|seg| {
            sign_changes(
                pts[seg.clone()]
                    .windows(2)
                    .map(|w| (w[1].theta - w[0].theta) / (w[1].p0 - w[0].p0)),
            )
        })
        .sum()
}

/// `Σ √(Δθ² + Δp₀²)` over adjacent live pairs.
pub fn manifold_length(m: &Manifold) -> f64 {
    let pts = &m.points;
    m.segments()
        .into_iter()
        .flat_map(|seg| pts[seg].windows(2).map(|w| (w[1].theta - w[0].theta).hypot(w[1].p0 - w[0].p0)).collect::<Vec<_>>())
        .sum()
}

/// Weighted mean of `½(|J⁺| + |J⁻|)`.
pub fn mean_jacobian(m: &Manifold) -> f64 {
    let (num, den) = jacobians(m).iter().fold((0.0, 0.0), |(n, d), j| {
        (n + j.weight * 0.5 * (j.j_plus.abs() + j.j_minus.abs()), d + j.weight)
    });
    num / den
}

/// Weighted mean distance between matching points of the main manifold and
/// its two auxiliaries (all on the same `p₀` grid).
pub fn mean_distance(main: &Manifold, plus: &Manifold, minus: &Manifold) -> f64 {
    let pts = &main.points;
    let n = pts.len();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 1..n.saturating_sub(1) {
        let (m, a, b) = (&pts[i], &plus.points[i], &minus.points[i]);
        if !(m.is_live() && a.is_live() && b.is_live()) {
            continue;
        }
        let w = 0.5 * (pts[i + 1].p0 - pts[i - 1].p0);
        num += w * 0.5 * (bloch_distance(m.theta, a.theta) + bloch_distance(m.theta, b.theta));
        den += w;
    }
    num / den
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct StretchReport {
    pub times: Vec<f64>,
    pub length: Vec<f64>,
    pub j_av: Vec<f64>,
    pub n_c: Vec<usize>,
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
    pub s3: Vec<f64>,
    pub lambda_av: Vec<f64>,
    pub d_av: Vec<f64>,
    pub integrations: usize,
    pub truncated: bool,
}

fn aux_series(
    theta0: f64,
    grid: &[f64],
    times: &[f64],
    sched: &MeasurementSchedule,
    cfg: &IntegratorConfig,
) -> Result<Vec<Manifold>> {
    let nodes: Vec<Node> = grid
        .par_iter()
        .map(|&p0| launch(theta0, p0, times, sched, cfg))
        .collect::<Result<_>>()?;
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &t)| Manifold {
            theta0,
            t,
            points: nodes
                .iter()
                .map(|nd| {
                    let s = nd.states[k];
                    ManifoldPoint {
                        p0: nd.p0,
                        theta: s.theta,
                        p: s.p,
                        status: if s.is_finite() { PathStatus::Completed } else { nd.status },
                    }
                })
                .collect(),
            stats: RefineStats {
                integrations: grid.len(),
                ..Default::default()
            },
        })
        .collect())
}

/// Length, mean Jacobian, catastrophe and distance growth rates of the
/// manifold from `θ₀` at each of `times`. The auxiliary manifolds at
/// `θ₀ ± δθ₀` reuse the refined grid of the main one.
pub fn stretch_report(
    theta0: f64,
    p0_range: (f64, f64),
    times: &[f64],
    sched: &MeasurementSchedule,
    cfg: &IntegratorConfig,
    refine: &RefineConfig,
    delta_theta0: f64,
) -> Result<StretchReport> {
    if !(delta_theta0 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "delta_theta0",
            reason: format!("must be positive, got {delta_theta0}"),
        });
    }
    // From θ₀ = 0 the half over negative p₀ is the point reflection of the
    // positive half, and the reflection swaps the two auxiliaries.
    let symmetric = theta0 == 0.0 && p0_range.0 == -p0_range.1;
    let half_range = if symmetric { (0.0, p0_range.1) } else { p0_range };
    let mut main = propagate_series(theta0, half_range, times, sched, cfg, refine)?;
    let grid: Vec<f64> = main[0].points.iter().map(|pt| pt.p0).collect();
    let mut plus = aux_series(theta0 + delta_theta0, &grid, times, sched, cfg)?;
    let mut minus = aux_series(theta0 - delta_theta0, &grid, times, sched, cfg)?;
    let integrations = main[0].stats.integrations + 2 * grid.len();
    if symmetric {
        for k in 0..times.len() {
            let (m, p, n) = (&main[k], &plus[k], &minus[k]);
            let full_m = m.mirrored().join(m);
            let full_p = n.mirrored().join(p);
            let full_n = p.mirrored().join(n);
            main[k] = full_m;
            plus[k] = full_p;
            minus[k] = full_n;
        }
    }

    let l0 = p0_range.1 - p0_range.0;
    let d0 = bloch_distance(0.0, delta_theta0);
    let mut rep = StretchReport {
        integrations,
        truncated: main[0].stats.truncated,
        ..Default::default()
    };
    for (k, &t) in times.iter().enumerate() {
        let length = manifold_length(&main[k]);
        let j_av = mean_jacobian(&main[k]);
        let n_c = catastrophe_count(&main[k]);
        let d_av = mean_distance(&main[k], &plus[k], &minus[k]);
        rep.times.push(t);
        rep.length.push(length);
        rep.j_av.push(j_av);
        rep.n_c.push(n_c);
        rep.s1.push((length / l0).ln() / t);
        rep.s2.push((j_av + 1.0).ln() / t);
        rep.s3.push((1.0 + n_c as f64).ln() / t);
        rep.lambda_av.push((d_av / d0).ln() / t);
        rep.d_av.push(d_av);
    }
    Ok(rep)
}

/// Settings for resolving the manifold finely around chosen endpoint angles,
/// so that fold tips grazing a target are not stepped over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetRefine {
    /// Half width of the band around each target that gets refined.
    pub band: f64,
    pub max_gap_theta: f64,
    pub max_dp0: f64,
    pub max_new_points: usize,
}

impl Default for TargetRefine {
    fn default() -> Self {
        Self {
            band: 0.02,
            max_gap_theta: 1e-4,
            max_dp0: 1e-6,
            max_new_points: 2_000_000,
        }
    }
}

/// Bisects every live pair whose `θ` span comes within `band` of one of the
/// unwrapped `goals` until it meets the finer gap bounds.
pub fn refine_near(
    m: &Manifold,
    goals: &[f64],
    fine: &TargetRefine,
    sched: &MeasurementSchedule,
    cfg: &IntegratorConfig,
) -> Result<Manifold> {
    let mut points = m.points.clone();
    let mut stats = m.stats;
    let mut added = 0usize;
    let touches = |a: &ManifoldPoint, b: &ManifoldPoint| {
        let (lo, hi) = (a.theta.min(b.theta) - fine.band, a.theta.max(b.theta) + fine.band);
        goals.iter().any(|g| (lo..=hi).contains(g))
    };
    loop {
        let mids: Vec<(usize, f64)> = points
            .windows(2)
            .enumerate()
            .filter(|(_, w)| {
                let (a, b) = (&w[0], &w[1]);
                let dp0 = b.p0 - a.p0;
                a.is_live()
                    && b.is_live()
                    && touches(a, b)
                    && (dp0 > fine.max_dp0 || (b.theta - a.theta).abs() > fine.max_gap_theta)
                    && 0.5 * (a.p0 + b.p0) > a.p0
                    && 0.5 * (a.p0 + b.p0) < b.p0
            })
            .map(|(i, w)| (i, 0.5 * (w[0].p0 + w[1].p0)))
            .collect();
        if mids.is_empty() {
            break;
        }
        if added + mids.len() > fine.max_new_points {
            stats.truncated = true;
            break;
        }
        let fresh: Vec<ManifoldPoint> = mids
            .par_iter()
            .map(|&(_, p0)| {
                let end = flow_map(PhasePoint::new(m.theta0, p0), 0.0, m.t, sched, cfg)?;
                Ok(match end {
                    FlowEnd::Point(pt) => ManifoldPoint {
                        p0,
                        theta: pt.theta,
                        p: pt.p,
                        status: PathStatus::Completed,
                    },
                    FlowEnd::Diverged { t } => ManifoldPoint {
                        p0,
                        theta: f64::NAN,
                        p: f64::NAN,
                        status: PathStatus::Diverged { t },
                    },
                })
            })
            .collect::<Result<_>>()?;
        added += fresh.len();
        stats.iterations += 1;
        stats.integrations += fresh.len();
        let mut merged = Vec::with_capacity(points.len() + fresh.len());
        let mut fresh = mids.iter().map(|m| m.0).zip(fresh).peekable();
        for (i, pt) in points.into_iter().enumerate() {
            merged.push(pt);
            if fresh.peek().is_some_and(|(j, _)| *j == i) {
                merged.push(fresh.next().unwrap().1);
            }
        }
        points = merged;
    }
    Ok(Manifold {
        theta0: m.theta0,
        t: m.t,
        points,
        stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultipathSolution {
    pub p0: f64,
    pub theta_t: f64,
    pub p_t: f64,
    pub winding: i64,
    pub converged: bool,
}

const MAX_BISECTIONS: usize = 100;

/// All `p₀` in the manifold whose endpoint satisfies `θ_T ≡ target (mod 2π)`,
/// bracketed by sign changes of `θ_T − (target + 2πk)` on every branch `k`
/// and bisected to `tol_theta`.
pub fn find_multipaths(
    m: &Manifold,
    target: f64,
    sched: &MeasurementSchedule,
    cfg: &IntegratorConfig,
    tol_theta: f64,
) -> Result<Vec<MultipathSolution>> {
    if !(0.0..TAU).contains(&target) {
        return Err(Error::InvalidParameter {
            name: "target",
            reason: format!("must lie in [0, 2π), got {target}"),
        });
    }
    let mut brackets = Vec::new();
    let pts = &m.points;
    for seg in m.segments() {
        let last = seg.end - 1;
        for (i, w) in pts[seg.clone()].windows(2).enumerate() {
            let (a, b) = (&w[0], &w[1]);
            let k_lo = ((a.theta.min(b.theta) - target) / TAU).ceil() as i64;
            let k_hi = ((a.theta.max(b.theta) - target) / TAU).floor() as i64;
            for k in k_lo..=k_hi {
                let goal = target + TAU * k as f64;
                let (fa, fb) = (a.theta - goal, b.theta - goal);
                // A root exactly on a grid point belongs to the pair it starts.
                let on_end = fb == 0.0 && seg.start + i + 1 == last;
                if fa == 0.0 || fa * fb < 0.0 || on_end {
                    brackets.push((*a, *b, goal));
                }
            }
        }
    }
    let theta0 = m.theta0;
    let t = m.t;
    brackets
        .par_iter()
        .map(|&(a, b, goal)| bisect_root(theta0, t, a, b, goal, sched, cfg, tol_theta))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn bisect_root(
    theta0: f64,
    t: f64,
    mut a: ManifoldPoint,
    mut b: ManifoldPoint,
    goal: f64,
    sched: &MeasurementSchedule,
    cfg: &IntegratorConfig,
    tol_theta: f64,
) -> Result<MultipathSolution> {
    let solution = |pt: &ManifoldPoint, converged| MultipathSolution {
        p0: pt.p0,
        theta_t: pt.theta,
        p_t: pt.p,
        winding: ((pt.theta - theta0) / TAU).floor() as i64,
        converged,
    };
    for _ in 0..MAX_BISECTIONS {
        for pt in [&a, &b] {
            if (pt.theta - goal).abs() < tol_theta {
                return Ok(solution(pt, true));
            }
        }
        let mid = 0.5 * (a.p0 + b.p0);
        if !(mid > a.p0 && mid < b.p0) {
            break;
        }
        let FlowEnd::Point(end) = flow_map(PhasePoint::new(theta0, mid), 0.0, t, sched, cfg)? else {
            break;
        };
        let c = ManifoldPoint {
            p0: mid,
            theta: end.theta,
            p: end.p,
            status: PathStatus::Completed,
        };
        if (a.theta - goal < 0.0) == (c.theta - goal < 0.0) {
            a = c;
        } else {
            b = c;
        }
    }
    let best = if (a.theta - goal).abs() <= (b.theta - goal).abs() { a } else { b };
    Ok(solution(&best, false))
}

/// Rounds `(θ_T − θ₀)/π` to the nearest half-integer, for reporting bit-flip
/// paths as half windings.
pub fn half_windings(theta_t: f64, theta0: f64) -> f64 {
    ((theta_t - theta0) / PI).round() / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rotor_manifold_is_a_line() {
        let s = MeasurementSchedule::rotor(1.0);
        let refine = RefineConfig {
            seed_points: 11,
            ..Default::default()
        };
        // Seed spacing 0.009 · T = 0.018 rad, inside the gap bound.
        let m = propagate(0.3, (0.0, 0.09), 2.0, &s, &IntegratorConfig::default(), &refine).unwrap();
        assert_eq!(m.points.len(), 11);
        assert_eq!(m.stats.integrations, 11);
        for pt in &m.points {
            assert_relative_eq!(pt.theta, 0.3 + 2.0 * pt.p0, epsilon = 1e-9);
        }
        assert_eq!(catastrophe_count(&m), 0);
        for j in jacobians(&m) {
            assert_relative_eq!(j.j_plus, 2.0, epsilon = 1e-6);
            assert!(j.curvature.abs() < 1e-3);
        }
    }

    #[test]
    fn refinement_closes_gaps_and_keeps_seeds() {
        let s = MeasurementSchedule::standard(0.5).unwrap();
        let refine = RefineConfig {
            seed_points: 5,
            ..Default::default()
        };
        let m = propagate(0.0, (0.5, 2.5), 2.0, &s, &IntegratorConfig::default(), &refine).unwrap();
        assert!(!m.stats.truncated);
        for seed in [0.5, 1.0, 1.5, 2.0, 2.5] {
            assert!(m.points.iter().any(|pt| pt.p0 == seed));
        }
        for w in m.points.windows(2) {
            assert!(w[1].p0 > w[0].p0);
            assert!((w[1].theta - w[0].theta).abs() <= 0.02);
            assert!((w[1].p - w[0].p).abs() <= 0.05);
        }
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let s = MeasurementSchedule::standard(0.5).unwrap();
        let refine = RefineConfig {
            seed_points: 5,
            max_points: 9,
            ..Default::default()
        };
        let m = propagate(0.0, (0.5, 2.5), 2.0, &s, &IntegratorConfig::default(), &refine).unwrap();
        assert!(m.stats.truncated);
        assert!(m.points.len() <= 9);
    }

    #[test]
    fn sign_change_counting() {
        assert_eq!(sign_changes([1.0, 2.0, -1.0, 0.0, -2.0, 3.0].into_iter()), 2);
        assert_eq!(sign_changes([0.0, 0.0].into_iter()), 0);
    }

    #[test]
    fn rotor_multipaths_one_per_branch() {
        let s = MeasurementSchedule::rotor(1.0);
        let refine = RefineConfig::default();
        let cfg = IntegratorConfig::default();
        let m = propagate(0.0, (0.0, 4.0), 2.0, &s, &cfg, &refine).unwrap();
        let sols = find_multipaths(&m, 1.0, &s, &cfg, 1e-9).unwrap();
        // θ_T = 2p₀ ∈ [0, 8] hits 1 and 1 + 2π.
        assert_eq!(sols.len(), 2);
        for (k, sol) in sols.iter().enumerate() {
            assert!(sol.converged);
            assert_eq!(sol.winding, k as i64);
            assert_relative_eq!(sol.p0, (1.0 + TAU * k as f64) / 2.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn negative_half_mirrors_positive_half() {
        let s = MeasurementSchedule::standard(0.5).unwrap();
        let cfg = IntegratorConfig::default();
        let refine = RefineConfig {
            seed_points: 11,
            ..RefineConfig::default()
        };
        let pos = propagate(0.0, (0.0, 0.8), 2.0, &s, &cfg, &refine).unwrap();
        let neg = propagate(0.0, (-0.8, 0.0), 2.0, &s, &cfg, &refine).unwrap().mirrored();
        assert_eq!(pos.points.len(), neg.points.len());
        for (a, b) in pos.points.iter().zip(&neg.points) {
            assert_relative_eq!(a.p0, b.p0, epsilon = 1e-12);
            assert_relative_eq!(a.theta, b.theta, epsilon = 1e-8);
            assert_relative_eq!(a.p, b.p, epsilon = 1e-8);
        }
        assert_eq!(catastrophe_count(&pos), catastrophe_count(&neg));
    }
}
