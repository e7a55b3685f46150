//! Projective-kick limit: diffusion for one period, an instantaneous
//! projective z measurement, then diffusion again.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EDGE: f64 = 1e-9;
const MAX_ITER: usize = 200;
const TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KickLimitParams {
    /// `Γ = Λ/τ`.
    pub gamma: f64,
    pub theta_i: f64,
    pub theta_f: f64,
}

impl KickLimitParams {
    pub fn new(gamma: f64, theta_i: f64, theta_f: f64) -> Result<Self> {
        let p = Self { gamma, theta_i, theta_f };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("must be positive and finite, got {}", self.gamma),
            });
        }
        for (name, v) in [("theta_i", self.theta_i), ("theta_f", self.theta_f)] {
            if !(0.0..=PI).contains(&v) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must lie in [0, π], got {v}"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Excited,
    Ground,
}

impl Branch {
    pub fn name(&self) -> &'static str {
        match self {
            Branch::Excited => "excited",
            Branch::Ground => "ground",
        }
    }
}

/// Probabilities of collapsing to the excited and ground states from `θ₁`.
pub fn collapse_probs(theta1: f64) -> (f64, f64) {
    let c = (0.5 * theta1).cos();
    let s = (0.5 * theta1).sin();
    (c * c, s * s)
}

/// Unnormalised density for reaching `θ_f` through `θ₁` on one branch.
pub fn branch_density(theta1: f64, params: &KickLimitParams, branch: Branch) -> f64 {
    let (p_ex, p_gr) = collapse_probs(theta1);
    let g = params.gamma;
    let spread = (theta1 - params.theta_i).powi(2);
    match branch {
        Branch::Excited => p_ex * (-(params.theta_f.powi(2) + spread) / g).exp(),
        Branch::Ground => p_gr * (-((params.theta_f - PI).powi(2) + spread) / g).exp(),
    }
}

/// Stationarity condition of `ln ℘` in `θ₁` (up to sign).
pub fn branch_function(theta1: f64, params: &KickLimitParams, branch: Branch) -> f64 {
    let pull = 2.0 / params.gamma * (theta1 - params.theta_i);
    match branch {
        Branch::Excited => (0.5 * theta1).tan() + pull,
        Branch::Ground => 1.0 / (0.5 * theta1).tan() - pull,
    }
}

/// The most likely intermediate angle on `branch`, by bisection on
/// `(0, π)`.
pub fn solve_theta1(params: &KickLimitParams, branch: Branch) -> Result<f64> {
    params.validate()?;
    let f = |x| branch_function(x, params, branch);
    let (mut lo, mut hi) = (EDGE, PI - EDGE);
    let (mut f_lo, f_hi) = (f(lo), f(hi));
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if (f_lo < 0.0) == (f_hi < 0.0) {
        return Err(Error::NoBracket {
            branch: branch.name(),
            lo,
            hi,
        });
    }
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo < TOL {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub theta1_ex: f64,
    pub theta1_gr: f64,
}

/// Both roots at each `Γ`.
pub fn sweep(theta_i: f64, theta_f: f64, gammas: &[f64]) -> Result<Vec<SweepRow>> {
    gammas
        .iter()
        .map(|&gamma| {
            let params = KickLimitParams::new(gamma, theta_i, theta_f)?;
            Ok(SweepRow {
                gamma,
                theta1_ex: solve_theta1(&params, Branch::Excited)?,
                theta1_gr: solve_theta1(&params, Branch::Ground)?,
            })
        })
        .collect()
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
        }
    }
}
