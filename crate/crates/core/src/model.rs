//! The kicked two-measurement stochastic Hamiltonian.
//!
//! A qubit confined to the xz-plane of the Bloch sphere (`x = sin θ`,
//! `z = cos θ`) is monitored along σx with fixed characteristic time `τx`
//! and along σz with a periodically kicked time
//! `τz(t) = τx (1 − ε g(t))`, where `g` is a Gaussian of width `τm` centred
//! at the middle of every period `Λ`.
//!
//! Times are in μs, rates in MHz.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kicked two-measurement configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSchedule {
    /// Characteristic time of the σx measurement (μs).
    pub tau_x: f64,
    /// Dimensionless kick strength, `0 ≤ ε < 1`.
    pub epsilon: f64,
    /// Width of each Gaussian kick (μs).
    pub tau_m: f64,
    /// Kick period Λ (μs).
    pub period: f64,
}

impl MeasurementSchedule {
    pub fn new(tau_x: f64, epsilon: f64, tau_m: f64, period: f64) -> Result<Self> {
        let s = Self {
            tau_x,
            epsilon,
            tau_m,
            period,
        };
        s.validate()?;
        Ok(s)
    }

    /// `τx = Λ = 1 μs`, `τm = 25 ns`: the configuration used for every figure.
    pub fn standard(epsilon: f64) -> Result<Self> {
        Self::new(1.0, epsilon, 0.025, 1.0)
    }

    /// Unkicked schedule; the Hamiltonian reduces to a free rotor.
    pub fn rotor(tau_x: f64) -> Self {
        Self {
            tau_x,
            epsilon: 0.0,
            tau_m: 0.025,
            period: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and > 0, got {v}"),
                })
            }
        };
        positive("tau_x", self.tau_x)?;
        positive("tau_m", self.tau_m)?;
        positive("period", self.period)?;
        // ε = 1 makes τz vanish at the kick peak.
        if !(self.epsilon.is_finite() && (0.0..1.0).contains(&self.epsilon)) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("must satisfy 0 <= epsilon < 1, got {}", self.epsilon),
            });
        }
        Ok(())
    }

    /// Kick amplitude `A = ε τx` (μs).
    pub fn amplitude(&self) -> f64 {
        self.epsilon * self.tau_x
    }

    pub fn gamma_x(&self) -> f64 {
        1.0 / self.tau_x
    }

    pub fn gamma_z(&self, t: f64) -> f64 {
        1.0 / self.tau_z(t)
    }

    /// Gaussian kick envelope, periodic in Λ and peaking at `(n + ½)Λ`.
    pub fn kick_envelope(&self, t: f64) -> f64 {
        let phase = t.rem_euclid(self.period) - 0.5 * self.period;
        (-phase * phase / (2.0 * self.tau_m * self.tau_m)).exp()
    }

    pub fn tau_z(&self, t: f64) -> f64 {
        self.tau_x * (1.0 - self.epsilon * self.kick_envelope(t))
    }

    /// `1/τz − 1/τx`, evaluated without cancellation.
    pub fn excess_rate(&self, t: f64) -> f64 {
        let eg = self.epsilon * self.kick_envelope(t);
        eg / (self.tau_x * (1.0 - eg))
    }

    /// Smallest τz over a period (at the kick peak).
    pub fn min_tau_z(&self) -> f64 {
        self.tau_x * (1.0 - self.epsilon)
    }

    /// Kick strength at which twice the minimum τz equals the kick width.
    pub fn collapse_threshold(&self) -> f64 {
        1.0 - self.tau_m / self.tau_x
    }

    /// Resonant momenta `p₀ = kπτx/Λ`, `k = −k_max..=k_max`.
    pub fn resonant_momenta(&self, k_max: u32) -> Vec<f64> {
        let k_max = k_max as i64;
        (-k_max..=k_max)
            .map(|k| k as f64 * PI * self.tau_x / self.period)
            .collect()
    }

    /// Whether `t` lies inside `[Λ/2 − w, Λ/2 + w]` modulo Λ.
    pub fn in_kick_window(&self, t: f64, half_width: f64) -> bool {
        (t.rem_euclid(self.period) - 0.5 * self.period).abs() <= half_width
    }
}

/// A point of optimal-path phase space. θ is kept unwrapped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub theta: f64,
    pub p: f64,
}

impl PhasePoint {
    pub const fn new(theta: f64, p: f64) -> Self {
        Self { theta, p }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.p.is_finite()
    }

    /// Image under the odd symmetry `(θ, p) → (−θ, −p)`.
    pub fn mirrored(self) -> Self {
        Self::new(-self.theta, -self.p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Readouts {
    pub r_x: f64,
    pub r_z: f64,
}

/// Hamiltonian coefficients `(a, b)` of `H* = a (p² − 1) + b p`.
pub fn coeffs_ab(theta: f64, t: f64, sched: &MeasurementSchedule) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    let tz = sched.tau_z(t);
    let tx = sched.tau_x;
    let a = s * s / (2.0 * tz) + c * c / (2.0 * tx);
    let b = s * c * (1.0 / tx - 1.0 / tz);
    (a, b)
}

/// Stochastic energy `H*(θ, p, t)`.
pub fn h_star(pt: PhasePoint, t: f64, sched: &MeasurementSchedule) -> f64 {
    let (a, b) = coeffs_ab(pt.theta, t, sched);
    a * (pt.p * pt.p - 1.0) + b * pt.p
}

/// Analytic `(∂H*/∂θ, ∂H*/∂p)`.
///
/// With `Δ = 1/τz − 1/τx`: `a = 1/(2τx) + Δ sin²θ / 2`, `b = −Δ sin 2θ / 2`,
/// so `∂θa = Δ sin 2θ / 2` and `∂θb = −Δ cos 2θ`.
pub fn h_star_grad(pt: PhasePoint, t: f64, sched: &MeasurementSchedule) -> (f64, f64) {
    let delta = sched.excess_rate(t);
    let (s, c) = pt.theta.sin_cos();
    let sin2 = 2.0 * s * c;
    let cos2 = c * c - s * s;
    let a = 0.5 / sched.tau_x + 0.5 * delta * s * s;
    let b = -0.5 * delta * sin2;
    let da = 0.5 * delta * sin2;
    let db = -delta * cos2;
    let dh_dtheta = da * (pt.p * pt.p - 1.0) + db * pt.p;
    let dh_dp = 2.0 * a * pt.p + b;
    (dh_dtheta, dh_dp)
}

/// Readouts extremising `p F + G` at fixed `(θ, p)`.
pub fn optimal_readouts(pt: PhasePoint) -> Readouts {
    let (s, c) = pt.theta.sin_cos();
    Readouts {
        r_x: s + pt.p * c,
        r_z: c - pt.p * s,
    }
}

/// State drift `dθ/dt` for given readouts.
pub fn f_drift(theta: f64, r: Readouts, t: f64, sched: &MeasurementSchedule) -> f64 {
    let (s, c) = theta.sin_cos();
    r.r_x / sched.tau_x * c - r.r_z / sched.tau_z(t) * s
}

/// Readout log-probability rate.
pub fn g_cost(theta: f64, r: Readouts, t: f64, sched: &MeasurementSchedule) -> f64 {
    let (s, c) = theta.sin_cos();
    -(r.r_x * r.r_x - 2.0 * r.r_x * s + 1.0) / (2.0 * sched.tau_x)
        - (r.r_z * r.r_z - 2.0 * r.r_z * c + 1.0) / (2.0 * sched.tau_z(t))
}

/// `p F + G` before readout optimisation.
pub fn full_hamiltonian(pt: PhasePoint, r: Readouts, t: f64, sched: &MeasurementSchedule) -> f64 {
    pt.p * f_drift(pt.theta, r, t, sched) + g_cost(pt.theta, r, t, sched)
}

/// Analytic gradient of `p F + G` with respect to `(r_x, r_z)`.
pub fn readout_gradient(pt: PhasePoint, r: Readouts, t: f64, sched: &MeasurementSchedule) -> (f64, f64) {
    let (s, c) = pt.theta.sin_cos();
    let dx = (pt.p * c - r.r_x + s) / sched.tau_x;
    let dz = (-pt.p * s - r.r_z + c) / sched.tau_z(t);
    (dx, dz)
}

const TAU_HI: f64 = 6.283_185_307_179_586;
const TAU_LO: f64 = 2.449_293_598_294_706_4e-16;

/// Kick Fourier coefficient `C_{n,k} = (1/Λ)∫₀^Λ gⁿ(t) e^{−2πikt/Λ} dt`,
/// computed by adaptive quadrature of the equivalent real integral
/// `2(−1)^k ∫₀^{1/2} exp(−n u² Λ²/(2τm²)) cos(2πku) du`.
pub fn fourier_coeff_exact(n: u32, k: i64, sched: &MeasurementSchedule) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "Fourier order must be >= 1".into(),
        });
    }
    let width = sched.tau_m / sched.period;
    let decay = n as f64 / (2.0 * width * width);
    let kf = k as f64;
    // The result can be ~1e-9 of ∫|f|, so the node and both arguments are
    // carried in double-double before the final exp/cos.
    let f = |u: f64, u_lo: f64| {
        let sq = u * u;
        let sq_lo = u.mul_add(u, -sq) + 2.0 * u * u_lo;
        let e = decay * sq;
        let e_lo = decay.mul_add(sq, -e) + decay * sq_lo;
        let turns = kf * u;
        let turns_lo = kf.mul_add(u, -turns) + kf * u_lo;
        let frac = turns - turns.round();
        let ang = TAU_HI * frac;
        let ang_lo = TAU_HI.mul_add(frac, -ang) + TAU_LO * frac + TAU_HI * turns_lo;
        let (sin, cos) = ang.sin_cos();
        (-e).exp() * (1.0 - e_lo) * (cos - sin * ang_lo)
    };
    // Beyond this point the Gaussian is below 1e-300 and contributes nothing.
    let cutoff = (690.0 / decay).sqrt().min(0.5);
    // Enough panels to resolve both the Gaussian and the oscillation.
    let scale = (1.0 / decay.sqrt()).min(1.0 / (2.0 * PI * kf.abs() + 1.0));
    let panels = ((cutoff / scale).ceil() as usize * 4).clamp(16, 4096);
    let l1 = 0.5 * (PI / decay).sqrt();
    let value = crate::quad::integrate_split(&f, 0.0, cutoff, panels, 1e-14, 1e-18 * l1)?;
    let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    Ok(2.0 * sign * value)
}

/// Gaussian approximation to `C_{n,k}` obtained by extending the integration
/// bounds to infinity: `(−1)^k τm √(2π/n) exp(−2k²π²τm²/n)` (with `τm` in units of Λ).
pub fn fourier_coeff_gaussian(n: u32, k: i64, sched: &MeasurementSchedule) -> f64 {
    let width = sched.tau_m / sched.period;
    let n = n as f64;
    let k2 = (k * k) as f64;
    let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    sign * width * (2.0 * PI / n).sqrt() * (-2.0 * k2 * PI * PI * width * width / n).exp()
}

/// Truncated Fourier reconstruction of `H*` to order `ε^N`, keeping the
/// `ℓ ∈ {0, ±2}` angular harmonics and `|k| ≤ k_max` temporal harmonics.
#[derive(Debug, Clone)]
pub struct FourierHamiltonian {
    sched: MeasurementSchedule,
    /// `Σ_n εⁿ C_{n,k}` for `k = 0..=k_max`.
    series: Vec<f64>,
}

impl FourierHamiltonian {
    pub fn new(sched: &MeasurementSchedule, order: u32, k_max: u32) -> Result<Self> {
        let mut series = Vec::with_capacity(k_max as usize + 1);
        for k in 0..=k_max as i64 {
            let mut acc = 0.0;
            for n in 1..=order {
                acc += sched.epsilon.powi(n as i32) * fourier_coeff_exact(n, k, sched)?;
            }
            series.push(acc);
        }
        Ok(Self {
            sched: *sched,
            series,
        })
    }

    /// Truncated `Σ_n (ε g(t))ⁿ`.
    pub fn kick_series(&self, t: f64) -> f64 {
        let w = 2.0 * PI * t / self.sched.period;
        self.series
            .iter()
            .enumerate()
            .map(|(k, c)| if k == 0 { *c } else { 2.0 * c * (w * k as f64).cos() })
            .sum()
    }

    pub fn h_star(&self, pt: PhasePoint, t: f64) -> f64 {
        let tx = self.sched.tau_x;
        let p = pt.p;
        let angular = (p * p - 1.0) / (4.0 * tx) * (1.0 - (2.0 * pt.theta).cos())
            - p / (2.0 * tx) * (2.0 * pt.theta).sin();
        (p * p - 1.0) / (2.0 * tx) + angular * self.kick_series(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sched(tau_x: f64, eps: f64) -> MeasurementSchedule {
        MeasurementSchedule::new(tau_x, eps, 0.025, 1.0).unwrap()
    }

    #[test]
    fn rejects_singular_kick() {
        assert!(MeasurementSchedule::new(1.0, 1.0, 0.025, 1.0).is_err());
        assert!(MeasurementSchedule::new(1.0, -0.1, 0.025, 1.0).is_err());
        assert!(MeasurementSchedule::new(0.0, 0.5, 0.025, 1.0).is_err());
        assert!(MeasurementSchedule::new(1.0, 0.5, 0.025, -1.0).is_err());
        assert!(MeasurementSchedule::new(1.0, 0.999, 0.025, 1.0).is_ok());
    }

    #[test]
    fn envelope_values() {
        let s = sched(1.0, 0.5);
        assert_eq!(s.kick_envelope(0.5), 1.0);
        assert_relative_eq!(s.kick_envelope(0.0), (-200.0f64).exp(), max_relative = 1e-12);
        assert!((s.kick_envelope(0.37) - s.kick_envelope(1.37)).abs() < 1e-15);
    }

    #[test]
    fn tau_z_values() {
        assert_eq!(sched(1.0, 0.0).tau_z(0.3), 1.0);
        assert_relative_eq!(sched(1.0, 0.99).tau_z(0.5), 0.01, max_relative = 1e-12);
        let s = sched(1.0, 0.5);
        assert_relative_eq!(s.tau_z(0.0), 1.0 - 0.5 * (-200.0f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn coefficient_examples() {
        let rot = sched(1.0, 0.0);
        let (a, b) = coeffs_ab(0.7, 0.2, &rot);
        assert_relative_eq!(a, 0.5, max_relative = 1e-15);
        assert!(b.abs() < 1e-16);
        let kicked = sched(1.0, 0.9);
        let (a, b) = coeffs_ab(0.0, 0.5, &kicked);
        assert_relative_eq!(a, 0.5);
        assert_eq!(b, 0.0);

        // τz = 0.5 at the kick peak with ε = 0.5.
        let half = sched(1.0, 0.5);
        let (a, b) = coeffs_ab(PI / 4.0, 0.5, &half);
        assert_relative_eq!(a, 0.75, max_relative = 1e-12);
        assert_relative_eq!(b, -0.5, max_relative = 1e-12);
        assert_relative_eq!(h_star(PhasePoint::new(PI / 4.0, 2.0), 0.5, &half), 1.25, max_relative = 1e-12);
    }

    #[test]
    fn h_star_examples() {
        assert_eq!(h_star(PhasePoint::new(0.0, 1.0), 0.5, &sched(1.0, 0.9)), 0.0);
        let rot = sched(2.0, 0.0);
        assert_relative_eq!(h_star(PhasePoint::new(1.3, 3.0), 0.1, &rot), 8.0 / 4.0);
    }

    #[test]
    fn gradient_examples() {
        let (dt, dp) = h_star_grad(PhasePoint::new(0.4, 2.5), 0.5, &sched(1.0, 0.0));
        assert_eq!(dt, 0.0);
        assert_relative_eq!(dp, 2.5);
        let (_, dp) = h_star_grad(PhasePoint::new(0.0, 0.0), 0.5, &sched(1.0, 0.99));
        assert_eq!(dp, 0.0);
    }

    #[test]
    fn readout_examples() {
        let r = optimal_readouts(PhasePoint::new(0.0, 0.0));
        assert_eq!((r.r_x, r.r_z), (0.0, 1.0));
        let r = optimal_readouts(PhasePoint::new(PI / 2.0, 0.0));
        assert_relative_eq!(r.r_x, 1.0);
        assert!(r.r_z.abs() < 1e-15);
        let pt = PhasePoint::new(PI / 4.0, 1.0);
        let r = optimal_readouts(pt);
        assert_relative_eq!(r.r_x, 2f64.sqrt(), max_relative = 1e-15);
        assert!(r.r_z.abs() < 1e-15);
        let s = sched(1.0, 0.7);
        let (gx, gz) = readout_gradient(pt, r, 0.5, &s);
        assert!(gx.abs() < 1e-14 && gz.abs() < 1e-12);
    }

    #[test]
    fn drift_and_cost_examples() {
        let s = sched(1.0, 0.5);
        assert_eq!(f_drift(0.0, Readouts { r_x: 0.0, r_z: 1.0 }, 0.5, &s), 0.0);
        let rot = sched(1.0, 0.0);
        let pt = PhasePoint::new(2.1, -0.8);
        assert_relative_eq!(f_drift(pt.theta, optimal_readouts(pt), 0.3, &rot), -0.8, max_relative = 1e-14);
        // τz = 0.5 at the peak with ε = 0.5.
        let f = f_drift(PI / 2.0, Readouts { r_x: 1.0, r_z: 0.3 }, 0.5, &s);
        assert_relative_eq!(f, -0.6, max_relative = 1e-12);
        let g = g_cost(PI / 2.0, Readouts { r_x: 1.0, r_z: 0.0 }, 0.0, &rot);
        assert_relative_eq!(g, -0.5, max_relative = 1e-14);
    }

    #[test]
    fn resonances_and_threshold() {
        let s = sched(1.0, 0.1);
        let p = s.resonant_momenta(3);
        let expect: Vec<f64> = (-3..=3).map(|k| k as f64 * PI).collect();
        assert_eq!(p.len(), 7);
        for (a, b) in p.iter().zip(&expect) {
            assert_relative_eq!(a, b);
        }
        assert!(p.contains(&0.0));
        let s2 = sched(2.0, 0.1);
        assert_relative_eq!(s2.resonant_momenta(1)[2], 2.0 * PI);
        assert_relative_eq!(s.collapse_threshold(), 0.975);
        assert_relative_eq!(sched(2.0, 0.0).collapse_threshold(), 0.9875);
        let same = MeasurementSchedule::new(0.025, 0.0, 0.025, 1.0).unwrap();
        assert_eq!(same.collapse_threshold(), 0.0);
    }

    #[test]
    fn fourier_leading_coefficient() {
        let s = sched(1.0, 0.1);
        let c = fourier_coeff_exact(1, 0, &s).unwrap();
        assert_relative_eq!(c, 0.025 * (2.0 * PI).sqrt(), max_relative = 1e-8);
        assert_relative_eq!(c, 0.062666, max_relative = 1e-5);
        for k in 0..6 {
            let c = fourier_coeff_exact(1, k, &s).unwrap();
            assert_eq!(c.signum(), if k % 2 == 0 { 1.0 } else { -1.0 });
        }
        assert!(fourier_coeff_exact(0, 1, &s).is_err());
    }

    #[test]
    fn fourier_matches_gaussian_form() {
        let s = sched(1.0, 0.1);
        let exact = fourier_coeff_exact(2, 10, &s).unwrap();
        let approx = fourier_coeff_gaussian(2, 10, &s);
        assert_relative_eq!(exact, approx, max_relative = 1e-8);
    }

    #[test]
    fn fourier_wide_pulse_keeps_truncation() {
        // Reference values from 30-digit quadrature.
        let s = MeasurementSchedule::new(1.0, 0.1, 0.2, 1.0).unwrap();
        let c13 = fourier_coeff_exact(1, 3, &s).unwrap();
        let c21 = fourier_coeff_exact(2, 1, &s).unwrap();
        assert_relative_eq!(c13, -0.002_743_986_880_797_800_4, max_relative = 1e-11);
        assert_relative_eq!(c21, -0.239_002_681_107_841_18, max_relative = 1e-12);
    }

    #[test]
    fn fourier_reconstruction_tracks_h_star() {
        let s = sched(1.0, 0.1);
        let fh = FourierHamiltonian::new(&s, 3, 40).unwrap();
        for i in 0..40 {
            for j in 0..40 {
                let theta = 2.0 * PI * i as f64 / 40.0 + 0.013;
                let t = j as f64 / 40.0 + 0.004;
                let pt = PhasePoint::new(theta, 1.7);
                let exact = h_star(pt, t, &s);
                let approx = fh.h_star(pt, t);
                assert!(
                    (exact - approx).abs() <= 1e-3 * exact.abs().max(1e-12),
                    "θ={theta} t={t}: {exact} vs {approx}"
                );
            }
        }
    }
}
