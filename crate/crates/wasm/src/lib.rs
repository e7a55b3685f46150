//! wasm-bindgen exports for the browser demo. Results come back as flat
//! `Float64Array`s with a fixed stride per record.

use oploc::chaos::{self, DEFAULT_DELTA_THETA0};
use oploc::integrator::IntegratorConfig;
use oploc::kicklimit::{log_space, sweep};
use oploc::manifold::{catastrophe_count, propagate, RefineConfig};
use oploc::MeasurementSchedule;
use wasm_bindgen::prelude::*;

fn schedule(epsilon: f64) -> Result<MeasurementSchedule, String> {
    MeasurementSchedule::standard(epsilon).map_err(|e| e.to_string())
}

fn momenta(p_min: f64, p_max: f64, lines: usize) -> Vec<f64> {
    match lines {
        0 => vec![],
        1 => vec![0.5 * (p_min + p_max)],
        _ => (0..lines).map(|i| p_min + (p_max - p_min) * i as f64 / (lines - 1) as f64).collect(),
    }
}

/// `[θ mod 2π, p, λ]` per live strobe record.
pub fn portrait_points(
    epsilon: f64,
    p_min: f64,
    p_max: f64,
    lines: usize,
    per_line: usize,
    strobes: usize,
) -> Result<Vec<f64>, String> {
    let s = schedule(epsilon)?;
    let ics = chaos::line_ics(&momenta(p_min, p_max, lines), per_line);
    let por = chaos::portrait(&ics, strobes, &s, &IntegratorConfig::default(), DEFAULT_DELTA_THETA0)
        .map_err(|e| e.to_string())?;
    Ok(por.live().flat_map(|r| [r.theta_mod_2pi, r.p, r.lambda]).collect())
}

/// A refined manifold from `θ₀ = 0`: `[p₀, θ, p, live]` per point.
pub fn manifold_points(epsilon: f64, t: f64, p0_min: f64, p0_max: f64, max_points: usize) -> Result<(Vec<f64>, usize), String> {
    let s = schedule(epsilon)?;
    let refine = RefineConfig {
        max_points,
        ..RefineConfig::default()
    };
    let m = propagate(0.0, (p0_min, p0_max), t, &s, &IntegratorConfig::default(), &refine).map_err(|e| e.to_string())?;
    let flat = m
        .points
        .iter()
        .flat_map(|pt| [pt.p0, pt.theta, pt.p, if pt.is_live() { 1.0 } else { 0.0 }])
        .collect();
    Ok((flat, catastrophe_count(&m)))
}

/// `[Γ, θ₁ excited, θ₁ ground]` per log-spaced `Γ`.
pub fn kicklimit_rows(theta_i: f64, theta_f: f64, gamma_min: f64, gamma_max: f64, n: usize) -> Result<Vec<f64>, String> {
    if !(gamma_min > 0.0 && gamma_max > gamma_min) {
        return Err("need 0 < gamma_min < gamma_max".into());
    }
    let rows = sweep(theta_i, theta_f, &log_space(gamma_min, gamma_max, n)).map_err(|e| e.to_string())?;
    Ok(rows.iter().flat_map(|r| [r.gamma, r.theta1_ex, r.theta1_gr]).collect())
}

#[wasm_bindgen]
pub fn portrait(epsilon: f64, p_min: f64, p_max: f64, lines: usize, per_line: usize, strobes: usize) -> Result<Vec<f64>, JsError> {
    portrait_points(epsilon, p_min, p_max, lines, per_line, strobes).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub struct ManifoldView {
    points: Vec<f64>,
    catastrophes: usize,
}

#[wasm_bindgen]
impl ManifoldView {
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }

    pub fn catastrophes(&self) -> usize {
        self.catastrophes
    }
}

#[wasm_bindgen]
pub fn manifold(epsilon: f64, t: f64, p0_min: f64, p0_max: f64, max_points: usize) -> Result<ManifoldView, JsError> {
    let (points, catastrophes) = manifold_points(epsilon, t, p0_min, p0_max, max_points).map_err(|e| JsError::new(&e))?;
    Ok(ManifoldView { points, catastrophes })
}

#[wasm_bindgen]
pub fn kicklimit(theta_i: f64, theta_f: f64, gamma_min: f64, gamma_max: f64, n: usize) -> Result<Vec<f64>, JsError> {
    kicklimit_rows(theta_i, theta_f, gamma_min, gamma_max, n).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotor_portrait_is_flat() {
        let v = portrait_points(0.0, 0.5, 1.5, 3, 4, 2).unwrap();
        assert_eq!(v.len(), 3 * 3 * 4 * 2);
        for rec in v.chunks(3) {
            assert!([0.5, 1.0, 1.5].iter().any(|p| (rec[1] - p).abs() < 1e-12));
            assert!(rec[2].abs() < 1e-9);
        }
    }

    #[test]
    fn manifold_at_three_has_nine_folds() {
        let (v, n_c) = manifold_points(0.99, 3.0, 0.0, 1.5, 200_000).unwrap();
        assert_eq!(v.len() % 4, 0);
        assert_eq!(n_c, 9);
    }

    #[test]
    fn kicklimit_rows_have_stride_three() {
        let v = kicklimit_rows(1.0, 0.5, 0.1, 10.0, 5).unwrap();
        assert_eq!(v.len(), 15);
        assert!(kicklimit_rows(1.0, 0.5, 10.0, 0.1, 5).is_err());
        assert!(schedule(1.5).is_err());
    }
}
