use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use oploc::chaos::{lyapunov, triplet_distance, PathTriplet};
use oploc::integrator::{flow_map, integrate_sampled, IntegratorConfig};
use oploc::kicklimit::{branch_density, log_space, solve_theta1, sweep, Branch, KickLimitParams};
use oploc::manifold::{
    catastrophe_count, find_multipaths, propagate, propagate_series, refine_near, stretch_report, Manifold,
    RefineConfig, TargetRefine,
};
use oploc::model::{
    fourier_coeff_exact, fourier_coeff_gaussian, h_star, h_star_grad, optimal_readouts, readout_gradient,
};
use oploc::sqt::{simulate_ensemble, SqtConfig};
use oploc::{MeasurementSchedule, PhasePoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Written straight to the process stdout so the line shows even when the
// harness captures test output.
fn report(n: u32, name: &str, pass: bool, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "{tag} criterion {n:>2} ({name}): {detail}").unwrap();
    out.flush().unwrap();
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

fn kicked(epsilon: f64) -> MeasurementSchedule {
    MeasurementSchedule::standard(epsilon).unwrap()
}

#[test]
fn c01_rotor_exactness() {
    let clock = Instant::now();
    let s = MeasurementSchedule::rotor(1.0);
    let path = integrate_sampled(PhasePoint::new(0.0, PI), 0.0, &[20.0], &s, &IntegratorConfig::default()).unwrap();
    let end = path.at(20.0).unwrap();
    let (e_theta, e_p) = ((end.theta - 20.0 * PI).abs(), (end.p - PI).abs());
    let secs = clock.elapsed().as_secs_f64();
    report(
        1,
        "rotor exactness",
        e_theta < 1e-9 && e_p < 1e-12 && secs < 1.0,
        format!("|dθ| = {e_theta:.2e}, |dp| = {e_p:.2e}, {secs:.3} s"),
    );
}

#[test]
fn c02_stationarity_and_gradients() {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_station, mut worst_grad) = (0.0f64, 0.0f64);
    for _ in 0..100_000 {
        let s = MeasurementSchedule::new(rng.gen_range(0.2..5.0), rng.gen_range(0.0..0.99), 0.025, 1.0).unwrap();
        let pt = PhasePoint::new(rng.gen_range(-TAU..TAU), rng.gen_range(-5.0..5.0));
        let t = rng.gen_range(0.0..3.0);

        let (gx, gz) = readout_gradient(pt, optimal_readouts(pt), t, &s);
        worst_station = worst_station.max(gx.abs()).max(gz.abs());

        let (dth, dp) = h_star_grad(pt, t, &s);
        let h = 1e-5;
        let fd = |d: PhasePoint| (h_star(pt_add(pt, d), t, &s) - h_star(pt_add(pt, PhasePoint::new(-d.theta, -d.p)), t, &s)) / (2.0 * h);
        let fd_th = fd(PhasePoint::new(h, 0.0));
        let fd_p = fd(PhasePoint::new(0.0, h));
        for (a, n) in [(dth, fd_th), (dp, fd_p)] {
            worst_grad = worst_grad.max((a - n).abs() / a.abs().max(1.0));
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    report(
        2,
        "stationarity and gradients",
        worst_station < 1e-10 && worst_grad < 1e-6 && secs < 10.0,
        format!("max |∂(pF+G)/∂r| = {worst_station:.2e}, max gradient rel err = {worst_grad:.2e}, {secs:.2} s"),
    );
}

fn pt_add(a: PhasePoint, b: PhasePoint) -> PhasePoint {
    PhasePoint::new(a.theta + b.theta, a.p + b.p)
}

#[test]
fn c03_liouville() {
    let clock = Instant::now();
    let s = kicked(0.5);
    let cfg = IntegratorConfig::bulirsch_stoer(1e-13, 1e-14);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-5;
    let end = |pt: PhasePoint| flow_map(pt, 0.0, 1.0, &s, &cfg).unwrap().point().unwrap();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let pt = PhasePoint::new(rng.gen_range(0.0..TAU), rng.gen_range(-2.0..2.0));
        let column = |d: PhasePoint| {
            let (a, b) = (end(pt_add(pt, d)), end(PhasePoint::new(pt.theta - d.theta, pt.p - d.p)));
            ((a.theta - b.theta) / (2.0 * h), (a.p - b.p) / (2.0 * h))
        };
        let (j11, j21) = column(PhasePoint::new(h, 0.0));
        let (j12, j22) = column(PhasePoint::new(0.0, h));
        worst = worst.max((j11 * j22 - j12 * j21 - 1.0).abs());
    }
    let secs = clock.elapsed().as_secs_f64();
    report(
        3,
        "Liouville",
        worst < 1e-5 && secs < 10.0,
        format!("max |det J − 1| = {worst:.2e}, {secs:.2} s"),
    );
}

#[test]
fn c04_resonance_localization() {
    let clock = Instant::now();
    let s = kicked(0.1);
    let cfg = IntegratorConfig::default();
    let t = 20.0;
    let deviation = |p0: f64| {
        let end = flow_map(PhasePoint::new(0.0, p0), 0.0, t, &s, &cfg).unwrap().point().unwrap();
        (end.theta - p0 * t / s.tau_x).abs()
    };
    let off = deviation(FRAC_PI_2).max(deviation(0.75 * PI));
    let near = (0..=100)
        .map(|i| deviation(PI - 0.05 + 0.1 * i as f64 / 100.0))
        .fold(0.0f64, f64::max);
    let secs = clock.elapsed().as_secs_f64();
    report(
        4,
        "resonance localization",
        off < 0.05 && near > 10.0 * off && secs < 120.0,
        format!("off-resonance max = {off:.3e}, near p = π max = {near:.3e}, {secs:.1} s"),
    );
}

fn fold_setup() -> (MeasurementSchedule, IntegratorConfig, RefineConfig) {
    (kicked(0.99), IntegratorConfig::default(), RefineConfig::default())
}

// Manifolds from θ₀ = 0 over p₀ ∈ [0, 1.5] at T = 3, 4, 5, shared by the
// catastrophe and multipath criteria.
fn fold_series() -> &'static (Vec<Manifold>, f64) {
    static CELL: OnceLock<(Vec<Manifold>, f64)> = OnceLock::new();
    CELL.get_or_init(|| {
        let (s, cfg, refine) = fold_setup();
        let clock = Instant::now();
        let ms = propagate_series(0.0, (0.0, 1.5), &[3.0, 4.0, 5.0], &s, &cfg, &refine).unwrap();
        (ms, clock.elapsed().as_secs_f64())
    })
}

#[test]
fn c05_catastrophe_counts() {
    let (ms, secs) = fold_series();
    let counts: Vec<usize> = ms.iter().map(catastrophe_count).collect();
    let truncated = ms[0].stats.truncated;
    report(
        5,
        "catastrophe counts",
        counts[0] == 9 && (119..=161).contains(&counts[1]) && (1870..=2530).contains(&counts[2]) && !truncated,
        format!(
            "N_c(3, 4, 5) = {counts:?}, {} points, {} integrations, {secs:.0} s",
            ms[0].points.len(),
            ms[0].stats.integrations
        ),
    );
}

#[test]
fn c06_multipath_counts() {
    let (s, cfg, refine) = fold_setup();
    let (ms, _) = fold_series();
    let clock = Instant::now();
    // Two of the eleven solutions for 9.32 start above p₀ = 1.5.
    let upper = propagate(0.0, (1.5, 2.0), 5.0, &s, &cfg, &refine).unwrap();
    let m = ms[2].clone().join(&upper);
    let mut counts = Vec::new();
    let mut worst = 0.0f64;
    for goal in [9.28, 9.32] {
        let fine = refine_near(&m, &[goal], &TargetRefine::default(), &s, &cfg).unwrap();
        let sols: Vec<_> = find_multipaths(&fine, goal.rem_euclid(TAU), &s, &cfg, 1e-6)
            .unwrap()
            .into_iter()
            .filter(|x| x.converged && (x.theta_t - goal).abs() < 1e-3)
            .collect();
        for x in &sols {
            let end = flow_map(PhasePoint::new(0.0, x.p0), 0.0, 5.0, &s, &cfg).unwrap().point().unwrap();
            worst = worst.max((end.theta - goal).abs());
        }
        counts.push(sols.len());
    }
    let secs = clock.elapsed().as_secs_f64();
    report(
        6,
        "multipath counts",
        counts == [5, 11] && worst < 2e-3,
        format!("solutions for θ_T = 9.28, 9.32: {counts:?}, worst re-integration error {worst:.1e}, {secs:.0} s"),
    );
}

#[test]
fn c07_lyapunov_divergence() {
    let clock = Instant::now();
    let s = kicked(0.99);
    let cfg = IntegratorConfig::default();
    let times: Vec<f64> = (1..=1500).map(|i| i as f64 * 0.01).collect();
    let mut pass = true;
    let mut details = Vec::new();
    for (theta0, p0) in [(0.286, 1.227), (1.142, -0.545)] {
        let trip = PathTriplet::integrate(PhasePoint::new(theta0, p0), 0.01, &times, &s, &cfg).unwrap();
        let first = times
            .iter()
            .find(|&&t| triplet_distance(&trip, t).is_ok_and(|d| d > 0.2))
            .copied();
        let lambdas: Vec<f64> = (5..=15)
            .map(|n| lyapunov(&trip, n as f64).unwrap_or(f64::NAN))
            .collect();
        let min_lambda = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
        let ok = first.is_some_and(|t| (5.0..=15.0).contains(&t)) && lambdas.iter().all(|l| *l > 0.0);
        pass &= ok;
        details.push(format!("({theta0}, {p0}): D > 0.2 first at {first:?}, min λ = {min_lambda:.3}"));
    }
    let secs = clock.elapsed().as_secs_f64();
    report(7, "Lyapunov divergence", pass && secs < 30.0, format!("{}; {secs:.1} s", details.join("; ")));
}

#[test]
fn c08_sqt_diffusion() {
    let clock = Instant::now();
    let cfg = SqtConfig {
        n_traj: 100_000,
        dt: 1e-3,
        store_points: 1,
        ..SqtConfig::default()
    };
    let ens = simulate_ensemble(&cfg, 0.5, &MeasurementSchedule::rotor(1.0)).unwrap();
    let n = ens.n_traj as f64;
    let mean = ens.final_thetas().sum::<f64>() / n;
    let var = ens.final_thetas().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let rel = (var - 0.5).abs() / 0.5;
    let secs = clock.elapsed().as_secs_f64();
    report(
        8,
        "SQT diffusion",
        rel < 0.03 && ens.max_purity_residual < 1e-12 && secs < 120.0,
        format!("Var(θ) = {var:.4} (rel err {rel:.3}), purity residual {:.1e}, {secs:.1} s", ens.max_purity_residual),
    );
}

#[test]
fn c09_kick_collapse_fractions() {
    let clock = Instant::now();
    let s = kicked(0.99);
    let half = 3.0 * s.tau_m;
    let cfg = SqtConfig {
        n_traj: 10_000,
        theta0: PI / 3.0,
        t0: 0.5 * s.period - half,
        store_points: 1,
        ..SqtConfig::default()
    };
    let ens = simulate_ensemble(&cfg, 0.5 * s.period + half, &s).unwrap();
    let (up, down) = ens.branch_fractions();
    let expected = (PI / 6.0).cos().powi(2);
    let sigma = (expected * (1.0 - expected) / cfg.n_traj as f64).sqrt();
    let z = (up - expected) / sigma;
    let secs = clock.elapsed().as_secs_f64();
    report(
        9,
        "kick collapse fractions",
        z.abs() <= 3.0 && secs < 60.0,
        format!(
            "fractions ({up:.4}, {down:.4}) vs (0.75, 0.25), {z:+.1}σ, {:.1}% within 0.1 of an eigenstate, {secs:.1} s",
            100.0 * ens.near_eigenstate_fraction(0.1)
        ),
    );
}

#[test]
fn c10_stretching_report() {
    let clock = Instant::now();
    let (s, cfg, refine) = fold_setup();
    let times = [1.0, 2.0, 3.0, 4.0, 5.0];
    let rep = stretch_report(0.0, (-2.0, 2.0), &times, &s, &cfg, &refine, 0.01).unwrap();
    let positive = (0..times.len()).all(|k| rep.s1[k] > 0.0 && rep.s2[k] > 0.0 && rep.s3[k] > 0.0 && rep.lambda_av[k] > 0.0);
    let increasing = rep.n_c.windows(2).all(|w| w[1] > w[0]);
    let peak = rep.lambda_av.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let last = *rep.lambda_av.last().unwrap();
    let saturates = last < peak;
    let secs = clock.elapsed().as_secs_f64();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    report(
        10,
        "stretching report",
        positive && increasing && saturates && !rep.truncated,
        format!(
            "s1 [{}] s2 [{}] s3 [{}] λ_av [{}] N_c {:?}, {} integrations, {secs:.0} s",
            fmt(&rep.s1),
            fmt(&rep.s2),
            fmt(&rep.s3),
            fmt(&rep.lambda_av),
            rep.n_c,
            rep.integrations
        ),
    );
}

#[test]
fn c11_kick_limit_asymptotics() {
    let clock = Instant::now();
    let gammas = log_space(0.01, 100.0, 50);
    let rows = sweep(FRAC_PI_2, 0.0, &gammas).unwrap();
    let small = rows[0].theta1_ex;
    let large = rows[49].theta1_ex;
    let decreasing = rows.windows(2).all(|w| w[1].theta1_ex < w[0].theta1_ex);
    let n = 100_000;
    let step = PI / n as f64;
    let mut worst = 0usize;
    for row in &rows {
        let p = KickLimitParams::new(row.gamma, FRAC_PI_2, 0.0).unwrap();
        let root = solve_theta1(&p, Branch::Excited).unwrap();
        let best = (1..n)
            .map(|i| i as f64 * step)
            .max_by(|a, b| branch_density(*a, &p, Branch::Excited).total_cmp(&branch_density(*b, &p, Branch::Excited)))
            .unwrap();
        worst = worst.max(((root - best).abs() / step).round() as usize);
    }
    let secs = clock.elapsed().as_secs_f64();
    report(
        11,
        "kick-limit asymptotics",
        (small - FRAC_PI_2).abs() < 0.01 && large < 0.05 && decreasing && worst <= 1 && secs < 1.0,
        format!(
            "θ₁(0.01) = {small:.5}, θ₁(100) = {large:.5}, decreasing = {decreasing}, grid offset ≤ {worst} steps, {secs:.2} s"
        ),
    );
}

#[test]
fn c12_fourier_coefficients() {
    let clock = Instant::now();
    let s = kicked(0.99);
    let mut worst = 0.0f64;
    for n in 1..=3 {
        for k in -40..=40 {
            let exact = fourier_coeff_exact(n, k, &s).unwrap();
            let gauss = fourier_coeff_gaussian(n, k, &s);
            worst = worst.max(((exact - gauss) / gauss).abs());
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    report(
        12,
        "Fourier coefficients",
        worst < 1e-8 && secs < 5.0,
        format!("max rel err = {worst:.2e}, {secs:.2} s"),
    );
}
