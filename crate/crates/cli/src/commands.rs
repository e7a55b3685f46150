use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use oploc::chaos::{self, lyapunov_series, PathTriplet, RecordStatus};
use oploc::integrator::{flow_map, integrate_sampled};
use oploc::kicklimit::{log_space, sweep};
use oploc::manifold::{
    catastrophe_count, find_multipaths, manifold_length, propagate_series, refine_near, stretch_report, Manifold,
};
use oploc::model::{fourier_coeff_exact, fourier_coeff_gaussian};
use oploc::sqt::{extract_mlps, postselect_density, simulate_ensemble, PostSelection};
use oploc::{MeasurementSchedule, PhasePoint};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::plot::{self, Plot};

const W: u32 = 900;
const H: u32 = 640;

/// Files written by one command plus the counts reported in its sidecar.
pub struct Output {
    dir: PathBuf,
    pub files: Vec<String>,
    pub counts: Map<String, Value>,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            counts: Map::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let path = self.path(name);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    fn png(&mut self, name: &str, plot: &Plot) -> Result<()> {
        let path = self.path(name);
        plot.save(&path)
    }

    fn count(&mut self, key: &str, v: impl Into<Value>) {
        self.counts.insert(key.to_string(), v.into());
    }
}

fn f(x: f64) -> String {
    format!("{x}")
}

fn time_tag(t: f64) -> String {
    format!("{t}").replace('.', "p")
}

pub fn portrait(c: &RunConfig, s: &MeasurementSchedule, out: &mut Output) -> Result<()> {
    let pc = &c.portrait;
    let momenta: Vec<f64> = pc.momenta.iter().flat_map(|m| pc.offsets.iter().map(move |o| m + o)).collect();
    let ics = chaos::line_ics(&momenta, pc.per_line);
    let por = chaos::portrait(&ics, pc.n_strobes, s, &c.integrator, pc.delta_theta0)?;
    out.csv(
        "portrait.csv",
        &["theta0", "p0", "n", "theta_mod_2pi", "p", "lambda", "status"],
        por.records.iter().map(|r| {
            vec![f(r.theta0), f(r.p0), r.n.to_string(), f(r.theta_mod_2pi), f(r.p), f(r.lambda), r.status.label().into()]
        }),
    )?;
    let live: Vec<_> = por.live().collect();
    let (p_lo, p_hi) = live.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.p), b.max(r.p)));
    let mut img = Plot::new(W, H, (0.0, TAU), (p_lo, p_hi));
    for r in &live {
        img.big_dot(r.theta_mod_2pi, r.p, plot::diverging(r.lambda, pc.lambda_clip));
    }
    out.png("portrait.png", &img)?;
    out.count("initial_conditions", ics.len());
    out.count("records", por.records.len());
    out.count("integrations", 3 * ics.len());
    out.count(
        "diverged",
        por.records.iter().filter(|r| r.status == RecordStatus::Diverged).count(),
    );
    Ok(())
}

fn manifold_rows(m: &Manifold) -> impl Iterator<Item = Vec<String>> + '_ {
    m.points.iter().map(move |pt| {
        let winding = pt.winding(m.theta0).map(|w| w.to_string()).unwrap_or_default();
        vec![f(pt.p0), f(pt.theta), f(pt.theta.rem_euclid(TAU)), f(pt.p), winding, pt.status.label().into()]
    })
}

const MANIFOLD_HEADER: [&str; 6] = ["p0", "theta", "theta_mod_2pi", "p", "winding", "status"];

fn manifold_line(m: &Manifold) -> impl Iterator<Item = (f64, f64)> + '_ {
    m.points.iter().map(|pt| if pt.is_live() { (pt.theta, pt.p0) } else { (f64::NAN, f64::NAN) })
}

pub fn manifold(c: &RunConfig, s: &MeasurementSchedule, out: &mut Output) -> Result<()> {
    let mc = &c.manifold;
    let range = (mc.p0_min, mc.p0_max);
    let main = propagate_series(mc.theta0, range, &mc.times, s, &c.integrator, &c.refine)?;
    let aux = if mc.aux {
        let d = mc.delta_theta0;
        Some((
            propagate_series(mc.theta0 + d, range, &mc.times, s, &c.integrator, &c.refine)?,
            propagate_series(mc.theta0 - d, range, &mc.times, s, &c.integrator, &c.refine)?,
        ))
    } else {
        None
    };
    let mut summary = Vec::new();
    for (k, m) in main.iter().enumerate() {
        let tag = time_tag(m.t);
        out.csv(&format!("manifold_t{tag}.csv"), &MANIFOLD_HEADER, manifold_rows(m))?;
        let mut img = Plot::fitted(W, H, m.points.iter().map(|pt| (pt.theta, pt.p0)));
        if let Some((plus, minus)) = &aux {
            out.csv(&format!("manifold_plus_t{tag}.csv"), &MANIFOLD_HEADER, manifold_rows(&plus[k]))?;
            out.csv(&format!("manifold_minus_t{tag}.csv"), &MANIFOLD_HEADER, manifold_rows(&minus[k]))?;
            img.line(manifold_line(&plus[k]), plot::CYAN);
            img.line(manifold_line(&minus[k]), plot::RED);
        }
        img.line(manifold_line(m), plot::BLACK);
        out.png(&format!("manifold_t{tag}.png"), &img)?;

        let max_w = m.points.iter().filter_map(|pt| pt.winding(m.theta0)).map(|w| w.abs()).max().unwrap_or(0).max(1);
        let mut wrapped = Plot::new(W, H, (0.0, TAU), (0.0, 0.0));
        let (lo, hi) = m.points.iter().filter(|p| p.is_live()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), pt| (a.min(pt.p), b.max(pt.p)));
        if lo.is_finite() {
            wrapped = Plot::new(W, H, (0.0, TAU), (lo, hi));
        }
        for pt in m.points.iter().filter(|p| p.is_live()) {
            let w = pt.winding(m.theta0).unwrap_or(0).abs() as f64 / max_w as f64;
            wrapped.dot(pt.theta.rem_euclid(TAU), pt.p, plot::sequential(0.15 + 0.85 * w));
        }
        out.png(&format!("manifold_wrapped_t{tag}.png"), &wrapped)?;

        let n_c = catastrophe_count(m);
        println!("T = {}: {} catastrophes, {} points", m.t, n_c, m.points.len());
        summary.push(json!({
            "t": m.t,
            "catastrophes": n_c,
            "points": m.points.len(),
            "length": manifold_length(m),
            "diverged": m.points.iter().filter(|p| !p.is_live()).count(),
        }));
    }
    out.count("integrations", main[0].stats.integrations);
    out.count("refine_iterations", main[0].stats.iterations);
    out.count("truncated", main[0].stats.truncated);
    out.count("times", summary);
    if main[0].stats.truncated {
        eprintln!("warning: refinement budget exhausted; gaps may remain");
    }
    Ok(())
}

pub fn multipath(c: &RunConfig, s: &MeasurementSchedule, out: &mut Output) -> Result<()> {
    let mc = &c.multipath;
    let m = propagate_series(mc.theta0, (mc.p0_min, mc.p0_max), &[mc.t], s, &c.integrator, &c.refine)?.remove(0);
    let mut rows = Vec::new();
    let mut path_rows = Vec::new();
    let mut counts = Vec::new();
    let mut img = Plot::new(W, H, (0.0, mc.t), (mc.theta0.min(0.0), 0.0));
    let n = mc.path_samples.max(2);
    let times: Vec<f64> = (1..=n).map(|i| mc.t * i as f64 / n as f64).collect();
    let mut all_paths = Vec::new();
    let mut integrations = m.stats.integrations;
    for &goal in &mc.targets {
        let fine = refine_near(&m, &[goal], &c.target_refine, s, &c.integrator)?;
        integrations += fine.points.len() - m.points.len();
        let sols: Vec<_> = find_multipaths(&fine, goal.rem_euclid(TAU), s, &c.integrator, mc.tol_theta)?
            .into_iter()
            .filter(|x| x.converged && (x.theta_t - goal).abs() < 0.5)
            .collect();
        println!("target {goal}: {} solutions", sols.len());
        counts.push(json!({"target": goal, "solutions": sols.len()}));
        for (i, x) in sols.iter().enumerate() {
            rows.push(vec![f(goal), i.to_string(), f(x.p0), f(x.theta_t), f(x.p_t), x.winding.to_string()]);
            let path = integrate_sampled(PhasePoint::new(mc.theta0, x.p0), 0.0, &times, s, &c.integrator)?;
            let mut pts = vec![(0.0, mc.theta0)];
            pts.extend(path.samples.iter().map(|(t, pt)| (*t, pt.theta)));
            for (t, pt) in std::iter::once((0.0, PhasePoint::new(mc.theta0, x.p0))).chain(path.samples.iter().copied()) {
                path_rows.push(vec![f(goal), i.to_string(), f(t), f(pt.theta), f(pt.p)]);
            }
            all_paths.push((goal, pts));
        }
    }
    out.csv("multipath.csv", &["target", "solution", "p0", "theta_t", "p_t", "winding"], rows)?;
    out.csv("multipath_paths.csv", &["target", "solution", "t", "theta", "p"], path_rows)?;
    let hi = all_paths.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)).fold(f64::NEG_INFINITY, f64::max);
    let lo = all_paths.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)).fold(f64::INFINITY, f64::min);
    if lo.is_finite() {
        img = Plot::new(W, H, (0.0, mc.t), (lo, hi));
    }
    let colours = [plot::RED, plot::BLUE, plot::GREEN, plot::CYAN];
    for (goal, pts) in &all_paths {
        let k = mc.targets.iter().position(|g| g == goal).unwrap_or(0);
        img.line(pts.iter().copied(), colours[k % colours.len()]);
    }
    out.png("multipath.png", &img)?;
    out.count("integrations", integrations);
    out.count("targets", counts);
    Ok(())
}

pub fn stretch(c: &RunConfig, s: &MeasurementSchedule, out: &mut Output) -> Result<()> {
    let sc = &c.stretch;
    let rep = stretch_report(
        sc.theta0,
        (sc.p0_min, sc.p0_max),
        &sc.times,
        s,
        &c.integrator,
        &c.refine,
        sc.delta_theta0,
    )?;
    out.csv(
        "stretch.csv",
        &["t", "length", "j_av", "n_c", "s1", "s2", "s3", "lambda_av", "d_av"],
        (0..rep.times.len()).map(|k| {
            vec![
                f(rep.times[k]),
                f(rep.length[k]),
                f(rep.j_av[k]),
                rep.n_c[k].to_string(),
                f(rep.s1[k]),
                f(rep.s2[k]),
                f(rep.s3[k]),
                f(rep.lambda_av[k]),
                f(rep.d_av[k]),
            ]
        }),
    )?;
    // Each curve scaled to the same area as λ_av, so their shapes compare.
    let area = |v: &[f64]| v.iter().sum::<f64>();
    let target = area(&rep.lambda_av);
    let curves = [(&rep.s1, plot::GREEN), (&rep.s2, plot::RED), (&rep.s3, plot::BLUE), (&rep.lambda_av, plot::BLACK)];
    let scaled: Vec<(Vec<f64>, _)> = curves
        .iter()
        .map(|(v, col)| {
            let a = area(v);
            let k = if a != 0.0 { target / a } else { 1.0 };
            (v.iter().map(|x| x * k).collect(), *col)
        })
        .collect();
    let t_hi = *sc.times.last().unwrap();
    let mut img = Plot::fitted(W, H, scaled.iter().flat_map(|(v, _)| v.iter().copied().zip(sc.times.iter().copied())).map(|(y, t)| (t, y)).chain([(0.0, 0.0), (t_hi, 0.0)]));
    for (v, col) in &scaled {
        img.line(sc.times.iter().copied().zip(v.iter().copied()), *col);
        for (t, y) in sc.times.iter().zip(v) {
            img.big_dot(*t, *y, *col);
        }
    }
    out.png("stretch.png", &img)?;
    for k in 0..rep.times.len() {
        println!(
            "t = {}: s1 {:.4} s2 {:.4} s3 {:.4} lambda_av {:.4} N_c {}",
            rep.times[k], rep.s1[k], rep.s2[k], rep.s3[k], rep.lambda_av[k], rep.n_c[k]
        );
    }
    out.count("integrations", rep.integrations);
    out.count("truncated", rep.truncated);
    out.count("catastrophes", rep.n_c.clone());
    Ok(())
}

pub fn le(c: &RunConfig, s: &MeasurementSchedule, out: &mut Output) -> Result<()> {
    let lc = &c.le;
    let n = (lc.t_end / lc.sample_dt).round().max(1.0) as usize;
    let times: Vec<f64> = (1..=n).map(|i| lc.t_end * i as f64 / n as f64).collect();
    let trips: Vec<PathTriplet> = lc
        .starts
        .par_iter()
        .map(|&[th, p]| PathTriplet::integrate(PhasePoint::new(th, p), lc.delta_theta0, &times, s, &c.integrator))
        .collect::<oploc::Result<_>>()?;
    let mut rows = Vec::new();
    for (i, trip) in trips.iter().enumerate() {
        let [th0, p0] = lc.starts[i];
        let series = lyapunov_series(trip);
        for (k, &t) in series.times.iter().enumerate() {
            let (Some(m), Some(a), Some(b)) = (trip.main.at(t), trip.plus.at(t), trip.minus.at(t)) else {
                continue;
            };
            rows.push(vec![
                i.to_string(),
                f(th0),
                f(p0),
                f(t),
                f(m.theta),
                f(a.theta),
                f(b.theta),
                f(series.d[k]),
                f(series.lambda[k]),
            ]);
        }
        let paths = [(&trip.main, plot::BLACK), (&trip.plus, plot::CYAN), (&trip.minus, plot::RED)];
        let mut img = Plot::fitted(W, H, paths.iter().flat_map(|(p, _)| p.samples.iter().map(|(t, q)| (*t, q.theta))));
        for (p, col) in paths.iter().rev() {
            img.line(p.samples.iter().map(|(t, q)| (*t, q.theta)), *col);
        }
        out.png(&format!("le_paths_{i}.png"), &img)?;
        let mut lam = Plot::fitted(W, H / 2, series.times.iter().copied().zip(series.lambda.iter().copied()).chain([(0.0, 0.0)]));
        lam.line(series.times.iter().map(|&t| (t, 0.0)), plot::GRAY);
        lam.line(series.times.iter().copied().zip(series.lambda.iter().copied()), plot::BLACK);
        out.png(&format!("le_lambda_{i}.png"), &lam)?;
        let first = series.times.iter().zip(&series.d).find(|(_, d)| **d > 0.2).map(|(t, _)| *t);
        match first {
            Some(t) => println!("start ({th0}, {p0}): D first exceeds 0.2 at t = {t}"),
            None => println!("start ({th0}, {p0}): D stays below 0.2"),
        }
    }
    out.csv(
        "le.csv",
        &["start", "theta0", "p0", "t", "theta", "theta_plus", "theta_minus", "d", "lambda"],
        rows,
    )?;
    out.count("integrations", 3 * trips.len());
    Ok(())
}

pub fn sqt_density(c: &RunConfig, s: &MeasurementSchedule, out: &mut Output) -> Result<()> {
    let dc = &c.sqt_density;
    if c.sqt.too_coarse(s) {
        eprintln!("warning: sqt.dt is coarse against the shortest τz; consider reducing it");
    }
    let ens = simulate_ensemble(&c.sqt, dc.t_end, s)?;
    let sel = if dc.postselect {
        PostSelection {
            theta_f: dc.theta_f,
            window: dc.window,
        }
    } else {
        // A window wider than π accepts every final state.
        PostSelection {
            theta_f: 0.0,
            window: 4.0,
        }
    };
    let bins = (dc.bins_t, dc.bins_theta);
    let hist = postselect_density(&ens, &sel, bins);
    println!("{} of {} trajectories pass post-selection", hist.survivors, hist.n_traj);
    out.csv(
        "density.csv",
        &(0..hist.n_theta()).map(|j| format!("b{j}")).collect::<Vec<_>>().iter().map(|s| s.as_str()).collect::<Vec<_>>(),
        (0..hist.n_t()).map(|i| (0..hist.n_theta()).map(|j| f(hist.at(i, j))).collect()),
    )?;
    out.csv("density_t_edges.csv", &["t"], hist.t_edges.iter().map(|x| vec![f(*x)]))?;
    out.csv("density_theta_edges.csv", &["theta"], hist.theta_edges.iter().map(|x| vec![f(*x)]))?;
    let (t0, t1) = (hist.t_edges[0], *hist.t_edges.last().unwrap());
    let (th0, th1) = (hist.theta_edges[0], *hist.theta_edges.last().unwrap());
    let mut img = Plot::new(W, H, (t0, t1), (th0, th1));
    img.fill(|fx, fy| {
        let i = ((fx * hist.n_t() as f64) as usize).min(hist.n_t() - 1);
        let j = ((fy * hist.n_theta() as f64) as usize).min(hist.n_theta() - 1);
        plot::density(hist.at(i, j))
    });
    let mut ridge_rows = Vec::new();
    if hist.survivors > 0 {
        let ridges = extract_mlps(&ens, &sel, bins, dc.min_population)?;
        for r in &ridges.ridges {
            img.line(r.times.iter().copied().zip(r.theta.iter().copied()), plot::CYAN);
            for (t, th) in r.times.iter().zip(&r.theta) {
                ridge_rows.push(vec![r.winding.to_string(), r.population.to_string(), f(*t), f(*th)]);
            }
        }
        out.count("ridges", ridges.ridges.len());
        out.count("omitted_groups", ridges.omitted.len());
    }
    out.csv("ridges.csv", &["winding", "population", "t", "theta"], ridge_rows)?;
    out.png("density.png", &img)?;
    out.count("trajectories", ens.n_traj);
    out.count("survivors", hist.survivors);
    out.count("max_purity_residual", ens.max_purity_residual);
    Ok(())
}

pub fn kicklimit(c: &RunConfig, out: &mut Output) -> Result<()> {
    let kc = &c.kicklimit;
    let gammas = log_space(kc.gamma_min, kc.gamma_max, kc.n);
    let rows = sweep(kc.theta_i, kc.theta_f, &gammas)?;
    out.csv(
        "kicklimit.csv",
        &["gamma", "theta1_excited", "theta1_ground"],
        rows.iter().map(|r| vec![f(r.gamma), f(r.theta1_ex), f(r.theta1_gr)]),
    )?;
    let mut img = Plot::new(W, H, (kc.gamma_min.log10(), kc.gamma_max.log10()), (0.0, std::f64::consts::PI));
    img.line(rows.iter().map(|r| (r.gamma.log10(), r.theta1_ex)), plot::RED);
    img.line(rows.iter().map(|r| (r.gamma.log10(), r.theta1_gr)), plot::BLACK);
    out.png("kicklimit.png", &img)?;
    out.count("roots", 2 * rows.len());
    Ok(())
}

pub fn resonance(c: &RunConfig, s: &MeasurementSchedule, out: &mut Output) -> Result<()> {
    let rc = &c.resonance;
    let p0s: Vec<f64> = (0..rc.n)
        .map(|i| rc.p0_min + (rc.p0_max - rc.p0_min) * i as f64 / (rc.n - 1) as f64)
        .collect();
    let ends: Vec<Option<PhasePoint>> = p0s
        .par_iter()
        .map(|&p0| flow_map(PhasePoint::new(rc.theta0, p0), 0.0, rc.t, s, &c.integrator).map(|e| e.point()))
        .collect::<oploc::Result<_>>()?;
    let dev = |p0: f64, e: &Option<PhasePoint>| e.map_or(f64::NAN, |e| (e.theta - (rc.theta0 + p0 * rc.t / s.tau_x)).abs());
    out.csv(
        "resonance.csv",
        &["p0", "theta_t", "p_t", "deviation"],
        p0s.iter().zip(&ends).map(|(&p0, e)| {
            let (th, p) = e.map_or((f64::NAN, f64::NAN), |e| (e.theta, e.p));
            vec![f(p0), f(th), f(p), f(dev(p0, e))]
        }),
    )?;
    let resonant = s.resonant_momenta(rc.k_max);
    out.csv("resonant_momenta.csv", &["p"], resonant.iter().map(|p| vec![f(*p)]))?;
    let mut fourier = Vec::new();
    for n in 1..=rc.fourier_order {
        for k in -(rc.fourier_k_max as i64)..=rc.fourier_k_max as i64 {
            fourier.push(vec![n.to_string(), k.to_string(), f(fourier_coeff_exact(n, k, s)?), f(fourier_coeff_gaussian(n, k, s))]);
        }
    }
    out.csv("fourier.csv", &["n", "k", "quadrature", "gaussian"], fourier)?;
    let mut img = Plot::fitted(W, H, p0s.iter().zip(&ends).map(|(&p0, e)| (p0, dev(p0, e))).chain([(rc.p0_min, 0.0)]));
    for p in resonant.iter().filter(|p| (rc.p0_min..=rc.p0_max).contains(*p)) {
        img.vline(*p, plot::RED);
    }
    img.line(p0s.iter().zip(&ends).map(|(&p0, e)| (p0, dev(p0, e))), plot::BLACK);
    out.png("resonance.png", &img)?;

    let mut lm = Plot::fitted(W, H, p0s.iter().zip(&ends).map(|(&p0, e)| (e.map_or(f64::NAN, |e| e.theta), p0)));
    lm.line(p0s.iter().map(|&p0| (rc.theta0 + p0 * rc.t / s.tau_x, p0)), plot::RED);
    lm.line(p0s.iter().zip(&ends).map(|(&p0, e)| (e.map_or(f64::NAN, |e| e.theta), p0)), plot::BLACK);
    out.png("resonance_manifold.png", &lm)?;
    let diverged = ends.iter().filter(|e| e.is_none()).count();
    if diverged == rc.n {
        bail!("every path diverged");
    }
    out.count("integrations", rc.n);
    out.count("diverged", diverged);
    Ok(())
}
