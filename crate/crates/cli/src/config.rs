use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use oploc::integrator::IntegratorConfig;
use oploc::manifold::{RefineConfig, TargetRefine};
use oploc::sqt::SqtConfig;
use oploc::MeasurementSchedule;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub run: RunSection,
    pub schedule: ScheduleSection,
    pub integrator: IntegratorConfig,
    pub refine: RefineConfig,
    pub target_refine: TargetRefine,
    pub sqt: SqtConfig,
    pub portrait: PortraitSection,
    pub manifold: ManifoldSection,
    pub multipath: MultipathSection,
    pub stretch: StretchSection,
    pub le: LeSection,
    pub sqt_density: SqtDensitySection,
    pub kicklimit: KickLimitSection,
    pub resonance: ResonanceSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub out: PathBuf,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
            seed: 0,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub tau_x: f64,
    pub epsilon: f64,
    pub tau_m: f64,
    pub period: f64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            tau_x: 1.0,
            epsilon: 0.99,
            tau_m: 0.025,
            period: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PortraitSection {
    /// Base momenta; each is seeded once per entry of `offsets`.
    pub momenta: Vec<f64>,
    pub offsets: Vec<f64>,
    /// Initial angles per momentum line.
    pub per_line: usize,
    pub n_strobes: usize,
    pub delta_theta0: f64,
    /// Colour scale limit for λ (MHz).
    pub lambda_clip: f64,
}

impl Default for PortraitSection {
    fn default() -> Self {
        Self {
            momenta: vec![0.0, PI / 3.0, PI / 2.0, 2.0 * PI / 3.0, PI, 1.5 * PI, 2.0 * PI, 3.0 * PI],
            offsets: vec![-0.2, 0.0, 0.2],
            per_line: 24,
            n_strobes: 100,
            delta_theta0: 0.01,
            lambda_clip: 0.25,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManifoldSection {
    pub theta0: f64,
    pub p0_min: f64,
    pub p0_max: f64,
    pub times: Vec<f64>,
    /// Also propagate the manifolds from `θ₀ ± delta_theta0`.
    pub aux: bool,
    pub delta_theta0: f64,
}

impl Default for ManifoldSection {
    fn default() -> Self {
        Self {
            theta0: 0.0,
            p0_min: 0.0,
            p0_max: 1.5,
            times: vec![3.0],
            aux: false,
            delta_theta0: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultipathSection {
    pub theta0: f64,
    pub p0_min: f64,
    pub p0_max: f64,
    pub t: f64,
    /// Unwrapped final angles.
    pub targets: Vec<f64>,
    pub tol_theta: f64,
    /// Samples per solution path in the path CSV.
    pub path_samples: usize,
}

impl Default for MultipathSection {
    fn default() -> Self {
        Self {
            theta0: 0.0,
            p0_min: 0.0,
            p0_max: 2.0,
            t: 5.0,
            targets: vec![9.28, 9.32],
            tol_theta: 1e-6,
            path_samples: 500,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StretchSection {
    pub theta0: f64,
    pub p0_min: f64,
    pub p0_max: f64,
    pub times: Vec<f64>,
    pub delta_theta0: f64,
}

impl Default for StretchSection {
    fn default() -> Self {
        Self {
            theta0: 0.0,
            p0_min: -2.0,
            p0_max: 2.0,
            times: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            delta_theta0: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LeSection {
    /// `[θ₀, p₀]` pairs.
    pub starts: Vec<[f64; 2]>,
    pub t_end: f64,
    pub sample_dt: f64,
    pub delta_theta0: f64,
}

impl Default for LeSection {
    fn default() -> Self {
        Self {
            starts: vec![[0.286, 1.227], [1.142, -0.545]],
            t_end: 15.0,
            sample_dt: 0.01,
            delta_theta0: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SqtDensitySection {
    pub t_end: f64,
    pub postselect: bool,
    pub theta_f: f64,
    pub window: f64,
    pub bins_t: usize,
    pub bins_theta: usize,
    /// Winding groups smaller than this get no ridge.
    pub min_population: usize,
}

impl Default for SqtDensitySection {
    fn default() -> Self {
        Self {
            t_end: 3.0,
            postselect: true,
            theta_f: PI,
            window: 0.1,
            bins_t: 150,
            bins_theta: 200,
            min_population: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KickLimitSection {
    pub theta_i: f64,
    pub theta_f: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub n: usize,
}

impl Default for KickLimitSection {
    fn default() -> Self {
        Self {
            theta_i: PI / 2.0,
            theta_f: PI / 2.0,
            gamma_min: 0.01,
            gamma_max: 100.0,
            n: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResonanceSection {
    pub theta0: f64,
    pub p0_min: f64,
    pub p0_max: f64,
    pub n: usize,
    pub t: f64,
    pub k_max: u32,
    pub fourier_order: u32,
    pub fourier_k_max: u32,
}

impl Default for ResonanceSection {
    fn default() -> Self {
        Self {
            theta0: 0.0,
            p0_min: 0.0,
            p0_max: 10.0,
            n: 2001,
            t: 20.0,
            k_max: 3,
            fourier_order: 3,
            fourier_k_max: 40,
        }
    }
}

/// Built-in starting points, overlaid by the user's config file.
pub const PRESETS: &[(&str, &str)] = &[
    ("fig1", "[schedule]\nepsilon = 0.1\n[portrait]\nn_strobes = 100\n"),
    ("fig2", "[schedule]\nepsilon = 0.1\n[resonance]\nt = 20.0\n"),
    (
        "fig3",
        "[schedule]\nepsilon = 0.99\n[portrait]\nmomenta = [-3.0, -2.5, -2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]\noffsets = [0.0, 0.25]\nn_strobes = 15\n",
    ),
    ("fig3-paths", "[schedule]\nepsilon = 0.99\n[le]\nt_end = 15.0\n"),
    ("fig4", "[schedule]\nepsilon = 0.99\n[manifold]\np0_min = 0.0\np0_max = 1.5\ntimes = [3.0, 4.0, 5.0]\n"),
    ("fig5", "[schedule]\nepsilon = 0.99\n[sqt_density]\nt_end = 3.0\ntheta_f = 3.141592653589793\n"),
    ("fig6", "[schedule]\nepsilon = 0.99\n[multipath]\nt = 5.0\ntargets = [9.28, 9.32]\n"),
    (
        "fig7",
        "[schedule]\nepsilon = 0.99\n[manifold]\np0_min = 0.0\np0_max = 1.5\ntimes = [4.0, 5.0]\naux = true\n",
    ),
    ("fig8", "[kicklimit]\ntheta_i = 1.5707963267948966\ntheta_f = 1.5707963267948966\n"),
    ("fig9", "[schedule]\nepsilon = 0.99\n[stretch]\ntheta0 = 0.0\np0_min = -2.0\np0_max = 2.0\n"),
];

fn preset_table(name: &str) -> Result<toml::Table> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| {
            let names: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
            anyhow!("unknown preset '{name}' (available: {})", names.join(", "))
        })?;
    Ok(toml::from_str(text)?)
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// The 1-based line holding `key` inside `[section]`, if any.
pub fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        if current != section {
            continue;
        }
        if let Some((k, _)) = line.split_once('=') {
            if k.trim() == key {
                return Some(i + 1);
            }
        }
    }
    None
}

pub struct Loaded {
    pub config: RunConfig,
    /// Path and text of the user file, for error locations.
    pub source: Option<(PathBuf, String)>,
}

impl Loaded {
    pub fn load(path: Option<&Path>, preset: Option<&str>) -> Result<Self> {
        let mut table = match preset {
            Some(name) => preset_table(name)?,
            None => toml::Table::new(),
        };
        let mut source = None;
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            // Parsing the file on its own keeps the line numbers in syntax,
            // type and unknown-key errors.
            toml::from_str::<RunConfig>(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
            let user: toml::Table = toml::from_str(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
            merge(&mut table, user);
            source = Some((path.to_path_buf(), text));
        }
        let config: RunConfig = toml::Value::Table(table).try_into().context("invalid configuration")?;
        let loaded = Self { config, source };
        loaded.validate()?;
        Ok(loaded)
    }

    fn fail(&self, section: &str, key: &str, reason: &str) -> anyhow::Error {
        match &self.source {
            Some((path, text)) => match locate(text, section, key) {
                Some(line) => anyhow!("{}:{line}: [{section}] {key}: {reason}", path.display()),
                None => anyhow!("{}: [{section}] {key}: {reason}", path.display()),
            },
            None => anyhow!("[{section}] {key}: {reason}"),
        }
    }

    fn check(&self, section: &str, r: oploc::Result<()>) -> Result<()> {
        match r {
            Err(oploc::Error::InvalidParameter { name, reason }) => Err(self.fail(section, name, &reason)),
            Err(e) => Err(e.into()),
            Ok(()) => Ok(()),
        }
    }

    fn validate(&self) -> Result<()> {
        let c = &self.config;
        self.check("schedule", self.schedule().map(|_| ()))?;
        self.check("integrator", c.integrator.validate())?;
        self.check("refine", c.refine.validate())?;
        self.check("sqt", c.sqt.validate())?;
        let range = |section: &str, lo: f64, hi: f64| {
            if lo < hi {
                Ok(())
            } else {
                Err(self.fail(section, "p0_max", &format!("must exceed p0_min ({hi} <= {lo})")))
            }
        };
        range("manifold", c.manifold.p0_min, c.manifold.p0_max)?;
        range("multipath", c.multipath.p0_min, c.multipath.p0_max)?;
        range("stretch", c.stretch.p0_min, c.stretch.p0_max)?;
        range("resonance", c.resonance.p0_min, c.resonance.p0_max)?;
        let positive = |section: &str, key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(self.fail(section, key, &format!("must be positive, got {v}")))
            }
        };
        positive("multipath", "t", c.multipath.t)?;
        positive("multipath", "tol_theta", c.multipath.tol_theta)?;
        positive("le", "t_end", c.le.t_end)?;
        positive("le", "sample_dt", c.le.sample_dt)?;
        positive("resonance", "t", c.resonance.t)?;
        positive("sqt_density", "t_end", c.sqt_density.t_end)?;
        positive("sqt_density", "window", c.sqt_density.window)?;
        positive("kicklimit", "gamma_min", c.kicklimit.gamma_min)?;
        positive("portrait", "lambda_clip", c.portrait.lambda_clip)?;
        if c.kicklimit.gamma_max <= c.kicklimit.gamma_min {
            return Err(self.fail("kicklimit", "gamma_max", "must exceed gamma_min"));
        }
        for (section, times) in [("manifold", &c.manifold.times), ("stretch", &c.stretch.times)] {
            if times.is_empty() || times.iter().any(|t| !(*t > 0.0)) || times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(self.fail(section, "times", "must be a non-empty increasing list of positive times"));
            }
        }
        if c.portrait.per_line == 0 || c.portrait.momenta.is_empty() || c.portrait.offsets.is_empty() {
            return Err(self.fail("portrait", "per_line", "need at least one initial condition"));
        }
        if c.resonance.n < 2 {
            return Err(self.fail("resonance", "n", "need at least two momenta"));
        }
        if c.kicklimit.n == 0 {
            bail!("[kicklimit] n: need at least one Γ value");
        }
        Ok(())
    }

    pub fn schedule(&self) -> oploc::Result<MeasurementSchedule> {
        let s = self.config.schedule;
        MeasurementSchedule::new(s.tau_x, s.epsilon, s.tau_m, s.period)
    }
}
