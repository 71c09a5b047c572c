//! Experiment configuration: JSON file, environment overrides, and the
//! fully resolved form that is echoed into every summary.

use std::path::Path;

use lambda_convex::curvature::default_tolerance;
use lambda_convex::grid::GridSpec;
use lambda_convex::spaceform::radius_of_lambda;
use lambda_convex::variation::{
    default_fd_steps, default_fd_tolerance, BumpOptions, MaximizeConfig, MaximizeMethod, PerturbMode,
};
use lambda_convex::SpaceformKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Prefix of the tolerance overrides read from the environment.
pub const ENV_PREFIX: &str = "LCLAB_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    SpaceformTable,
    Measure,
    Check,
    VariationVerify,
    Perturb,
    Maximize,
    Lens,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::SpaceformTable => "spaceform-table",
            Subcommand::Measure => "measure",
            Subcommand::Check => "check",
            Subcommand::VariationVerify => "variation-verify",
            Subcommand::Perturb => "perturb",
            Subcommand::Maximize => "maximize",
            Subcommand::Lens => "lens",
        }
    }
}

/// Seed body. A ball without radius is the extremal ball of radius `R(lambda)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodySpec {
    Ball {
        #[serde(default)]
        radius: Option<f64>,
    },
    PerturbedBall {
        radius: f64,
        amplitude: f64,
        mode: u32,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    /// Lens of two balls of radius `R(lambda)` with centers `d` apart.
    Lens {
        d: f64,
    },
    /// Body document written by `RadialBody::to_json`.
    File {
        path: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbSettings {
    pub mode: PerturbMode,
    pub steps: usize,
    /// Step of the linear `t` schedule; fitted to the curvature margin when absent.
    pub t_step: Option<f64>,
    pub min_accepted: usize,
    pub vol_tol: Option<f64>,
    pub kappa_tol: Option<f64>,
    /// Largest relative volume change along the trajectory.
    pub drift_tol: f64,
    /// Step of the centered difference for `b'(0)` in Case 1.
    pub b_prime_h: f64,
    pub b_prime_tol: f64,
    pub bumps: Option<BumpOptions<f64>>,
}

impl Default for PerturbSettings {
    fn default() -> Self {
        PerturbSettings {
            mode: PerturbMode::Auto,
            steps: 12,
            t_step: None,
            min_accepted: 10,
            vol_tol: None,
            kappa_tol: None,
            drift_tol: 1e-8,
            b_prime_h: 1e-4,
            b_prime_tol: 1e-3,
            bumps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaximizeSettings {
    pub run: Option<MaximizeConfig<f64>>,
    pub drift_tol: f64,
    /// Smallest share of smooth measure with `kappa_1 - lambda <= 5 tol`;
    /// defaults to 0.95 for the hull method and is off for bumps.
    pub concentration_min: Option<f64>,
    /// Slack above the area-matched lens perimeter (Euclidean plane only).
    pub lens_slack: f64,
}

impl Default for MaximizeSettings {
    fn default() -> Self {
        MaximizeSettings { run: None, drift_tol: 1e-8, concentration_min: None, lens_slack: 1e-2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariationSettings {
    pub pairs: usize,
    pub steps: Option<Vec<f64>>,
    pub tol: Option<f64>,
    /// Grid of the randomized bodies; icosphere level 4 for `n = 2` when absent.
    pub grid: Option<GridSpec>,
}

impl Default for VariationSettings {
    fn default() -> Self {
        VariationSettings { pairs: 5, steps: None, tol: None, grid: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LensSettings {
    /// Center distance of a symmetric lens; the supporting-ball lens of the
    /// seed body is used when absent.
    pub d: Option<f64>,
    pub samples: Option<usize>,
    pub oracle_resolution: usize,
    pub oracle_tol: f64,
    pub beta_points: usize,
    pub beta_samples: usize,
    pub beta_tol: f64,
}

impl Default for LensSettings {
    fn default() -> Self {
        LensSettings {
            d: None,
            samples: None,
            oracle_resolution: 2048,
            oracle_tol: 1e-6,
            beta_points: 20,
            beta_samples: 257,
            beta_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TableSettings {
    pub radii: Vec<f64>,
    pub lambdas: Vec<f64>,
}

impl Default for TableSettings {
    fn default() -> Self {
        TableSettings {
            radii: vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5],
            lambdas: vec![0.5, 1.0, 1.5, 2.0, 3.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub subcommand: Option<Subcommand>,
    pub kind: SpaceformKind,
    pub n: usize,
    pub grid: Option<GridSpec>,
    pub lambda: f64,
    pub body: Option<BodySpec>,
    pub tol: Option<f64>,
    pub perturb: PerturbSettings,
    pub maximize: MaximizeSettings,
    pub variation: VariationSettings,
    pub lens: LensSettings,
    pub table: TableSettings,
    pub rng_seed: u64,
    pub out: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            subcommand: None,
            kind: SpaceformKind::Euclidean,
            n: 1,
            grid: None,
            lambda: 0.8,
            body: None,
            tol: None,
            perturb: PerturbSettings::default(),
            maximize: MaximizeSettings::default(),
            variation: VariationSettings::default(),
            lens: LensSettings::default(),
            table: TableSettings::default(),
            rng_seed: 0,
            out: None,
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))
    }

    /// Applies `LCLAB_<NAME>` tolerance overrides read through `get`.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let read = |name: &str| -> Result<Option<f64>, ConfigError> {
            let key = format!("{ENV_PREFIX}{name}");
            match get(&key) {
                None => Ok(None),
                Some(v) => match v.trim().parse::<f64>() {
                    Ok(x) if x.is_finite() && x >= 0.0 => Ok(Some(x)),
                    _ => Err(bad(format!("{key}={v} is not a non-negative number"))),
                },
            }
        };
        if let Some(x) = read("TOL")? {
            self.tol = Some(x);
        }
        if let Some(x) = read("VOL_TOL")? {
            self.perturb.vol_tol = Some(x);
        }
        if let Some(x) = read("KAPPA_TOL")? {
            self.perturb.kappa_tol = Some(x);
        }
        if let Some(x) = read("DRIFT_TOL")? {
            self.perturb.drift_tol = x;
            self.maximize.drift_tol = x;
        }
        if let Some(x) = read("FD_TOL")? {
            self.variation.tol = Some(x);
        }
        if let Some(x) = read("BETA_TOL")? {
            self.lens.beta_tol = x;
        }
        if let Some(x) = read("ORACLE_TOL")? {
            self.lens.oracle_tol = x;
        }
        if let Some(x) = read("STALL_TOL")? {
            let n = self.n;
            self.maximize.run.get_or_insert_with(|| MaximizeConfig::for_dimension(n)).stall_tol = x;
        }
        Ok(())
    }

    /// Fills every default explicitly and validates the result.
    pub fn resolve(mut self, sub: Subcommand) -> Result<Self, ConfigError> {
        if let Some(s) = self.subcommand {
            if s != sub {
                return Err(bad(format!("config is for `{}`, not `{}`", s.name(), sub.name())));
            }
        }
        self.subcommand = Some(sub);
        let n = self.n;
        if !(1..=2).contains(&n) {
            return Err(bad(format!("n must be 1 or 2, got {n}")));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(bad(format!("lambda must be positive, got {}", self.lambda)));
        }
        let grid = *self.grid.get_or_insert(GridSpec::default_for(n));
        if grid.dimension() != n {
            return Err(bad(format!("grid {grid:?} does not match n = {n}")));
        }
        let tol = *self.tol.get_or_insert(default_tolerance::<f64>(n));
        let kind = self.kind;
        let lambda = self.lambda;
        let body = self.body.get_or_insert_with(|| {
            if kind == SpaceformKind::Euclidean && n == 1 {
                BodySpec::Ellipse { a: 1.0, b: 0.8 }
            } else {
                BodySpec::Ball { radius: Some(0.9) }
            }
        });
        if let BodySpec::Ball { radius: r @ None } = body {
            let class = radius_of_lambda(kind, lambda).map_err(|e| bad(format!("extremal ball: {e}")))?;
            *r = class.radius;
        }

        let p = &mut self.perturb;
        p.vol_tol.get_or_insert(1e-12);
        p.kappa_tol.get_or_insert(tol);
        p.bumps.get_or_insert_with(|| BumpOptions { tol, ..BumpOptions::for_dimension(n) });
        if p.steps == 0 {
            return Err(bad("perturb.steps must be positive"));
        }
        if p.t_step.is_some_and(|t| !(t > 0.0)) {
            return Err(bad("perturb.t_step must be positive"));
        }

        let m = &mut self.maximize;
        let run = m.run.get_or_insert_with(|| MaximizeConfig { kappa_tol: tol, ..MaximizeConfig::for_dimension(n) });
        if kind == SpaceformKind::Hyperbolic && lambda <= 1.0 {
            run.method = MaximizeMethod::Bumps;
        }
        if m.concentration_min.is_none() && run.method == MaximizeMethod::Hull {
            m.concentration_min = Some(0.95);
        }

        let v = &mut self.variation;
        let vgrid = *v.grid.get_or_insert(if n == 1 { grid } else { GridSpec::Icosphere { level: 4 } });
        if vgrid.dimension() != n {
            return Err(bad("variation.grid does not match n"));
        }
        let steps = v.steps.get_or_insert_with(|| default_fd_steps(n));
        if steps.len() < 3 || steps.windows(2).any(|w| !(w[1] < w[0] && w[1] > 0.0)) {
            return Err(bad("variation.steps must hold at least three positive decreasing values"));
        }
        v.tol.get_or_insert(default_fd_tolerance(n));

        let l = &mut self.lens;
        l.samples.get_or_insert(lambda_convex::enclosure::default_samples(n + 1));
        if l.d.is_some_and(|d| !(d > 0.0)) {
            return Err(bad("lens.d must be positive"));
        }
        if l.beta_samples < 3 || l.oracle_resolution < 8 {
            return Err(bad("lens sampling counts are too small"));
        }
        if self.table.radii.iter().chain(&self.table.lambdas).any(|x| !x.is_finite()) {
            return Err(bad("table entries must be finite"));
        }
        Ok(self)
    }

    /// SHA-256 of the resolved configuration without its output path.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        format!("{:x}", Sha256::digest(&bytes))
    }
}
