//! Experiment configuration files (TOML).
//!
//! ```toml
//! [engine]                # optional engine tolerances
//! abs_tol = 1e-10
//!
//! [mc]                    # optional; MC runs when enabled
//! enabled = true
//! n_paths = 20000
//! dt = 1e-3
//! seed = 7
//!
//! [[experiment]]
//! name = "ruin-bm"
//! model = { family = "levy", drift = 0.0, sigma = 1.0 }
//! boundary = { kind = "ruin" }
//! targets = ["g", "h"]
//! x = 1.0
//! k = [2.0, 3.0]
//! q = 0.0
//! s = 0.0
//! ```

use std::path::Path;

use anyhow::{bail, Context};
use gendd_core::mc::{McSettings, Target};
use gendd_core::{
    factory_for, DiffusionParams, DrawdownBoundary, EngineSettings, FamilySettings, FunctionalQuery, LevyParams,
    OuJumpParams, PayoutWeight, ProcessModel, TaxSchedule,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub engine: EngineSettings,
    #[serde(default)]
    pub family: FamilySettings,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(rename = "experiment", default)]
    pub experiments: Vec<Experiment>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub enabled: bool,
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub horizon: f64,
    pub jobs: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        let s = McSettings::default();
        Self {
            enabled: true,
            n_paths: s.n_paths,
            dt: s.dt,
            seed: s.seed,
            horizon: s.horizon,
            jobs: s.jobs,
        }
    }
}

/// Per-experiment MC overrides.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McOverride {
    pub enabled: Option<bool>,
    pub n_paths: Option<usize>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Levy {
        drift: f64,
        sigma: f64,
        #[serde(default)]
        jump_intensity: f64,
        #[serde(default = "one")]
        jump_rate: f64,
    },
    Diffusion(DiffusionParams),
    OuJump(OuJumpParams),
}

fn one() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn build(&self) -> ProcessModel {
        match self {
            ModelSpec::Levy {
                drift,
                sigma,
                jump_intensity,
                jump_rate,
            } => ProcessModel::Levy(LevyParams::perturbed(*drift, *sigma, *jump_intensity, *jump_rate)),
            ModelSpec::Diffusion(p) => ProcessModel::Diffusion(p.clone()),
            ModelSpec::OuJump(p) => ProcessModel::OuJump(*p),
        }
    }

    /// Compact label for report rows.
    pub fn describe(&self) -> String {
        match self {
            ModelSpec::Levy {
                drift,
                sigma,
                jump_intensity,
                jump_rate,
            } => format!("levy(drift={drift};sigma={sigma};lambda={jump_intensity};eta={jump_rate})"),
            ModelSpec::Diffusion(p) => format!("diffusion(drift={:?};vol={:?})", p.drift, p.volatility),
            ModelSpec::OuJump(p) => format!(
                "ou-jump(theta={};mu={};sigma={};lambda={};eta={})",
                p.theta, p.mu, p.sigma, p.lambda, p.eta
            ),
        }
    }
}

/// A single number or a list.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    One(f64),
    Many(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::One(v) => vec![*v],
            Grid::Many(v) => v.clone(),
        }
    }
}

fn zero_grid() -> Grid {
    Grid::One(0.0)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Constant(f64),
    /// Only `"tax_rate"` is accepted.
    Named(String),
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec::Constant(1.0)
    }
}

impl WeightSpec {
    pub fn build(&self) -> anyhow::Result<PayoutWeight> {
        match self {
            WeightSpec::Constant(v) => Ok(PayoutWeight::Constant(*v)),
            WeightSpec::Named(n) if n == "tax_rate" => Ok(PayoutWeight::TaxRate),
            WeightSpec::Named(n) => bail!("unknown payout weight `{n}` (expected a number or \"tax_rate\")"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub name: String,
    pub model: ModelSpec,
    pub boundary: DrawdownBoundary,
    pub tax: Option<TaxSchedule>,
    #[serde(default)]
    pub weight: WeightSpec,
    pub targets: Vec<Target>,
    pub x: Grid,
    pub k: Grid,
    #[serde(default = "zero_grid")]
    pub q: Grid,
    #[serde(default = "zero_grid")]
    pub s: Grid,
    /// Discretization-bias allowance added to the 3 SE band.
    #[serde(default)]
    pub allowance: f64,
    #[serde(default)]
    pub mc: McOverride,
}

impl Experiment {
    /// Every `(x, k, q, s)` combination, in config order.
    pub fn queries(&self) -> Vec<FunctionalQuery> {
        let mut out = Vec::new();
        for &x in &self.x.values() {
            for &k in &self.k.values() {
                for &q in &self.q.values() {
                    for &s in &self.s.values() {
                        out.push(FunctionalQuery { x, k, q, s });
                    }
                }
            }
        }
        out
    }

    pub fn mc_settings(&self, base: &McConfig) -> (bool, McSettings) {
        let mut s = McSettings {
            n_paths: base.n_paths,
            dt: base.dt,
            seed: base.seed,
            horizon: base.horizon,
            jobs: base.jobs,
        };
        if let Some(n) = self.mc.n_paths {
            s.n_paths = n;
        }
        if let Some(dt) = self.mc.dt {
            s.dt = dt;
        }
        if let Some(h) = self.mc.horizon {
            s.horizon = h;
        }
        (base.enabled && self.mc.enabled.unwrap_or(true), s)
    }

    pub fn tax_label(&self) -> String {
        self.tax.as_ref().map_or_else(|| "none".to_string(), |t| t.describe())
    }
}

impl Config {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Checks everything that can be checked without evaluating: model
    /// parameters, boundary and tax validity, and `x <= k` on every grid point.
    pub fn validate(&self) -> anyhow::Result<()> {
        let mut names = std::collections::HashSet::new();
        for e in &self.experiments {
            let ctx = || format!("experiment `{}`", e.name);
            if !names.insert(e.name.as_str()) {
                bail!("duplicate experiment name `{}`", e.name);
            }
            factory_for(&e.model.build(), &self.family).with_context(ctx)?;
            e.weight.build().with_context(ctx)?;
            if e.targets.is_empty() {
                bail!("{}: no targets", ctx());
            }
            let queries = e.queries();
            if queries.is_empty() {
                bail!("{}: empty query grid", ctx());
            }
            for query in &queries {
                query.validate().with_context(ctx)?;
                if query.x == query.k {
                    bail!("{}: x = k = {} leaves nothing to evaluate", ctx(), query.x);
                }
            }
            let lo = queries.iter().map(|q| q.x).fold(f64::INFINITY, f64::min);
            let hi = queries.iter().map(|q| q.k).fold(f64::NEG_INFINITY, f64::max);
            let report = e.boundary.validate((lo, hi));
            if let Some(v) = report.violations.first() {
                bail!("{}: boundary {}: {} at {}", ctx(), v.constraint, v.detail, v.level);
            }
            if let Some(t) = &e.tax {
                for x in e.x.values() {
                    gendd_core::TaxContext::new(t.clone(), x).with_context(ctx)?;
                }
            }
            let (_, mc) = e.mc_settings(&self.mc);
            if !(mc.dt > 0.0) || mc.n_paths < 100 {
                bail!("{}: MC needs dt > 0 and at least 100 paths", ctx());
            }
        }
        Ok(())
    }
}
