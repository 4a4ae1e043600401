//! Experiment configuration files.
//!
//! A config is a TOML file; every key is optional and defaults to the
//! standard Kato-layer ladder:
//!
//! ```toml
//! alpha = 0.4
//! mode = "kato"            # or "smooth", which also needs `a` and `p`
//! viscosities = [1e-2, 5e-3, 2.5e-3, 1.25e-3, 6.25e-4]
//! output = "runs/default"
//! workers = 0              # 0: one per core; KATO_LAB_WORKERS overrides
//! resume = false
//!
//! [solver]
//! t_end = 1.0
//! cfl = 0.5                # or dt = ... for a fixed step
//! snapshot_every = 4
//! initial = { kind = "perturbed_shear_layer", thickness = 0.1, amplitude = 0.05, width = 0.2 }
//!
//! [grid]
//! nx = 128
//! min_strip_cells = 8
//! max_spacing = 0.03
//! ny_cap = 1024
//!
//! [diagnostics]
//! strip_factor = 4.0
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{strip_width, DiagnosticsConfig};
use crate::error::{Error, Result};
use crate::fields::{ChannelGrid, GridSpec};
use crate::foliation::{build_beta_schedule, validate_layer_exponent, validate_strip_exponent, BetaSchedule, LayerMode};
use crate::solver::{initial_velocity, DtPolicy, InitialCondition, SolverConfig};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "KATO_LAB_WORKERS";

pub const DEFAULT_LADDER: [f64; 5] = [1e-2, 5e-3, 2.5e-3, 1.25e-3, 6.25e-4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    #[default]
    Kato,
    Smooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverTemplate {
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Fixed step; overrides `cfl` when present.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    #[serde(default = "InitialCondition::shear_layer")]
    pub initial: InitialCondition,
    #[serde(default = "default_true")]
    pub advection: bool,
    #[serde(default = "default_fp_tol")]
    pub fixed_point_tol: f64,
    #[serde(default = "default_fp_iters")]
    pub max_fixed_point_iters: usize,
}

fn default_t_end() -> f64 {
    1.0
}
fn default_cfl() -> f64 {
    0.5
}
fn default_snapshot_every() -> usize {
    4
}
fn default_true() -> bool {
    true
}
fn default_fp_tol() -> f64 {
    1e-12
}
fn default_fp_iters() -> usize {
    100
}

impl Default for SolverTemplate {
    fn default() -> Self {
        SolverTemplate {
            t_end: default_t_end(),
            cfl: default_cfl(),
            dt: None,
            snapshot_every: default_snapshot_every(),
            initial: InitialCondition::shear_layer(),
            advection: true,
            fixed_point_tol: default_fp_tol(),
            max_fixed_point_iters: default_fp_iters(),
        }
    }
}

/// Resolution budget. The wall-normal size and stretching are derived so the
/// dissipation strip at the smallest viscosity holds `min_strip_cells`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBudget {
    #[serde(default = "default_nx")]
    pub nx: usize,
    #[serde(default = "default_lx")]
    pub lx: f64,
    #[serde(default = "default_min_cells")]
    pub min_strip_cells: usize,
    #[serde(default = "default_max_spacing")]
    pub max_spacing: f64,
    #[serde(default = "default_ny_cap")]
    pub ny_cap: usize,
}

fn default_nx() -> usize {
    128
}
fn default_lx() -> f64 {
    2.0
}
fn default_min_cells() -> usize {
    8
}
fn default_max_spacing() -> f64 {
    0.03
}
fn default_ny_cap() -> usize {
    1024
}

impl Default for GridBudget {
    fn default() -> Self {
        GridBudget {
            nx: default_nx(),
            lx: default_lx(),
            min_strip_cells: default_min_cells(),
            max_spacing: default_max_spacing(),
            ny_cap: default_ny_cap(),
        }
    }
}

/// How ladder-level trends are fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrendConfig {
    /// Drop the largest viscosity from slope fits (pre-asymptotic), as long
    /// as at least three points remain.
    #[serde(default = "default_true")]
    pub exclude_coarsest: bool,
}

impl Default for TrendConfig {
    fn default() -> Self {
        TrendConfig { exclude_coarsest: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub mode: ModeKind,
    /// Layer exponent of the smoother-layer mode.
    #[serde(default)]
    pub a: Option<f64>,
    /// Spatial integrability of the boundary trackers in the smoother-layer mode.
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default = "default_ladder")]
    pub viscosities: Vec<f64>,
    #[serde(default)]
    pub solver: SolverTemplate,
    #[serde(default)]
    pub grid: GridBudget,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub trends: TrendConfig,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub resume: bool,
}

fn default_alpha() -> f64 {
    0.4
}
fn default_ladder() -> Vec<f64> {
    DEFAULT_LADDER.to_vec()
}
fn default_output() -> PathBuf {
    PathBuf::from("runs/default")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            alpha: default_alpha(),
            mode: ModeKind::Kato,
            a: None,
            p: None,
            viscosities: default_ladder(),
            solver: SolverTemplate::default(),
            grid: GridBudget::default(),
            diagnostics: DiagnosticsConfig::default(),
            trends: TrendConfig::default(),
            output: default_output(),
            workers: 0,
            resume: false,
        }
    }
}

/// A validated config with everything derived from it.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub config: ExperimentConfig,
    pub schedule: BetaSchedule,
    pub grid: GridSpec,
    pub diagnostics: DiagnosticsConfig,
}

impl ResolvedExperiment {
    pub fn solver_config(&self, nu: f64) -> SolverConfig {
        let s = &self.config.solver;
        SolverConfig {
            nu,
            grid: self.grid,
            t_end: s.t_end,
            dt: match s.dt {
                Some(dt) => DtPolicy::Fixed { dt },
                None => DtPolicy::Cfl { cfl: s.cfl },
            },
            snapshot_every: s.snapshot_every,
            initial: s.initial.clone(),
            advection: s.advection,
            fixed_point_tol: s.fixed_point_tol,
            max_fixed_point_iters: s.max_fixed_point_iters,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn layer_mode(&self) -> Result<LayerMode> {
        match self.mode {
            ModeKind::Kato => {
                if self.a.is_some() || self.p.is_some() {
                    return Err(Error::Config("`a` and `p` only apply to mode = \"smooth\"".into()));
                }
                Ok(LayerMode::KatoLayer)
            }
            ModeKind::Smooth => {
                let a = self.a.ok_or_else(|| Error::Config("mode = \"smooth\" needs the layer exponent `a`".into()))?;
                Ok(LayerMode::SmoothLayer { a })
            }
        }
    }

    /// Worker count after the environment override; 0 means one per core.
    pub fn effective_workers(&self) -> Result<usize> {
        match std::env::var(WORKERS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{WORKERS_ENV}={v} is not a worker count"))),
            Err(_) => Ok(self.workers),
        }
    }

    /// The part of the config that determines results: output location,
    /// worker count and the resume flag are cleared.
    pub fn identity(&self) -> ExperimentConfig {
        ExperimentConfig {
            output: PathBuf::new(),
            workers: 0,
            resume: false,
            ..self.clone()
        }
    }

    /// Checks admissibility and derives the schedule and the shared grid.
    pub fn resolve(&self) -> Result<ResolvedExperiment> {
        let mode = self.layer_mode()?;
        if let LayerMode::SmoothLayer { a } = mode {
            validate_layer_exponent(self.alpha, a)?;
            let p = self
                .p
                .ok_or_else(|| Error::Config("mode = \"smooth\" needs the tracker exponent `p`".into()))?;
            validate_strip_exponent(self.alpha, p)?;
        }
        let schedule = build_beta_schedule(self.alpha, mode)?;
        let nus = &self.viscosities;
        if nus.is_empty() {
            return Err(Error::Config("viscosity ladder is empty".into()));
        }
        if let Some(bad) = nus.iter().find(|&&nu| !(nu > 0.0 && nu < 1.0)) {
            return Err(Error::Config(format!("viscosity {bad} must lie in (0, 1)")));
        }
        if nus.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("viscosity ladder must be strictly decreasing".into()));
        }
        let s = &self.solver;
        if !(s.t_end >= 0.0 && s.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end={} must be >= 0", s.t_end)));
        }
        let mut diagnostics = self.diagnostics.clone();
        if diagnostics.strip_exponent.is_some() {
            return Err(Error::Config(
                "set the tracker exponent with the top-level `p`, not diagnostics.strip_exponent".into(),
            ));
        }
        diagnostics.strip_exponent = self.p;
        if !(diagnostics.strip_factor > 0.0) {
            return Err(Error::Config(format!("strip_factor={} must be positive", diagnostics.strip_factor)));
        }
        let g = &self.grid;
        let nu_min = *nus.last().unwrap();
        let width = strip_width(nu_min, diagnostics.strip_factor, mode);
        let grid = ChannelGrid::sized_for_strip(g.nx, g.lx, width, g.min_strip_cells, g.max_spacing, g.ny_cap)
            .map_err(|e| Error::Config(format!("no grid within the budget resolves the smallest strip: {e}")))?;
        let resolved = ResolvedExperiment {
            config: self.clone(),
            schedule,
            grid: grid.spec,
            diagnostics,
        };
        for &nu in nus {
            resolved.solver_config(nu).validate()?;
        }
        initial_velocity(&grid, &s.initial)?;
        Ok(resolved)
    }
}

/// Leaf-by-leaf differences between two configs, as `path: old -> new`.
pub fn config_diff(old: &ExperimentConfig, new: &ExperimentConfig) -> Vec<String> {
    let a = flatten(&serde_json::to_value(old).expect("config serializes"));
    let b = flatten(&serde_json::to_value(new).expect("config serializes"));
    let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .filter(|k| a.get(*k) != b.get(*k))
        .map(|k| {
            let show = |v: Option<&String>| v.cloned().unwrap_or_else(|| "(absent)".into());
            format!("{k}: {} -> {}", show(a.get(k)), show(b.get(k)))
        })
        .collect()
}

fn flatten(v: &serde_json::Value) -> BTreeMap<String, String> {
    fn walk(prefix: &str, v: &serde_json::Value, out: &mut BTreeMap<String, String>) {
        match v {
            serde_json::Value::Object(m) => {
                for (k, x) in m {
                    let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&p, x, out);
                }
            }
            serde_json::Value::Array(xs) => {
                for (i, x) in xs.iter().enumerate() {
                    walk(&format!("{prefix}[{i}]"), x, out);
                }
            }
            other => {
                out.insert(prefix.to_string(), other.to_string());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk("", v, &mut out);
    out
}
