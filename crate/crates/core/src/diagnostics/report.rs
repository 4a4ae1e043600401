//! Per-run evaluation and the CSV tables written by the harness.

use serde::{Deserialize, Serialize};

use super::balance::{resolved_balance, ResolvedBalance};
use super::dissipation::{dissipation_series, global_dissipation, kato_dissipation, strip_width};
use super::trackers::{
    besov_track, boundary_regularity_track, convergence_metrics, max_hardy_ratio, max_pressure_ratio, BoundaryTrack,
    ConvergenceMetrics, CONVERGENCE_DEPTH,
};
use crate::error::Result;
use crate::fields::RegionMask;
use crate::foliation::{build_layers, build_partition, BetaSchedule};
use crate::io::CsvTable;
use crate::solver::Trajectory;

pub const RUN_COLUMNS: [&str; 8] = [
    "t",
    "E",
    "cum_dissipation",
    "kato_layer_rate",
    "besov_norm",
    "u_inf_strip",
    "p_norm_strip",
    "resolved_energy",
];

pub const LADDER_COLUMNS: [&str; 11] = [
    "nu",
    "kato_total",
    "global_total",
    "balance_residual",
    "term_I",
    "term_II",
    "term_III",
    "l3_diff_to_next",
    "linf_l2_diff_to_next",
    "hardy_max",
    "pressure_ratio_max",
];

/// Knobs of the per-run evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    /// Strip factor `c` of the dissipation strip.
    #[serde(default = "default_c")]
    pub strip_factor: f64,
    /// Spatial exponent of the boundary trackers in the smoother-layer mode.
    #[serde(default)]
    pub strip_exponent: Option<f64>,
    /// Integrability of the Besov track.
    #[serde(default = "default_besov_p")]
    pub besov_p: f64,
    #[serde(default = "default_hardy_p")]
    pub hardy_p: f64,
    #[serde(default = "default_hardy_p")]
    pub pressure_p: f64,
    #[serde(default = "default_depth")]
    pub convergence_depth: f64,
    /// Also split the resolved dissipation to report the cutoff-ramp term.
    #[serde(default)]
    pub ramp_split: bool,
}

fn default_c() -> f64 {
    4.0
}
fn default_besov_p() -> f64 {
    3.0
}
fn default_hardy_p() -> f64 {
    2.0
}
fn default_depth() -> f64 {
    CONVERGENCE_DEPTH
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            strip_factor: default_c(),
            strip_exponent: None,
            besov_p: default_besov_p(),
            hardy_p: default_hardy_p(),
            pressure_p: default_hardy_p(),
            convergence_depth: default_depth(),
            ramp_split: false,
        }
    }
}

/// Everything evaluated on one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub nu: f64,
    /// Layer count actually used at this `nu` (may fall back to one layer).
    pub n_layers: usize,
    pub kato_total: f64,
    pub global_total: f64,
    pub ledger_dissipation: f64,
    pub kato_rates: Vec<f64>,
    pub besov: Vec<f64>,
    pub track: BoundaryTrack,
    pub balance: ResolvedBalance,
    pub hardy_max: f64,
    pub pressure_ratio_max: Option<f64>,
    /// Schedule warnings, including a fallback to a single layer.
    pub warnings: Vec<String>,
}

/// Evaluates all per-run diagnostics.
///
/// If the layers of `schedule` are not properly nested at this `nu`, a single
/// layer is used instead and a warning recorded.
pub fn evaluate_run(traj: &Trajectory, schedule: &BetaSchedule, cfg: &DiagnosticsConfig) -> Result<RunDiagnostics> {
    let nu = traj.nu();
    let geometry = traj.grid.geometry();
    let mut warnings = schedule.warnings.clone();
    let layers = match build_layers(schedule, nu, &geometry) {
        Ok(l) => l,
        Err(e) => {
            let single = schedule.single_layer(format!("nu={nu}: {e}"));
            warnings = single.warnings.clone();
            build_layers(&single, nu, &geometry)?
        }
    };
    let partition = build_partition(&layers)?;
    let mode = schedule.mode;
    let kato_total = kato_dissipation(traj, cfg.strip_factor, mode)?;
    let strip = RegionMask::strip(strip_width(nu, cfg.strip_factor, mode));
    let kato_rates = dissipation_series(traj, Some(&strip));
    let track = boundary_regularity_track(traj, mode, schedule.alpha, cfg.strip_exponent)?;
    let besov = besov_track(traj, schedule.alpha, cfg.besov_p, nu)?;
    let balance = resolved_balance(traj, &partition, cfg.ramp_split)?;
    Ok(RunDiagnostics {
        nu,
        n_layers: layers.n_layers(),
        kato_total,
        global_total: global_dissipation(traj),
        ledger_dissipation: traj.ledger.last().map_or(0.0, |r| r.cum_dissipation),
        kato_rates,
        besov,
        track,
        hardy_max: max_hardy_ratio(traj, cfg.hardy_p)?,
        pressure_ratio_max: max_pressure_ratio(traj, cfg.pressure_p)?,
        balance,
        warnings,
    })
}

/// Per-snapshot table with [`RUN_COLUMNS`].
pub fn run_table(traj: &Trajectory, diag: &RunDiagnostics) -> CsvTable {
    let mut t = CsvTable::new(&RUN_COLUMNS);
    for (k, s) in traj.snapshots.iter().enumerate() {
        let step = traj.snapshot_steps[k] as usize;
        let cum = traj.ledger.get(step).map_or(f64::NAN, |r| r.cum_dissipation);
        t.push(vec![
            s.time,
            diag.balance.samples[k].energy,
            cum,
            diag.kato_rates[k],
            diag.besov[k],
            diag.track.velocity[k],
            diag.track.pressure[k],
            diag.balance.samples[k].resolved_energy,
        ]);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub nu: f64,
    pub kato_total: f64,
    pub global_total: f64,
    pub balance_residual: f64,
    pub term_i: f64,
    pub term_ii: f64,
    pub term_iii: f64,
    /// Distance to the next (smaller) viscosity; `None` for the last rung.
    pub next: Option<ConvergenceMetrics>,
    pub hardy_max: f64,
    pub pressure_ratio_max: Option<f64>,
}

impl LadderRow {
    pub fn values(&self) -> Vec<f64> {
        vec![
            self.nu,
            self.kato_total,
            self.global_total,
            self.balance_residual,
            self.term_i,
            self.term_ii,
            self.term_iii,
            self.next.map_or(f64::NAN, |m| m.l3_l3),
            self.next.map_or(f64::NAN, |m| m.linf_l2),
            self.hardy_max,
            self.pressure_ratio_max.unwrap_or(f64::NAN),
        ]
    }

    pub fn from_values(v: &[f64]) -> Self {
        let opt = |x: f64| (!x.is_nan()).then_some(x);
        LadderRow {
            nu: v[0],
            kato_total: v[1],
            global_total: v[2],
            balance_residual: v[3],
            term_i: v[4],
            term_ii: v[5],
            term_iii: v[6],
            next: opt(v[7]).map(|l3| ConvergenceMetrics {
                h: CONVERGENCE_DEPTH,
                l3_l3: l3,
                linf_l2: v[8],
            }),
            hardy_max: v[9],
            pressure_ratio_max: opt(v[10]),
        }
    }
}

/// Ladder rows in the order given (decreasing `nu`), with metrics to the next rung.
pub fn ladder_rows(trajs: &[&Trajectory], diags: &[RunDiagnostics], depth: f64) -> Result<Vec<LadderRow>> {
    let mut rows = Vec::with_capacity(diags.len());
    for (k, d) in diags.iter().enumerate() {
        let next = match trajs.get(k + 1) {
            Some(b) => Some(convergence_metrics(trajs[k], b, depth)?),
            None => None,
        };
        rows.push(LadderRow {
            nu: d.nu,
            kato_total: d.kato_total,
            global_total: d.global_total,
            balance_residual: d.balance.residual,
            term_i: d.balance.term_i,
            term_ii: d.balance.term_ii,
            term_iii: d.balance.term_iii,
            next,
            hardy_max: d.hardy_max,
            pressure_ratio_max: d.pressure_ratio_max,
        });
    }
    Ok(rows)
}

pub fn ladder_table(rows: &[LadderRow], comment: Option<String>) -> CsvTable {
    let mut t = CsvTable::new(&LADDER_COLUMNS);
    t.comment = comment;
    for r in rows {
        t.push(r.values());
    }
    t
}
