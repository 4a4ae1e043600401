//! Running, resuming and checking a viscosity ladder.

use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{config_diff, ExperimentConfig, ResolvedExperiment};
use super::manifest::{Manifest, MANIFEST_FILE};
use super::store::{self, RunStatus, RunSummary};
use crate::diagnostics::{convergence_metrics, evaluate_run, ladder_table, LadderRow, RunDiagnostics, LADDER_COLUMNS};
use crate::error::{Error, Result};
use crate::io::{atomic_write, CsvTable};
use crate::numerics::loglog_slope;
use crate::solver::{run, Trajectory};

pub const LADDER_FILE: &str = "ladder.csv";
pub const REPORT_FILE: &str = "report.json";
pub const CONFIG_COPY: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub nu: f64,
    pub message: String,
}

/// Log-log slopes of ladder quantities against `nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendFits {
    pub kato_slope: Option<f64>,
    pub global_slope: Option<f64>,
    pub l3_slope: Option<f64>,
    /// Rungs entering the kato and global fits.
    pub points: usize,
}

/// Pass/fail of each ladder-level property; `None` where the ladder is too
/// short for the property to apply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceFlags {
    pub all_runs_succeeded: bool,
    pub energy_inequality: bool,
    pub balance_closes: bool,
    pub near_wall_bound: bool,
    pub kato_decreasing: Option<bool>,
    pub kato_slope_positive: Option<bool>,
    pub global_decreasing: Option<bool>,
    pub global_slope_positive: Option<bool>,
    pub l3_decreasing: Option<bool>,
    pub trackers_bounded: Option<bool>,
}

impl AcceptanceFlags {
    pub fn passed(&self) -> bool {
        let opt = [
            self.kato_decreasing,
            self.kato_slope_positive,
            self.global_decreasing,
            self.global_slope_positive,
            self.l3_decreasing,
            self.trackers_bounded,
        ];
        self.all_runs_succeeded
            && self.energy_inequality
            && self.balance_closes
            && self.near_wall_bound
            && opt.iter().all(|f| f.unwrap_or(true))
    }

    /// Names of the failed properties.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let req = [
            ("all_runs_succeeded", self.all_runs_succeeded),
            ("energy_inequality", self.energy_inequality),
            ("balance_closes", self.balance_closes),
            ("near_wall_bound", self.near_wall_bound),
        ];
        out.extend(req.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n));
        let opt = [
            ("kato_decreasing", self.kato_decreasing),
            ("kato_slope_positive", self.kato_slope_positive),
            ("global_decreasing", self.global_decreasing),
            ("global_slope_positive", self.global_slope_positive),
            ("l3_decreasing", self.l3_decreasing),
            ("trackers_bounded", self.trackers_bounded),
        ];
        out.extend(opt.iter().filter(|(_, f)| *f == Some(false)).map(|(n, _)| *n));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub manifest_hash: String,
    pub rows: Vec<LadderRow>,
    pub trends: TrendFits,
    pub flags: AcceptanceFlags,
    pub failures: Vec<RunFailure>,
    pub warnings: Vec<String>,
    /// Viscosities computed in this invocation (the rest were loaded).
    #[serde(skip)]
    pub recomputed: Vec<f64>,
}

/// Extrapolated bound of a sequence along the ladder: its maximum if it never
/// grows at the end, otherwise the last value plus the geometric tail of its
/// last two increments. `None` when the last increments do not contract.
pub fn ladder_bound(s: &[f64]) -> Option<f64> {
    if s.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let d: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
    match d.as_slice() {
        [] => Some(max),
        [.., last] if *last <= 0.0 => Some(max),
        [.., prev, last] if *prev > 0.0 && last < prev => {
            let r = last / prev;
            Some(max.max(s[s.len() - 1] + last * r / (1.0 - r)))
        }
        _ => None,
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn strictly_decreasing(v: &[f64]) -> Option<bool> {
    (v.len() >= 2).then(|| v.windows(2).all(|w| w[1] < w[0]))
}

/// Trend fits and flags from ladder rows and the runs' diagnostics.
pub fn assess(
    config: &ExperimentConfig,
    rows: &[LadderRow],
    diags: &[Option<RunDiagnostics>],
    summaries: &[RunSummary],
) -> (TrendFits, AcceptanceFlags) {
    let ok: Vec<(&LadderRow, &RunDiagnostics)> = rows
        .iter()
        .zip(diags)
        .filter_map(|(r, d)| d.as_ref().map(|d| (r, d)))
        .collect();
    let skip = usize::from(config.trends.exclude_coarsest && ok.len() > 3);
    let fit = &ok[skip..];
    let nu: Vec<f64> = fit.iter().map(|(r, _)| r.nu).collect();
    let slope = |f: &dyn Fn(&LadderRow) -> f64| {
        let y: Vec<f64> = fit.iter().map(|(r, _)| f(r)).collect();
        loglog_slope(&nu, &y)
    };
    let with_next: Vec<(f64, f64)> = fit
        .iter()
        .filter_map(|(r, _)| r.next.map(|m| (r.nu, m.l3_l3)))
        .collect();
    let trends = TrendFits {
        kato_slope: slope(&|r| r.kato_total),
        global_slope: slope(&|r| r.global_total),
        l3_slope: loglog_slope(
            &with_next.iter().map(|p| p.0).collect::<Vec<_>>(),
            &with_next.iter().map(|p| p.1).collect::<Vec<_>>(),
        ),
        points: fit.len(),
    };

    let kato: Vec<f64> = ok.iter().map(|(r, _)| r.kato_total).collect();
    let global: Vec<f64> = ok.iter().map(|(r, _)| r.global_total).collect();
    let l3: Vec<f64> = rows.iter().filter_map(|r| r.next.map(|m| m.l3_l3)).collect();
    let vel: Vec<f64> = ok.iter().map(|(_, d)| sup(&d.track.velocity)).collect();
    let pre: Vec<f64> = ok.iter().map(|(_, d)| sup(&d.track.pressure)).collect();
    let trackers_bounded = (ok.len() >= 3 || ladder_bound(&vel).is_some() && ladder_bound(&pre).is_some())
        .then(|| ladder_bound(&vel).is_some() && ladder_bound(&pre).is_some());
    let flags = AcceptanceFlags {
        all_runs_succeeded: diags.iter().all(Option::is_some),
        energy_inequality: summaries.iter().all(|s| s.energy_inequality_holds()),
        balance_closes: ok.iter().all(|(_, d)| d.balance.closes() && d.balance.reconstructs()),
        near_wall_bound: ok.iter().all(|(_, d)| d.balance.po_holds()),
        kato_decreasing: strictly_decreasing(&kato),
        kato_slope_positive: trends.kato_slope.map(|s| s > 0.0),
        global_decreasing: strictly_decreasing(&global),
        global_slope_positive: trends.global_slope.map(|s| s > 0.0),
        l3_decreasing: strictly_decreasing(&l3),
        trackers_bounded,
    };
    (trends, flags)
}

fn failed_row(nu: f64) -> LadderRow {
    LadderRow {
        nu,
        kato_total: f64::NAN,
        global_total: f64::NAN,
        balance_residual: f64::NAN,
        term_i: f64::NAN,
        term_ii: f64::NAN,
        term_iii: f64::NAN,
        next: None,
        hardy_max: f64::NAN,
        pressure_ratio_max: None,
    }
}

struct RunResult {
    summary: RunSummary,
    traj: Trajectory,
    diagnostics: Option<RunDiagnostics>,
    recomputed: bool,
}

fn compute_run(exp: &ResolvedExperiment, root: &Path, index: usize, comment: &str) -> Result<RunResult> {
    let nu = exp.config.viscosities[index];
    let cfg = exp.solver_config(nu);
    info!("nu={nu}: solving");
    let traj = run(&cfg)?;
    let (diagnostics, failure) = match &traj.failure {
        Some(f) => (None, Some(f.clone())),
        None => match evaluate_run(&traj, &exp.schedule, &exp.diagnostics) {
            Ok(d) => (Some(d), None),
            Err(e) => (None, Some(format!("diagnostics: {e}"))),
        },
    };
    if let Some(f) = &failure {
        warn!("nu={nu}: run failed: {f}");
    }
    let summary = store::persist_run(&store::run_dir(root, index), index, &traj, diagnostics.as_ref(), failure, comment)?;
    Ok(RunResult {
        summary,
        traj,
        diagnostics,
        recomputed: true,
    })
}

/// Loads a finished run, or `None` if anything it needs is missing or unreadable.
fn load_run(exp: &ResolvedExperiment, root: &Path, index: usize) -> Option<RunResult> {
    let dir = store::run_dir(root, index);
    let summary = store::load_summary(&dir).ok()?;
    let nu = exp.config.viscosities[index];
    if summary.nu != nu || summary.index != index || !store::missing_files(&dir, &summary).is_empty() {
        return None;
    }
    let traj = store::load_trajectory(&dir, &summary, &exp.solver_config(nu)).ok()?;
    let diagnostics = match summary.status {
        RunStatus::Complete => Some(store::load_diagnostics(&dir).ok()?),
        RunStatus::Failed => None,
    };
    Some(RunResult {
        summary,
        traj,
        diagnostics,
        recomputed: false,
    })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

fn clear_outputs(root: &Path) -> Result<()> {
    let runs = store::runs_dir(root);
    if runs.exists() {
        std::fs::remove_dir_all(&runs).map_err(|e| Error::io(&runs, e))?;
    }
    for f in [MANIFEST_FILE, LADDER_FILE, REPORT_FILE, CONFIG_COPY] {
        let p = root.join(f);
        if p.exists() {
            std::fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
        }
    }
    Ok(())
}

/// Runs every rung of the ladder (reusing finished runs when `resume` is
/// set), then writes `ladder.csv` and `report.json`.
///
/// Failed runs are recorded in the report and the ladder continues.
pub fn run_ladder(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let exp = config.resolve()?;
    let root = config.output.clone();
    let manifest = Manifest::new(&exp);
    if root.join(MANIFEST_FILE).exists() {
        if config.resume {
            let old = Manifest::load(&root)?;
            if old.hash != manifest.hash {
                let mut diff = config_diff(&old.config, &manifest.config);
                if diff.is_empty() {
                    diff.push(format!("manifest hash {} -> {} (conventions or versions changed)", old.hash, manifest.hash));
                }
                return Err(Error::ManifestMismatch(diff.join("\n")));
            }
        } else {
            clear_outputs(&root)?;
        }
    }
    std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    manifest.write(&root)?;
    atomic_write(&root.join(CONFIG_COPY), manifest.config.to_toml().as_bytes())?;
    let comment = manifest.csv_comment();

    let workers = config.effective_workers()?;
    let n = config.viscosities.len();
    let results: Vec<Result<RunResult>> = pool(workers)?.install(|| {
        (0..n)
            .into_par_iter()
            .map(|k| {
                if config.resume {
                    if let Some(r) = load_run(&exp, &root, k) {
                        info!("nu={}: reusing stored run", config.viscosities[k]);
                        return Ok(r);
                    }
                }
                compute_run(&exp, &root, k, &comment)
            })
            .collect()
    });
    let results: Vec<RunResult> = results.into_iter().collect::<Result<_>>()?;
    let report = aggregate(&exp, &manifest, &results)?;
    write_report(&root, &manifest, &report)?;
    Ok(report)
}

fn aggregate(exp: &ResolvedExperiment, manifest: &Manifest, results: &[RunResult]) -> Result<ExperimentReport> {
    let depth = exp.diagnostics.convergence_depth;
    let mut rows = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    let mut warnings = exp.schedule.warnings.clone();
    for (k, r) in results.iter().enumerate() {
        let nu = r.summary.nu;
        let Some(d) = &r.diagnostics else {
            failures.push(RunFailure {
                nu,
                message: r.summary.failure.clone().unwrap_or_else(|| "unknown failure".into()),
            });
            rows.push(failed_row(nu));
            continue;
        };
        for w in &d.warnings {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }
        let next = match results.get(k + 1) {
            Some(b) if b.diagnostics.is_some() => Some(convergence_metrics(&r.traj, &b.traj, depth)?),
            _ => None,
        };
        rows.push(LadderRow {
            nu,
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
    let diags: Vec<Option<RunDiagnostics>> = results.iter().map(|r| r.diagnostics.clone()).collect();
    let summaries: Vec<RunSummary> = results.iter().map(|r| r.summary.clone()).collect();
    let (trends, flags) = assess(&exp.config, &rows, &diags, &summaries);
    Ok(ExperimentReport {
        manifest_hash: manifest.hash.clone(),
        rows,
        trends,
        flags,
        failures,
        warnings,
        recomputed: results.iter().filter(|r| r.recomputed).map(|r| r.summary.nu).collect(),
    })
}

fn write_report(root: &Path, manifest: &Manifest, report: &ExperimentReport) -> Result<()> {
    ladder_table(&report.rows, Some(manifest.csv_comment())).write(&root.join(LADDER_FILE))?;
    atomic_write(
        &root.join(REPORT_FILE),
        &serde_json::to_vec_pretty(report).expect("report serializes"),
    )
}

/// Completes a stored experiment: runs whose outputs are missing are
/// recomputed, everything else is loaded.
pub fn resume(dir: &Path) -> Result<ExperimentReport> {
    let manifest = Manifest::load(dir)?;
    let mut config = manifest.config.clone();
    config.output = dir.to_path_buf();
    config.resume = true;
    run_ladder(&config)
}

/// Outcome of re-verifying stored outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub root: PathBuf,
    pub violations: Vec<String>,
    pub flags: Option<AcceptanceFlags>,
    pub failures: Vec<RunFailure>,
}

impl CheckReport {
    pub fn consistent(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn passed(&self) -> bool {
        self.consistent() && self.flags.is_some_and(|f| f.passed())
    }
}

fn check_csv_header(path: &Path, comment: &str, columns: &[&str], violations: &mut Vec<String>) -> Option<CsvTable> {
    match CsvTable::read(path) {
        Ok(t) => {
            if t.comment.as_deref() != Some(comment) {
                violations.push(format!("{}: header does not carry {comment}", path.display()));
            }
            if t.columns != columns {
                violations.push(format!("{}: unexpected columns {:?}", path.display(), t.columns));
            }
            Some(t)
        }
        Err(e) => {
            violations.push(e.to_string());
            None
        }
    }
}

/// Re-verifies invariants on a stored experiment without recomputing runs.
///
/// Manifest integrity problems are errors; everything else is collected as
/// violations.
pub fn check(dir: &Path) -> Result<CheckReport> {
    let manifest = Manifest::load(dir)?;
    let mut config = manifest.config.clone();
    config.output = dir.to_path_buf();
    let exp = config.resolve()?;
    if Manifest::new(&exp).hash != manifest.hash {
        return Err(Error::ManifestMismatch(
            "manifest was written by a different version or with different conventions".into(),
        ));
    }
    let comment = manifest.csv_comment();
    let mut v = Vec::new();
    let mut results = Vec::new();
    for (k, &nu) in config.viscosities.iter().enumerate() {
        let rd = store::run_dir(dir, k);
        let summary = match store::load_summary(&rd) {
            Ok(s) => s,
            Err(e) => {
                v.push(format!("nu={nu}: {e}"));
                continue;
            }
        };
        if summary.nu != nu {
            v.push(format!("nu={nu}: summary records nu={}", summary.nu));
        }
        for f in store::missing_files(&rd, &summary) {
            v.push(format!("nu={nu}: missing {f}"));
        }
        let ledger = check_csv_header(&rd.join(store::LEDGER_FILE), &comment, &crate::solver::LEDGER_COLUMNS, &mut v);
        if summary.status == RunStatus::Complete {
            check_csv_header(&rd.join(store::RUN_FILE), &comment, &crate::diagnostics::RUN_COLUMNS, &mut v);
        }
        if let Some(t) = ledger {
            // E_k + D_k <= E_0 (1 + tol k) on the stored ledger.
            let e = t.column("E").unwrap_or_default();
            let d = t.column("cum_dissipation").unwrap_or_default();
            if let Some(&e0) = e.first() {
                let bad = e
                    .iter()
                    .zip(&d)
                    .enumerate()
                    .any(|(k, (ek, dk))| ek + dk > e0 + crate::solver::ENERGY_TOLERANCE * e0 * k as f64);
                if bad && summary.status == RunStatus::Complete {
                    v.push(format!("nu={nu}: stored ledger violates the energy inequality"));
                }
            }
        }
        let traj = match store::load_trajectory(&rd, &summary, &exp.solver_config(nu)) {
            Ok(t) => t,
            Err(e) => {
                v.push(format!("nu={nu}: {e}"));
                continue;
            }
        };
        if traj.snapshots.len() != summary.snapshot_steps.len() {
            v.push(format!("nu={nu}: snapshot count does not match summary"));
        }
        let diagnostics = match summary.status {
            RunStatus::Complete => match store::load_diagnostics(&rd) {
                Ok(d) => {
                    if d.kato_total > d.global_total * (1.0 + 1e-12) {
                        v.push(format!("nu={nu}: strip dissipation exceeds global dissipation"));
                    }
                    Some(d)
                }
                Err(e) => {
                    v.push(format!("nu={nu}: {e}"));
                    None
                }
            },
            RunStatus::Failed => None,
        };
        results.push(RunResult {
            summary,
            traj,
            diagnostics,
            recomputed: false,
        });
    }
    if results.len() != config.viscosities.len() {
        return Ok(CheckReport {
            root: dir.to_path_buf(),
            violations: v,
            flags: None,
            failures: Vec::new(),
        });
    }
    let report = aggregate(&exp, &manifest, &results)?;
    if let Some(t) = check_csv_header(&dir.join(LADDER_FILE), &comment, &LADDER_COLUMNS, &mut v) {
        let expected = ladder_table(&report.rows, Some(comment.clone()));
        if t.rows.len() != config.viscosities.len() {
            v.push(format!("{LADDER_FILE}: {} rows for {} viscosities", t.rows.len(), config.viscosities.len()));
        } else if t.to_string() != expected.to_string() {
            v.push(format!("{LADDER_FILE}: rows differ from values recomputed from stored runs"));
        }
    }
    let path = dir.join(REPORT_FILE);
    match std::fs::read(&path)
        .map_err(|e| Error::io(&path, e))
        .and_then(|b| serde_json::from_slice::<ExperimentReport>(&b).map_err(|e| Error::format(&path, e.to_string())))
    {
        Ok(stored) => {
            if stored.flags != report.flags {
                v.push(format!("{REPORT_FILE}: stored flags differ from recomputed flags"));
            }
        }
        Err(e) => v.push(e.to_string()),
    }
    Ok(CheckReport {
        root: dir.to_path_buf(),
        violations: v,
        flags: Some(report.flags),
        failures: report.failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_bound_rules() {
        assert_eq!(ladder_bound(&[1.0]), Some(1.0));
        assert_eq!(ladder_bound(&[3.0, 2.0, 1.0]), Some(3.0));
        // Increments 0.2, 0.1: tail 0.1 * 0.5 / 0.5.
        let b = ladder_bound(&[1.0, 1.2, 1.3]).unwrap();
        assert!((b - 1.4).abs() < 1e-12);
        assert_eq!(ladder_bound(&[1.0, 1.1, 1.3]), None);
        assert_eq!(ladder_bound(&[1.0, 1.1]), None);
        assert_eq!(ladder_bound(&[1.0, f64::NAN]), None);
    }

    #[test]
    fn flags_report_failures_by_name() {
        let f = AcceptanceFlags {
            all_runs_succeeded: true,
            energy_inequality: true,
            balance_closes: false,
            near_wall_bound: true,
            kato_decreasing: Some(true),
            kato_slope_positive: None,
            global_decreasing: Some(false),
            global_slope_positive: Some(true),
            l3_decreasing: None,
            trackers_bounded: Some(true),
        };
        assert!(!f.passed());
        assert_eq!(f.failures(), vec!["balance_closes", "global_decreasing"]);
    }
}
