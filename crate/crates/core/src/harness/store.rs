//! Per-run output directories.
//!
//! ```text
//! runs/nu_00/snapshots/snap_00000.bin ...
//! runs/nu_00/ledger.csv
//! runs/nu_00/run.csv            (only for successful runs)
//! runs/nu_00/diagnostics.json   (only for successful runs)
//! runs/nu_00/summary.json       written last; marks the run as finished
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{run_table, RunDiagnostics};
use crate::error::{Error, Result};
use crate::fields::{snapshot, ChannelGrid};
use crate::io::{atomic_write, CsvTable};
use crate::solver::{LedgerRow, SolverConfig, Trajectory, LEDGER_COLUMNS};

pub const SUMMARY_FILE: &str = "summary.json";
pub const LEDGER_FILE: &str = "ledger.csv";
pub const RUN_FILE: &str = "run.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub index: usize,
    pub nu: f64,
    pub status: RunStatus,
    pub failure: Option<String>,
    pub dt: f64,
    pub steps: u64,
    pub snapshot_steps: Vec<u64>,
    pub snapshot_files: Vec<String>,
    pub energy_inequality_excess: f64,
    pub max_step_residual: f64,
}

impl RunSummary {
    pub fn energy_inequality_holds(&self) -> bool {
        self.energy_inequality_excess <= 0.0
    }
}

pub fn runs_dir(root: &Path) -> PathBuf {
    root.join("runs")
}

pub fn run_dir(root: &Path, index: usize) -> PathBuf {
    runs_dir(root).join(format!("nu_{index:02}"))
}

fn snapshot_name(k: usize) -> String {
    format!("snap_{k:05}.bin")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    atomic_write(path, &serde_json::to_vec_pretty(value).expect("value serializes"))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))
}

/// Writes a finished (or failed) run; the summary goes last.
pub fn persist_run(
    dir: &Path,
    index: usize,
    traj: &Trajectory,
    diagnostics: Option<&RunDiagnostics>,
    failure: Option<String>,
    csv_comment: &str,
) -> Result<RunSummary> {
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let snaps = dir.join(SNAPSHOT_DIR);
    let mut files = Vec::with_capacity(traj.snapshots.len());
    for (k, (s, &step)) in traj.snapshots.iter().zip(&traj.snapshot_steps).enumerate() {
        let name = snapshot_name(k);
        snapshot::write(&snaps.join(&name), s, traj.nu(), step)?;
        files.push(name);
    }
    let mut ledger = traj.ledger_table();
    ledger.comment = Some(csv_comment.to_string());
    ledger.write(&dir.join(LEDGER_FILE))?;
    if let Some(d) = diagnostics {
        let mut t = run_table(traj, d);
        t.comment = Some(csv_comment.to_string());
        t.write(&dir.join(RUN_FILE))?;
        write_json(&dir.join(DIAGNOSTICS_FILE), d)?;
    }
    let summary = RunSummary {
        index,
        nu: traj.nu(),
        status: if failure.is_none() {
            RunStatus::Complete
        } else {
            RunStatus::Failed
        },
        failure,
        dt: traj.dt,
        steps: traj.ledger.last().map_or(0, |r| r.step),
        snapshot_steps: traj.snapshot_steps.clone(),
        snapshot_files: files,
        energy_inequality_excess: traj.energy_inequality_excess(),
        max_step_residual: traj.max_step_residual(),
    };
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

pub fn load_summary(dir: &Path) -> Result<RunSummary> {
    read_json(&dir.join(SUMMARY_FILE))
}

pub fn load_diagnostics(dir: &Path) -> Result<RunDiagnostics> {
    read_json(&dir.join(DIAGNOSTICS_FILE))
}

/// Names of files a finished run should have that are missing.
pub fn missing_files(dir: &Path, summary: &RunSummary) -> Vec<String> {
    let mut want: Vec<String> = summary
        .snapshot_files
        .iter()
        .map(|f| format!("{SNAPSHOT_DIR}/{f}"))
        .collect();
    want.push(LEDGER_FILE.into());
    if summary.status == RunStatus::Complete {
        want.push(RUN_FILE.into());
        want.push(DIAGNOSTICS_FILE.into());
    }
    want.into_iter().filter(|f| !dir.join(f).is_file()).collect()
}

/// Rebuilds a trajectory from its snapshots and ledger.
pub fn load_trajectory(dir: &Path, summary: &RunSummary, config: &SolverConfig) -> Result<Trajectory> {
    let grid = Arc::new(ChannelGrid::new(config.grid)?);
    let mut snapshots = Vec::with_capacity(summary.snapshot_files.len());
    for f in &summary.snapshot_files {
        let path = dir.join(SNAPSHOT_DIR).join(f);
        let (field, header) = snapshot::read(&path, Some(&grid))?;
        if header.grid != config.grid || header.nu != config.nu {
            return Err(Error::format(&path, "snapshot grid or viscosity does not match the manifest"));
        }
        snapshots.push(field);
    }
    let path = dir.join(LEDGER_FILE);
    let table = CsvTable::read(&path)?;
    if table.columns != LEDGER_COLUMNS {
        return Err(Error::format(&path, "unexpected ledger columns"));
    }
    let ledger = table
        .rows
        .iter()
        .enumerate()
        .map(|(k, r)| LedgerRow {
            step: k as u64,
            t: r[0],
            energy: r[1],
            step_dissipation: r[2],
            cum_dissipation: r[3],
            max_div: r[4],
            dt: r[5],
            iterations: 0,
        })
        .collect();
    Ok(Trajectory {
        config: config.clone(),
        grid,
        dt: summary.dt,
        snapshots,
        snapshot_steps: summary.snapshot_steps.clone(),
        ledger,
        failure: summary.failure.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::GridSpec;
    use crate::solver::{run, InitialCondition};

    #[test]
    fn persisted_run_loads_back_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = SolverConfig::new(0.02, GridSpec { nx: 8, ny: 32, lx: 2.0, gamma: 1.0 }, 0.05, InitialCondition::vortex_array());
        c.snapshot_every = 2;
        let t = run(&c).unwrap();
        let rd = run_dir(dir.path(), 3);
        let s = persist_run(&rd, 3, &t, None, Some("stopped".into()), "manifest_hash=abc").unwrap();
        assert_eq!(s.status, RunStatus::Failed);
        assert!(missing_files(&rd, &s).is_empty());
        assert_eq!(load_summary(&rd).unwrap(), s);
        let back = load_trajectory(&rd, &s, &c).unwrap();
        assert_eq!(back.snapshots, t.snapshots);
        assert_eq!(back.ledger.len(), t.ledger.len());
        for (a, b) in back.ledger.iter().zip(&t.ledger) {
            assert_eq!((a.step, a.t, a.energy, a.cum_dissipation), (b.step, b.t, b.energy, b.cum_dissipation));
        }
        let text = std::fs::read_to_string(rd.join(LEDGER_FILE)).unwrap();
        assert!(text.starts_with("# manifest_hash=abc\n"));
        std::fs::remove_file(rd.join(SNAPSHOT_DIR).join(&s.snapshot_files[1])).unwrap();
        assert_eq!(missing_files(&rd, &s), vec![format!("{SNAPSHOT_DIR}/{}", s.snapshot_files[1])]);
    }
}
