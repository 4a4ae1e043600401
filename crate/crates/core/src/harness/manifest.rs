//! Experiment manifest: the result-determining config plus every numerical
//! convention, hashed so stored outputs can be matched to their inputs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, ResolvedExperiment};
use crate::error::{Error, Result};
use crate::fields::{snapshot, GridSpec};
use crate::foliation::BetaSchedule;
use crate::io::atomic_write;

/// Version of the output directory layout.
pub const LAYOUT_VERSION: u32 = 1;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub layout_version: u32,
    pub snapshot_version: u32,
    pub crate_version: String,
    pub config: ExperimentConfig,
    pub grid: GridSpec,
    pub schedule: BetaSchedule,
    pub conventions: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    /// sha256 of the manifest serialized with this field empty.
    #[serde(default)]
    pub hash: String,
}

pub fn conventions() -> BTreeMap<String, String> {
    let c = [
        ("beta_fraction", "interior beta_n = 0.9 beta*_n, raised when the last gap needs it; beta_N = 1 (kato) or a (smooth)"),
        ("partition", "xi_N extended by 1 into the innermost strip; cutoff theta ramps over [2 nu, 4 nu] (kato) or [nu^a, 2 nu^a] (smooth)"),
        ("kernel", "exp(-1/(1-r^2/eps^2)) sampled on (dx, hy) lattice inside the ball, renormalized to unit discrete mass; hy = node spacing on uniform layouts, eps/12 with cubic y-interpolation otherwise"),
        ("shift_ladder", "besov shifts are dyadic multiples of dx in x up to the region depth"),
        ("time_integration", "implicit midpoint, coupled Stokes solve per x-mode, fixed-point advection, skew-symmetric advection"),
        ("time_step", "fixed from the initial Courant number; independent of nu"),
        ("time_quadrature", "trapezoid over stored snapshots for all diagnostics; the ledger uses step midpoints"),
        ("grid", "one shared tanh-clustered grid for the whole ladder, sized for the smallest strip"),
        ("strip_norms", "L-infinity over a strip by node membership; integrals by extent-weighted quadrature"),
        ("numerical_dissipation", "ledger reports nu |grad w|^2 per step; the per-step energy residual is reported separately and not attributed"),
        ("near_wall_constant", "C = 4 in 2(R - E) <= C int_{Gamma_{2 nu^beta_1}} |u|^2"),
        ("tracker_boundedness", "sup-over-time tracker values along the ladder are bounded when they never grow or their increments contract"),
    ];
    c.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

impl Manifest {
    pub fn new(resolved: &ResolvedExperiment) -> Self {
        let mut m = Manifest {
            layout_version: LAYOUT_VERSION,
            snapshot_version: snapshot::FORMAT_VERSION,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config: resolved.config.identity(),
            grid: resolved.grid,
            schedule: resolved.schedule.clone(),
            conventions: conventions(),
            seeds: BTreeMap::new(),
            hash: String::new(),
        };
        m.hash = m.compute_hash();
        m
    }

    pub fn compute_hash(&self) -> String {
        let blank = Manifest {
            hash: String::new(),
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&blank).expect("manifest serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Comment line written at the top of every CSV.
    pub fn csv_comment(&self) -> String {
        format!("manifest_hash={}", self.hash)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(self).expect("manifest serializes");
        atomic_write(&dir.join(MANIFEST_FILE), &json)
    }

    /// Reads a manifest and verifies its hash.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let m: Manifest = serde_json::from_slice(&bytes).map_err(|e| Error::format(&path, e.to_string()))?;
        let h = m.compute_hash();
        if h != m.hash {
            return Err(Error::ManifestMismatch(format!(
                "{}: recorded hash {} does not match contents ({h})",
                path.display(),
                m.hash
            )));
        }
        Ok(m)
    }
}
