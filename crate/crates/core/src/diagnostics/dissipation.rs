//! Viscous dissipation over the channel and over wall strips.

use crate::error::{Error, Result};
use crate::fields::{ChannelGrid, FlowField, RegionMask};
use crate::foliation::LayerMode;
use crate::solver::Trajectory;

use super::trapezoid;

/// Wall strips must hold at least this many cells per wall.
pub const MIN_STRIP_CELLS: usize = 4;

/// Width of the dissipation strip: `c nu`, or `c nu^a` for a layer exponent.
pub fn strip_width(nu: f64, c: f64, mode: LayerMode) -> f64 {
    match mode {
        LayerMode::KatoLayer => c * nu,
        LayerMode::SmoothLayer { a } => c * nu.powf(a),
    }
}

pub fn check_strip_resolution(grid: &ChannelGrid, width: f64) -> Result<()> {
    let cells = grid.cells_in_strip(width);
    if cells < MIN_STRIP_CELLS {
        return Err(Error::UnderResolved {
            width,
            cells,
            required: MIN_STRIP_CELLS,
        });
    }
    Ok(())
}

/// `nu |grad u|^2` integrated over the region (whole channel for `None`).
pub fn dissipation_rate(snapshot: &FlowField, nu: f64, region: Option<&RegionMask>) -> f64 {
    nu * snapshot.dirichlet(region)
}

pub fn snapshot_times(traj: &Trajectory) -> Vec<f64> {
    traj.snapshots.iter().map(|s| s.time).collect()
}

pub fn dissipation_series(traj: &Trajectory, region: Option<&RegionMask>) -> Vec<f64> {
    traj.snapshots
        .iter()
        .map(|s| dissipation_rate(s, traj.nu(), region))
        .collect()
}

/// `nu int_0^T int_{strip} |grad u|^2` by the trapezoid rule over snapshots,
/// with the strip `Gamma_{c nu}` (or `Gamma_{c nu^a}`).
pub fn kato_dissipation(traj: &Trajectory, c: f64, mode: LayerMode) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!("strip factor c={c} must be positive")));
    }
    let width = strip_width(traj.nu(), c, mode);
    check_strip_resolution(&traj.grid, width)?;
    let mask = RegionMask::strip(width);
    Ok(trapezoid(&snapshot_times(traj), &dissipation_series(traj, Some(&mask))))
}

/// `nu int_0^T int_Omega |grad u|^2` by the trapezoid rule over snapshots.
///
/// The ledger's cumulative dissipation uses the step midpoints instead; the
/// two agree to `O(dt^2)` when every step is a snapshot.
pub fn global_dissipation(traj: &Trajectory) -> f64 {
    trapezoid(&snapshot_times(traj), &dissipation_series(traj, None))
}
