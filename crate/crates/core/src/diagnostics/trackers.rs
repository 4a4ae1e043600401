//! Boundary trackers, Hardy and pressure ratios, Besov tracks and
//! convergence metrics between trajectories.

use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::dissipation::{check_strip_resolution, snapshot_times};
use super::time_lq;
use crate::error::{Error, Result};
use crate::fields::{
    besov_norm, gradient, lp_norm, lp_norm_vector, wall_distance, FieldLayout, FlowField, RegionMask, ScalarField,
    ShiftSet,
};
use crate::foliation::{validate_strip_exponent, LayerMode};
use crate::numerics::pairwise_sum;
use crate::solver::Trajectory;

/// Spatial norms of velocity and pressure in `Gamma_{4 nu}` per snapshot and
/// their time norms (`L^4` for velocity, `L^2` for pressure).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTrack {
    /// Spatial exponent for velocity; pressure uses half of it.
    #[serde(with = "crate::io::extended_f64")]
    pub p: f64,
    pub times: Vec<f64>,
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    pub velocity_l4: f64,
    pub pressure_l2: f64,
}

/// Strip tracked by the boundary norms.
pub fn tracker_width(nu: f64) -> f64 {
    4.0 * nu
}

/// Velocity and pressure sizes in `Gamma_{4 nu}`.
///
/// Kato-layer mode uses `L^inf` in space; the smoother-layer mode uses `L^p`
/// for velocity and `L^{p/2}` for pressure with `p > 6/(3 alpha - 1)`.
pub fn boundary_regularity_track(traj: &Trajectory, mode: LayerMode, alpha: f64, p: Option<f64>) -> Result<BoundaryTrack> {
    let p = match mode {
        LayerMode::KatoLayer => f64::INFINITY,
        LayerMode::SmoothLayer { .. } => {
            let p = p.ok_or_else(|| Error::Config("smoother-layer tracking needs an exponent p".into()))?;
            validate_strip_exponent(alpha, p)?;
            p
        }
    };
    let width = tracker_width(traj.nu());
    check_strip_resolution(&traj.grid, width)?;
    let mask = RegionMask::strip(width);
    let mut velocity = Vec::with_capacity(traj.snapshots.len());
    let mut pressure = Vec::with_capacity(traj.snapshots.len());
    for s in &traj.snapshots {
        let (uc, vc) = s.centred_velocity();
        velocity.push(lp_norm_vector(&[&uc, &vc], p, &mask)?);
        pressure.push(lp_norm(&s.p_field(), p / 2.0, &mask)?);
    }
    let times = snapshot_times(traj);
    Ok(BoundaryTrack {
        p,
        velocity_l4: time_lq(&times, &velocity, 4.0),
        pressure_l2: time_lq(&times, &pressure, 2.0),
        times,
        velocity,
        pressure,
    })
}

/// Pointwise magnitude of `grad f` at the nodes of `f`: `x` differences
/// averaged over the two neighbouring half-cells, `y` differences averaged
/// over the two neighbouring intervals (one-sided at the ends).
fn gradient_magnitude_at_nodes(f: &ScalarField) -> ScalarField {
    let g = gradient(f);
    let (ny, nx) = f.data.dim();
    let data = Array2::from_shape_fn((ny, nx), |(k, i)| {
        let fx = 0.5 * (g.ddx.data[[k, i]] + g.ddx.data[[k, (i + nx - 1) % nx]]);
        let fy = if k == 0 {
            g.ddy.data[[0, i]]
        } else if k == ny - 1 {
            g.ddy.data[[ny - 2, i]]
        } else {
            let (a, b) = (f.layout.y[k] - f.layout.y[k - 1], f.layout.y[k + 1] - f.layout.y[k]);
            (b * g.ddy.data[[k - 1, i]] + a * g.ddy.data[[k, i]]) / (a + b)
        };
        (fx * fx + fy * fy).sqrt()
    });
    ScalarField {
        layout: f.layout.clone(),
        data,
    }
}

/// `||f / d||_{L^p} / ||grad f||_{L^p}` for a field vanishing on both walls.
///
/// The field must carry wall nodes. At a wall node the quotient takes the
/// value at the neighbouring node. `f = 0` gives 0.
pub fn hardy_ratio(f: &ScalarField, p: f64) -> Result<f64> {
    let l = &f.layout;
    let ny = l.ny();
    if ny < 3 || wall_distance(l.y[0]) > 1e-14 || wall_distance(l.y[ny - 1]) > 1e-14 {
        return Err(Error::InvalidArgument("Hardy ratio needs a layout with wall nodes".into()));
    }
    let scale = f.data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let trace = f.data.row(0).iter().chain(f.data.row(ny - 1).iter()).fold(0.0f64, |m, x| m.max(x.abs()));
    if trace > 1e-12 * scale {
        return Err(Error::InvalidArgument(format!(
            "field does not vanish at the walls (trace {trace:.3e})"
        )));
    }
    let q = Array2::from_shape_fn(f.data.dim(), |(k, i)| {
        let kk = if k == 0 {
            1
        } else if k == ny - 1 {
            ny - 2
        } else {
            k
        };
        f.data[[kk, i]] / wall_distance(l.y[kk])
    });
    let full = RegionMask::full();
    let num = lp_norm(&ScalarField { layout: l.clone(), data: q }, p, &full)?;
    let den = lp_norm(&gradient_magnitude_at_nodes(f), p, &full)?;
    if den == 0.0 {
        return Err(Error::InvalidArgument("field has zero gradient".into()));
    }
    Ok(num / den)
}

/// `||P||_{L^p(Omega)} / (||P||_{L^p(wall)} + ||u||^2_{L^{2p}(Omega)})` with the
/// wall trace read from the first interior pressure rows. `None` when the
/// denominator is below `1e-14`.
pub fn pressure_bound_ratio(snapshot: &FlowField, p: f64) -> Result<Option<f64>> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("p={p} must lie in (1, inf)")));
    }
    let g = &snapshot.grid;
    let full = RegionMask::full();
    let interior = lp_norm(&snapshot.p_field(), p, &full)?;
    let ny = g.ny();
    let wall_terms: Vec<f64> = snapshot
        .p
        .row(0)
        .iter()
        .chain(snapshot.p.row(ny - 1).iter())
        .map(|x| x.abs().powf(p) * g.dx)
        .collect();
    let trace = pairwise_sum(&wall_terms).powf(1.0 / p);
    let (uc, vc) = snapshot.centred_velocity();
    let vel = lp_norm_vector(&[&uc, &vc], 2.0 * p, &full)?;
    let den = trace + vel * vel;
    if den < 1e-14 {
        return Ok(None);
    }
    Ok(Some(interior / den))
}

/// Largest pressure ratio over the snapshots of a run, `None` if no snapshot
/// has a usable denominator.
pub fn max_pressure_ratio(traj: &Trajectory, p: f64) -> Result<Option<f64>> {
    let mut best: Option<f64> = None;
    for s in &traj.snapshots {
        if let Some(r) = pressure_bound_ratio(s, p)? {
            best = Some(best.map_or(r, |b: f64| b.max(r)));
        }
    }
    Ok(best)
}

/// Largest Hardy ratio of the streamwise velocity over the snapshots.
pub fn max_hardy_ratio(traj: &Trajectory, p: f64) -> Result<f64> {
    let mut best: f64 = 0.0;
    for s in &traj.snapshots {
        best = best.max(hardy_ratio(&s.u_field(), p)?);
    }
    Ok(best)
}

/// `||u||_{B^{alpha,inf}_p(Omega^h)}` of the cell-centred velocity per snapshot,
/// over the dyadic shift set starting at `h` in `y`.
pub fn besov_track(traj: &Trajectory, alpha: f64, p: f64, h: f64) -> Result<Vec<f64>> {
    let g = &traj.grid;
    let shifts = ShiftSet::dyadic(g.dx, g.lx(), h);
    let region = RegionMask::inner(h);
    traj.snapshots
        .iter()
        .map(|s| {
            let (uc, vc) = s.centred_velocity();
            Ok(besov_norm(&[&uc, &vc], alpha, p, &region, &shifts)?.total())
        })
        .collect()
}

/// Distances between two trajectories on a shared grid and time schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceMetrics {
    /// Depth `h` of the excluded wall strip.
    pub h: f64,
    /// `||u_a - u_b||_{L^3(0,T; L^3(Omega^h))}`.
    pub l3_l3: f64,
    /// `||u_a - u_b||_{L^inf(0,T; L^2(Omega))}`.
    pub linf_l2: f64,
}

/// Default interior depth for the `L^3 L^3` metric.
pub const CONVERGENCE_DEPTH: f64 = 0.1;

pub fn convergence_metrics(a: &Trajectory, b: &Trajectory, h: f64) -> Result<ConvergenceMetrics> {
    if a.grid.spec != b.grid.spec {
        return Err(Error::Incompatible(format!(
            "grids differ: {:?} vs {:?}",
            a.grid.spec, b.grid.spec
        )));
    }
    if a.snapshots.len() != b.snapshots.len() {
        return Err(Error::Incompatible(format!(
            "snapshot counts differ: {} vs {}",
            a.snapshots.len(),
            b.snapshots.len()
        )));
    }
    let times = snapshot_times(a);
    for (s, t) in b.snapshots.iter().zip(&times) {
        if (s.time - t).abs() > 1e-9 * (1.0 + t.abs()) {
            return Err(Error::Incompatible(format!("snapshot times differ: {} vs {t}", s.time)));
        }
    }
    let inner = RegionMask::inner(h);
    let mut l3 = Vec::with_capacity(times.len());
    let mut linf: f64 = 0.0;
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        let d = sa.combine(1.0, sb, -1.0);
        let (uc, vc) = d.centred_velocity();
        l3.push(lp_norm_vector(&[&uc, &vc], 3.0, &inner)?);
        linf = linf.max((2.0 * d.energy()).max(0.0).sqrt());
    }
    Ok(ConvergenceMetrics {
        h,
        l3_l3: time_lq(&times, &l3, 3.0),
        linf_l2: linf,
    })
}

/// A scalar field on a layout from a function of `y`, for tests and oracles.
pub fn profile_field(layout: Arc<FieldLayout>, f: impl Fn(f64) -> f64) -> ScalarField {
    ScalarField::from_fn(layout, |_, y| f(y))
}
