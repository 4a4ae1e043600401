//! Resolved energy balance.
//!
//! With the glued mollifier `M w = sum_n xi_n w_n` and the cutoff `theta`,
//! the resolved energy is `R = 1/2 <theta M w, M w>` and
//!
//! ```text
//! dR/dt = <theta M w, M(nu L w)> - <theta M w, M(C(w) w)> - <theta M w, M(G P)>
//! ```
//!
//! Each term is evaluated on snapshots and integrated with the trapezoid rule.
//! Forcing fields are set to zero on wall nodes before mollifying.
//!
//! The split `I = 2E(0) - 2R(0)`, `II = 2R(T) - 2E(T)`, `III = 2 int dR/dt`
//! satisfies `I + II - III = 2E(0) - 2E(T)` whenever the balance closes.

use std::sync::Arc;

use ndarray::{s, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dissipation::{dissipation_rate, snapshot_times};
use super::trapezoid;
use crate::error::{Error, Result};
use crate::fields::{integrate, wall_distance, ChannelGrid, FieldLayout, FlowField, RegionMask};
use crate::foliation::PartitionOfUnity;
use crate::mollify::{row_taps, GluedMollifier, KernelCache, RowStencil};
use crate::numerics::pairwise_sum;
use crate::solver::operators::{advection, laplacian, pressure_gradient, Velocity};
use crate::solver::Trajectory;

/// Snapshots further apart than this many steps are rejected.
pub const MAX_SNAPSHOT_STRIDE: u64 = 10;

/// Constant in the near-wall bound on `II`.
pub const PO_CONSTANT: f64 = 4.0;

/// Relative floor of the balance tolerance.
pub const BALANCE_REL_FLOOR: f64 = 1e-6;

/// Factor on `(snapshot interval) x (largest resolved power)` in the tolerance.
pub const BALANCE_STEP_FACTOR: f64 = 5.0;

/// Per-layer mollification stencils on one layout for the rows a
/// summation-by-parts split needs.
#[derive(Debug, Clone)]
pub struct LayerStencils {
    pub layout: Arc<FieldLayout>,
    /// `stencils[n - 1][k]`.
    pub stencils: Vec<Vec<Option<RowStencil>>>,
}

impl LayerStencils {
    pub fn new(layout: Arc<FieldLayout>, partition: &PartitionOfUnity) -> Result<Self> {
        let ny = layout.ny();
        let d: Vec<f64> = layout.y.iter().map(|&y| wall_distance(y)).collect();
        let theta: Vec<f64> = d.iter().map(|&x| partition.theta.value(x)).collect();
        let near = |k: usize, f: &dyn Fn(usize) -> bool| {
            f(k) || (k > 0 && f(k - 1)) || (k + 1 < ny && f(k + 1))
        };
        let cache = KernelCache::default();
        let mut stencils = Vec::with_capacity(partition.n_layers());
        for n in 1..=partition.n_layers() {
            let rows = (0..ny)
                .into_par_iter()
                .map(|k| {
                    let needed = near(k, &|r| theta[r] != 0.0) && near(k, &|r| partition.gluing_weight(n, d[r]) != 0.0);
                    if !needed {
                        return Ok(None);
                    }
                    let kernel = cache.get(&layout, partition.layers.width(n, d[k]))?;
                    Ok(Some(RowStencil::from_taps(&row_taps(&layout, &kernel, k)?, 1.0)))
                })
                .collect::<Result<Vec<_>>>()?;
            stencils.push(rows);
        }
        Ok(LayerStencils { layout, stencils })
    }

    /// Layer-`n` mollification on the rows that have a stencil.
    pub fn apply(&self, n: usize, data: &Array2<f64>) -> Vec<Option<Vec<f64>>> {
        self.stencils[n - 1]
            .par_iter()
            .map(|s| s.as_ref().map(|s| s.apply(data)))
            .collect()
    }
}

/// `nu sum_{|k-m|<=1} <theta xi_k xi_m w_k, L w_m>` split after summation by
/// parts into the bulk term `-nu sum theta xi_k xi_m grad w_k . grad w_m`, the
/// cutoff-ramp term (`grad theta`) and the partition term (`grad(xi_k xi_m)`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DissipationSplit {
    pub bulk: f64,
    pub ramp: f64,
    pub partition: f64,
}

impl DissipationSplit {
    pub fn total(&self) -> f64 {
        self.bulk + self.ramp + self.partition
    }

    fn add(&mut self, o: DissipationSplit) {
        self.bulk += o.bulk;
        self.ramp += o.ramp;
        self.partition += o.partition;
    }
}

/// Split of the resolved dissipation for one scalar component.
///
/// `y` differences use the exact product rule
/// `delta(theta s w) = avg(theta s) delta w + avg(w) (avg(theta) delta s + avg(s) delta theta)`,
/// so the three parts sum to the summation-by-parts form exactly.
pub fn dissipation_split(
    stencils: &LayerStencils,
    partition: &PartitionOfUnity,
    data: &Array2<f64>,
    nu: f64,
) -> Result<DissipationSplit> {
    let l = &stencils.layout;
    let (ny, nx) = (l.ny(), l.nx);
    let dx = l.dx();
    let d: Vec<f64> = l.y.iter().map(|&y| wall_distance(y)).collect();
    let theta: Vec<f64> = d.iter().map(|&x| partition.theta.value(x)).collect();
    let big_n = partition.n_layers();
    let layers: Vec<Vec<Option<Vec<f64>>>> = (1..=big_n).map(|n| stencils.apply(n, data)).collect();
    let weight = |n: usize, k: usize| partition.gluing_weight(n, d[k]);
    let row = |n: usize, k: usize| -> Result<&Vec<f64>> {
        layers[n - 1][k].as_ref().ok_or(Error::InsideStrip {
            distance: d[k],
            epsilon: partition.layers.width(n, d[k]),
        })
    };

    let mut out = DissipationSplit::default();
    for kk in 1..=big_n {
        for mm in kk.saturating_sub(1).max(1)..=(kk + 1).min(big_n) {
            let s = |k: usize| weight(kk, k) * weight(mm, k);
            let mut part = DissipationSplit::default();
            // x differences: theta and s are constant along rows
            let mut xs = Vec::new();
            for k in 0..ny {
                let phi = theta[k] * s(k);
                let (a, b) = l.extent[k];
                let w = dx * (b - a).max(0.0);
                if phi == 0.0 || w == 0.0 {
                    continue;
                }
                let (wk, wm) = (row(kk, k)?, row(mm, k)?);
                let terms: Vec<f64> = (0..nx)
                    .map(|i| {
                        let ip = (i + 1) % nx;
                        (wk[ip] - wk[i]) * (wm[ip] - wm[i]) / (dx * dx)
                    })
                    .collect();
                xs.push(-nu * w * phi * pairwise_sum(&terms));
            }
            part.bulk += pairwise_sum(&xs);
            // y differences on the intervals between consecutive nodes
            let (mut bulk, mut ramp, mut pou) = (Vec::new(), Vec::new(), Vec::new());
            for k in 0..ny - 1 {
                let (t0, t1) = (theta[k], theta[k + 1]);
                let (s0, s1) = (s(k), s(k + 1));
                if t0 * s0 == 0.0 && t1 * s1 == 0.0 {
                    continue;
                }
                let h = l.y[k + 1] - l.y[k];
                let w = dx * h;
                let (a0, a1) = (row(kk, k)?, row(kk, k + 1)?);
                let (b0, b1) = (row(mm, k)?, row(mm, k + 1)?);
                let mut bulk_terms = Vec::with_capacity(nx);
                let mut cross_terms = Vec::with_capacity(nx);
                for i in 0..nx {
                    let dm = (b1[i] - b0[i]) / h;
                    bulk_terms.push((a1[i] - a0[i]) / h * dm);
                    cross_terms.push(0.5 * (a0[i] + a1[i]) * dm);
                }
                let (grad_grad, mean_grad) = (pairwise_sum(&bulk_terms), pairwise_sum(&cross_terms));
                let phibar = 0.5 * (t0 * s0 + t1 * s1);
                let dtheta = (t1 - t0) / h;
                let ds = (s1 - s0) / h;
                bulk.push(-nu * w * phibar * grad_grad);
                ramp.push(-nu * w * 0.5 * (s0 + s1) * dtheta * mean_grad);
                pou.push(-nu * w * 0.5 * (t0 + t1) * ds * mean_grad);
            }
            part.bulk += pairwise_sum(&bulk);
            part.ramp += pairwise_sum(&ramp);
            part.partition += pairwise_sum(&pou);
            out.add(part);
        }
    }
    Ok(out)
}

/// Mollifiers and layer stencils for both velocity layouts of a grid.
#[derive(Debug, Clone)]
pub struct BalanceOperators {
    pub partition: PartitionOfUnity,
    pub u: GluedMollifier,
    pub v: GluedMollifier,
    u_layers: Option<LayerStencils>,
    v_layers: Option<LayerStencils>,
}

impl BalanceOperators {
    /// `with_split` also prepares the per-layer stencils for the ramp term.
    pub fn new(grid: &ChannelGrid, partition: &PartitionOfUnity, with_split: bool) -> Result<Self> {
        let ul = Arc::new(grid.u_layout());
        let vl = Arc::new(grid.v_layout());
        let (u_layers, v_layers) = if with_split {
            (
                Some(LayerStencils::new(ul.clone(), partition)?),
                Some(LayerStencils::new(vl.clone(), partition)?),
            )
        } else {
            (None, None)
        };
        Ok(BalanceOperators {
            partition: partition.clone(),
            u: GluedMollifier::new(ul, partition)?,
            v: GluedMollifier::new(vl, partition)?,
            u_layers,
            v_layers,
        })
    }

    /// Resolved energy `1/2 int theta |M w|^2`.
    pub fn resolved_energy(&self, w: &Velocity) -> f64 {
        let mu = self.u.apply(&with_wall_rows(&w.u));
        let mv = self.v.apply(&w.v);
        0.5 * (self.u.weighted_inner(&mu, &mu) + self.v.weighted_inner(&mv, &mv))
    }

    /// `<theta M w, M f>`.
    pub fn resolved_power(&self, w: &Velocity, f: &Velocity) -> f64 {
        let mu = self.u.apply(&with_wall_rows(&w.u));
        let mv = self.v.apply(&w.v);
        let fu = self.u.apply(&with_wall_rows(&f.u));
        let fv = self.v.apply(&wall_rows_zeroed(&f.v));
        self.u.weighted_inner(&mu, &fu) + self.v.weighted_inner(&mv, &fv)
    }

    pub fn dissipation_split(&self, w: &Velocity, nu: f64) -> Result<Option<DissipationSplit>> {
        match (&self.u_layers, &self.v_layers) {
            (Some(ul), Some(vl)) => {
                let mut a = dissipation_split(ul, &self.partition, &with_wall_rows(&w.u), nu)?;
                a.add(dissipation_split(vl, &self.partition, &w.v, nu)?);
                Ok(Some(a))
            }
            _ => Ok(None),
        }
    }
}

/// u values padded with zero wall rows (the u layout).
fn with_wall_rows(u: &Array2<f64>) -> Array2<f64> {
    let (ny, nx) = u.dim();
    let mut out = Array2::zeros((ny + 2, nx));
    out.slice_mut(s![1..ny + 1, ..]).assign(u);
    out
}

fn wall_rows_zeroed(v: &Array2<f64>) -> Array2<f64> {
    let mut out = v.clone();
    let last = out.nrows() - 1;
    out.row_mut(0).fill(0.0);
    out.row_mut(last).fill(0.0);
    out
}

/// Balance terms at one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceSample {
    pub t: f64,
    pub energy: f64,
    pub resolved_energy: f64,
    /// `int_{Gamma_{2 nu^beta_1}} |u|^2`.
    pub near_wall: f64,
    /// `<theta M w, M(nu L w)>`.
    pub dissipation: f64,
    /// `-<theta M w, M(C(w) w)>`.
    pub flux: f64,
    /// `-<theta M w, M(G P)>`.
    pub pressure: f64,
    pub split: Option<DissipationSplit>,
}

impl BalanceSample {
    pub fn rhs(&self) -> f64 {
        self.dissipation + self.flux + self.pressure
    }

    /// `II` at this time minus its near-wall bound; `<= 0` when the bound holds.
    pub fn po_excess(&self) -> f64 {
        2.0 * (self.resolved_energy - self.energy) - PO_CONSTANT * self.near_wall
    }
}

pub fn balance_sample(
    ops: &BalanceOperators,
    snapshot: &FlowField,
    nu: f64,
    with_advection: bool,
) -> Result<BalanceSample> {
    let g = &snapshot.grid;
    let w = Velocity {
        u: snapshot.u.clone(),
        v: snapshot.v.clone(),
    };
    let mut visc = laplacian(g, &w);
    visc.u.mapv_inplace(|x| x * nu);
    visc.v.mapv_inplace(|x| x * nu);
    let flux = if with_advection {
        -ops.resolved_power(&w, &advection(g, &w, &w))
    } else {
        0.0
    };
    let pressure = -ops.resolved_power(&w, &pressure_gradient(g, &snapshot.p));
    let near = RegionMask::strip(2.0 * nu.powf(ops.partition.layers.betas[1]));
    let uf = snapshot.u_field();
    let vf = snapshot.v_field();
    let near_wall = integrate(&uf.map(|x| x * x), Some(&near)) + integrate(&vf.map(|x| x * x), Some(&near));
    Ok(BalanceSample {
        t: snapshot.time,
        energy: snapshot.energy(),
        resolved_energy: ops.resolved_energy(&w),
        near_wall,
        dissipation: ops.resolved_power(&w, &visc),
        flux,
        pressure,
        split: ops.dissipation_split(&w, nu)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedBalance {
    pub samples: Vec<BalanceSample>,
    pub dissipation_integral: f64,
    pub flux_integral: f64,
    pub pressure_integral: f64,
    /// Time integral of the cutoff-ramp part of the resolved dissipation.
    pub ramp_integral: Option<f64>,
    /// `|R(T) - R(0) - int dR/dt|`.
    pub residual: f64,
    pub tol_balance: f64,
    pub term_i: f64,
    pub term_ii: f64,
    pub term_iii: f64,
    /// `nu int int |grad u|^2` by the same time rule.
    pub global_dissipation: f64,
    /// `|I + II - III - 2 x global dissipation|`.
    pub reconstruction_error: f64,
    /// Largest `II(t) - C int_{Gamma} |u|^2` over snapshots.
    pub po_excess: f64,
}

impl ResolvedBalance {
    pub fn rhs_integral(&self) -> f64 {
        self.dissipation_integral + self.flux_integral + self.pressure_integral
    }

    pub fn closes(&self) -> bool {
        self.residual <= self.tol_balance
    }

    pub fn reconstructs(&self) -> bool {
        self.reconstruction_error <= self.tol_balance
    }

    pub fn po_holds(&self) -> bool {
        self.po_excess <= 0.0
    }
}

/// Resolved energy balance of a trajectory for a partition built at its `nu`.
pub fn resolved_balance(traj: &Trajectory, partition: &PartitionOfUnity, with_split: bool) -> Result<ResolvedBalance> {
    if traj.snapshots.is_empty() {
        return Err(Error::InvalidArgument("trajectory has no snapshots".into()));
    }
    if (partition.layers.nu - traj.nu()).abs() > 1e-12 * traj.nu() {
        return Err(Error::Incompatible(format!(
            "partition built for nu={} but trajectory has nu={}",
            partition.layers.nu,
            traj.nu()
        )));
    }
    if let Some(w) = traj.snapshot_steps.windows(2).find(|w| w[1] - w[0] > MAX_SNAPSHOT_STRIDE) {
        return Err(Error::InvalidArgument(format!(
            "snapshots at steps {} and {} are more than {MAX_SNAPSHOT_STRIDE} steps apart",
            w[0], w[1]
        )));
    }
    let ops = BalanceOperators::new(&traj.grid, partition, with_split)?;
    let nu = traj.nu();
    let samples = traj
        .snapshots
        .iter()
        .map(|s| balance_sample(&ops, s, nu, traj.config.advection))
        .collect::<Result<Vec<_>>>()?;
    let times = snapshot_times(traj);
    let series = |f: &dyn Fn(&BalanceSample) -> f64| -> Vec<f64> { samples.iter().map(f).collect() };
    let dissipation_integral = trapezoid(&times, &series(&|s| s.dissipation));
    let flux_integral = trapezoid(&times, &series(&|s| s.flux));
    let pressure_integral = trapezoid(&times, &series(&|s| s.pressure));
    let ramp_integral = if with_split {
        Some(trapezoid(&times, &series(&|s| s.split.map_or(0.0, |x| x.ramp))))
    } else {
        None
    };
    let rhs = dissipation_integral + flux_integral + pressure_integral;
    let (first, last) = (samples[0], *samples.last().unwrap());
    let residual = (last.resolved_energy - first.resolved_energy - rhs).abs();
    let interval = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let power = samples.iter().map(|s| s.rhs().abs()).fold(0.0, f64::max);
    let tol_balance = (BALANCE_REL_FLOOR * first.energy).max(BALANCE_STEP_FACTOR * interval * power);
    let term_i = 2.0 * (first.energy - first.resolved_energy);
    let term_ii = 2.0 * (last.resolved_energy - last.energy);
    let term_iii = 2.0 * rhs;
    let global: Vec<f64> = traj.snapshots.iter().map(|s| dissipation_rate(s, nu, None)).collect();
    let global_dissipation = trapezoid(&times, &global);
    Ok(ResolvedBalance {
        dissipation_integral,
        flux_integral,
        pressure_integral,
        ramp_integral,
        residual,
        tol_balance,
        term_i,
        term_ii,
        term_iii,
        global_dissipation,
        reconstruction_error: (term_i + term_ii - term_iii - 2.0 * global_dissipation).abs(),
        po_excess: samples.iter().map(|s| s.po_excess()).fold(f64::NEG_INFINITY, f64::max),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::GridSpec;
    use crate::foliation::{build_beta_schedule, build_layers, build_partition, LayerMode};
    use crate::solver::{run, DtPolicy, InitialCondition, SolverConfig};

    fn partition(alpha: f64, nu: f64, lx: f64) -> PartitionOfUnity {
        let sched = build_beta_schedule(alpha, LayerMode::KatoLayer).unwrap();
        let layers = build_layers(&sched, nu, &crate::fields::ChannelGeometry::new(lx)).unwrap();
        build_partition(&layers).unwrap()
    }

    #[test]
    fn zero_trajectory_has_zero_terms() {
        let mut c = SolverConfig::new(0.05, GridSpec { nx: 16, ny: 48, lx: 2.0, gamma: 1.0 }, 0.0, InitialCondition::Poiseuille);
        c.dt = DtPolicy::Fixed { dt: 0.01 };
        let mut t = run(&c).unwrap();
        for s in &mut t.snapshots {
            s.u.fill(0.0);
            s.p.fill(0.0);
        }
        let b = resolved_balance(&t, &partition(0.75, 0.05, 2.0), true).unwrap();
        assert_eq!((b.residual, b.term_i, b.term_ii, b.term_iii), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(b.ramp_integral, Some(0.0));
    }

    #[test]
    fn split_sums_to_resolved_dissipation_on_uniform_layout() {
        // v lives on a uniform layout when the grid is unstretched, so the
        // single-scale mollifier commutes with the discrete Laplacian there.
        let nu = 0.1;
        let g = ChannelGrid::new(GridSpec { nx: 32, ny: 64, lx: 2.0, gamma: 0.0 }).unwrap();
        let part = partition(0.75, nu, 2.0);
        assert_eq!(part.n_layers(), 1);
        let ops = BalanceOperators::new(&g, &part, true).unwrap();
        let mut w = Velocity::zeros(&g);
        for j in 1..g.ny() {
            let y = g.yf[j];
            for i in 0..g.nx() {
                let x = (i as f64 + 0.5) * g.dx;
                w.v[[j, i]] = (1.0 - y * y) * ((3.0 * x).sin() + (2.0 * y).cos() * (std::f64::consts::PI * x).cos());
            }
        }
        let mut lw = laplacian(&g, &w);
        lw.v.mapv_inplace(|x| x * nu);
        let direct = ops.resolved_power(&w, &lw);
        let split = ops.dissipation_split(&w, nu).unwrap().unwrap();
        assert_eq!(split.partition, 0.0);
        assert!(split.ramp != 0.0 && split.bulk < 0.0);
        assert!((split.total() - direct).abs() <= 1e-8 * direct.abs(), "{} vs {direct}", split.total());
    }

    #[test]
    fn simulated_balance_closes() {
        let nu = 0.02;
        let mut c = SolverConfig::new(nu, GridSpec { nx: 32, ny: 96, lx: 2.0, gamma: 1.5 }, 0.2, InitialCondition::vortex_array());
        c.snapshot_every = 2;
        let t = run(&c).unwrap();
        assert!(t.failure.is_none());
        let b = resolved_balance(&t, &partition(0.4, nu, 2.0), false).unwrap();
        assert!(b.closes(), "residual {} tol {}", b.residual, b.tol_balance);
        assert!(b.reconstructs(), "reconstruction {} tol {}", b.reconstruction_error, b.tol_balance);
        assert!(b.po_holds(), "po excess {}", b.po_excess);
        assert!(b.term_i >= 0.0);
    }
}
