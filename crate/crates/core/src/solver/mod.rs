//! Incompressible Navier-Stokes in the periodic channel.
//!
//! Each step solves the implicit midpoint rule for `w = (u^n + u^{n+1}) / 2`:
//!
//! ```text
//! (2/dt) w - nu L w + G q = (2/dt) u^n - C(w) w,      D w = D u^n / 2
//! ```
//!
//! by fixed-point iteration on the advection term, each iterate being one
//! coupled Stokes solve per streamwise Fourier mode. Since `C` is skew and
//! `G = -D^T`, the discrete energy obeys
//! `E^{n+1} - E^n + dt nu |grad w|^2 = 0` up to the iteration tolerance.

use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{ChannelGrid, FlowField, GridSpec};
use crate::io::CsvTable;

pub mod banded;
pub mod init;
pub mod operators;
pub mod stokes;

pub use init::{initial_velocity, InitialCondition};
use operators::{advection, divergence, laplacian, pressure_gradient, Velocity};
use stokes::{PoissonSolver, StokesSolver};

/// Per-step energy tolerance relative to the initial energy.
pub const ENERGY_TOLERANCE: f64 = 1e-8;

/// Runs abort once the advective Courant number exceeds this.
pub const CFL_ABORT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DtPolicy {
    /// Step fixed from the initial state's Courant number, then shortened so
    /// that an integer number of steps reaches the end time.
    Cfl { cfl: f64 },
    Fixed { dt: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub nu: f64,
    pub grid: GridSpec,
    pub t_end: f64,
    pub dt: DtPolicy,
    /// Snapshot every this many steps (the final state is always kept).
    pub snapshot_every: usize,
    pub initial: InitialCondition,
    /// `false` drops the nonlinear term (Stokes flow).
    #[serde(default = "default_true")]
    pub advection: bool,
    #[serde(default = "default_tol")]
    pub fixed_point_tol: f64,
    #[serde(default = "default_iters")]
    pub max_fixed_point_iters: usize,
}

fn default_true() -> bool {
    true
}
fn default_tol() -> f64 {
    1e-12
}
fn default_iters() -> usize {
    100
}

impl SolverConfig {
    pub fn new(nu: f64, grid: GridSpec, t_end: f64, initial: InitialCondition) -> Self {
        SolverConfig {
            nu,
            grid,
            t_end,
            dt: DtPolicy::Cfl { cfl: 0.5 },
            snapshot_every: 4,
            initial,
            advection: true,
            fixed_point_tol: default_tol(),
            max_fixed_point_iters: default_iters(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::Config(format!("viscosity {} must be positive", self.nu)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("end time {} must be >= 0", self.t_end)));
        }
        match self.dt {
            DtPolicy::Cfl { cfl } if !(cfl > 0.0 && cfl <= 0.5) => {
                return Err(Error::Config(format!("CFL number {cfl} must lie in (0, 0.5]")));
            }
            DtPolicy::Fixed { dt } if !(dt > 0.0 && dt.is_finite()) => {
                return Err(Error::Config(format!("time step {dt} must be positive")));
            }
            _ => {}
        }
        if self.snapshot_every == 0 {
            return Err(Error::Config("snapshot_every must be >= 1".into()));
        }
        if !(self.fixed_point_tol > 0.0) || self.max_fixed_point_iters == 0 {
            return Err(Error::Config("fixed-point tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }
}

/// Advective rate `max (|u|/dx + |v|/hy)` over cells.
pub fn advective_rate(grid: &ChannelGrid, w: &Velocity) -> f64 {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut r: f64 = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let uc = 0.5 * (w.u[[j, i]] + w.u[[j, (i + 1) % nx]]);
            let vc = 0.5 * (w.v[[j, i]] + w.v[[j + 1, i]]);
            r = r.max(uc.abs() / grid.dx + vc.abs() / grid.hy[j]);
        }
    }
    r
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub next: Velocity,
    pub midpoint: Velocity,
    pub iterations: usize,
    /// `nu |grad w|^2 dt` at the midpoint state.
    pub dissipation: f64,
}

/// Prefactorized time stepper for one `(grid, nu, dt)`.
pub struct Stepper {
    pub grid: Arc<ChannelGrid>,
    pub nu: f64,
    pub dt: f64,
    pub advection: bool,
    tol: f64,
    max_iters: usize,
    stokes: StokesSolver,
    poisson: PoissonSolver,
}

impl Stepper {
    pub fn new(grid: Arc<ChannelGrid>, nu: f64, dt: f64, advection: bool, tol: f64, max_iters: usize) -> Result<Self> {
        let stokes = StokesSolver::new(grid.clone(), 2.0 / dt, nu)?;
        let poisson = PoissonSolver::new(grid.clone());
        Ok(Stepper {
            grid,
            nu,
            dt,
            advection,
            tol,
            max_iters,
            stokes,
            poisson,
        })
    }

    pub fn poisson(&self) -> &PoissonSolver {
        &self.poisson
    }

    /// Instantaneous pressure `P(w)`: `D G P = D (nu L w - C(w) w)`.
    pub fn pressure(&self, w: &Velocity) -> Array2<f64> {
        self.rhs(w).1
    }

    /// Right-hand side `nu L w - C(w) w - G P(w)` and `P(w)`.
    pub fn rhs(&self, w: &Velocity) -> (Velocity, Array2<f64>) {
        let (visc, adv, grad, p) = self.rhs_parts(w);
        (visc.axpy(1.0, &adv, -1.0).axpy(1.0, &grad, -1.0), p)
    }

    /// `(nu L w, C(w) w, G P(w), P(w))` separately.
    pub fn rhs_parts(&self, w: &Velocity) -> (Velocity, Velocity, Velocity, Array2<f64>) {
        let g = &self.grid;
        let mut visc = laplacian(g, w);
        visc.u.mapv_inplace(|x| x * self.nu);
        visc.v.mapv_inplace(|x| x * self.nu);
        let adv = if self.advection {
            advection(g, w, w)
        } else {
            Velocity::zeros(g)
        };
        let f = visc.axpy(1.0, &adv, -1.0);
        let p = self.poisson.solve(&divergence(g, &f));
        let grad = pressure_gradient(g, &p);
        (visc, adv, grad, p)
    }

    pub fn step(&self, w: &Velocity, prev: Option<&Velocity>, time: f64) -> Result<StepOutcome> {
        let g = &self.grid;
        let sigma = 2.0 / self.dt;
        let mut base = w.clone();
        base.u.mapv_inplace(|x| x * sigma);
        base.v.mapv_inplace(|x| x * sigma);
        let c = divergence(g, w).mapv(|x| 0.5 * x);

        let mut guess = match prev {
            Some(p) => w.axpy(1.5, p, -0.5).axpy(0.5, w, 0.5),
            None => w.clone(),
        };
        let mut iterations = 0;
        let mut converged = !self.advection;
        let mut change;
        loop {
            iterations += 1;
            let f = if self.advection {
                base.axpy(1.0, &advection(g, &guess, &guess), -1.0)
            } else {
                base.clone()
            };
            let (mid, _) = self.stokes.solve(&f, &c);
            change = mid.max_diff(&guess);
            let scale = mid.max_abs().max(f64::MIN_POSITIVE);
            guess = mid;
            if !change.is_finite() {
                break;
            }
            if !self.advection || change <= self.tol * scale {
                converged = true;
                break;
            }
            if iterations >= self.max_iters {
                converged = change <= 1e-9 * scale;
                break;
            }
        }
        if !converged {
            return Err(Error::Diverged {
                time,
                reason: format!("fixed-point iteration stalled at change {change:.3e} after {iterations} iterations"),
            });
        }
        let next = guess.axpy(2.0, w, -1.0);
        if !next.u.iter().chain(next.v.iter()).all(|x| x.is_finite()) {
            return Err(Error::Diverged {
                time,
                reason: "non-finite velocity".into(),
            });
        }
        let dissipation = self.nu * self.flow(&guess, time).dirichlet(None) * self.dt;
        Ok(StepOutcome {
            next,
            midpoint: guess,
            iterations,
            dissipation,
        })
    }

    /// Wraps velocity into a [`FlowField`] with zero pressure.
    pub fn flow(&self, w: &Velocity, time: f64) -> FlowField {
        let mut f = FlowField::zeros(self.grid.clone());
        f.u = w.u.clone();
        f.v = w.v.clone();
        f.time = time;
        f
    }

    /// Snapshot with the instantaneous pressure filled in.
    pub fn snapshot(&self, w: &Velocity, time: f64) -> FlowField {
        let mut f = self.flow(w, time);
        f.p = self.pressure(w);
        f
    }
}

pub fn velocity_of(f: &FlowField) -> Velocity {
    Velocity {
        u: f.u.clone(),
        v: f.v.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub step: u64,
    pub t: f64,
    pub energy: f64,
    pub step_dissipation: f64,
    pub cum_dissipation: f64,
    pub max_div: f64,
    pub dt: f64,
    pub iterations: usize,
}

pub const LEDGER_COLUMNS: [&str; 6] = ["t", "E", "step_dissipation", "cum_dissipation", "max_div", "dt"];

/// Snapshots and per-step energy ledger of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub config: SolverConfig,
    pub grid: Arc<ChannelGrid>,
    pub dt: f64,
    pub snapshots: Vec<FlowField>,
    pub snapshot_steps: Vec<u64>,
    pub ledger: Vec<LedgerRow>,
    /// Set when the run stopped early; the data up to that point is kept.
    pub failure: Option<String>,
}

impl Trajectory {
    pub fn nu(&self) -> f64 {
        self.config.nu
    }

    pub fn initial_energy(&self) -> f64 {
        self.ledger.first().map(|r| r.energy).unwrap_or(0.0)
    }

    /// Largest `E_k + D_k - E_0 - tol E_0 k` over the ledger; `<= 0` means the
    /// discrete energy inequality holds.
    pub fn energy_inequality_excess(&self) -> f64 {
        let e0 = self.initial_energy();
        self.ledger
            .iter()
            .map(|r| r.energy + r.cum_dissipation - e0 - ENERGY_TOLERANCE * e0 * r.step as f64)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn satisfies_energy_inequality(&self) -> bool {
        self.energy_inequality_excess() <= 0.0
    }

    /// Largest per-step `|E_{k+1} - E_k + step dissipation|`.
    pub fn max_step_residual(&self) -> f64 {
        self.ledger
            .windows(2)
            .map(|w| (w[1].energy - w[0].energy + w[1].step_dissipation).abs())
            .fold(0.0, f64::max)
    }

    pub fn ledger_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&LEDGER_COLUMNS);
        for r in &self.ledger {
            t.push(vec![r.t, r.energy, r.step_dissipation, r.cum_dissipation, r.max_div, r.dt]);
        }
        t
    }

    pub fn final_state(&self) -> Option<&FlowField> {
        self.snapshots.last()
    }
}

/// Time step and step count for a config and initial velocity.
pub fn resolve_dt(config: &SolverConfig, grid: &ChannelGrid, w0: &Velocity) -> (f64, u64) {
    let dt0 = match config.dt {
        DtPolicy::Fixed { dt } => dt,
        DtPolicy::Cfl { cfl } => {
            let rate = advective_rate(grid, w0);
            if rate > 0.0 && config.advection {
                cfl / rate
            } else {
                config.t_end.max(f64::MIN_POSITIVE)
            }
        }
    };
    if config.t_end == 0.0 {
        return (dt0, 0);
    }
    let n = (config.t_end / dt0 - 1e-9).ceil().max(1.0) as u64;
    (config.t_end / n as f64, n)
}

/// Projected initial state for a config.
pub fn init_state(config: &SolverConfig) -> Result<(Arc<ChannelGrid>, Velocity)> {
    config.validate()?;
    let grid = Arc::new(ChannelGrid::new(config.grid)?);
    let raw = initial_velocity(&grid, &config.initial)?;
    let w = PoissonSolver::new(grid.clone()).project(&raw);
    Ok((grid, w))
}

/// Runs a configuration to its end time.
///
/// Configuration errors are returned as `Err`; numerical failure mid-run ends
/// the trajectory early with [`Trajectory::failure`] set.
pub fn run(config: &SolverConfig) -> Result<Trajectory> {
    let (grid, w0) = init_state(config)?;
    let (dt, n_steps) = resolve_dt(config, &grid, &w0);
    let stepper = Stepper::new(
        grid.clone(),
        config.nu,
        dt,
        config.advection,
        config.fixed_point_tol,
        config.max_fixed_point_iters,
    )?;
    let e0 = stepper.flow(&w0, 0.0).energy();
    let mut traj = Trajectory {
        config: config.clone(),
        grid: grid.clone(),
        dt,
        snapshots: vec![stepper.snapshot(&w0, 0.0)],
        snapshot_steps: vec![0],
        ledger: vec![LedgerRow {
            step: 0,
            t: 0.0,
            energy: e0,
            step_dissipation: 0.0,
            cum_dissipation: 0.0,
            max_div: divergence(&grid, &w0).iter().fold(0.0, |m, d| m.max(d.abs())),
            dt,
            iterations: 0,
        }],
        failure: None,
    };
    let mut w = w0;
    let mut prev: Option<Velocity> = None;
    let mut cum = 0.0;
    for step in 1..=n_steps {
        let t_prev = (step - 1) as f64 * dt;
        let t = step as f64 * dt;
        if config.advection && advective_rate(&grid, &w) * dt > CFL_ABORT {
            traj.failure = Some(format!("Courant number exceeded {CFL_ABORT} at t={t_prev}"));
            break;
        }
        let out = match stepper.step(&w, prev.as_ref(), t_prev) {
            Ok(o) => o,
            Err(e) => {
                traj.failure = Some(e.to_string());
                break;
            }
        };
        cum += out.dissipation;
        let flow = stepper.flow(&out.next, t);
        traj.ledger.push(LedgerRow {
            step,
            t,
            energy: flow.energy(),
            step_dissipation: out.dissipation,
            cum_dissipation: cum,
            max_div: flow.max_divergence(),
            dt,
            iterations: out.iterations,
        });
        prev = Some(std::mem::replace(&mut w, out.next));
        if step % config.snapshot_every as u64 == 0 || step == n_steps {
            traj.snapshots.push(stepper.snapshot(&w, t));
            traj.snapshot_steps.push(step);
        }
    }
    if traj.failure.is_some() && traj.snapshot_steps.last() != Some(&(traj.ledger.len() as u64 - 1)) {
        let last = traj.ledger.last().unwrap();
        traj.snapshots.push(stepper.snapshot(&w, last.t));
        traj.snapshot_steps.push(last.step);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(ic: InitialCondition) -> SolverConfig {
        let mut c = SolverConfig::new(
            0.01,
            GridSpec {
                nx: 16,
                ny: 24,
                lx: 2.0,
                gamma: 1.5,
            },
            0.1,
            ic,
        );
        c.snapshot_every = 2;
        c
    }

    #[test]
    fn zero_end_time_gives_initial_state() {
        let mut c = small(InitialCondition::Poiseuille);
        c.t_end = 0.0;
        let t = run(&c).unwrap();
        assert_eq!(t.snapshots.len(), 1);
        assert_eq!(t.ledger.len(), 1);
    }

    #[test]
    fn energy_ledger_closes_with_advection() {
        let t = run(&small(InitialCondition::vortex_array())).unwrap();
        assert!(t.failure.is_none());
        assert!(t.satisfies_energy_inequality());
        assert!(t.max_step_residual() < 1e-10 * t.initial_energy());
        assert!(t.ledger.iter().all(|r| r.max_div < 1e-10));
    }

    #[test]
    fn poiseuille_energy_decays() {
        let t = run(&small(InitialCondition::Poiseuille)).unwrap();
        for w in t.ledger.windows(2) {
            assert!(w[1].energy <= w[0].energy);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = small(InitialCondition::Poiseuille);
        c.dt = DtPolicy::Cfl { cfl: 0.9 };
        assert!(run(&c).is_err());
        c.dt = DtPolicy::Fixed { dt: 0.01 };
        c.nu = -1.0;
        assert!(run(&c).is_err());
    }
}
