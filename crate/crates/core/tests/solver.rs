use std::f64::consts::PI;

use kato_lab::fields::GridSpec;
use kato_lab::solver::{run, velocity_of, DtPolicy, InitialCondition, SolverConfig, Trajectory};
use ndarray::Array2;

fn spec(nx: usize, ny: usize, gamma: f64) -> GridSpec {
    GridSpec { nx, ny, lx: 2.0, gamma }
}

fn fixed(nu: f64, grid: GridSpec, t_end: f64, dt: f64, ic: InitialCondition) -> SolverConfig {
    let mut c = SolverConfig::new(nu, grid, t_end, ic);
    c.dt = DtPolicy::Fixed { dt };
    c.snapshot_every = 1000;
    c
}

fn finished(c: &SolverConfig) -> Trajectory {
    let t = run(c).unwrap();
    assert!(t.failure.is_none(), "{:?}", t.failure);
    assert!(t.satisfies_energy_inequality());
    t
}

#[test]
fn stokes_eigenmode_decays_at_analytic_rate() {
    let nu = 0.5;
    let mut c = fixed(nu, spec(8, 128, 1.0), 0.1, 1e-3, InitialCondition::StokesEigenmode);
    c.advection = false;
    let t = finished(&c);
    let g = &t.grid;
    let end = t.final_state().unwrap();
    assert!((end.time - 0.1).abs() < 1e-12);
    let decay = (-nu * PI * PI * 0.1 / 4.0).exp();
    let (mut err, mut norm) = (0.0, 0.0);
    for j in 0..g.ny() {
        let exact = decay * (0.5 * PI * g.yc[j]).cos();
        for i in 0..g.nx() {
            err += (end.u[[j, i]] - exact).powi(2) * g.hy[j];
            norm += exact * exact * g.hy[j];
        }
    }
    assert!(end.v.iter().all(|x| x.abs() < 1e-13));
    let rel = (err / norm).sqrt();
    assert!(rel <= 1e-4, "relative L2 error {rel:.3e}");
}

#[test]
fn eigenmode_energy_ledger_matches_dissipation() {
    let mut c = fixed(0.5, spec(8, 64, 1.0), 0.1, 5e-3, InitialCondition::StokesEigenmode);
    c.advection = false;
    let t = finished(&c);
    let last = t.ledger.last().unwrap();
    let defect = t.initial_energy() - last.energy;
    assert!((defect - last.cum_dissipation).abs() < 1e-10 * t.initial_energy());
}

/// `L2` distance of two `u` arrays with cell weights `dx hy_j`.
fn weighted_l2(a: &Array2<f64>, b: &Array2<f64>, w: &[f64]) -> f64 {
    let dx = 2.0 / a.ncols() as f64;
    let mut total = 0.0;
    for j in 0..a.nrows() {
        for i in 0..a.ncols() {
            total += (a[[j, i]] - b[[j, i]]).powi(2) * w[j] * dx;
        }
    }
    total.sqrt()
}

#[test]
fn time_self_convergence_is_second_order() {
    let base = |dt: f64| fixed(0.01, spec(16, 32, 1.0), 0.2, dt, InitialCondition::vortex_array());
    let runs: Vec<Trajectory> = [0.02, 0.01, 0.005].iter().map(|dt| finished(&base(*dt))).collect();
    let g = runs[0].grid.clone();
    let w: Vec<f64> = g.hy.to_vec();
    let diff = |a: &Trajectory, b: &Trajectory| {
        let (x, y) = (a.final_state().unwrap(), b.final_state().unwrap());
        weighted_l2(&x.u, &y.u, &w)
    };
    let e1 = diff(&runs[0], &runs[1]);
    let e2 = diff(&runs[1], &runs[2]);
    let order = (e1 / e2).log2();
    assert!(order >= 1.8, "time order {order:.3} ({e1:.3e}, {e2:.3e})");
}

/// Restricts a fine `u` onto the next-coarser grid: even columns, cell
/// average of the two fine cells in y.
fn restrict_u(fine: &Array2<f64>, hy_fine: &[f64]) -> Array2<f64> {
    let (ny, nx) = (fine.nrows() / 2, fine.ncols() / 2);
    Array2::from_shape_fn((ny, nx), |(j, i)| {
        let (a, b) = (hy_fine[2 * j], hy_fine[2 * j + 1]);
        (a * fine[[2 * j, 2 * i]] + b * fine[[2 * j + 1, 2 * i]]) / (a + b)
    })
}

#[test]
fn space_self_convergence_is_second_order() {
    let cfg = |n: usize| fixed(0.05, spec(n, n, 1.0), 0.1, 2.5e-3, InitialCondition::vortex_array());
    let runs: Vec<Trajectory> = [32, 64, 128].iter().map(|n| finished(&cfg(*n))).collect();
    let u: Vec<Array2<f64>> = runs.iter().map(|t| t.final_state().unwrap().u.clone()).collect();
    let hy: Vec<Vec<f64>> = runs.iter().map(|t| t.grid.hy.to_vec()).collect();
    let e1 = weighted_l2(&u[0], &restrict_u(&u[1], &hy[1]), &hy[0]);
    let coarse_of_fine = restrict_u(&u[2], &hy[2]);
    let e2 = weighted_l2(&u[1], &coarse_of_fine, &hy[1]);
    let order = (e1 / e2).log2();
    assert!(order >= 1.8, "space order {order:.3} ({e1:.3e}, {e2:.3e})");
}

#[test]
fn runs_are_bit_reproducible() {
    let c = fixed(0.01, spec(16, 32, 1.0), 0.05, 0.01, InitialCondition::vortex_array());
    let a = run(&c).unwrap();
    let b = run(&c).unwrap();
    assert_eq!(a.snapshots.len(), b.snapshots.len());
    for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
        assert_eq!(velocity_of(x), velocity_of(y));
        assert_eq!(x.p, y.p);
    }
    assert_eq!(a.ledger, b.ledger);
}

