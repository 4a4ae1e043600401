//! Staggered-grid operators.
//!
//! With velocity weights `dx hy_j` (u) and `dx hv_j` (v) and cell weights
//! `dx hy_j` (p):
//!
//! * `G = -D^T`,
//! * `<L w, w> = -|grad w|^2` (the Dirichlet form of [`FlowField::dirichlet`]),
//! * `<C(U) w, w> = 0` for every `U` and `w`.
//!
//! [`FlowField::dirichlet`]: crate::fields::FlowField::dirichlet

use ndarray::Array2;

use crate::fields::ChannelGrid;

/// Velocity pair on the staggered grid; `v` rows `0` and `ny` are walls.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity {
    pub u: Array2<f64>,
    pub v: Array2<f64>,
}

impl Velocity {
    pub fn zeros(grid: &ChannelGrid) -> Self {
        Velocity {
            u: Array2::zeros((grid.ny(), grid.nx())),
            v: Array2::zeros((grid.ny() + 1, grid.nx())),
        }
    }

    pub fn axpy(&self, a: f64, other: &Velocity, b: f64) -> Velocity {
        Velocity {
            u: &self.u * a + &other.u * b,
            v: &self.v * a + &other.v * b,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().chain(self.v.iter()).fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_diff(&self, other: &Velocity) -> f64 {
        self.u
            .iter()
            .zip(other.u.iter())
            .chain(self.v.iter().zip(other.v.iter()))
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Weighted inner product `sum u a dx hy + sum v b dx hv`.
    pub fn inner(&self, other: &Velocity, grid: &ChannelGrid) -> f64 {
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut rows = Vec::with_capacity(2 * ny);
        for j in 0..ny {
            let s: Vec<f64> = (0..nx).map(|i| self.u[[j, i]] * other.u[[j, i]]).collect();
            rows.push(grid.dx * grid.hy[j] * crate::numerics::pairwise_sum(&s));
        }
        for j in 1..ny {
            let s: Vec<f64> = (0..nx).map(|i| self.v[[j, i]] * other.v[[j, i]]).collect();
            rows.push(grid.dx * grid.hv[j] * crate::numerics::pairwise_sum(&s));
        }
        crate::numerics::pairwise_sum(&rows)
    }
}

#[inline]
fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// Viscous operator `L` with no-slip walls.
pub fn laplacian(grid: &ChannelGrid, w: &Velocity) -> Velocity {
    let (nx, ny) = (grid.nx(), grid.ny());
    let dx2 = grid.dx * grid.dx;
    let mut out = Velocity::zeros(grid);
    for j in 0..ny {
        for i in 0..nx {
            let c = w.u[[j, i]];
            let xx = (w.u[[j, (i + 1) % nx]] - 2.0 * c + w.u[[j, wrap(i as isize - 1, nx)]]) / dx2;
            let up = if j + 1 < ny { w.u[[j + 1, i]] } else { 0.0 };
            let dn = if j > 0 { w.u[[j - 1, i]] } else { 0.0 };
            let yy = ((up - c) / grid.hv[j + 1] - (c - dn) / grid.hv[j]) / grid.hy[j];
            out.u[[j, i]] = xx + yy;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let c = w.v[[j, i]];
            let xx = (w.v[[j, (i + 1) % nx]] - 2.0 * c + w.v[[j, wrap(i as isize - 1, nx)]]) / dx2;
            let yy = ((w.v[[j + 1, i]] - c) / grid.hy[j] - (c - w.v[[j - 1, i]]) / grid.hy[j - 1]) / grid.hv[j];
            out.v[[j, i]] = xx + yy;
        }
    }
    out
}

/// Skew-symmetric advection `C(a) w`: volume fluxes of `a` through each
/// control-volume face times half the neighbouring value of `w`.
pub fn advection(grid: &ChannelGrid, a: &Velocity, w: &Velocity) -> Velocity {
    let (nx, ny) = (grid.nx(), grid.ny());
    let dx = grid.dx;
    let mut out = Velocity::zeros(grid);
    for j in 0..ny {
        let hy = grid.hy[j];
        for i in 0..nx {
            let ip = (i + 1) % nx;
            let im = wrap(i as isize - 1, nx);
            let fe = 0.5 * hy * (a.u[[j, i]] + a.u[[j, ip]]);
            let fw = -0.5 * hy * (a.u[[j, im]] + a.u[[j, i]]);
            let fnn = 0.5 * dx * (a.v[[j + 1, im]] + a.v[[j + 1, i]]);
            let fs = -0.5 * dx * (a.v[[j, im]] + a.v[[j, i]]);
            let wn = if j + 1 < ny { w.u[[j + 1, i]] } else { 0.0 };
            let ws = if j > 0 { w.u[[j - 1, i]] } else { 0.0 };
            out.u[[j, i]] = (fe * w.u[[j, ip]] + fw * w.u[[j, im]] + fnn * wn + fs * ws) / (2.0 * dx * hy);
        }
    }
    for j in 1..ny {
        let hv = grid.hv[j];
        let (hl, hu) = (grid.hy[j - 1], grid.hy[j]);
        for i in 0..nx {
            let ip = (i + 1) % nx;
            let im = wrap(i as isize - 1, nx);
            let fe = 0.5 * (hl * a.u[[j - 1, ip]] + hu * a.u[[j, ip]]);
            let fw = -0.5 * (hl * a.u[[j - 1, i]] + hu * a.u[[j, i]]);
            let fnn = 0.5 * dx * (a.v[[j, i]] + a.v[[j + 1, i]]);
            let fs = -0.5 * dx * (a.v[[j - 1, i]] + a.v[[j, i]]);
            out.v[[j, i]] =
                (fe * w.v[[j, ip]] + fw * w.v[[j, im]] + fnn * w.v[[j + 1, i]] + fs * w.v[[j - 1, i]]) / (2.0 * dx * hv);
        }
    }
    out
}

/// Pressure gradient `G p` at velocity nodes (zero on wall rows of `v`).
pub fn pressure_gradient(grid: &ChannelGrid, p: &Array2<f64>) -> Velocity {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = Velocity::zeros(grid);
    for j in 0..ny {
        for i in 0..nx {
            out.u[[j, i]] = (p[[j, i]] - p[[j, wrap(i as isize - 1, nx)]]) / grid.dx;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            out.v[[j, i]] = (p[[j, i]] - p[[j - 1, i]]) / grid.hv[j];
        }
    }
    out
}

/// Cell divergence `D w`.
pub fn divergence(grid: &ChannelGrid, w: &Velocity) -> Array2<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    Array2::from_shape_fn((ny, nx), |(j, i)| {
        (w.u[[j, (i + 1) % nx]] - w.u[[j, i]]) / grid.dx + (w.v[[j + 1, i]] - w.v[[j, i]]) / grid.hy[j]
    })
}

/// Weighted cell inner product `sum a b dx hy`.
pub fn cell_inner(grid: &ChannelGrid, a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let rows: Vec<f64> = (0..grid.ny())
        .map(|j| {
            let s: Vec<f64> = (0..grid.nx()).map(|i| a[[j, i]] * b[[j, i]]).collect();
            grid.dx * grid.hy[j] * crate::numerics::pairwise_sum(&s)
        })
        .collect();
    crate::numerics::pairwise_sum(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{FlowField, GridSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn setup() -> (ChannelGrid, Velocity, Velocity, Array2<f64>) {
        let g = ChannelGrid::new(GridSpec { nx: 12, ny: 10, lx: 2.0, gamma: 1.7 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut r = |shape: (usize, usize)| Array2::from_shape_fn(shape, |_| rng.gen_range(-1.0..1.0));
        let mut a = Velocity { u: r((10, 12)), v: r((11, 12)) };
        let mut b = Velocity { u: r((10, 12)), v: r((11, 12)) };
        let p = r((10, 12));
        for w in [&mut a, &mut b] {
            w.v.row_mut(0).fill(0.0);
            w.v.row_mut(10).fill(0.0);
        }
        (g, a, b, p)
    }

    #[test]
    fn gradient_is_minus_divergence_adjoint() {
        let (g, a, _, p) = setup();
        let lhs = cell_inner(&g, &divergence(&g, &a), &p);
        let rhs = -a.inner(&pressure_gradient(&g, &p), &g);
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn laplacian_matches_dirichlet_form() {
        let (g, a, _, _) = setup();
        let g = Arc::new(g);
        let lap = laplacian(&g, &a);
        let mut f = FlowField::zeros(g.clone());
        f.u = a.u.clone();
        f.v = a.v.clone();
        assert!((a.inner(&lap, &g) + f.dirichlet(None)).abs() < 1e-9);
    }

    #[test]
    fn advection_is_skew() {
        let (g, a, b, _) = setup();
        let c = advection(&g, &a, &b);
        assert!(b.inner(&c, &g).abs() < 1e-12);
    }
}
