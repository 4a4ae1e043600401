//! Fourier-in-x solvers: the coupled implicit Stokes system and the pressure
//! Poisson problem, one banded/tridiagonal solve per streamwise mode.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::banded::{BandedLu, BandedMatrix};
use super::operators::{divergence, pressure_gradient, Velocity};
use crate::error::{Error, Result};
use crate::fields::ChannelGrid;

type Spectrum = Vec<Vec<Complex64>>;

/// Row transforms shared by both solvers.
#[derive(Clone)]
struct RowFft {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl RowFft {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        RowFft {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    /// Forward transform of the selected rows; returns `[row][mode]`.
    fn forward(&self, a: &Array2<f64>, rows: std::ops::Range<usize>) -> Spectrum {
        rows.into_par_iter()
            .map(|j| {
                let mut buf: Vec<Complex64> = a.row(j).iter().map(|&x| Complex64::new(x, 0.0)).collect();
                self.fwd.process(&mut buf);
                buf
            })
            .collect()
    }

    /// Inverse transform of half spectra (modes `0..=n/2`), filling the rest by symmetry.
    fn inverse_real(&self, half: &[Vec<Complex64>]) -> Vec<Vec<f64>> {
        let n = self.n;
        half.par_iter()
            .map(|h| {
                let mut buf = vec![Complex64::new(0.0, 0.0); n];
                buf[..=n / 2].copy_from_slice(&h[..=n / 2]);
                buf[0].im = 0.0;
                buf[n / 2].im = 0.0;
                for k in 1..n / 2 {
                    buf[n - k] = h[k].conj();
                }
                self.inv.process(&mut buf);
                buf.into_iter().map(|c| c.re / n as f64).collect()
            })
            .collect()
    }
}

/// Symbols of the x-difference operators for mode `k`.
fn symbols(grid: &ChannelGrid, k: usize) -> (f64, Complex64, Complex64) {
    let theta = 2.0 * PI * k as f64 / grid.nx() as f64;
    let e = Complex64::from_polar(1.0, theta);
    let lam = (2.0 * theta.cos() - 2.0) / (grid.dx * grid.dx);
    let fwd = (e - 1.0) / grid.dx; // u(i+1) - u(i)
    let bwd = (Complex64::new(1.0, 0.0) - e.conj()) / grid.dx; // p(i) - p(i-1)
    (lam, fwd, bwd)
}

#[inline]
fn iu(j: usize) -> usize {
    3 * j
}
#[inline]
fn ip(j: usize) -> usize {
    3 * j + 1
}
/// Interior v face `j` in `1..ny`.
#[inline]
fn iv(j: usize) -> usize {
    3 * j - 1
}

/// Solves `sigma w - nu L w + G q = f`, `D w = c` for `(w, q)`.
pub struct StokesSolver {
    grid: Arc<ChannelGrid>,
    fft: RowFft,
    modes: Vec<BandedLu>,
}

impl StokesSolver {
    pub fn new(grid: Arc<ChannelGrid>, sigma: f64, nu: f64) -> Result<Self> {
        let nx = grid.nx();
        let modes = (0..=nx / 2)
            .into_par_iter()
            .map(|k| Self::assemble(&grid, k, sigma, nu).factorize())
            .collect::<std::result::Result<Vec<_>, usize>>()
            .map_err(|row| Error::InvalidArgument(format!("singular Stokes system at row {row}")))?;
        Ok(StokesSolver {
            fft: RowFft::new(nx),
            grid,
            modes,
        })
    }

    fn assemble(grid: &ChannelGrid, k: usize, sigma: f64, nu: f64) -> BandedMatrix {
        let ny = grid.ny();
        let n = 3 * ny - 1;
        let mut m = BandedMatrix::zeros(n, 3, 3);
        let (lam, fwd, bwd) = symbols(grid, k);
        let c = |x: f64| Complex64::new(x, 0.0);
        let (hy, hv) = (&grid.hy, &grid.hv);
        for j in 0..ny {
            let r = iu(j);
            m.add(r, r, c(sigma - nu * lam + nu * (1.0 / hv[j + 1] + 1.0 / hv[j]) / hy[j]));
            if j + 1 < ny {
                m.add(r, iu(j + 1), c(-nu / (hv[j + 1] * hy[j])));
            }
            if j > 0 {
                m.add(r, iu(j - 1), c(-nu / (hv[j] * hy[j])));
            }
            m.add(r, ip(j), bwd);
        }
        for j in 1..ny {
            let r = iv(j);
            m.add(r, r, c(sigma - nu * lam + nu * (1.0 / hy[j] + 1.0 / hy[j - 1]) / hv[j]));
            if j + 1 < ny {
                m.add(r, iv(j + 1), c(-nu / (hy[j] * hv[j])));
            }
            if j > 1 {
                m.add(r, iv(j - 1), c(-nu / (hy[j - 1] * hv[j])));
            }
            m.add(r, ip(j), c(1.0 / hv[j]));
            m.add(r, ip(j - 1), c(-1.0 / hv[j]));
        }
        for j in 0..ny {
            let r = ip(j);
            if k == 0 && j == 0 {
                // pressure is defined up to a constant
                m.add(r, r, c(1.0));
                continue;
            }
            m.add(r, iu(j), fwd);
            if j + 1 < ny {
                m.add(r, iv(j + 1), c(1.0 / hy[j]));
            }
            if j > 0 {
                m.add(r, iv(j), c(-1.0 / hy[j]));
            }
        }
        m
    }

    /// Returns `(w, q)`; `q` has zero cell-weighted mean.
    pub fn solve(&self, f: &Velocity, c: &Array2<f64>) -> (Velocity, Array2<f64>) {
        let g = &self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let fu = self.fft.forward(&f.u, 0..ny);
        let fv = self.fft.forward(&f.v, 1..ny);
        let fc = self.fft.forward(c, 0..ny);
        let cols: Vec<Vec<Complex64>> = (0..=nx / 2)
            .into_par_iter()
            .map(|k| {
                let mut b = vec![Complex64::new(0.0, 0.0); 3 * ny - 1];
                for j in 0..ny {
                    b[iu(j)] = fu[j][k];
                    b[ip(j)] = if k == 0 && j == 0 { Complex64::new(0.0, 0.0) } else { fc[j][k] };
                }
                for j in 1..ny {
                    b[iv(j)] = fv[j - 1][k];
                }
                self.modes[k].solve_in_place(&mut b);
                b
            })
            .collect();
        let gather = |idx: &dyn Fn(usize) -> usize, rows: std::ops::Range<usize>| -> Vec<Vec<Complex64>> {
            rows.map(|j| cols.iter().map(|col| col[idx(j)]).collect()).collect()
        };
        let u_rows = self.fft.inverse_real(&gather(&iu, 0..ny));
        let v_rows = self.fft.inverse_real(&gather(&iv, 1..ny));
        let p_rows = self.fft.inverse_real(&gather(&ip, 0..ny));
        let mut w = Velocity::zeros(g);
        let mut q = Array2::zeros((ny, nx));
        for j in 0..ny {
            for i in 0..nx {
                w.u[[j, i]] = u_rows[j][i];
                q[[j, i]] = p_rows[j][i];
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                w.v[[j, i]] = v_rows[j - 1][i];
            }
        }
        remove_mean(g, &mut q);
        (w, q)
    }
}

/// Subtracts the cell-weighted mean.
pub fn remove_mean(grid: &ChannelGrid, q: &mut Array2<f64>) {
    let ones = Array2::from_elem(q.dim(), 1.0);
    let mean = super::operators::cell_inner(grid, q, &ones) / (2.0 * grid.lx());
    q.mapv_inplace(|x| x - mean);
}

/// Solves `D G phi = r` (no-flux walls), one tridiagonal system per mode.
pub struct PoissonSolver {
    grid: Arc<ChannelGrid>,
    fft: RowFft,
}

impl PoissonSolver {
    pub fn new(grid: Arc<ChannelGrid>) -> Self {
        let fft = RowFft::new(grid.nx());
        PoissonSolver { grid, fft }
    }

    /// `phi` with zero weighted mean. `r` must have zero weighted mean.
    pub fn solve(&self, r: &Array2<f64>) -> Array2<f64> {
        let g = &self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let fr = self.fft.forward(r, 0..ny);
        let cols: Vec<Vec<Complex64>> = (0..=nx / 2)
            .into_par_iter()
            .map(|k| {
                let (lam, _, _) = symbols(g, k);
                let mut lower = vec![0.0; ny];
                let mut diag = vec![0.0; ny];
                let mut upper = vec![0.0; ny];
                let mut rhs: Vec<Complex64> = (0..ny).map(|j| fr[j][k]).collect();
                for j in 0..ny {
                    diag[j] = lam;
                    if j + 1 < ny {
                        let a = 1.0 / (g.hv[j + 1] * g.hy[j]);
                        upper[j] = a;
                        diag[j] -= a;
                    }
                    if j > 0 {
                        let a = 1.0 / (g.hv[j] * g.hy[j]);
                        lower[j] = a;
                        diag[j] -= a;
                    }
                }
                if k == 0 {
                    diag[0] = 1.0;
                    upper[0] = 0.0;
                    rhs[0] = Complex64::new(0.0, 0.0);
                }
                thomas(&lower, &diag, &upper, &mut rhs);
                rhs
            })
            .collect();
        let rows: Vec<Vec<Complex64>> = (0..ny).map(|j| cols.iter().map(|c| c[j]).collect()).collect();
        let real = self.fft.inverse_real(&rows);
        let mut phi = Array2::zeros((ny, nx));
        for j in 0..ny {
            for i in 0..nx {
                phi[[j, i]] = real[j][i];
            }
        }
        remove_mean(g, &mut phi);
        phi
    }

    /// Discrete Leray projection: `w - G phi` with `D G phi = D w`.
    pub fn project(&self, w: &Velocity) -> Velocity {
        let phi = self.solve(&divergence(&self.grid, w));
        let gp = pressure_gradient(&self.grid, &phi);
        w.axpy(1.0, &gp, -1.0)
    }
}

/// Tridiagonal solve with real coefficients and complex right-hand side.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [Complex64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    c[0] = upper[0] / beta;
    rhs[0] /= beta;
    for j in 1..n {
        beta = diag[j] - lower[j] * c[j - 1];
        c[j] = upper[j] / beta;
        let prev = rhs[j - 1];
        rhs[j] = (rhs[j] - prev * lower[j]) / beta;
    }
    for j in (0..n - 1).rev() {
        let next = rhs[j + 1];
        rhs[j] -= next * c[j];
    }
}
