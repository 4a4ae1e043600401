//! Channel grid, staggered flow fields, discrete derivatives and norms.
//!
//! The channel is `[0, lx) x [-1, 1]`, periodic in `x`, with no-slip walls at
//! `y = -1` and `y = 1`. Velocity lives on a MAC arrangement:
//!
//! * `u[j, i]` at `(i dx, yc_j)`, shape `(ny, nx)`
//! * `v[j, i]` at `((i + 1/2) dx, yf_j)` for `j = 0..=ny`, shape `(ny + 1, nx)`,
//!   with rows `0` and `ny` pinned to zero
//! * `p[j, i]` at `((i + 1/2) dx, yc_j)`, shape `(ny, nx)`

use std::sync::Arc;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod besov;
mod calculus;
pub mod interp;
mod region;
mod resample;
pub mod snapshot;

pub use besov::{besov_norm, BesovNorm, Shift, ShiftSet};
pub use calculus::{gradient, integrate, lp_norm, lp_norm_vector, masked_max, Gradient};
pub use region::{RegionKind, RegionMask};
pub use resample::{resample_near_wall, ResampleSpec};

/// Wall distance in the channel.
#[inline]
pub fn wall_distance(y: f64) -> f64 {
    1.0 - y.abs()
}

/// Streamwise period and half-height of the channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelGeometry {
    pub lx: f64,
    pub half_height: f64,
}

impl ChannelGeometry {
    pub fn new(lx: f64) -> Self {
        ChannelGeometry {
            lx,
            half_height: 1.0,
        }
    }

    pub fn area(&self) -> f64 {
        2.0 * self.half_height * self.lx
    }
}

/// Serializable description of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    /// tanh stretching parameter; 0 gives a uniform grid.
    pub gamma: f64,
}

/// Staggered channel grid with tanh wall clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGrid {
    pub spec: GridSpec,
    pub dx: f64,
    /// Cell faces `y_0 = -1 < ... < y_ny = 1`.
    pub yf: Vec<f64>,
    /// Cell centres.
    pub yc: Vec<f64>,
    /// Cell heights.
    pub hy: Vec<f64>,
    /// Dual heights at faces: centre to centre, wall to centre at the ends.
    pub hv: Vec<f64>,
}

impl ChannelGrid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        let GridSpec { nx, ny, lx, gamma } = spec;
        if nx < 4 || nx % 2 != 0 {
            return Err(Error::InvalidArgument(format!("nx={nx} must be even and >= 4")));
        }
        if ny < 4 {
            return Err(Error::InvalidArgument(format!("ny={ny} must be >= 4")));
        }
        if !(lx > 0.0 && lx.is_finite()) {
            return Err(Error::InvalidArgument(format!("lx={lx} must be positive")));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma={gamma} must be >= 0")));
        }
        let map = |j: usize| -> f64 {
            let s = 2.0 * j as f64 / ny as f64 - 1.0;
            if gamma < 1e-8 {
                s
            } else {
                (gamma * s).tanh() / gamma.tanh()
            }
        };
        let mut yf = vec![0.0; ny + 1];
        for j in 0..=ny / 2 {
            let y = map(j);
            yf[j] = y;
            yf[ny - j] = -y;
        }
        yf[0] = -1.0;
        yf[ny] = 1.0;
        if ny % 2 == 0 {
            yf[ny / 2] = 0.0;
        }
        let yc: Vec<f64> = (0..ny).map(|j| 0.5 * (yf[j] + yf[j + 1])).collect();
        let hy: Vec<f64> = (0..ny).map(|j| yf[j + 1] - yf[j]).collect();
        let mut hv = vec![0.0; ny + 1];
        hv[0] = yc[0] + 1.0;
        for j in 1..ny {
            hv[j] = yc[j] - yc[j - 1];
        }
        hv[ny] = 1.0 - yc[ny - 1];
        Ok(ChannelGrid {
            spec,
            dx: lx / nx as f64,
            yf,
            yc,
            hy,
            hv,
        })
    }

    pub fn nx(&self) -> usize {
        self.spec.nx
    }

    pub fn ny(&self) -> usize {
        self.spec.ny
    }

    pub fn lx(&self) -> f64 {
        self.spec.lx
    }

    pub fn geometry(&self) -> ChannelGeometry {
        ChannelGeometry::new(self.spec.lx)
    }

    /// Number of cells per wall lying entirely within wall distance `width`.
    pub fn cells_in_strip(&self, width: f64) -> usize {
        self.yf[1..].iter().take_while(|&&y| y + 1.0 <= width * (1.0 + 1e-12)).count()
    }

    /// Largest cell height (at the centreline for a clustered grid).
    pub fn max_spacing(&self) -> f64 {
        self.hy.iter().cloned().fold(0.0, f64::max)
    }

    /// Smallest `ny` (from a fixed candidate list up to `ny_cap`) and matching
    /// stretching that put `min_cells` cells inside a wall strip of `width`
    /// while keeping every cell no taller than `max_spacing`.
    pub fn sized_for_strip(
        nx: usize,
        lx: f64,
        width: f64,
        min_cells: usize,
        max_spacing: f64,
        ny_cap: usize,
    ) -> Result<ChannelGrid> {
        let mut best_cells = 0;
        let mut ny = 32;
        while ny <= ny_cap {
            if let Some(g) = Self::stretched_for(nx, ny, lx, width, min_cells)? {
                if g.max_spacing() <= max_spacing {
                    return Ok(g);
                }
            }
            let g = ChannelGrid::new(GridSpec { nx, ny, lx, gamma: 0.0 })?;
            best_cells = best_cells.max(g.cells_in_strip(width));
            ny += if ny < 128 { 16 } else { 32 };
        }
        Err(Error::UnderResolved {
            width,
            cells: best_cells,
            required: min_cells,
        })
    }

    /// Least stretching giving `min_cells` cells in the strip, if any.
    fn stretched_for(
        nx: usize,
        ny: usize,
        lx: f64,
        width: f64,
        min_cells: usize,
    ) -> Result<Option<ChannelGrid>> {
        let make = |gamma: f64| ChannelGrid::new(GridSpec { nx, ny, lx, gamma });
        let uniform = make(0.0)?;
        if uniform.cells_in_strip(width) >= min_cells {
            return Ok(Some(uniform));
        }
        let mut hi = 12.0;
        if make(hi)?.cells_in_strip(width) < min_cells {
            return Ok(None);
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if make(mid)?.cells_in_strip(width) >= min_cells {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(Some(make(hi)?))
    }

    /// u-node y coordinates with the two wall points added.
    pub fn u_nodes(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.ny() + 2);
        y.push(-1.0);
        y.extend_from_slice(&self.yc);
        y.push(1.0);
        y
    }

    fn cell_extents(&self) -> Vec<(f64, f64)> {
        (0..self.ny()).map(|j| (self.yf[j], self.yf[j + 1])).collect()
    }

    fn face_extents(&self) -> Vec<(f64, f64)> {
        let ny = self.ny();
        (0..=ny)
            .map(|j| {
                let lo = if j == 0 { -1.0 } else { self.yc[j - 1] };
                let hi = if j == ny { 1.0 } else { self.yc[j] };
                (lo, hi)
            })
            .collect()
    }

    /// Layout of the u component including zero-width wall nodes.
    pub fn u_layout(&self) -> FieldLayout {
        let mut extent = vec![(-1.0, -1.0)];
        extent.extend(self.cell_extents());
        extent.push((1.0, 1.0));
        FieldLayout {
            lx: self.lx(),
            nx: self.nx(),
            x_offset: 0.0,
            y: self.u_nodes(),
            extent,
        }
    }

    pub fn v_layout(&self) -> FieldLayout {
        FieldLayout {
            lx: self.lx(),
            nx: self.nx(),
            x_offset: 0.5 * self.dx,
            y: self.yf.clone(),
            extent: self.face_extents(),
        }
    }

    pub fn centre_layout(&self) -> FieldLayout {
        FieldLayout {
            lx: self.lx(),
            nx: self.nx(),
            x_offset: 0.5 * self.dx,
            y: self.yc.clone(),
            extent: self.cell_extents(),
        }
    }
}

/// Node positions and quadrature extents of a scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldLayout {
    pub lx: f64,
    pub nx: usize,
    /// `x_i = x_offset + i lx / nx`.
    pub x_offset: f64,
    /// Increasing y nodes.
    pub y: Vec<f64>,
    /// y-interval each node stands for in quadrature.
    pub extent: Vec<(f64, f64)>,
}

impl FieldLayout {
    /// Uniform periodic-in-x layout with nodes at `y` and extents halfway to
    /// the neighbours, clipped at the first and last node.
    pub fn with_midpoint_extents(lx: f64, nx: usize, x_offset: f64, y: Vec<f64>) -> Self {
        let n = y.len();
        let extent = (0..n)
            .map(|k| {
                let lo = if k == 0 { y[0] } else { 0.5 * (y[k - 1] + y[k]) };
                let hi = if k + 1 == n { y[n - 1] } else { 0.5 * (y[k] + y[k + 1]) };
                (lo, hi)
            })
            .collect();
        FieldLayout {
            lx,
            nx,
            x_offset,
            y,
            extent,
        }
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_offset + i as f64 * self.dx()
    }

    pub fn ny(&self) -> usize {
        self.y.len()
    }
}

/// Scalar samples on a [`FieldLayout`], rows indexed by y node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub layout: Arc<FieldLayout>,
    pub data: Array2<f64>,
}

impl ScalarField {
    pub fn new(layout: Arc<FieldLayout>, data: Array2<f64>) -> Result<Self> {
        if data.dim() != (layout.ny(), layout.nx) {
            return Err(Error::InvalidArgument(format!(
                "data shape {:?} does not match layout ({}, {})",
                data.dim(),
                layout.ny(),
                layout.nx
            )));
        }
        Ok(ScalarField { layout, data })
    }

    pub fn zeros(layout: Arc<FieldLayout>) -> Self {
        let data = Array2::zeros((layout.ny(), layout.nx));
        ScalarField { layout, data }
    }

    pub fn from_fn(layout: Arc<FieldLayout>, f: impl Fn(f64, f64) -> f64) -> Self {
        let data = Array2::from_shape_fn((layout.ny(), layout.nx), |(k, i)| f(layout.x(i), layout.y[k]));
        ScalarField { layout, data }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            layout: self.layout.clone(),
            data: self.data.mapv(f),
        }
    }

    pub fn same_layout(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout) || *self.layout == *other.layout
    }
}

/// Velocity and pressure on the staggered grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub grid: Arc<ChannelGrid>,
    pub u: Array2<f64>,
    pub v: Array2<f64>,
    pub p: Array2<f64>,
    pub time: f64,
}

impl FlowField {
    pub fn zeros(grid: Arc<ChannelGrid>) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        FlowField {
            u: Array2::zeros((ny, nx)),
            v: Array2::zeros((ny + 1, nx)),
            p: Array2::zeros((ny, nx)),
            time: 0.0,
            grid,
        }
    }

    /// u with zero wall rows appended on both sides.
    pub fn u_field(&self) -> ScalarField {
        let ny = self.grid.ny();
        let mut data = Array2::zeros((ny + 2, self.grid.nx()));
        data.slice_mut(s![1..ny + 1, ..]).assign(&self.u);
        ScalarField {
            layout: Arc::new(self.grid.u_layout()),
            data,
        }
    }

    pub fn v_field(&self) -> ScalarField {
        ScalarField {
            layout: Arc::new(self.grid.v_layout()),
            data: self.v.clone(),
        }
    }

    pub fn p_field(&self) -> ScalarField {
        ScalarField {
            layout: Arc::new(self.grid.centre_layout()),
            data: self.p.clone(),
        }
    }

    /// Both velocity components averaged to cell centres.
    pub fn centred_velocity(&self) -> (ScalarField, ScalarField) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let uc = Array2::from_shape_fn((ny, nx), |(j, i)| 0.5 * (self.u[[j, i]] + self.u[[j, (i + 1) % nx]]));
        let vc = Array2::from_shape_fn((ny, nx), |(j, i)| 0.5 * (self.v[[j, i]] + self.v[[j + 1, i]]));
        let layout = Arc::new(self.grid.centre_layout());
        (
            ScalarField {
                layout: layout.clone(),
                data: uc,
            },
            ScalarField { layout, data: vc },
        )
    }

    /// Cell divergence of the velocity.
    pub fn divergence(&self) -> Array2<f64> {
        let g = &self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        Array2::from_shape_fn((ny, nx), |(j, i)| {
            (self.u[[j, (i + 1) % nx]] - self.u[[j, i]]) / g.dx + (self.v[[j + 1, i]] - self.v[[j, i]]) / g.hy[j]
        })
    }

    pub fn max_divergence(&self) -> f64 {
        self.divergence().iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    /// Kinetic energy `1/2 |u|^2` integrated over the channel.
    pub fn energy(&self) -> f64 {
        let u = self.u_field();
        let v = self.v_field();
        0.5 * (integrate(&u.map(|x| x * x), None) + integrate(&v.map(|x| x * x), None))
    }

    /// Velocity gradient: `[grad u, grad v]` on their natural staggered nodes.
    pub fn velocity_gradient(&self) -> [Gradient; 2] {
        [gradient(&self.u_field()), gradient(&self.v_field())]
    }

    /// `|grad u|^2` integrated over the region (whole channel if `None`).
    pub fn dirichlet(&self, mask: Option<&RegionMask>) -> f64 {
        let mut parts = Vec::with_capacity(4);
        for g in self.velocity_gradient() {
            parts.push(integrate(&g.ddx.map(|x| x * x), mask));
            parts.push(integrate(&g.ddy.map(|x| x * x), mask));
        }
        crate::numerics::pairwise_sum(&parts)
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(self.v.iter()).chain(self.p.iter()).all(|x| x.is_finite())
    }

    /// Linear combination `a * self + b * other` of velocity and pressure.
    pub fn combine(&self, a: f64, other: &FlowField, b: f64) -> FlowField {
        FlowField {
            grid: self.grid.clone(),
            u: &self.u * a + &other.u * b,
            v: &self.v * a + &other.v * b,
            p: &self.p * a + &other.p * b,
            time: a * self.time + b * other.time,
        }
    }
}
