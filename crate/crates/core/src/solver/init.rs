//! Initial conditions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::operators::Velocity;
use crate::error::{Error, Result};
use crate::fields::ChannelGrid;

/// Built-in initial states; all vanish at the walls and are divergence-free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `u = 1 - y^2`, `v = 0`.
    Poiseuille,
    /// `u = tanh(y/thickness) (1 - y^4)` plus the velocity of
    /// `psi = amplitude sin(2 pi x/lx) exp(-y^2/width^2) (1 - y^2)^2`.
    PerturbedShearLayer {
        thickness: f64,
        amplitude: f64,
        width: f64,
    },
    /// Velocity of `psi = amplitude (1 - y^2)^2 sin(2 pi modes x / lx)`.
    WallBoundedVortexArray { modes: usize, amplitude: f64 },
    /// `u = cos(pi y / 2)`, the slowest Stokes mode of the channel.
    StokesEigenmode,
}

impl InitialCondition {
    pub fn shear_layer() -> Self {
        InitialCondition::PerturbedShearLayer {
            thickness: 0.1,
            amplitude: 0.05,
            width: 0.2,
        }
    }

    pub fn vortex_array() -> Self {
        InitialCondition::WallBoundedVortexArray {
            modes: 1,
            amplitude: 0.5,
        }
    }

    /// Parses the identifiers accepted in config files.
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "poiseuille" => Ok(InitialCondition::Poiseuille),
            "perturbed_shear_layer" => Ok(Self::shear_layer()),
            "wall_bounded_vortex_array" => Ok(Self::vortex_array()),
            "stokes_eigenmode" => Ok(InitialCondition::StokesEigenmode),
            other => Err(Error::Config(format!(
                "unknown initial condition '{other}' (expected poiseuille, perturbed_shear_layer, wall_bounded_vortex_array or stokes_eigenmode)"
            ))),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            InitialCondition::Poiseuille => "poiseuille",
            InitialCondition::PerturbedShearLayer { .. } => "perturbed_shear_layer",
            InitialCondition::WallBoundedVortexArray { .. } => "wall_bounded_vortex_array",
            InitialCondition::StokesEigenmode => "stokes_eigenmode",
        }
    }
}

/// Samples the initial velocity on the grid. Stream-function parts are
/// differenced from corner values, so they are discretely divergence-free.
pub fn initial_velocity(grid: &ChannelGrid, ic: &InitialCondition) -> Result<Velocity> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let lx = grid.lx();
    let mut w = Velocity::zeros(grid);
    let add_stream = |w: &mut Velocity, psi: &dyn Fn(f64, f64) -> f64| {
        let corner = |i: usize, j: usize| psi(i as f64 * grid.dx, grid.yf[j]);
        for j in 0..ny {
            for i in 0..nx {
                w.u[[j, i]] += (corner(i, j + 1) - corner(i, j)) / grid.hy[j];
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                w.v[[j, i]] -= (corner(i + 1, j) - corner(i, j)) / grid.dx;
            }
        }
    };
    match *ic {
        InitialCondition::Poiseuille => {
            for j in 0..ny {
                w.u.row_mut(j).fill(1.0 - grid.yc[j] * grid.yc[j]);
            }
        }
        InitialCondition::StokesEigenmode => {
            for j in 0..ny {
                w.u.row_mut(j).fill((0.5 * PI * grid.yc[j]).cos());
            }
        }
        InitialCondition::PerturbedShearLayer {
            thickness,
            amplitude,
            width,
        } => {
            if !(thickness > 0.0 && width > 0.0) {
                return Err(Error::Config("shear layer thickness and width must be positive".into()));
            }
            if grid.max_spacing() > 0.5 * thickness {
                return Err(Error::UnderResolved {
                    width: thickness,
                    cells: (thickness / grid.max_spacing()).floor() as usize,
                    required: 2,
                });
            }
            for j in 0..ny {
                let y = grid.yc[j];
                w.u.row_mut(j).fill((y / thickness).tanh() * (1.0 - y.powi(4)));
            }
            if amplitude != 0.0 {
                let psi = move |x: f64, y: f64| {
                    amplitude * (2.0 * PI * x / lx).sin() * (-(y * y) / (width * width)).exp() * (1.0 - y * y).powi(2)
                };
                add_stream(&mut w, &psi);
            }
        }
        InitialCondition::WallBoundedVortexArray { modes, amplitude } => {
            if modes == 0 {
                return Err(Error::Config("vortex array needs at least one mode".into()));
            }
            let m = modes as f64;
            let psi = move |x: f64, y: f64| amplitude * (1.0 - y * y).powi(2) * (2.0 * PI * m * x / lx).sin();
            add_stream(&mut w, &psi);
        }
    }
    Ok(w)
}
