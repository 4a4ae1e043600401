use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::interp::cubic_stencil;
use super::{FieldLayout, ScalarField};
use crate::error::{Error, Result};

/// Uniform near-wall sampling: nodes at wall distance `0, h, 2h, ..., depth`
/// next to both walls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResampleSpec {
    pub spacing: f64,
    pub depth: f64,
}

impl ResampleSpec {
    /// Spacing `width/4` over `Gamma_{8 width}` for a layer of `width`.
    pub fn for_layer(width: f64) -> Self {
        ResampleSpec {
            spacing: width / 4.0,
            depth: 8.0 * width,
        }
    }
}

/// Cubic interpolation of `field` onto the uniform near-wall nodes.
///
/// The source layout must include both wall nodes, so wall values carry over
/// exactly. The target spacing may not be coarser than the source spacing at
/// the wall.
pub fn resample_near_wall(field: &ScalarField, spec: &ResampleSpec) -> Result<ScalarField> {
    let l = &field.layout;
    let n = l.ny();
    if n < 2 || l.y[0] != -1.0 || l.y[n - 1] != 1.0 {
        return Err(Error::InvalidArgument("resampling needs wall nodes at y = -1 and y = 1".into()));
    }
    if !(spec.spacing > 0.0 && spec.depth > 0.0 && spec.depth < 1.0) {
        return Err(Error::InvalidArgument(format!("bad resample spec {spec:?}")));
    }
    let src_wall = (l.y[1] - l.y[0]).min(l.y[n - 1] - l.y[n - 2]);
    if spec.spacing > src_wall * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "target spacing {:.3e} is coarser than the source wall spacing {:.3e}",
            spec.spacing, src_wall
        )));
    }
    let m = (spec.depth / spec.spacing).round() as usize;
    let mut y = Vec::with_capacity(2 * (m + 1));
    for k in 0..=m {
        y.push(-1.0 + k as f64 * spec.spacing);
    }
    for k in (0..=m).rev() {
        y.push(1.0 - k as f64 * spec.spacing);
    }
    let nx = l.nx;
    let mut data = Array2::zeros((y.len(), nx));
    for (r, &yr) in y.iter().enumerate() {
        let st = cubic_stencil(&l.y, yr);
        for i in 0..nx {
            data[[r, i]] = st.apply(|k| field.data[[k, i]]);
        }
    }
    let h = spec.spacing;
    let extent = y
        .iter()
        .enumerate()
        .map(|(r, &yr)| {
            let lower_band = r <= m;
            let (lo_lim, hi_lim) = if lower_band {
                (-1.0, -1.0 + m as f64 * h)
            } else {
                (1.0 - m as f64 * h, 1.0)
            };
            ((yr - 0.5 * h).max(lo_lim), (yr + 0.5 * h).min(hi_lim))
        })
        .collect();
    let layout = Arc::new(FieldLayout {
        lx: l.lx,
        nx,
        x_offset: l.x_offset,
        y,
        extent,
    });
    ScalarField::new(layout, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{ChannelGrid, GridSpec};

    #[test]
    fn poiseuille_reproduced_exactly() {
        let g = ChannelGrid::new(GridSpec { nx: 4, ny: 32, lx: 2.0, gamma: 2.0 }).unwrap();
        let f = ScalarField::from_fn(Arc::new(g.u_layout()), |_, y| 1.0 - y * y);
        let h = g.hv[0] * 0.5;
        let r = resample_near_wall(&f, &ResampleSpec { spacing: h, depth: 20.0 * h }).unwrap();
        for (k, &y) in r.layout.y.iter().enumerate() {
            assert!((r.data[[k, 0]] - (1.0 - y * y)).abs() < 1e-13);
        }
        assert_eq!(r.data[[0, 0]], 0.0);
    }

    #[test]
    fn rejects_coarse_spacing() {
        let g = ChannelGrid::new(GridSpec { nx: 4, ny: 32, lx: 2.0, gamma: 2.0 }).unwrap();
        let f = ScalarField::zeros(Arc::new(g.u_layout()));
        assert!(resample_near_wall(&f, &ResampleSpec { spacing: 0.1, depth: 0.5 }).is_err());
    }
}
