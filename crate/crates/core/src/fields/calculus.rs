use std::sync::Arc;

use ndarray::Array2;

use super::{FieldLayout, RegionMask, ScalarField};
use crate::error::{Error, Result};
use crate::numerics::pairwise_sum;

/// Staggered first derivatives of a scalar field.
///
/// `ddx` sits half a cell to the right of each node; `ddy` sits between
/// consecutive y nodes and covers the interval between them. Both are
/// second-order accurate at their own locations, including at walls when the
/// field carries wall nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub ddx: ScalarField,
    pub ddy: ScalarField,
}

pub fn gradient(f: &ScalarField) -> Gradient {
    let l = &f.layout;
    let nx = l.nx;
    let dx = l.dx();
    let ddx_layout = Arc::new(FieldLayout {
        x_offset: l.x_offset + 0.5 * dx,
        ..(**l).clone()
    });
    let ddx = Array2::from_shape_fn((l.ny(), nx), |(k, i)| (f.data[[k, (i + 1) % nx]] - f.data[[k, i]]) / dx);

    let ny = l.ny();
    let mid: Vec<f64> = (0..ny - 1).map(|k| 0.5 * (l.y[k] + l.y[k + 1])).collect();
    let extent: Vec<(f64, f64)> = (0..ny - 1).map(|k| (l.y[k], l.y[k + 1])).collect();
    let ddy_layout = Arc::new(FieldLayout {
        lx: l.lx,
        nx,
        x_offset: l.x_offset,
        y: mid,
        extent,
    });
    let ddy = Array2::from_shape_fn((ny - 1, nx), |(k, i)| {
        (f.data[[k + 1, i]] - f.data[[k, i]]) / (l.y[k + 1] - l.y[k])
    });
    Gradient {
        ddx: ScalarField {
            layout: ddx_layout,
            data: ddx,
        },
        ddy: ScalarField {
            layout: ddy_layout,
            data: ddy,
        },
    }
}

/// Per-row quadrature weights `dx * extent * mask fraction`.
fn row_weights(layout: &FieldLayout, mask: Option<&RegionMask>) -> Vec<f64> {
    let dx = layout.dx();
    let frac = mask.map(|m| m.weights(layout));
    layout
        .extent
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let w = dx * (b - a).max(0.0);
            match &frac {
                Some(fr) => w * fr[k],
                None => w,
            }
        })
        .collect()
}

pub(crate) fn row_sum(r: ndarray::ArrayView1<f64>) -> f64 {
    match r.as_slice() {
        Some(s) => pairwise_sum(s),
        None => pairwise_sum(&r.to_vec()),
    }
}

/// Quadrature of the field over the region (whole layout if `None`).
pub fn integrate(f: &ScalarField, mask: Option<&RegionMask>) -> f64 {
    let w = row_weights(&f.layout, mask);
    let rows: Vec<f64> = f
        .data
        .rows()
        .into_iter()
        .zip(&w)
        .map(|(r, &wk)| if wk == 0.0 { 0.0 } else { wk * row_sum(r) })
        .collect();
    pairwise_sum(&rows)
}

/// Maximum of `|f|` over nodes whose position lies in the region.
pub fn masked_max(f: &ScalarField, mask: &RegionMask) -> f64 {
    let mut m: f64 = 0.0;
    for (k, &y) in f.layout.y.iter().enumerate() {
        if mask.contains_y(y) {
            for v in f.data.row(k) {
                m = m.max(v.abs());
            }
        }
    }
    m
}

/// `L^p` norm of a scalar field over a region; `p = inf` is a masked maximum.
pub fn lp_norm(f: &ScalarField, p: f64, mask: &RegionMask) -> Result<f64> {
    lp_norm_vector(&[f], p, mask)
}

/// `L^p` norm of the pointwise Euclidean magnitude of components sharing a layout.
pub fn lp_norm_vector(components: &[&ScalarField], p: f64, mask: &RegionMask) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidArgument(format!("norm exponent p={p} must be >= 1")));
    }
    let first = components
        .first()
        .ok_or_else(|| Error::InvalidArgument("no components".into()))?;
    if components.iter().any(|c| !c.same_layout(first)) {
        return Err(Error::Incompatible("components on different layouts".into()));
    }
    let (ny, nx) = first.data.dim();
    let magnitude = Array2::from_shape_fn((ny, nx), |ix| {
        if components.len() == 1 {
            components[0].data[ix].abs()
        } else {
            components.iter().map(|c| c.data[ix] * c.data[ix]).sum::<f64>().sqrt()
        }
    });
    let mag = ScalarField {
        layout: first.layout.clone(),
        data: magnitude,
    };
    if p.is_infinite() {
        return Ok(masked_max(&mag, mask));
    }
    let powered = if p == 2.0 { mag.map(|x| x * x) } else { mag.map(|x| x.powf(p)) };
    Ok(integrate(&powered, Some(mask)).max(0.0).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{ChannelGrid, GridSpec};

    fn layout(gamma: f64, nx: usize, ny: usize) -> Arc<FieldLayout> {
        let g = ChannelGrid::new(GridSpec { nx, ny, lx: 2.0, gamma }).unwrap();
        Arc::new(g.u_layout())
    }

    #[test]
    fn constant_has_zero_gradient() {
        let f = ScalarField::from_fn(layout(2.0, 8, 16), |_, _| 3.0);
        let g = gradient(&f);
        assert!(g.ddx.data.iter().all(|v| *v == 0.0));
        assert!(g.ddy.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_y_derivative_is_one() {
        let f = ScalarField::from_fn(layout(2.0, 8, 16), |_, y| y);
        let g = gradient(&f);
        assert!(g.ddy.data.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn norms_of_constant() {
        let f = ScalarField::from_fn(layout(1.5, 8, 24), |_, _| 1.0);
        let full = RegionMask::full();
        assert!((lp_norm(&f, 3.0, &full).unwrap() - 4f64.powf(1.0 / 3.0)).abs() < 1e-12);
        assert!((lp_norm(&f, 2.0, &RegionMask::strip(0.1)).unwrap() - (2.0f64 * 2.0 * 0.1).sqrt()).abs() < 1e-12);
        assert_eq!(lp_norm(&f, 2.0, &RegionMask::union(vec![])).unwrap(), 0.0);
        assert!(lp_norm(&f, 0.5, &full).is_err());
    }
}
