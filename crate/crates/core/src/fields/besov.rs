use serde::{Deserialize, Serialize};

use super::interp::cubic_stencil;
use super::{lp_norm_vector, RegionMask, ScalarField};
use crate::error::{Error, Result};
use crate::numerics::pairwise_sum;

/// A translation: whole grid cells in periodic `x`, a length in `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shift {
    pub x_cells: i64,
    pub y: f64,
}

/// Finite set of translations over which the Besov supremum is taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSet {
    pub shifts: Vec<Shift>,
}

impl ShiftSet {
    /// Dyadic ladder: `x` shifts `dx, 2dx, 4dx, ... <= lx/8`; `y` shifts
    /// `±delta, ±2 delta, ... <= 0.25`; plus every `(x, ±y)` combination.
    pub fn dyadic(dx: f64, lx: f64, delta: f64) -> Self {
        let mut xs = Vec::new();
        let mut c = 1i64;
        while c as f64 * dx <= lx / 8.0 * (1.0 + 1e-12) {
            xs.push(c);
            c *= 2;
        }
        let mut ys = Vec::new();
        let mut h = delta;
        while h <= 0.25 * (1.0 + 1e-12) {
            ys.push(h);
            h *= 2.0;
        }
        let mut shifts = Vec::new();
        for &x in &xs {
            shifts.push(Shift { x_cells: x, y: 0.0 });
        }
        for &y in &ys {
            shifts.push(Shift { x_cells: 0, y });
            shifts.push(Shift { x_cells: 0, y: -y });
        }
        for &x in &xs {
            for &y in &ys {
                shifts.push(Shift { x_cells: x, y });
                shifts.push(Shift { x_cells: x, y: -y });
            }
        }
        ShiftSet { shifts }
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovNorm {
    pub lp: f64,
    pub seminorm: f64,
    /// Shift attaining the seminorm.
    pub worst: Option<Shift>,
}

impl BesovNorm {
    pub fn total(&self) -> f64 {
        self.lp + self.seminorm
    }
}

/// `||f||_{L^p(R)} + max_shift ||f(.+h) - f||_{L^p(R ∩ (R-h))} / |h|^alpha`.
///
/// Components share one layout and are combined by Euclidean magnitude.
/// Shifted values use an exact index shift in `x` and cubic interpolation in
/// `y`; a node contributes only if both it and its shifted image lie in the
/// region and inside the node range.
pub fn besov_norm(
    components: &[&ScalarField],
    alpha: f64,
    p: f64,
    region: &RegionMask,
    shifts: &ShiftSet,
) -> Result<BesovNorm> {
    if shifts.is_empty() {
        return Err(Error::InvalidArgument("empty shift set".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha={alpha} must lie in (0, 1)")));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("p={p} must be finite and >= 1")));
    }
    let lp = lp_norm_vector(components, p, region)?;
    let layout = &components[0].layout;
    let nx = layout.nx;
    let dx = layout.dx();
    let weights = region.weights(layout);
    let ymin = layout.y[0];
    let ymax = *layout.y.last().unwrap();

    let mut seminorm: f64 = 0.0;
    let mut worst = None;
    for s in &shifts.shifts {
        let mag = ((s.x_cells as f64 * dx).powi(2) + s.y * s.y).sqrt();
        if mag == 0.0 {
            continue;
        }
        let mut rows = Vec::with_capacity(layout.ny());
        for (k, &y) in layout.y.iter().enumerate() {
            let (a, b) = layout.extent[k];
            let w = dx * (b - a).max(0.0) * weights[k];
            let ys = y + s.y;
            if w == 0.0 || ys < ymin || ys > ymax || !region.contains_y(ys) {
                continue;
            }
            let st = cubic_stencil(&layout.y, ys);
            let mut acc = vec![0.0; nx];
            for c in components {
                for i in 0..nx {
                    let is = (i as i64 + s.x_cells).rem_euclid(nx as i64) as usize;
                    let shifted = st.apply(|r| c.data[[r, is]]);
                    let d = shifted - c.data[[k, i]];
                    acc[i] += d * d;
                }
            }
            let powered: Vec<f64> = acc.iter().map(|q| q.sqrt().powf(p)).collect();
            rows.push(w * pairwise_sum(&powered));
        }
        let val = pairwise_sum(&rows).powf(1.0 / p) / mag.powf(alpha);
        if val > seminorm {
            seminorm = val;
            worst = Some(*s);
        }
    }
    Ok(BesovNorm { lp, seminorm, worst })
}
