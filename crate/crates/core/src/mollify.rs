//! Standard and multi-scale mollification on scalar fields.
//!
//! A kernel of width `eps` is the radial bump `exp(-1 / (1 - r^2/eps^2))`
//! sampled on a lattice `(a hx, b hy)` strictly inside the ball and
//! renormalized to unit discrete mass. `hx` is the field's `x` spacing, so
//! `x` taps are exact index shifts; `y` samples are cubic interpolants of the
//! field columns. Every mollification is therefore a fixed linear map of the
//! nodal values, which [`RowStencil`] stores in collapsed form.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::interp::{cubic_stencil, Stencil};
use crate::fields::{integrate, wall_distance, FieldLayout, RegionMask, ScalarField};
use crate::foliation::PartitionOfUnity;

/// Taps per source row above which the periodic convolution goes through FFT.
pub const FFT_MIN_TAPS: usize = 32;

/// Lattice samples per kernel radius in `y` on non-uniform layouts.
pub const Y_SAMPLES_PER_RADIUS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelTap {
    pub ax: i64,
    /// y offset of the tap.
    pub dy: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifierKernel {
    pub epsilon: f64,
    pub hx: f64,
    pub hy: f64,
    pub taps: Vec<KernelTap>,
}

fn bump(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r2)).exp()
    }
}

impl MollifierKernel {
    pub fn new(epsilon: f64, hx: f64, hy: f64) -> Result<Self> {
        if !(epsilon > 0.0 && hx > 0.0 && hy > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "kernel needs positive width and spacings (eps={epsilon}, hx={hx}, hy={hy})"
            )));
        }
        let na = (epsilon / hx).ceil() as i64;
        let nb = (epsilon / hy).ceil() as i64;
        let mut taps = Vec::new();
        for b in -nb..=nb {
            for a in -na..=na {
                let x = a as f64 * hx;
                let y = b as f64 * hy;
                let r2 = (x * x + y * y) / (epsilon * epsilon);
                let w = bump(r2);
                if w > 0.0 {
                    taps.push(KernelTap { ax: a, dy: y, weight: w });
                }
            }
        }
        let ws: Vec<f64> = taps.iter().map(|t| t.weight).collect();
        let mass = crate::numerics::pairwise_sum(&ws);
        for t in &mut taps {
            t.weight /= mass;
        }
        Ok(MollifierKernel {
            epsilon,
            hx,
            hy,
            taps,
        })
    }

    /// Kernel for a layout: `y` lattice on the nodes for uniform layouts,
    /// otherwise `eps / 12`.
    pub fn for_layout(layout: &FieldLayout, epsilon: f64) -> Result<Self> {
        let hy = uniform_spacing(&layout.y).unwrap_or(epsilon / Y_SAMPLES_PER_RADIUS as f64);
        Self::new(epsilon, layout.dx(), hy)
    }

    pub fn mass(&self) -> f64 {
        let ws: Vec<f64> = self.taps.iter().map(|t| t.weight).collect();
        crate::numerics::pairwise_sum(&ws)
    }

    /// Second moments `(sum w x^2, sum w y^2, sum w x y)` of the discrete kernel.
    pub fn second_moments(&self) -> (f64, f64, f64) {
        let mut m = (0.0, 0.0, 0.0);
        for t in &self.taps {
            let x = t.ax as f64 * self.hx;
            m.0 += t.weight * x * x;
            m.1 += t.weight * t.dy * t.dy;
            m.2 += t.weight * x * t.dy;
        }
        m
    }
}

fn uniform_spacing(y: &[f64]) -> Option<f64> {
    if y.len() < 2 {
        return None;
    }
    let h = (y[y.len() - 1] - y[0]) / (y.len() - 1) as f64;
    let uniform = y.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-10 * h);
    uniform.then_some(h)
}

/// One tap of a row evaluation before collapsing.
#[derive(Debug, Clone, Copy)]
pub struct TapSample {
    pub x_shift: i64,
    pub stencil: Stencil,
    pub weight: f64,
}

/// Uncollapsed taps for output row `row` of `layout`.
pub fn row_taps(layout: &FieldLayout, kernel: &MollifierKernel, row: usize) -> Result<Vec<TapSample>> {
    let y0 = layout.y[row];
    let d = wall_distance(y0);
    if d <= kernel.epsilon {
        return Err(Error::InsideStrip {
            distance: d,
            epsilon: kernel.epsilon,
        });
    }
    Ok(kernel
        .taps
        .iter()
        .map(|t| TapSample {
            x_shift: -t.ax,
            stencil: cubic_stencil(&layout.y, y0 - t.dy),
            weight: t.weight,
        })
        .collect())
}

/// Collapsed linear map producing one output row from source rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RowStencil {
    /// `(source row, [(x shift, weight)])`, sorted.
    pub terms: Vec<(usize, Vec<(i64, f64)>)>,
}

impl RowStencil {
    pub fn from_taps(taps: &[TapSample], scale: f64) -> Self {
        let mut acc: BTreeMap<(usize, i64), f64> = BTreeMap::new();
        Self::accumulate(&mut acc, taps, scale);
        Self::from_map(acc)
    }

    fn accumulate(acc: &mut BTreeMap<(usize, i64), f64>, taps: &[TapSample], scale: f64) {
        for t in taps {
            for (k, w) in t.stencil.weights.iter().enumerate() {
                if *w != 0.0 {
                    *acc.entry((t.stencil.start + k, t.x_shift)).or_insert(0.0) += scale * t.weight * w;
                }
            }
        }
    }

    fn from_map(acc: BTreeMap<(usize, i64), f64>) -> Self {
        let mut terms: Vec<(usize, Vec<(i64, f64)>)> = Vec::new();
        for ((src, off), w) in acc {
            match terms.last_mut() {
                Some((s, v)) if *s == src => v.push((off, w)),
                _ => terms.push((src, vec![(off, w)])),
            }
        }
        RowStencil { terms }
    }

    /// Evaluates the stencil against `data` (rows x nx), periodic in `x`.
    ///
    /// Source rows with at least [`FFT_MIN_TAPS`] taps are correlated in
    /// Fourier space and summed there, with one inverse transform per call.
    pub fn apply(&self, data: &Array2<f64>) -> Vec<f64> {
        let nx = data.ncols();
        let mut out = vec![0.0; nx];
        let mut spectral: Option<(Vec<Complex64>, FftPair)> = None;
        for (src, taps) in &self.terms {
            let row = data.row(*src);
            if taps.len() >= FFT_MIN_TAPS {
                let (acc, plan) = spectral.get_or_insert_with(|| (vec![Complex64::new(0.0, 0.0); nx], FftPair::new(nx)));
                plan.correlate_into(acc, row.iter().copied(), taps);
            } else {
                let n = nx as i64;
                for &(off, w) in taps {
                    for (i, o) in out.iter_mut().enumerate() {
                        let j = (i as i64 + off).rem_euclid(n) as usize;
                        *o += w * row[j];
                    }
                }
            }
        }
        if let Some((mut acc, plan)) = spectral {
            plan.inv.process(&mut acc);
            for (o, c) in out.iter_mut().zip(acc) {
                *o += c.re / nx as f64;
            }
        }
        out
    }
}

struct FftPair {
    fwd: Arc<dyn rustfft::Fft<f64>>,
    inv: Arc<dyn rustfft::Fft<f64>>,
}

impl FftPair {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        FftPair {
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    /// Adds the spectrum of `out[i] = sum_off w_off src[i + off]` (periodic) to `acc`.
    fn correlate_into(&self, acc: &mut [Complex64], src: impl Iterator<Item = f64>, taps: &[(i64, f64)]) {
        let n = acc.len();
        let mut s: Vec<Complex64> = src.map(|x| Complex64::new(x, 0.0)).collect();
        let mut k = vec![Complex64::new(0.0, 0.0); n];
        for &(off, w) in taps {
            k[off.rem_euclid(n as i64) as usize].re += w;
        }
        self.fwd.process(&mut s);
        self.fwd.process(&mut k);
        for ((a, x), y) in acc.iter_mut().zip(&s).zip(&k) {
            *a += x * y.conj();
        }
    }
}

/// Mollifies `field` on the listed rows; errors if any lies inside `Gamma_eps`.
pub fn mollify_rows(field: &ScalarField, kernel: &MollifierKernel, rows: &[usize]) -> Result<Array2<f64>> {
    let nx = field.layout.nx;
    let stencils: Vec<RowStencil> = rows
        .iter()
        .map(|&r| row_taps(&field.layout, kernel, r).map(|t| RowStencil::from_taps(&t, 1.0)))
        .collect::<Result<_>>()?;
    let evaluated: Vec<Vec<f64>> = stencils.par_iter().map(|s| s.apply(&field.data)).collect();
    let mut out = Array2::zeros((rows.len(), nx));
    for (k, r) in evaluated.into_iter().enumerate() {
        out.row_mut(k).assign(&ndarray::Array1::from(r));
    }
    Ok(out)
}

/// Rows of `layout` with wall distance above `eps`.
pub fn rows_outside_strip(layout: &FieldLayout, eps: f64) -> Vec<usize> {
    (0..layout.ny()).filter(|&k| wall_distance(layout.y[k]) > eps).collect()
}

/// Mollification on `Omega^eps`, returned on the subset of rows there.
pub fn mollify(field: &ScalarField, kernel: &MollifierKernel) -> Result<ScalarField> {
    let rows = rows_outside_strip(&field.layout, kernel.epsilon);
    let data = mollify_rows(field, kernel, &rows)?;
    let l = &field.layout;
    let layout = FieldLayout {
        lx: l.lx,
        nx: l.nx,
        x_offset: l.x_offset,
        y: rows.iter().map(|&k| l.y[k]).collect(),
        extent: rows.iter().map(|&k| l.extent[k]).collect(),
    };
    ScalarField::new(Arc::new(layout), data)
}

/// Restriction of `field` to the given rows.
fn restrict_rows(field: &ScalarField, rows: &[usize]) -> Result<ScalarField> {
    let l = &field.layout;
    let layout = FieldLayout {
        lx: l.lx,
        nx: l.nx,
        x_offset: l.x_offset,
        y: rows.iter().map(|&k| l.y[k]).collect(),
        extent: rows.iter().map(|&k| l.extent[k]).collect(),
    };
    let data = field.data.select(ndarray::Axis(0), rows);
    ScalarField::new(Arc::new(layout), data)
}

/// `||f_eps - f||_{L^p(region)}`; the region's rows must lie in `Omega^eps`.
pub fn mollify_error(field: &ScalarField, kernel: &MollifierKernel, p: f64, region: &RegionMask) -> Result<f64> {
    let w = region.weights(&field.layout);
    let rows: Vec<usize> = (0..field.layout.ny())
        .filter(|&k| w[k] > 0.0 || (field.layout.extent[k].1 <= field.layout.extent[k].0 && region.contains_y(field.layout.y[k])))
        .collect();
    let smooth = mollify_rows(field, kernel, &rows)?;
    let orig = restrict_rows(field, &rows)?;
    let diff = ScalarField::new(orig.layout.clone(), &smooth - &orig.data)?;
    crate::fields::lp_norm(&diff, p, region)
}

/// `(f g)_eps - f_eps g_eps` on the listed rows, via
/// `int eta (delta f)(delta g) - (f_eps - f)(g_eps - g)` with
/// `delta f(x, z) = f(x - z) - f(x)`.
pub fn commutator(f: &ScalarField, g: &ScalarField, kernel: &MollifierKernel, rows: &[usize]) -> Result<Array2<f64>> {
    if !f.same_layout(g) {
        return Err(Error::Incompatible("commutator operands on different layouts".into()));
    }
    let nx = f.layout.nx;
    let per_row: Vec<Result<Vec<f64>>> = rows
        .par_iter()
        .map(|&r| {
            let taps = row_taps(&f.layout, kernel, r)?;
            let mut out = vec![0.0; nx];
            for i in 0..nx {
                let f0 = f.data[[r, i]];
                let g0 = g.data[[r, i]];
                let (mut cross, mut fbar, mut gbar) = (0.0, 0.0, 0.0);
                for t in &taps {
                    let j = (i as i64 + t.x_shift).rem_euclid(nx as i64) as usize;
                    let fs = t.stencil.apply(|k| f.data[[k, j]]);
                    let gs = t.stencil.apply(|k| g.data[[k, j]]);
                    cross += t.weight * (fs - f0) * (gs - g0);
                    fbar += t.weight * fs;
                    gbar += t.weight * gs;
                }
                out[i] = cross - (fbar - f0) * (gbar - g0);
            }
            Ok(out)
        })
        .collect();
    let mut out = Array2::zeros((rows.len(), nx));
    for (k, r) in per_row.into_iter().enumerate() {
        out.row_mut(k).assign(&ndarray::Array1::from(r?));
    }
    Ok(out)
}

/// Direct form `(f g)_eps - f_eps g_eps`, for cross-checking [`commutator`].
pub fn commutator_direct(f: &ScalarField, g: &ScalarField, kernel: &MollifierKernel, rows: &[usize]) -> Result<Array2<f64>> {
    let fg = ScalarField::new(f.layout.clone(), &f.data * &g.data)?;
    let a = mollify_rows(&fg, kernel, rows)?;
    let b = mollify_rows(f, kernel, rows)?;
    let c = mollify_rows(g, kernel, rows)?;
    Ok(a - &b * &c)
}

/// Kernels shared by width, so equal widths give bitwise-equal stencils.
#[derive(Debug, Default)]
pub struct KernelCache {
    kernels: Mutex<BTreeMap<u64, Arc<MollifierKernel>>>,
}

impl KernelCache {
    pub fn get(&self, layout: &FieldLayout, epsilon: f64) -> Result<Arc<MollifierKernel>> {
        let key = epsilon.to_bits();
        let mut map = self.kernels.lock().expect("kernel cache poisoned");
        if let Some(k) = map.get(&key) {
            return Ok(k.clone());
        }
        let k = Arc::new(MollifierKernel::for_layout(layout, epsilon)?);
        map.insert(key, k.clone());
        Ok(k)
    }

    pub fn len(&self) -> usize {
        self.kernels.lock().map(|m| m.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Mollified field of one layer, on the rows inside `V_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerMollification {
    pub n: usize,
    pub rows: Vec<usize>,
    pub widths: Vec<f64>,
    pub values: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiScaleMollification {
    pub layers: Vec<LayerMollification>,
}

impl MultiScaleMollification {
    /// Largest `|f_n - f_{n+1}|` over rows shared by adjacent layers.
    pub fn overlap_mismatch(&self) -> f64 {
        let mut m: f64 = 0.0;
        for pair in self.layers.windows(2) {
            for (a, ra) in pair[0].rows.iter().enumerate() {
                if let Some(b) = pair[1].rows.iter().position(|rb| rb == ra) {
                    let d = (&pair[0].values.row(a) - &pair[1].values.row(b))
                        .iter()
                        .fold(0.0f64, |acc, x| acc.max(x.abs()));
                    m = m.max(d);
                }
            }
        }
        m
    }

    /// `sum_n xi_n f_n` on every row of the layout (0 where no layer applies).
    pub fn glued(&self, partition: &PartitionOfUnity, layout: &FieldLayout) -> Array2<f64> {
        let mut out = Array2::zeros((layout.ny(), layout.nx));
        for lm in &self.layers {
            for (a, &r) in lm.rows.iter().enumerate() {
                let xi = partition.xi(lm.n, wall_distance(layout.y[r]));
                if xi != 0.0 {
                    let mut row = out.row_mut(r);
                    row.scaled_add(xi, &lm.values.row(a));
                }
            }
        }
        out
    }
}

/// Layer-wise mollification: on `V_n` width `nu^{beta_n}`, except
/// `nu^{beta_{n+1}}` on `V_n ∩ V_{n+1}`.
pub fn mollify_multiscale(field: &ScalarField, partition: &PartitionOfUnity) -> Result<MultiScaleMollification> {
    let layers = &partition.layers;
    let cache = KernelCache::default();
    let l = &field.layout;
    let mut out = Vec::with_capacity(layers.n_layers());
    for n in 1..=layers.n_layers() {
        let rows: Vec<usize> = (0..l.ny())
            .filter(|&k| layers.layers[n - 1].contains(wall_distance(l.y[k])))
            .collect();
        let widths: Vec<f64> = rows.iter().map(|&k| layers.width(n, wall_distance(l.y[k]))).collect();
        let stencils: Vec<RowStencil> = rows
            .iter()
            .zip(&widths)
            .map(|(&k, &w)| {
                let kernel = cache.get(l, w)?;
                Ok(RowStencil::from_taps(&row_taps(l, &kernel, k)?, 1.0))
            })
            .collect::<Result<_>>()?;
        let vals: Vec<Vec<f64>> = stencils.par_iter().map(|s| s.apply(&field.data)).collect();
        let mut values = Array2::zeros((rows.len(), l.nx));
        for (k, v) in vals.into_iter().enumerate() {
            values.row_mut(k).assign(&ndarray::Array1::from(v));
        }
        out.push(LayerMollification { n, rows, widths, values });
    }
    Ok(MultiScaleMollification { layers: out })
}

/// The glued multi-scale mollifier `f -> sum_n xi_n f_n` as a precomputed
/// linear map on one layout, together with the cutoff values per row.
///
/// Rows where the cutoff vanishes are skipped and evaluate to zero.
#[derive(Debug, Clone)]
pub struct GluedMollifier {
    pub layout: Arc<FieldLayout>,
    pub theta: Vec<f64>,
    pub rows: Vec<Option<RowStencil>>,
}

impl GluedMollifier {
    pub fn new(layout: Arc<FieldLayout>, partition: &PartitionOfUnity) -> Result<Self> {
        let cache = KernelCache::default();
        let theta: Vec<f64> = layout.y.iter().map(|&y| partition.theta.value(wall_distance(y))).collect();
        let rows = (0..layout.ny())
            .into_par_iter()
            .map(|k| {
                if theta[k] == 0.0 {
                    return Ok(None);
                }
                let d = wall_distance(layout.y[k]);
                let mut acc = BTreeMap::new();
                for (n, xi) in partition.active_layers(d) {
                    let kernel = cache.get(&layout, partition.layers.width(n, d))?;
                    let taps = row_taps(&layout, &kernel, k)?;
                    RowStencil::accumulate(&mut acc, &taps, xi);
                }
                Ok(Some(RowStencil::from_map(acc)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GluedMollifier { layout, theta, rows })
    }

    pub fn apply(&self, data: &Array2<f64>) -> Array2<f64> {
        let nx = self.layout.nx;
        let vals: Vec<Option<Vec<f64>>> = self
            .rows
            .par_iter()
            .map(|r| r.as_ref().map(|s| s.apply(data)))
            .collect();
        let mut out = Array2::zeros((self.layout.ny(), nx));
        for (k, v) in vals.into_iter().enumerate() {
            if let Some(v) = v {
                out.row_mut(k).assign(&ndarray::Array1::from(v));
            }
        }
        out
    }

    /// `int theta a b` with the layout's quadrature weights.
    pub fn weighted_inner(&self, a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        let prod = ScalarField {
            layout: self.layout.clone(),
            data: Array2::from_shape_fn(a.dim(), |(k, i)| self.theta[k] * a[[k, i]] * b[[k, i]]),
        };
        integrate(&prod, None)
    }
}
