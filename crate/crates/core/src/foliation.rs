//! Exponent schedule, wall-distance layer decomposition, partition of unity
//! and near-wall cutoff.
//!
//! Everything here is a function of the scalar wall distance `d`, so the
//! constructions carry over unchanged to any straight-walled geometry. In the
//! channel `d = 1 - |y|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::ChannelGeometry;
use crate::numerics::smoothstep;

/// Fraction of the unconstrained exponent sequence used for the interior
/// exponents when it leaves enough room for the final one.
pub const BETA_FRACTION: f64 = 0.9;

const MAX_RECURSION: usize = 100_000;

/// Which boundary layer the schedule targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerMode {
    /// Layer of width proportional to `nu`; the last exponent is 1.
    KatoLayer,
    /// Thinner layer of width `nu^a`, `a > 1`.
    SmoothLayer { a: f64 },
}

impl LayerMode {
    /// Exponent of the innermost strip (1 or `a`).
    pub fn layer_exponent(&self) -> f64 {
        match *self {
            LayerMode::KatoLayer => 1.0,
            LayerMode::SmoothLayer { a } => a,
        }
    }
}

/// Upper limit `3/(5 - 6 alpha)` of the exponent recursion, infinite for
/// `alpha >= 5/6`.
pub fn beta_star_limit(alpha: f64) -> f64 {
    if alpha >= 5.0 / 6.0 {
        f64::INFINITY
    } else {
        3.0 / (5.0 - 6.0 * alpha)
    }
}

/// Strict upper bound on `beta_n` given `beta_{n-1}`.
#[inline]
pub fn gap_bound(alpha: f64, previous: f64) -> f64 {
    (1.0 + previous / 3.0) / (2.0 * (1.0 - alpha))
}

/// The first `len` terms of the unconstrained recursion, starting at 0.
pub fn beta_star_sequence(alpha: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut b = 0.0;
    for _ in 0..len {
        out.push(b);
        b = gap_bound(alpha, b);
    }
    out
}

/// Checks `1 < a < 3/(5-6 alpha)` (no upper limit once `alpha >= 5/6`).
pub fn validate_layer_exponent(alpha: f64, a: f64) -> Result<()> {
    let limit = beta_star_limit(alpha);
    if !a.is_finite() || a <= 1.0 || a >= limit {
        return Err(Error::LayerExponent { a, alpha, limit });
    }
    Ok(())
}

/// Checks `p > 6/(3 alpha - 1)`.
pub fn validate_strip_exponent(alpha: f64, p: f64) -> Result<()> {
    let limit = 6.0 / (3.0 * alpha - 1.0);
    if !p.is_finite() || p <= limit {
        return Err(Error::StripExponent { p, alpha, limit });
    }
    Ok(())
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 1.0 / 3.0 || alpha >= 1.0 {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    Ok(())
}

/// Increasing exponents `beta_0 = 0 < beta_1 < ... < beta_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSchedule {
    pub alpha: f64,
    pub mode: LayerMode,
    pub betas: Vec<f64>,
    /// Non-fatal notes recorded while building (e.g. degraded layer counts).
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl BetaSchedule {
    /// Number of interior layers `N`.
    pub fn n_layers(&self) -> usize {
        self.betas.len() - 1
    }

    pub fn beta(&self, n: usize) -> f64 {
        self.betas[n]
    }

    /// Collapses to a single layer ending at the mode's layer exponent.
    pub fn single_layer(&self, reason: impl Into<String>) -> BetaSchedule {
        let mut warnings = self.warnings.clone();
        warnings.push(reason.into());
        BetaSchedule {
            alpha: self.alpha,
            mode: self.mode,
            betas: vec![0.0, self.mode.layer_exponent()],
            warnings,
        }
    }

    /// Returns the first violated schedule invariant, if any.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let b = &self.betas;
        if b.len() < 2 {
            return Err("schedule needs at least beta_0 and beta_1".into());
        }
        if b[0] != 0.0 {
            return Err(format!("beta_0 = {} != 0", b[0]));
        }
        let n = self.n_layers();
        for k in 1..=n {
            if b[k] <= b[k - 1] {
                return Err(format!("beta_{k} = {} not above beta_{} = {}", b[k], k - 1, b[k - 1]));
            }
            let bound = gap_bound(self.alpha, b[k - 1]);
            if b[k] >= bound {
                return Err(format!("beta_{k} = {} violates gap bound {bound}", b[k]));
            }
        }
        let target = self.mode.layer_exponent();
        if b[n] != target {
            return Err(format!("beta_N = {} but layer exponent is {target}", b[n]));
        }
        if matches!(self.mode, LayerMode::KatoLayer) {
            if n >= 2 && b[n - 1] > 1.0 {
                return Err(format!("beta_(N-1) = {} exceeds 1", b[n - 1]));
            }
            if self.alpha > 0.5 && self.alpha < 5.0 / 6.0 && n != 1 {
                return Err(format!("alpha = {} requires a single layer, got N = {n}", self.alpha));
            }
        }
        Ok(())
    }
}

/// Builds the exponent schedule for `alpha` and the requested layer mode.
///
/// `N` is the first index at which the unconstrained recursion exceeds the
/// layer exponent. Interior exponents are a uniform fraction `lambda` of the
/// recursion terms: `lambda = 0.9` unless that would leave `beta_{N-1}` too
/// small for the last gap, in which case `lambda` sits halfway between the
/// smallest admissible ratio and 1.
pub fn build_beta_schedule(alpha: f64, mode: LayerMode) -> Result<BetaSchedule> {
    validate_alpha(alpha)?;
    if let LayerMode::SmoothLayer { a } = mode {
        validate_layer_exponent(alpha, a)?;
    }
    let target = mode.layer_exponent();

    let mut star = vec![0.0];
    while *star.last().unwrap() <= target {
        if star.len() > MAX_RECURSION {
            return Err(Error::InvalidArgument(format!(
                "exponent recursion does not pass {target} for alpha={alpha}"
            )));
        }
        let next = gap_bound(alpha, *star.last().unwrap());
        star.push(next);
    }
    let n = star.len() - 1;

    let mut warnings = Vec::new();
    let mut betas = Vec::with_capacity(n + 1);
    betas.push(0.0);
    if n >= 2 {
        // beta_{N-1} must exceed this for target < gap_bound(beta_{N-1}).
        let lower = 3.0 * (2.0 * (1.0 - alpha) * target - 1.0);
        let mut lambda = BETA_FRACTION;
        if lambda * star[n - 1] <= lower {
            lambda = 0.5 * (1.0 + lower / star[n - 1]);
            warnings.push(format!("interior exponent fraction raised to {lambda:.6}"));
        }
        for s in &star[1..n] {
            betas.push(lambda * s);
        }
        if betas[n - 1] > 1.0 {
            warnings.push(format!(
                "beta_(N-1) = {:.6} exceeds 1; gap condition kept instead",
                betas[n - 1]
            ));
        }
    }
    betas.push(target);

    let schedule = BetaSchedule {
        alpha,
        mode,
        betas,
        warnings,
    };
    schedule
        .check_invariants()
        .map_err(|e| Error::InvalidArgument(format!("schedule construction failed: {e}")))?;
    Ok(schedule)
}

/// Half-open wall-distance interval `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    #[inline]
    pub fn contains(&self, d: f64) -> bool {
        d > self.lo && d <= self.hi
    }

    pub fn length(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        Interval { lo, hi: hi.max(lo) }
    }
}

/// Wall-distance layers `V_1..V_N`, their overlaps, and the peeled-off strip
/// `V_{N+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDecomposition {
    pub nu: f64,
    pub geometry: ChannelGeometry,
    pub mode: LayerMode,
    pub betas: Vec<f64>,
    /// `V_1..V_N` (index 0 holds `V_1`).
    pub layers: Vec<Interval>,
    /// `V_n ∩ V_{n+1}` for `n = 1..N-1`.
    pub overlaps: Vec<Interval>,
    /// `V_{N+1} = {d <= 2 nu^{beta_N}}`, closed at the wall.
    pub strip: Interval,
}

impl LayerDecomposition {
    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Area of a wall-distance interval, counting both walls.
    pub fn measure(&self, interval: &Interval) -> f64 {
        let clipped = interval.intersect(&Interval::new(0.0, self.geometry.half_height));
        2.0 * self.geometry.lx * clipped.length()
    }

    /// Mollification width used by layer `n` (1-based) at wall distance `d`.
    pub fn width(&self, n: usize, d: f64) -> f64 {
        let in_lower_overlap = n < self.n_layers() && self.overlaps[n - 1].contains(d);
        let beta = if in_lower_overlap {
            self.betas[n + 1]
        } else {
            self.betas[n]
        };
        self.nu.powf(beta)
    }

    /// Layers (1-based) whose closure contains `d`, at most two.
    pub fn layers_at(&self, d: f64) -> Vec<usize> {
        (1..=self.n_layers())
            .filter(|&n| self.layers[n - 1].contains(d))
            .collect()
    }

    /// Sets in the order `V_1, ..., V_N, V_{N+1}`.
    pub fn all_sets(&self) -> Vec<Interval> {
        let mut v = self.layers.clone();
        v.push(self.strip);
        v
    }
}

/// Builds `V_1 = {d > 2 nu^{b1}}`, `V_n = {2 nu^{bn} < d <= 2 nu^{b(n-1)} + 2 nu^{bn}}`.
///
/// Rejects `nu` for which the layers are not properly nested, naming the first
/// violated ordering.
pub fn build_layers(
    schedule: &BetaSchedule,
    nu: f64,
    geometry: &ChannelGeometry,
) -> Result<LayerDecomposition> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::LayerOrdering {
            nu,
            violation: "viscosity must lie in (0, 1)".into(),
        });
    }
    let h = geometry.half_height;
    let b = &schedule.betas;
    let n = schedule.n_layers();
    let w = |k: usize| 2.0 * nu.powf(b[k]);

    let mut layers = Vec::with_capacity(n);
    layers.push(Interval::new(w(1), h));
    for k in 2..=n {
        layers.push(Interval::new(w(k), w(k - 1) + w(k)));
    }
    let strip = Interval::new(0.0, w(n));

    let fail = |violation: String| Error::LayerOrdering { nu, violation };
    if layers[0].lo >= h {
        return Err(fail(format!(
            "V_1 is empty: 2 nu^beta_1 = {:.4e} >= half height {h}",
            layers[0].lo
        )));
    }
    for (k, layer) in layers.iter().enumerate().skip(1) {
        if layer.hi > h {
            return Err(fail(format!(
                "V_{} reaches {:.4e} beyond half height {h}",
                k + 1,
                layer.hi
            )));
        }
    }
    let sets: Vec<Interval> = layers.iter().copied().chain(std::iter::once(strip)).collect();
    for k in 0..sets.len().saturating_sub(2) {
        if sets[k + 2].hi > sets[k].lo {
            return Err(fail(format!(
                "V_{} (up to {:.4e}) meets V_{} (from {:.4e})",
                k + 3,
                sets[k + 2].hi,
                k + 1,
                sets[k].lo
            )));
        }
    }
    let overlaps = (0..n.saturating_sub(1))
        .map(|k| layers[k].intersect(&layers[k + 1]))
        .collect();

    Ok(LayerDecomposition {
        nu,
        geometry: *geometry,
        mode: schedule.mode,
        betas: b.clone(),
        layers,
        overlaps,
        strip,
    })
}

/// Near-wall cutoff: 0 for `d <= lo`, 1 for `d >= hi`, smoothstep between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub lo: f64,
    pub hi: f64,
    /// Required bound on `|theta'|`.
    pub gradient_bound: f64,
}

impl Cutoff {
    #[inline]
    pub fn value(&self, d: f64) -> f64 {
        smoothstep((d - self.lo) / (self.hi - self.lo)).0
    }

    #[inline]
    pub fn derivative(&self, d: f64) -> f64 {
        smoothstep((d - self.lo) / (self.hi - self.lo)).1 / (self.hi - self.lo)
    }

    /// Largest `|theta'|` of the ramp, attained mid-ramp.
    pub fn max_derivative(&self) -> f64 {
        1.5 / (self.hi - self.lo)
    }
}

/// Cutoff ramping over `[2 nu, 4 nu]` (Kato layer) or `[nu^a, 2 nu^a]`.
pub fn build_cutoff_theta(nu: f64, mode: LayerMode) -> Result<Cutoff> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::InvalidArgument(format!("viscosity {nu} outside (0, 1)")));
    }
    Ok(match mode {
        LayerMode::KatoLayer => Cutoff {
            lo: 2.0 * nu,
            hi: 4.0 * nu,
            gradient_bound: 4.0 / nu,
        },
        LayerMode::SmoothLayer { a } => {
            let s = nu.powf(a);
            Cutoff {
                lo: s,
                hi: 2.0 * s,
                gradient_bound: 2.0 / s,
            }
        }
    })
}

/// `C^1` partition of unity subordinate to the layers, plus the cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionOfUnity {
    pub layers: LayerDecomposition,
    pub theta: Cutoff,
}

pub fn build_partition(layers: &LayerDecomposition) -> Result<PartitionOfUnity> {
    let theta = build_cutoff_theta(layers.nu, layers.mode)?;
    Ok(PartitionOfUnity {
        layers: layers.clone(),
        theta,
    })
}

impl PartitionOfUnity {
    pub fn n_layers(&self) -> usize {
        self.layers.n_layers()
    }

    /// `(xi_n(d), xi_n'(d))` for 1-based `n`.
    pub fn xi_with_derivative(&self, n: usize, d: f64) -> (f64, f64) {
        let big_n = self.n_layers();
        assert!(n >= 1 && n <= big_n, "layer index {n} out of 1..={big_n}");
        let layer = self.layers.layers[n - 1];
        if !layer.contains(d) {
            return (0.0, 0.0);
        }
        if n < big_n {
            let ov = self.layers.overlaps[n - 1];
            if ov.contains(d) {
                let len = ov.hi - ov.lo;
                let (s, ds) = smoothstep((d - ov.lo) / len);
                return (s, ds / len);
            }
        }
        if n > 1 {
            let ov = self.layers.overlaps[n - 2];
            if ov.contains(d) {
                let len = ov.hi - ov.lo;
                let (s, ds) = smoothstep((d - ov.lo) / len);
                return (1.0 - s, -ds / len);
            }
        }
        (1.0, 0.0)
    }

    pub fn xi(&self, n: usize, d: f64) -> f64 {
        self.xi_with_derivative(n, d).0
    }

    /// Weight used when gluing mollified fields: `xi_N` is continued by 1 into
    /// `V_{N+1}`, where the cutoff takes over.
    pub fn gluing_weight(&self, n: usize, d: f64) -> f64 {
        if n == self.n_layers() && d > 0.0 && d <= self.layers.strip.hi {
            1.0
        } else {
            self.xi(n, d)
        }
    }

    /// Layers with nonzero gluing weight at `d` paired with that weight.
    pub fn active_layers(&self, d: f64) -> Vec<(usize, f64)> {
        (1..=self.n_layers())
            .map(|n| (n, self.gluing_weight(n, d)))
            .filter(|(_, w)| *w != 0.0)
            .collect()
    }

    /// Sum of all `xi_n` at `d`.
    pub fn sum(&self, d: f64) -> f64 {
        (1..=self.n_layers()).map(|n| self.xi(n, d)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> ChannelGeometry {
        ChannelGeometry {
            lx: 2.0,
            half_height: 1.0,
        }
    }

    #[test]
    fn three_quarters_gives_one_layer() {
        let s = build_beta_schedule(0.75, LayerMode::KatoLayer).unwrap();
        assert_eq!(s.betas, vec![0.0, 1.0]);
        assert!((gap_bound(0.75, 0.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn point_four_gives_two_layers() {
        let s = build_beta_schedule(0.4, LayerMode::KatoLayer).unwrap();
        assert_eq!(s.n_layers(), 2);
        let star = beta_star_sequence(0.4, 3);
        assert!((star[1] - 0.833_333_333_333_333_4).abs() < 1e-12);
        assert!((star[2] - 1.064_814_814_814_814_8).abs() < 1e-12);
    }

    #[test]
    fn one_half_is_boundary_case() {
        let s = build_beta_schedule(0.5, LayerMode::KatoLayer).unwrap();
        assert_eq!(s.n_layers(), 2);
        let star = beta_star_sequence(0.5, 3);
        assert_eq!(star[1], 1.0);
        assert!((star[2] - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(build_beta_schedule(0.3, LayerMode::KatoLayer).is_err());
        assert!(build_beta_schedule(1.0, LayerMode::KatoLayer).is_err());
        assert!(build_beta_schedule(f64::NAN, LayerMode::KatoLayer).is_err());
        let e = build_beta_schedule(0.4, LayerMode::SmoothLayer { a: 7.0 }).unwrap_err();
        assert!(matches!(e, Error::LayerExponent { .. }));
        assert!(build_beta_schedule(0.75, LayerMode::SmoothLayer { a: 0.9 }).is_err());
    }

    #[test]
    fn smooth_layer_schedule_ends_at_a() {
        let s = build_beta_schedule(0.75, LayerMode::SmoothLayer { a: 1.5 }).unwrap();
        assert_eq!(s.betas, vec![0.0, 1.5]);
        let s = build_beta_schedule(0.9, LayerMode::SmoothLayer { a: 20.0 }).unwrap();
        assert_eq!(*s.betas.last().unwrap(), 20.0);
        s.check_invariants().unwrap();
    }

    #[test]
    fn single_layer_intervals() {
        let s = build_beta_schedule(0.75, LayerMode::KatoLayer).unwrap();
        let l = build_layers(&s, 1e-3, &geom()).unwrap();
        assert_eq!(l.layers[0], Interval::new(2e-3, 1.0));
        assert_eq!(l.strip, Interval::new(0.0, 2e-3));
        assert!(l.overlaps.is_empty());
    }

    #[test]
    fn layer_ordering_failure_is_named() {
        let s = build_beta_schedule(0.4, LayerMode::KatoLayer).unwrap();
        let e = build_layers(&s, 0.3, &geom()).unwrap_err();
        match e {
            Error::LayerOrdering { violation, .. } => assert!(violation.contains("V_")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cutoff_examples() {
        let nu = 1e-3;
        let c = build_cutoff_theta(nu, LayerMode::KatoLayer).unwrap();
        assert_eq!(c.value(5.0 * nu), 1.0);
        assert_eq!(c.value(nu), 0.0);
        assert!((c.max_derivative() - 0.75 / nu).abs() < 1e-9);
        assert!(c.max_derivative() <= c.gradient_bound);
        assert!(build_cutoff_theta(1.0, LayerMode::KatoLayer).is_err());
        assert!(build_cutoff_theta(0.0, LayerMode::KatoLayer).is_err());
        let s = build_cutoff_theta(nu, LayerMode::SmoothLayer { a: 1.5 }).unwrap();
        assert!(s.max_derivative() <= s.gradient_bound);
        assert_eq!(s.value(2.0 * nu.powf(1.5)), 1.0);
        assert_eq!(s.value(nu.powf(1.5)), 0.0);
    }

    #[test]
    fn xi_is_one_away_from_overlaps() {
        let s = build_beta_schedule(0.4, LayerMode::KatoLayer).unwrap();
        let l = build_layers(&s, 1e-3, &geom()).unwrap();
        let p = build_partition(&l).unwrap();
        assert_eq!(p.xi(1, 0.5), 1.0);
        assert_eq!(p.xi(2, 0.5), 0.0);
        let d = 0.5 * (l.overlaps[0].lo + l.overlaps[0].hi);
        assert_eq!(p.xi(1, d) + p.xi(2, d), 1.0);
        let inner = 0.5 * (l.layers[1].lo + l.overlaps[0].lo);
        assert_eq!(p.xi(2, inner), 1.0);
    }
}
