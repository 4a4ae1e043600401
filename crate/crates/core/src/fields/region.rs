use serde::{Deserialize, Serialize};

use super::{wall_distance, FieldLayout};
use crate::foliation::Interval;

/// What a mask selects, in terms of wall distance `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegionKind {
    Full,
    /// `Omega^h = {d > h}`.
    Inner(f64),
    /// `Gamma_h = {d <= h}`.
    Strip(f64),
    /// One layer `V_n` (1-based index recorded for reporting).
    Layer(usize, Interval),
    /// `V_n ∩ V_{n+1}`.
    Overlap(usize, Interval),
    /// Arbitrary union of wall-distance intervals.
    Union(Vec<Interval>),
}

/// Wall-distance region with per-node quadrature fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMask {
    pub kind: RegionKind,
}

impl RegionMask {
    pub fn full() -> Self {
        RegionMask { kind: RegionKind::Full }
    }

    pub fn inner(h: f64) -> Self {
        RegionMask {
            kind: RegionKind::Inner(h),
        }
    }

    pub fn strip(h: f64) -> Self {
        RegionMask {
            kind: RegionKind::Strip(h),
        }
    }

    pub fn layer(n: usize, iv: Interval) -> Self {
        RegionMask {
            kind: RegionKind::Layer(n, iv),
        }
    }

    pub fn overlap(n: usize, iv: Interval) -> Self {
        RegionMask {
            kind: RegionKind::Overlap(n, iv),
        }
    }

    pub fn union(ivs: Vec<Interval>) -> Self {
        RegionMask {
            kind: RegionKind::Union(ivs),
        }
    }

    /// Wall-distance intervals `(lo, hi]`; `lo < 0` includes the wall itself.
    pub fn intervals(&self) -> Vec<Interval> {
        match &self.kind {
            RegionKind::Full => vec![Interval::new(-1.0, f64::INFINITY)],
            RegionKind::Inner(h) => vec![Interval::new(*h, f64::INFINITY)],
            RegionKind::Strip(h) => vec![Interval::new(-1.0, *h)],
            RegionKind::Layer(_, iv) | RegionKind::Overlap(_, iv) => vec![*iv],
            RegionKind::Union(v) => v.clone(),
        }
    }

    /// Whether the point at height `y` lies in the region.
    pub fn contains_y(&self, y: f64) -> bool {
        let d = wall_distance(y);
        self.intervals().iter().any(|iv| iv.contains(d))
    }

    /// Length of `[a, b]` (in y) lying inside the region.
    pub fn covered_length(&self, a: f64, b: f64) -> f64 {
        let mut total = 0.0;
        for iv in self.intervals() {
            // lower half d = 1 + y, upper half d = 1 - y
            let halves = [
                ((iv.lo - 1.0).max(-1.0), (iv.hi - 1.0).min(0.0)),
                ((1.0 - iv.hi).max(0.0), (1.0 - iv.lo).min(1.0)),
            ];
            for (lo, hi) in halves {
                total += (hi.min(b) - lo.max(a)).max(0.0);
            }
        }
        total.min((b - a).max(0.0))
    }

    /// Fraction of each node's extent inside the region. Zero-width extents get
    /// 1 or 0 by point membership.
    pub fn weights(&self, layout: &FieldLayout) -> Vec<f64> {
        layout
            .extent
            .iter()
            .zip(&layout.y)
            .map(|(&(a, b), &y)| {
                if b <= a {
                    if self.contains_y(y) {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (self.covered_length(a, b) / (b - a)).clamp(0.0, 1.0)
                }
            })
            .collect()
    }
}
