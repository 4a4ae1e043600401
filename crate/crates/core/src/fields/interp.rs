//! Cubic Lagrange interpolation on non-uniform 1D nodes.

/// Four-point stencil: first node index and the weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub start: usize,
    pub weights: [f64; 4],
}

impl Stencil {
    pub fn apply(&self, values: impl Fn(usize) -> f64) -> f64 {
        let mut s = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            if *w != 0.0 {
                s += w * values(self.start + k);
            }
        }
        s
    }
}

/// Index `k` with `nodes[k] <= y <= nodes[k + 1]`, clamped to valid intervals.
pub fn locate(nodes: &[f64], y: f64) -> usize {
    let n = nodes.len();
    debug_assert!(n >= 2);
    match nodes.binary_search_by(|a| a.partial_cmp(&y).unwrap()) {
        Ok(k) => k.min(n - 2),
        Err(k) => k.saturating_sub(1).min(n - 2),
    }
}

/// Cubic Lagrange stencil at `y`; falls back to lower order with fewer nodes.
///
/// The stencil straddles the containing interval and is shifted inward at the
/// ends. Points outside the node range are extrapolated.
pub fn cubic_stencil(nodes: &[f64], y: f64) -> Stencil {
    let n = nodes.len();
    let mut weights = [0.0; 4];
    if n == 1 {
        weights[0] = 1.0;
        return Stencil { start: 0, weights };
    }
    let m = n.min(4);
    let k = locate(nodes, y);
    let start = k.saturating_sub(1).min(n - m);
    // exact hit avoids rounding in the product form
    for (a, w) in weights.iter_mut().enumerate().take(m) {
        if nodes[start + a] == y {
            *w = 1.0;
            return Stencil { start, weights };
        }
    }
    for a in 0..m {
        let ya = nodes[start + a];
        let mut w = 1.0;
        for b in 0..m {
            if a != b {
                let yb = nodes[start + b];
                w *= (y - yb) / (ya - yb);
            }
        }
        weights[a] = w;
    }
    Stencil { start, weights }
}

/// Interpolates `values` (given at `nodes`) at `y`.
pub fn cubic(nodes: &[f64], values: &[f64], y: f64) -> f64 {
    cubic_stencil(nodes, y).apply(|k| values[k])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubics_on_nonuniform_nodes() {
        let nodes = [-1.0, -0.9, -0.6, -0.1, 0.3, 0.35, 0.8, 1.0];
        let f = |y: f64| 2.0 - y + 3.0 * y * y - 0.5 * y * y * y;
        let vals: Vec<f64> = nodes.iter().map(|&y| f(y)).collect();
        for k in 0..=200 {
            let y = -1.0 + 2.0 * k as f64 / 200.0;
            assert!((cubic(&nodes, &vals, y) - f(y)).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_at_nodes() {
        let nodes = [0.0, 0.1, 0.25, 0.7];
        let s = cubic_stencil(&nodes, 0.25);
        assert_eq!(s.apply(|k| [1.0, 2.0, 3.0, 4.0][k]), 3.0);
    }
}
