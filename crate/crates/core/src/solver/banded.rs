//! Complex banded LU with partial pivoting.

use num_complex::Complex64;

/// Band matrix assembled row by row, then factorized in place.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major; row `i` covers columns `i - kl ..= i + kl + ku`.
    ab: Vec<Complex64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let w = 2 * kl + ku + 1;
        BandedMatrix {
            n,
            kl,
            ku,
            ab: vec![Complex64::new(0.0, 0.0); n * w],
        }
    }

    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width() + (j + self.kl - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    pub fn clear_row(&mut self, i: usize) {
        let w = self.width();
        for x in &mut self.ab[i * w..(i + 1) * w] {
            *x = Complex64::new(0.0, 0.0);
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if j + self.kl < i || j > i + self.kl + self.ku {
            return Complex64::new(0.0, 0.0);
        }
        self.ab[self.idx(i, j)]
    }

    /// `y = A x` for the unfactorized matrix.
    pub fn mul(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    pub fn factorize(mut self) -> Result<BandedLu, usize> {
        let n = self.n;
        let kl = self.kl;
        let span = kl + self.ku;
        let mut piv = vec![0usize; n];
        let mut mult = vec![Complex64::new(0.0, 0.0); n * kl.max(1)];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).norm();
            for i in k + 1..=last {
                let m = self.get(i, k).norm();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(k);
            }
            piv[k] = p;
            let cmax = (k + span).min(n - 1);
            if p != k {
                for j in k..=cmax {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.ab.swap(a, b);
                }
            }
            let d = self.get(k, k);
            for i in k + 1..=last {
                let l = self.get(i, k) / d;
                mult[k * kl + (i - k - 1)] = l;
                if l != Complex64::new(0.0, 0.0) {
                    for j in k..=cmax {
                        let u = self.get(k, j);
                        let t = self.idx(i, j);
                        self.ab[t] -= l * u;
                    }
                }
            }
        }
        Ok(BandedLu { m: self, piv, mult })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    m: BandedMatrix,
    piv: Vec<usize>,
    mult: Vec<Complex64>,
}

impl BandedLu {
    pub fn n(&self) -> usize {
        self.m.n
    }

    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.m.n;
        let kl = self.m.kl;
        let span = kl + self.m.ku;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= self.mult[k * kl + (i - k - 1)] * bk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + span).min(n - 1) {
                s -= self.m.get(k, j) * b[j];
            }
            b[k] = s / self.m.get(k, k);
        }
    }
}
