use num_complex::Complex64;

use crate::error::{Error, Result};

/// Hermitian matrix with half-bandwidth `bw`, lower band stored row by row:
/// entry `(i, j)` for `i - bw <= j <= i` lives at `i * (bw + 1) + (i - j)`.
#[derive(Debug, Clone)]
pub(crate) struct BandedHermitian {
    n: usize,
    bw: usize,
    band: Vec<Complex64>,
}

impl BandedHermitian {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedHermitian {
            n,
            bw,
            band: vec![Complex64::new(0.0, 0.0); n * (bw + 1)],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (i - j)
    }

    /// Entry `(i, j)` of the full matrix, for `|i - j| <= bw`.
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if j <= i {
            self.band[self.slot(i, j)]
        } else {
            self.band[self.slot(j, i)].conj()
        }
    }

    /// Adds `v` to entry `(i, j)` (and implicitly `conj(v)` to `(j, i)`).
    /// Only lower-triangle positions `j <= i` are accepted.
    #[inline]
    pub fn add_lower(&mut self, i: usize, j: usize, v: Complex64) {
        let s = self.slot(i, j);
        self.band[s] += v;
    }

    /// Replaces row and column `k` by those of the identity.
    pub fn pin(&mut self, k: usize) {
        let lo = k.saturating_sub(self.bw);
        for j in lo..k {
            let s = self.slot(k, j);
            self.band[s] = Complex64::new(0.0, 0.0);
        }
        let hi = (k + self.bw).min(self.n - 1);
        for i in k + 1..=hi {
            let s = self.slot(i, k);
            self.band[s] = Complex64::new(0.0, 0.0);
        }
        let s = self.slot(k, k);
        self.band[s] = Complex64::new(1.0, 0.0);
    }

    /// In-place Cholesky factorization `A = L L^H`.
    pub fn factor(mut self) -> Result<CholeskyBand> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let max_diag = (0..n).map(|i| self.band[i * w].re).fold(0.0, f64::max);
        let tiny = 1e-13 * max_diag.max(f64::MIN_POSITIVE);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mlo = lo.max(j.saturating_sub(bw));
                let mut s = self.band[i * w + (i - j)];
                for m in mlo..j {
                    s -= self.band[i * w + (i - m)] * self.band[j * w + (j - m)].conj();
                }
                if i == j {
                    if !(s.re > tiny) {
                        return Err(Error::SingularSystem(format!(
                            "pivot {} at unknown {i} (anchors may be degenerate)",
                            s.re
                        )));
                    }
                    self.band[i * w] = Complex64::new(s.re.sqrt(), 0.0);
                } else {
                    self.band[i * w + (i - j)] = s / self.band[j * w].re;
                }
            }
        }
        Ok(CholeskyBand {
            n,
            bw,
            band: self.band,
        })
    }
}

/// Lower Cholesky factor in the band layout of [`BandedHermitian`].
pub(crate) struct CholeskyBand {
    n: usize,
    bw: usize,
    band: Vec<Complex64>,
}

impl CholeskyBand {
    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut y = rhs.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = y[i];
            for m in lo..i {
                s -= self.band[i * w + (i - m)] * y[m];
            }
            y[i] = s / self.band[i * w].re;
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = y[i];
            for m in i + 1..=hi {
                s -= self.band[m * w + (m - i)].conj() * y[m];
            }
            y[i] = s / self.band[i * w].re;
        }
        y
    }
}
