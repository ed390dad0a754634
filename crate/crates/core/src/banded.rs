//! Symmetric positive-definite banded matrices with in-place Cholesky.

#[derive(Debug, Clone)]
pub(crate) struct BandedSpd {
    n: usize,
    b: usize,
    // row k holds A(k, k - d) at offset d, d = 0..=b
    data: Vec<f64>,
}

impl BandedSpd {
    pub(crate) fn zeros(n: usize, b: usize) -> Self {
        Self { n, b, data: vec![0.0; n * (b + 1)] }
    }

    /// Adds `v` to `A(i, j)` for `j <= i`.
    pub(crate) fn add_lower(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i && i - j <= self.b);
        self.data[i * (self.b + 1) + (i - j)] += v;
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.b + 1) + (i - j)]
    }

    /// Overwrites the band with its Cholesky factor. Fails on a non-positive pivot.
    pub(crate) fn factor(&mut self) -> Result<(), usize> {
        let w = self.b + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.b);
            for j in lo..=i {
                let mut s = self.at(i, j);
                let row_i = &self.data[i * w..(i + 1) * w];
                let row_j = &self.data[j * w..(j + 1) * w];
                for m in lo..j {
                    s -= row_i[i - m] * row_j[j - m];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(i);
                    }
                    self.data[i * w] = s.sqrt();
                } else {
                    let d = self.data[j * w];
                    self.data[i * w + (i - j)] = s / d;
                }
            }
        }
        Ok(())
    }

    /// Solves `L Lᵀ x = rhs` after [`factor`](Self::factor).
    pub(crate) fn solve(&self, rhs: &mut [f64]) {
        let w = self.b + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.b);
            let row = &self.data[i * w..(i + 1) * w];
            let mut s = rhs[i];
            for m in lo..i {
                s -= row[i - m] * rhs[m];
            }
            rhs[i] = s / row[0];
        }
        for i in (0..self.n).rev() {
            rhs[i] /= self.data[i * w];
            let lo = i.saturating_sub(self.b);
            let xi = rhs[i];
            let row = &self.data[i * w..(i + 1) * w];
            for m in lo..i {
                rhs[m] -= row[i - m] * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal_system() {
        let n = 50;
        let mut a = BandedSpd::zeros(n, 1);
        for i in 0..n {
            a.add_lower(i, i, 4.0);
            if i > 0 {
                a.add_lower(i, i - 1, -1.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| {
                let mut v = 4.0 * x[i];
                if i > 0 {
                    v -= x[i - 1];
                }
                if i + 1 < n {
                    v -= x[i + 1];
                }
                v
            })
            .collect();
        a.factor().unwrap();
        a.solve(&mut rhs);
        for i in 0..n {
            assert!((rhs[i] - x[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = BandedSpd::zeros(2, 1);
        a.add_lower(0, 0, 1.0);
        a.add_lower(1, 0, 2.0);
        a.add_lower(1, 1, 1.0);
        assert_eq!(a.factor(), Err(1));
    }
}
