use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Envelope (skyline) Cholesky factor `A = L L^T`.
///
/// Row `i` of `L` is stored densely from its first structural nonzero to the
/// diagonal. Only the lower triangle of `A` is read. Fill stays inside the
/// envelope, so grid orderings with bandwidth `b` cost `O(N b^2)`.
#[derive(Clone, Debug)]
pub struct SkylineCholesky {
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let mut first = Vec::with_capacity(n);
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            let f = a
                .row(i)
                .map(|(j, _)| j)
                .filter(|&j| j <= i)
                .min()
                .unwrap_or(i);
            first.push(f);
            start.push(start[i] + i - f + 1);
        }
        let mut values = vec![0.0; start[n]];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    values[start[i] + j - first[i]] += v;
                }
            }
        }

        for i in 0..n {
            let (fi, si) = (first[i], start[i]);
            for j in fi..=i {
                let k0 = fi.max(first[j]);
                let mut s = values[si + j - fi];
                let (fj, sj) = (first[j], start[j]);
                for k in k0..j {
                    s -= values[si + k - fi] * values[sj + k - fj];
                }
                if j < i {
                    values[si + j - fi] = s / values[sj + j - fj];
                } else {
                    if !(s > 0.0) {
                        return Err(Error::NotSpd(format!(
                            "non-positive pivot {s:e} at row {i}"
                        )));
                    }
                    values[si + j - fi] = s.sqrt();
                }
            }
        }
        Ok(SkylineCholesky {
            first,
            start,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Stored entries of `L`.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        assert_eq!(x.len(), n);
        for i in 0..n {
            let (fi, si) = (self.first[i], self.start[i]);
            let row = &self.values[si..si + i - fi];
            let s: f64 = row.iter().zip(&x[fi..i]).map(|(l, y)| l * y).sum();
            x[i] = (x[i] - s) / self.values[si + i - fi];
        }
        for i in (0..n).rev() {
            let (fi, si) = (self.first[i], self.start[i]);
            x[i] /= self.values[si + i - fi];
            let xi = x[i];
            for (k, l) in (fi..i).zip(&self.values[si..si + i - fi]) {
                x[k] -= l * xi;
            }
        }
    }

    /// `log det A`.
    pub fn log_det(&self) -> f64 {
        (0..self.dim())
            .map(|i| 2.0 * self.values[self.start[i] + i - self.first[i]].ln())
            .sum()
    }
}
