//! Least squares on centered cross-product (moment) matrices.
//!
//! Every regression in the crate includes an intercept. Centering the moment
//! matrix absorbs it, which keeps the normal equations well conditioned under
//! level shifts and lets one moment matrix serve many nested regressions.

use nalgebra::DMatrix;

/// Relative pivot threshold below which a regressor is treated as collinear.
const PIVOT_TOL: f64 = 1e-12;

/// Centered second moments of a set of variables over `nobs` rows.
#[derive(Debug, Clone)]
pub(crate) struct Moments {
    pub means: Vec<f64>,
    /// Centered cross-product sums (not divided by `nobs`).
    pub gram: DMatrix<f64>,
    pub nobs: usize,
}

impl Moments {
    /// `fill(row, buf)` writes the `dim` variables of observation `row` into `buf`.
    pub fn from_fn(nobs: usize, dim: usize, mut fill: impl FnMut(usize, &mut [f64])) -> Self {
        let mut buf = vec![0.0; dim];
        let mut means = vec![0.0; dim];
        for r in 0..nobs {
            fill(r, &mut buf);
            for (m, v) in means.iter_mut().zip(&buf) {
                *m += v;
            }
        }
        if nobs > 0 {
            for m in means.iter_mut() {
                *m /= nobs as f64;
            }
        }
        // upper triangle, column-major so the inner loop is contiguous
        let mut acc = vec![0.0; dim * dim];
        for r in 0..nobs {
            fill(r, &mut buf);
            for (v, m) in buf.iter_mut().zip(&means) {
                *v -= m;
            }
            for j in 0..dim {
                let bj = buf[j];
                if bj == 0.0 {
                    continue;
                }
                let col = &mut acc[j * dim..j * dim + j + 1];
                for (c, bi) in col.iter_mut().zip(&buf[..=j]) {
                    *c += bi * bj;
                }
            }
        }
        let mut gram = DMatrix::from_vec(dim, dim, acc);
        for j in 0..dim {
            for i in 0..j {
                gram[(j, i)] = gram[(i, j)];
            }
        }
        Self { means, gram, nobs }
    }
}

/// Lower Cholesky factor.
#[derive(Debug, Clone)]
pub(crate) struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    /// Fails with the index of the first column whose pivot vanishes relative
    /// to its diagonal entry.
    pub fn new(a: &DMatrix<f64>) -> Result<Self, usize> {
        let n = a.nrows();
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let ajj = a[(j, j)];
            let mut d = ajj;
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(ajj > 0.0) || !(d > PIVOT_TOL * ajj) {
                return Err(j);
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solves `L z = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s -= self.l[(i, k)] * z[k];
            }
            z[i] = s / self.l[(i, i)];
        }
        z
    }

    /// Solves `L^T x = z`.
    pub fn backward(&self, z: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = z.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }

    /// Diagonal entry `k` of `A^{-1}`.
    pub fn inverse_diag(&self, k: usize) -> f64 {
        let mut e = vec![0.0; self.dim()];
        e[k] = 1.0;
        self.forward(&e).iter().map(|v| v * v).sum()
    }
}

/// Regression of any moment variable on a fixed subset of the others.
#[derive(Debug, Clone)]
pub(crate) struct SubsetFit<'a> {
    moments: &'a Moments,
    cols: Vec<usize>,
    chol: Cholesky,
}

impl<'a> SubsetFit<'a> {
    /// Fails with the position (within `cols`) of a collinear regressor.
    pub fn new(moments: &'a Moments, cols: Vec<usize>) -> Result<Self, usize> {
        let k = cols.len();
        let sub = DMatrix::from_fn(k, k, |i, j| moments.gram[(cols[i], cols[j])]);
        let chol = Cholesky::new(&sub)?;
        Ok(Self { moments, cols, chol })
    }

    fn cross(&self, resp: usize) -> Vec<f64> {
        self.cols.iter().map(|&c| self.moments.gram[(c, resp)]).collect()
    }

    /// `L^{-1} X'y`; its squared norm is the explained sum of squares.
    pub fn projected(&self, resp: usize) -> Vec<f64> {
        self.chol.forward(&self.cross(resp))
    }

    pub fn coefficients(&self, resp: usize) -> Vec<f64> {
        self.chol.backward(&self.projected(resp))
    }

    pub fn intercept(&self, resp: usize, coefs: &[f64]) -> f64 {
        let m = &self.moments.means;
        m[resp] - self.cols.iter().zip(coefs).map(|(&c, b)| m[c] * b).sum::<f64>()
    }

    /// Residual sum of squares for response `resp`.
    pub fn rss(&self, resp: usize) -> f64 {
        let z = self.projected(resp);
        self.moments.gram[(resp, resp)] - z.iter().map(|v| v * v).sum::<f64>()
    }

    /// Residual cross-product matrix for a set of responses.
    pub fn residual_cross(&self, resps: &[usize]) -> DMatrix<f64> {
        let zs: Vec<Vec<f64>> = resps.iter().map(|&r| self.projected(r)).collect();
        let n = resps.len();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let dot: f64 = zs[i].iter().zip(&zs[j]).map(|(a, b)| a * b).sum();
                let v = self.moments.gram[(resps[i], resps[j])] - dot;
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    /// `(X'X)^{-1}` diagonal entry for the regressor at position `k`.
    pub fn inverse_diag(&self, k: usize) -> f64 {
        self.chol.inverse_diag(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_linear_fit() {
        // y = 2 + 3 x1 - x2, no noise
        let xs: Vec<(f64, f64)> = (0..50).map(|i| ((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let m = Moments::from_fn(xs.len(), 3, |r, buf| {
            let (a, b) = xs[r];
            buf.copy_from_slice(&[a, b, 2.0 + 3.0 * a - b]);
        });
        let fit = SubsetFit::new(&m, vec![0, 1]).unwrap();
        let b = fit.coefficients(2);
        assert!((b[0] - 3.0).abs() < 1e-10 && (b[1] + 1.0).abs() < 1e-10);
        assert!((fit.intercept(2, &b) - 2.0).abs() < 1e-10);
        assert!(fit.rss(2).abs() < 1e-10);
    }

    #[test]
    fn detects_collinear_column() {
        let m = Moments::from_fn(20, 3, |r, buf| {
            let x = r as f64;
            buf.copy_from_slice(&[x, (x * 1.7).sin(), 2.0 * x]);
        });
        assert_eq!(SubsetFit::new(&m, vec![0, 1, 2]).unwrap_err(), 2);
    }

    #[test]
    fn constant_column_is_collinear_with_intercept() {
        let m = Moments::from_fn(20, 2, |r, buf| buf.copy_from_slice(&[5.0, r as f64]));
        assert_eq!(SubsetFit::new(&m, vec![0]).unwrap_err(), 0);
    }
}
