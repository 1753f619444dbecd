//! Small dense kernels for the Gaussian posterior of `y = S x + n`.
//!
//! With `x ~ CN(0, diag(v))` and `n ~ CN(0, s2 I)` the posterior covariance
//! `(S^H S / s2 + diag(1/v))^{-1}` is evaluated through the observation-space
//! matrix `C = s2 I + S diag(v) S^H`, which is only `L x L`:
//!
//! ```text
//! mean   = diag(v) S^H C^{-1} y
//! cov_ii = v_i - v_i^2 s_i^H C^{-1} s_i
//! ```
//!
//! Zero variances are allowed and pin the coefficient at zero.

use crate::{CMat, Complex64, Error, Result};

/// Column-major copy of a sensing matrix with the nonzero row range of every
/// column, so shifted pilots skip their zero padding.
#[derive(Debug, Clone)]
pub struct SensingColumns {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
    support: Vec<(usize, usize)>,
}

impl SensingColumns {
    pub fn new(s: &CMat) -> Self {
        let (rows, cols) = s.shape();
        let data = s.as_slice().to_vec();
        let zero = Complex64::new(0.0, 0.0);
        let support = (0..cols)
            .map(|j| {
                let col = &data[j * rows..(j + 1) * rows];
                let lo = col.iter().position(|z| *z != zero).unwrap_or(rows);
                let hi = col.iter().rposition(|z| *z != zero).map_or(lo, |p| p + 1);
                (lo, hi)
            })
            .collect();
        Self {
            rows,
            cols,
            data,
            support,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn column(&self, j: usize) -> &[Complex64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }
}

/// Cholesky factor of `C = s2 I + S diag(v) S^H` for one variance vector.
#[derive(Debug, Clone)]
pub struct WoodburyFactor<'a> {
    s: &'a SensingColumns,
    var: Vec<f64>,
    /// Lower-triangular factor, column-major `n x n`.
    chol: Vec<Complex64>,
}

impl<'a> WoodburyFactor<'a> {
    pub fn new(s: &'a SensingColumns, var: Vec<f64>, noise_var: f64) -> Result<Self> {
        assert_eq!(var.len(), s.cols, "one variance per sensing column");
        let n = s.rows;
        let mut c = vec![Complex64::new(0.0, 0.0); n * n];
        for a in 0..n {
            c[a * n + a] = Complex64::new(noise_var, 0.0);
        }
        for (j, &v) in var.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let (lo, hi) = s.support[j];
            let col = s.column(j);
            for b in lo..hi {
                let coef = col[b].conj() * v;
                let dst = &mut c[b * n + b..b * n + hi];
                for (d, x) in dst.iter_mut().zip(&col[b..hi]) {
                    *d += x * coef;
                }
            }
        }
        cholesky_lower(&mut c, n)?;
        Ok(Self { s, var, chol: c })
    }

    /// Posterior mean for observation `y`.
    pub fn mean(&self, y: &[Complex64]) -> Vec<Complex64> {
        let mut z = y.to_vec();
        forward_solve(&self.chol, self.s.rows, &mut z, 0);
        backward_solve_adjoint(&self.chol, self.s.rows, &mut z);
        (0..self.s.cols)
            .map(|j| {
                let (lo, hi) = self.s.support[j];
                let col = self.s.column(j);
                let dot: Complex64 = col[lo..hi]
                    .iter()
                    .zip(&z[lo..hi])
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                dot * self.var[j]
            })
            .collect()
    }

    /// Diagonal of the posterior covariance, clamped at zero against
    /// round-off in the subtraction.
    pub fn covariance_diag(&self) -> Vec<f64> {
        let n = self.s.rows;
        let mut w = vec![Complex64::new(0.0, 0.0); n];
        (0..self.s.cols)
            .map(|j| {
                let v = self.var[j];
                if v == 0.0 {
                    return 0.0;
                }
                let (lo, hi) = self.s.support[j];
                w.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
                w[lo..hi].copy_from_slice(&self.s.column(j)[lo..hi]);
                forward_solve(&self.chol, n, &mut w, lo);
                let quad: f64 = w[lo..].iter().map(|x| x.norm_sqr()).sum();
                (v - v * v * quad).max(0.0)
            })
            .collect()
    }
}

/// In-place lower Cholesky of a Hermitian matrix stored column-major; only
/// the lower triangle is read.
fn cholesky_lower(c: &mut [Complex64], n: usize) -> Result<()> {
    for k in 0..n {
        let d = c[k * n + k].re;
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let d = d.sqrt();
        c[k * n + k] = Complex64::new(d, 0.0);
        let inv = 1.0 / d;
        for a in k + 1..n {
            c[k * n + a] *= inv;
        }
        // trailing update: C[a, b] -= L[a, k] conj(L[b, k]) for a >= b > k
        for b in k + 1..n {
            let lbk = c[k * n + b].conj();
            if lbk == Complex64::new(0.0, 0.0) {
                continue;
            }
            let (head, tail) = c.split_at_mut(b * n);
            let src = &head[k * n + b..k * n + n];
            let dst = &mut tail[b..n];
            for (d, s) in dst.iter_mut().zip(src) {
                *d -= s * lbk;
            }
        }
    }
    Ok(())
}

/// Solves `L w = w` in place, assuming `w[..start]` is zero.
fn forward_solve(l: &[Complex64], n: usize, w: &mut [Complex64], start: usize) {
    for b in start..n {
        let wb = w[b] / l[b * n + b].re;
        w[b] = wb;
        if wb == Complex64::new(0.0, 0.0) {
            continue;
        }
        let col = &l[b * n + b + 1..b * n + n];
        for (x, lab) in w[b + 1..n].iter_mut().zip(col) {
            *x -= lab * wb;
        }
    }
}

/// Solves `L^H w = w` in place.
fn backward_solve_adjoint(l: &[Complex64], n: usize, w: &mut [Complex64]) {
    for b in (0..n).rev() {
        let col = &l[b * n + b + 1..b * n + n];
        let acc: Complex64 = col.iter().zip(&w[b + 1..n]).map(|(lab, x)| lab.conj() * x).sum();
        w[b] = (w[b] - acc) / l[b * n + b].re;
    }
}
