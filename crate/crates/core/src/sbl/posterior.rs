//! Per-column Gaussian posterior of the stacked real system.

use nalgebra::DVector;

use crate::airlink::RealSystem;
use crate::linalg::{SensingColumns, WoodburyFactor};
use crate::{Error, RMat, Result};

/// Dense posterior of one column:
/// `Omega = (A^T A / sigma2 + diag(gamma))^{-1}`, `mu = Omega A^T y / sigma2`,
/// `phi = diag(Omega)`. `gamma` holds one precision per real unknown.
pub fn posterior_stats(
    a: &RMat,
    y: &DVector<f64>,
    gamma: &DVector<f64>,
    sigma2: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if a.ncols() != gamma.len() || a.nrows() != y.len() {
        return Err(Error::InvalidDimension(format!(
            "A is {}x{}, y has {}, gamma has {}",
            a.nrows(),
            a.ncols(),
            y.len(),
            gamma.len()
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::Config(format!("sigma2 must be > 0, got {sigma2}")));
    }
    let mut precision = a.transpose() * a / sigma2;
    for (i, g) in gamma.iter().enumerate() {
        precision[(i, i)] += g;
    }
    let chol = precision.cholesky().ok_or(Error::NotPositiveDefinite)?;
    let rhs = a.transpose() * y / sigma2;
    let mu = chol.solve(&rhs);
    let omega = chol.inverse();
    Ok((mu, omega.diagonal()))
}

/// Posterior of every column given per-real-scalar prior variances
/// (`N x M`, shared by each paired real/imaginary row).
///
/// The stacked real system has the block structure of a complex product and
/// the prior is circular, so the posterior is evaluated in complex form:
/// complex variance `2 var`, complex noise `2 sigma2`, and each real part
/// carries half of the complex posterior variance.
pub(crate) struct StackedPosterior {
    s: SensingColumns,
    y: crate::CMat,
    sigma2: f64,
}

impl StackedPosterior {
    pub fn new(system: &RealSystem, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::Config(format!("sigma2 must be > 0, got {sigma2}")));
        }
        Ok(Self {
            s: SensingColumns::new(&system.complex_sensing()),
            y: system.complex_observation(),
            sigma2,
        })
    }

    /// Fills the stacked `2N x M` mean and variance. When every column uses
    /// the same variances, pass a single-column `var`.
    pub fn evaluate(&self, var: &RMat, mu: &mut RMat, phi: &mut RMat) -> Result<()> {
        let n = self.s.cols();
        let noise = 2.0 * self.sigma2;
        let complex_var = |j: usize| var.column(j).iter().map(|v| 2.0 * v).collect::<Vec<_>>();
        let mut store = |j: usize, f: &WoodburyFactor, diag: &[f64]| {
            let m = f.mean(self.y.column(j).as_slice());
            for i in 0..n {
                mu[(i, j)] = m[i].re;
                mu[(i + n, j)] = m[i].im;
                phi[(i, j)] = 0.5 * diag[i];
                phi[(i + n, j)] = 0.5 * diag[i];
            }
        };
        if var.ncols() == 1 {
            let f = WoodburyFactor::new(&self.s, complex_var(0), noise)?;
            let diag = f.covariance_diag();
            for j in 0..self.y.ncols() {
                store(j, &f, &diag);
            }
        } else {
            for j in 0..self.y.ncols() {
                let f = WoodburyFactor::new(&self.s, complex_var(j), noise)?;
                let diag = f.covariance_diag();
                store(j, &f, &diag);
            }
        }
        Ok(())
    }
}

/// Posterior mean and variances of every column of `system`, computed on
/// the complex route. `var` is `N x M` (or `N x 1` when shared) and holds
/// prior variances per real scalar.
pub fn stacked_posterior(system: &RealSystem, var: &RMat, sigma2: f64) -> Result<(RMat, RMat)> {
    let n = system.logical_rows();
    let m = system.columns();
    if var.nrows() != n || (var.ncols() != 1 && var.ncols() != m) {
        return Err(Error::InvalidDimension(format!(
            "variances are {}x{}, system has {n} unknowns and {m} columns",
            var.nrows(),
            var.ncols()
        )));
    }
    if var.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Config("prior variances must be > 0".into()));
    }
    let post = StackedPosterior::new(system, sigma2)?;
    let mut mu = RMat::zeros(2 * n, m);
    let mut phi = RMat::zeros(2 * n, m);
    post.evaluate(var, &mut mu, &mut phi)?;
    Ok((mu, phi))
}
