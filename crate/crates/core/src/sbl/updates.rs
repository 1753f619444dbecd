//! Closed-form M-step updates of the cluster-extended prior.
//!
//! All moment matrices here are indexed by logical row (one per complex
//! coefficient) and angular column. The real and imaginary parts of a
//! coefficient share one set of hyperparameters, so their second moments
//! are averaged into a single per-real-scalar moment before the update.

use nalgebra::{DMatrix, DVector};

use super::SolverConfig;
use crate::{Error, RMat, Result};

/// Per-logical-entry second moment `E[x^2]` averaged over the paired real
/// rows `i` and `i + N`, from the stacked `2N x M` posterior mean and variance.
pub fn paired_second_moments(mu: &RMat, phi: &RMat) -> RMat {
    let n = mu.nrows() / 2;
    RMat::from_fn(n, mu.ncols(), |i, j| {
        let re = mu[(i, j)] * mu[(i, j)] + phi[(i, j)];
        let im = mu[(i + n, j)] * mu[(i + n, j)] + phi[(i + n, j)];
        0.5 * (re + im)
    })
}

/// `(8a + 2) / (8b + v / lambda)`.
pub fn alpha_from_moment(v: f64, cfg: &SolverConfig) -> f64 {
    (8.0 * cfg.a + 2.0) / (8.0 * cfg.b + v / cfg.lambda)
}

/// `8c / (8d + q / (1 - lambda))`.
pub fn beta_from_moment(q: f64, cfg: &SolverConfig) -> f64 {
    8.0 * cfg.c / (8.0 * cfg.d + q / (1.0 - cfg.lambda))
}

/// Row-wise precision update from the row's mean second moment.
pub fn update_alpha_from_moments(moments: &RMat, cfg: &SolverConfig) -> DVector<f64> {
    let m = moments.ncols() as f64;
    DVector::from_fn(moments.nrows(), |i, _| {
        let v = moments.row(i).sum() / m;
        alpha_from_moment(v, cfg)
    })
}

/// Row-wise precision update from the stacked posterior.
pub fn update_alpha(mu: &RMat, phi: &RMat, cfg: &SolverConfig) -> DVector<f64> {
    update_alpha_from_moments(&paired_second_moments(mu, phi), cfg)
}

/// `q_{i,j} = kappa m_{i,j-1} + m_{i,j} + kappa m_{i,j+1}`, circular in `j`.
pub fn coupled_moments(moments: &RMat, kappa: f64) -> RMat {
    let m = moments.ncols();
    RMat::from_fn(moments.nrows(), m, |i, j| {
        let prev = moments[(i, (j + m - 1) % m)];
        let next = moments[(i, (j + 1) % m)];
        kappa * prev + moments[(i, j)] + kappa * next
    })
}

pub fn update_beta_from_moments(moments: &RMat, cfg: &SolverConfig) -> Result<RMat> {
    if cfg.lambda >= 1.0 {
        return Err(Error::Config(
            "beta update is undefined for lambda = 1 (pure row-sparse prior)".into(),
        ));
    }
    Ok(coupled_moments(moments, cfg.kappa).map(|q| beta_from_moment(q, cfg)))
}

/// Entry-wise pattern-coupled precision update from the stacked posterior.
pub fn update_beta(mu: &RMat, phi: &RMat, cfg: &SolverConfig) -> Result<RMat> {
    update_beta_from_moments(&paired_second_moments(mu, phi), cfg)
}

/// `kappa b_{j-1} + b_j + kappa b_{j+1}`, circular in `j`.
pub fn coupled_beta(beta: &RMat, kappa: f64) -> RMat {
    coupled_moments(beta, kappa)
}

/// `1/gamma = lambda / alpha_i + (1 - lambda) / beta_tilde_{i,j}`.
///
/// The endpoints drop the branch whose weight is zero, so `lambda = 1`
/// gives `gamma = alpha` and `lambda = 0` gives `gamma = beta_tilde`.
pub fn combine_gamma(alpha: &DVector<f64>, beta: &RMat, cfg: &SolverConfig) -> RMat {
    let lambda = cfg.lambda;
    if lambda >= 1.0 {
        return DMatrix::from_fn(alpha.len(), beta.ncols(), |i, _| alpha[i]);
    }
    let tilde = coupled_beta(beta, cfg.kappa);
    RMat::from_fn(beta.nrows(), beta.ncols(), |i, j| {
        let row_part = if lambda > 0.0 { lambda / alpha[i] } else { 0.0 };
        1.0 / (row_part + (1.0 - lambda) / tilde[(i, j)])
    })
}

/// Exact weighted harmonic combination and its decoupling surrogate
/// `alpha / (4 lambda) + beta_tilde / (4 (1 - lambda))`.
pub fn jensen_gap(alpha: f64, beta_tilde: f64, lambda: f64) -> (f64, f64) {
    let exact = 1.0 / (lambda / alpha + (1.0 - lambda) / beta_tilde);
    let approx = alpha / (4.0 * lambda) + beta_tilde / (4.0 * (1.0 - lambda));
    (exact, approx)
}
