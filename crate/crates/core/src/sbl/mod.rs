//! Sparse Bayesian learning over the stacked real system.
//!
//! [`ce_sbl`] runs EM with the cluster-extended prior: every entry of the
//! delay-angle matrix has precision `gamma_{i,j}` mixing a row precision
//! `alpha_i` with pattern-coupled entry precisions `beta_{i,j}` of its
//! angular neighbors. [`m_sbl`] is the classic row-sparse baseline with one
//! prior variance per row.

mod posterior;
mod updates;

use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::airlink::RealSystem;
use crate::{Error, RMat, Result};

pub use posterior::{posterior_stats, stacked_posterior};
pub use updates::{
    alpha_from_moment, beta_from_moment, combine_gamma, coupled_beta, coupled_moments,
    jensen_gap, paired_second_moments, update_alpha, update_alpha_from_moments, update_beta,
    update_beta_from_moments,
};

use posterior::StackedPosterior;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Gamma hyperprior shape/rate of `alpha`.
    pub a: f64,
    pub b: f64,
    /// Gamma hyperprior shape/rate of `beta`.
    pub c: f64,
    pub d: f64,
    /// Weight of the row-sparse part of the prior, in `[0, 1]`.
    pub lambda: f64,
    /// Coupling between angular neighbors.
    pub kappa: f64,
    /// Noise variance per real entry of the stacked system.
    pub sigma2: f64,
    /// Stop once `||X_{t+1} - X_t||_F^2` drops below this.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            a: 30.0,
            b: 1e-4,
            c: 0.125,
            d: 1e-4,
            lambda: 0.01,
            kappa: 0.1,
            sigma2: 1.0,
            tol: 1e-8,
            max_iters: 500,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("d", self.d),
            ("kappa", self.kappa),
            ("sigma2", self.sigma2),
            ("tol", self.tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    CeSbl,
    MSbl,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::CeSbl => "ce_sbl",
            SolverKind::MSbl => "m_sbl",
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ce_sbl" => Ok(SolverKind::CeSbl),
            "m_sbl" => Ok(SolverKind::MSbl),
            other => Err(Error::Config(format!("unknown solver {other:?}"))),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One EM iteration's diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `||X_t - X_{t-1}||_F^2`, with `X_0 = 0`.
    pub delta_x: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub beta_min: f64,
    pub beta_max: f64,
}

/// Final solver state and history.
#[derive(Debug, Clone)]
pub struct SolverOutput {
    /// Posterior mean, stacked `[Re; Im]`, `2N x M`.
    pub x_map: RMat,
    /// Posterior variances matching `x_map`.
    pub phi: RMat,
    /// Row precisions (CE-SBL) or row variances (M-SBL) after the last M-step.
    pub alpha: DVector<f64>,
    /// Entry precisions; empty for M-SBL.
    pub beta: RMat,
    /// Per-entry precisions used for `x_map`, `N x M`.
    pub gamma: RMat,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<IterationRecord>,
}

impl SolverOutput {
    pub fn delta_x(&self) -> impl Iterator<Item = f64> + '_ {
        self.trace.iter().map(|r| r.delta_x)
    }

    /// `iteration,delta_x,alpha_min,alpha_max,beta_min,beta_max` rows.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,delta_x,alpha_min,alpha_max,beta_min,beta_max\n");
        for r in &self.trace {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e}",
                r.iteration, r.delta_x, r.alpha_min, r.alpha_max, r.beta_min, r.beta_max
            )
            .unwrap();
        }
        out
    }
}

fn min_max<'a>(it: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    })
}

fn check_system(system: &RealSystem) -> Result<()> {
    let (rows, cols) = system.a.shape();
    if rows % 2 != 0 || cols % 2 != 0 || rows == 0 || cols == 0 {
        return Err(Error::InvalidDimension(format!(
            "stacked system must have even, non-zero dimensions, got {rows}x{cols}"
        )));
    }
    if system.y.nrows() != rows || system.y.ncols() == 0 {
        return Err(Error::InvalidDimension(format!(
            "observation is {}x{}, expected {rows} rows",
            system.y.nrows(),
            system.y.ncols()
        )));
    }
    Ok(())
}

/// Cluster-extended SBL.
///
/// Starts from `gamma = 1` (and `alpha = beta = 1`), then alternates the
/// per-column posterior with the closed-form `alpha`, `beta` and `gamma`
/// updates until the squared change of the posterior mean drops below
/// `cfg.tol` or `cfg.max_iters` is reached. Non-convergence is reported
/// through [`SolverOutput::converged`]; the last estimate is still returned.
pub fn ce_sbl(system: &RealSystem, cfg: &SolverConfig) -> Result<SolverOutput> {
    cfg.validate()?;
    check_system(system)?;
    let n = system.logical_rows();
    let m = system.columns();
    let post = StackedPosterior::new(system, cfg.sigma2)?;

    let mut alpha = DVector::from_element(n, 1.0);
    let mut beta = RMat::from_element(n, m, 1.0);
    let mut gamma = RMat::from_element(n, m, 1.0);
    let mut used_gamma = gamma.clone();
    let mut x = RMat::zeros(2 * n, m);
    let mut phi = RMat::zeros(2 * n, m);
    let mut prev = RMat::zeros(2 * n, m);
    let mut trace = Vec::new();
    let mut converged = false;

    for iteration in 1..=cfg.max_iters {
        let var = gamma.map(|g| 1.0 / g);
        post.evaluate(&var, &mut x, &mut phi)?;
        used_gamma.copy_from(&gamma);
        let delta_x = (&x - &prev).norm_squared();

        let moments = paired_second_moments(&x, &phi);
        if cfg.lambda > 0.0 {
            alpha = update_alpha_from_moments(&moments, cfg);
        }
        if cfg.lambda < 1.0 {
            beta = update_beta_from_moments(&moments, cfg)?;
        }
        gamma = combine_gamma(&alpha, &beta, cfg);

        let (alpha_min, alpha_max) = min_max(alpha.iter());
        let (beta_min, beta_max) = min_max(beta.iter());
        trace.push(IterationRecord {
            iteration,
            delta_x,
            alpha_min,
            alpha_max,
            beta_min,
            beta_max,
        });
        if delta_x < cfg.tol {
            converged = true;
            break;
        }
        prev.copy_from(&x);
    }

    Ok(SolverOutput {
        x_map: x,
        phi,
        alpha,
        beta,
        gamma: used_gamma,
        iterations: trace.len(),
        converged,
        trace,
    })
}

/// Row-sparse M-SBL baseline.
///
/// Each logical row has one prior variance `g_i` shared by all columns and
/// by its real/imaginary pair; the EM update is
/// `g_i = mean_j(mu_ij^2 + phi_ij)` over the row's real scalars.
pub fn m_sbl(system: &RealSystem, cfg: &SolverConfig) -> Result<SolverOutput> {
    cfg.validate()?;
    check_system(system)?;
    let n = system.logical_rows();
    let m = system.columns();
    let post = StackedPosterior::new(system, cfg.sigma2)?;

    let mut var = RMat::from_element(n, 1, 1.0);
    let mut used_var = var.clone();
    let mut x = RMat::zeros(2 * n, m);
    let mut phi = RMat::zeros(2 * n, m);
    let mut prev = RMat::zeros(2 * n, m);
    let mut trace = Vec::new();
    let mut converged = false;

    for iteration in 1..=cfg.max_iters {
        post.evaluate(&var, &mut x, &mut phi)?;
        used_var.copy_from(&var);
        let delta_x = (&x - &prev).norm_squared();

        let moments = paired_second_moments(&x, &phi);
        for i in 0..n {
            var[(i, 0)] = moments.row(i).sum() / m as f64;
        }
        let (alpha_min, alpha_max) = min_max(var.iter());
        trace.push(IterationRecord {
            iteration,
            delta_x,
            alpha_min,
            alpha_max,
            beta_min: f64::NAN,
            beta_max: f64::NAN,
        });
        if delta_x < cfg.tol {
            converged = true;
            break;
        }
        prev.copy_from(&x);
    }

    Ok(SolverOutput {
        x_map: x,
        phi,
        alpha: var.column(0).into_owned(),
        beta: RMat::zeros(0, 0),
        gamma: RMat::from_fn(n, m, |i, _| 1.0 / used_var[(i, 0)]),
        iterations: trace.len(),
        converged,
        trace,
    })
}

pub fn solve(kind: SolverKind, system: &RealSystem, cfg: &SolverConfig) -> Result<SolverOutput> {
    match kind {
        SolverKind::CeSbl => ce_sbl(system, cfg),
        SolverKind::MSbl => m_sbl(system, cfg),
    }
}
