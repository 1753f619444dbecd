//! Quick oracle suite behind the `verify` command. Every check is seeded and
//! finishes in well under a second.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::airlink::{complexify, dft_transform_matrix, realify, stack_real};
use crate::capacity::{
    brute_force_uniqueness, delta_gap, lemma1_bound, plant_row_sparse, theorem1_bound,
    DEFAULT_SUPPORT_CAP,
};
use crate::channel::complex_normal;
use crate::detect::group_circular;
use crate::harness::{run_trial, Profile, SystemConfig};
use crate::pilot::{build_extended_matrix, generate_pilot_pool, PilotPool};
use crate::sbl::{alpha_from_moment, beta_from_moment, jensen_gap, posterior_stats, SolverConfig, SolverKind};
use crate::{CMat, RMat};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name,
        passed,
        detail: detail.into(),
    }
}

fn closed_forms() -> Check {
    let cfg = SolverConfig::default();
    let a = alpha_from_moment(0.0, &cfg);
    let b = beta_from_moment(0.0, &cfg);
    let ok = (a - 302_500.0).abs() < 1e-6
        && (b - 1250.0).abs() < 1e-9
        && lemma1_bound(68, 64).ok() == Some(65)
        && theorem1_bound(68, 64, 8).ok() == Some(296)
        && delta_gap(68, 64, 8).ok() == Some(231);
    check("closed_forms", ok, format!("alpha(0)={a}, beta(0)={b}"))
}

fn jensen() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = f64::INFINITY;
    for _ in 0..10_000 {
        let (al, bt, l) = (
            rng.gen_range(1e-3..1e3),
            rng.gen_range(1e-3..1e3),
            rng.gen_range(1e-3..1.0 - 1e-3),
        );
        let (exact, approx) = jensen_gap(al, bt, l);
        worst = worst.min(approx - exact);
    }
    check("jensen_dominance", worst >= 0.0, format!("min(approx - exact) = {worst:e}"))
}

fn dft_unitary() -> Check {
    let psi = dft_transform_matrix(64);
    let err = (&psi * psi.adjoint() - CMat::identity(64, 64)).camax();
    check("dft_unitary", err < 1e-10, format!("max |PP^H - I| = {err:e}"))
}

fn stacking() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let s = CMat::from_fn(4, 6, |_, _| complex_normal(&mut rng, 1.0));
    let x = CMat::from_fn(6, 3, |_, _| complex_normal(&mut rng, 1.0));
    let sys = realify(&s, &(&s * &x)).unwrap();
    let err = (&sys.a * stack_real(&x) - &sys.y).amax();
    let round = (complexify(&stack_real(&x)) - &x).camax();
    check("real_stacking", err < 1e-12 && round == 0.0, format!("residual {err:e}"))
}

fn posterior_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (r, c) = (rng.gen_range(4..20), rng.gen_range(4..32));
        let a = RMat::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0));
        let y = nalgebra::DVector::from_fn(r, |_, _| rng.gen_range(-1.0..1.0));
        let g = nalgebra::DVector::from_fn(c, |_, _| rng.gen_range(0.1..10.0));
        let s2 = rng.gen_range(0.01..1.0);
        let (mu, _) = posterior_stats(&a, &y, &g, s2).unwrap();
        // normal equations (A^T A / s2 + diag g) mu = A^T y / s2
        let mut p = a.transpose() * &a / s2;
        for i in 0..c {
            p[(i, i)] += g[i];
        }
        let rhs = a.transpose() * &y / s2;
        worst = worst.max((p * &mu - &rhs).norm() / rhs.norm());
    }
    check("posterior_normal_equations", worst < 1e-8, format!("worst relative residual {worst:e}"))
}

fn pilots() -> Check {
    let pool = generate_pilot_pool(12, 5, 3).unwrap();
    let ext = build_extended_matrix(&pool, 2);
    let mut buf = Vec::new();
    pool.write_to(&mut buf).unwrap();
    let back = PilotPool::read_from(buf.as_slice()).unwrap();
    let ok = back.matrix() == pool.matrix() && ext.rows() == 14 && ext.cols() == 15;
    check("pilot_extension_and_io", ok, format!("extended {}x{}", ext.rows(), ext.cols()))
}

fn clusters() -> Check {
    let got = group_circular(&[2, 3, 10, 11], 64, 3);
    let wrap = group_circular(&[0, 63], 64, 3);
    let ok = got == vec![vec![10, 11], vec![2, 3]] && wrap == vec![vec![63, 0]];
    check("cluster_segmentation", ok, format!("{got:?} {wrap:?}"))
}

fn uniqueness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut unique = 0;
    for _ in 0..10 {
        let inst = plant_row_sparse(4, 9, 4, 2, &mut rng).unwrap();
        if brute_force_uniqueness(&inst.s, &inst.y, &inst.support, 2, DEFAULT_SUPPORT_CAP).unwrap() {
            unique += 1;
        }
    }
    let inst = plant_row_sparse(4, 9, 4, 4, &mut rng).unwrap();
    let ambiguous =
        !brute_force_uniqueness(&inst.s, &inst.y, &inst.support, 4, DEFAULT_SUPPORT_CAP).unwrap();
    check(
        "brute_force_uniqueness",
        unique == 10 && ambiguous,
        format!("{unique}/10 unique below the bound, ambiguous at r = L_hat: {ambiguous}"),
    )
}

fn trivial_trial() -> Check {
    let mut cfg = SystemConfig::profile(Profile::Fast);
    cfg.channel.antennas = 16;
    cfg.pilot_len = 16;
    cfg.pilots = 8;
    cfg.max_delay = 0;
    cfg.active = 1;
    cfg.snr_db = f64::INFINITY;
    let mut detail = String::new();
    let mut ok = true;
    for kind in [SolverKind::CeSbl, SolverKind::MSbl] {
        match (run_trial(&cfg, kind, 5), run_trial(&cfg, kind, 5)) {
            (Ok(a), Ok(b)) => {
                ok &= a.report.mu_ad == 1.0 && a.report == b.report;
                detail.push_str(&format!("{kind}: mu_ad={} ", a.report.mu_ad));
            }
            (Err(e), _) | (_, Err(e)) => {
                ok = false;
                detail.push_str(&format!("{kind}: {e} "));
            }
        }
    }
    check("single_user_noiseless_trial", ok, detail.trim_end())
}

/// Runs every check in a fixed order.
pub fn run_all() -> Vec<Check> {
    vec![
        closed_forms(),
        jensen(),
        dft_unitary(),
        stacking(),
        posterior_oracle(),
        pilots(),
        clusters(),
        uniqueness(),
        trivial_trial(),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run_all() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
