use cesbl::airlink::complexify;
use cesbl::detect::{detect_rows, detect_users, match_and_score, segment_clusters, ClusterMask,
    DetectorConfig,};
use cesbl::harness::{draw_instance, solver_sigma2, trial_seed, Instance, Profile, SystemConfig};
use cesbl::sbl::{solve, SolverConfig, SolverKind};
use cesbl::CMat;

fn small() -> SystemConfig {
    let mut cfg = SystemConfig::profile(Profile::Fast);
    cfg.channel.antennas = 16;
    cfg.pilots = 6;
    cfg.pilot_len = 12;
    cfg.max_delay = 1;
    cfg.active = 5;
    cfg.snr_db = 20.0;
    cfg
}

fn estimate(cfg: &SystemConfig, inst: &Instance) -> CMat {
    let solver = SolverConfig {
        sigma2: solver_sigma2(cfg, &inst.measurement),
        ..cfg.solver
    };
    complexify(&solve(SolverKind::CeSbl, &inst.system, &solver).unwrap().x_map)
}

fn score(cfg: &SystemConfig, inst: &Instance, x: &CMat, det: &DetectorConfig) -> f64 {
    let theta1 = det.theta1_for(cfg.snr_db);
    let rows = detect_rows(x, theta1);
    let mut d = detect_users(x, &inst.ext, &inst.psi, theta1, det).unwrap();
    match_and_score(&inst.truth, &inst.ext, &inst.psi, x, &mut d, &rows, det)
        .unwrap()
        .mu_ad
}

#[test]
fn retained_bins_are_nested_in_theta2() {
    let cfg = small();
    let thetas = [0.5, 0.8, 0.9, 0.95, 0.98, 0.995, 1.0];
    for t in 0..6 {
        let inst = draw_instance(&cfg, trial_seed(21, 0, t)).unwrap();
        let x = estimate(&cfg, &inst);
        for r in detect_rows(&x, cfg.detector.theta1_for(cfg.snr_db)) {
            let row: Vec<_> = x.row(r).iter().copied().collect();
            let mut prev: Vec<usize> = Vec::new();
            let mut prev_clusters = 0;
            for &theta2 in &thetas {
                let clusters = segment_clusters(&row, theta2, cfg.detector.theta3);
                let mut bins: Vec<usize> = clusters.iter().flatten().copied().collect();
                bins.sort_unstable();
                assert!(prev.iter().all(|b| bins.binary_search(b).is_ok()), "trial {t} row {r}");
                assert!(!clusters.is_empty() || prev_clusters == 0);
                prev = bins;
                prev_clusters = clusters.len();
            }
        }
    }
}

#[test]
fn detection_ratio_rises_with_theta2_on_average() {
    // Growing theta2 can merge clusters, but on this suite the lower per-user
    // error from keeping more bins dominates.
    let cfg = small();
    let (mut up, mut down) = (0, 0);
    for t in 0..12 {
        let inst = draw_instance(&cfg, trial_seed(21, 0, t)).unwrap();
        let x = estimate(&cfg, &inst);
        for mask in [ClusterMask::OtherClusters, ClusterMask::OwnBins] {
            let at = |theta2| {
                let det = DetectorConfig {
                    theta2,
                    cluster_mask: mask,
                    ..cfg.detector
                };
                score(&cfg, &inst, &x, &det)
            };
            let (lo, hi) = (at(0.9), at(0.995));
            up += usize::from(hi > lo);
            down += usize::from(hi < lo);
        }
    }
    assert!(up > down, "up {up} down {down}");
}

#[test]
fn own_bin_masking_never_beats_other_cluster_masking_on_isolated_users() {
    // For a user alone in its row the two masks differ only by the tail
    // below theta2, which carries the user's own leakage.
    let cfg = small();
    let own = DetectorConfig {
        cluster_mask: ClusterMask::OwnBins,
        ..cfg.detector
    };
    let mut total = (0.0, 0.0);
    for t in 0..8 {
        let inst = draw_instance(&cfg, trial_seed(22, 0, t)).unwrap();
        let x = estimate(&cfg, &inst);
        total.0 += score(&cfg, &inst, &x, &cfg.detector);
        total.1 += score(&cfg, &inst, &x, &own);
    }
    assert!(total.0 >= total.1, "{total:?}");
}

#[test]
fn exact_estimate_scores_one_without_collisions() {
    let mut cfg = small();
    cfg.active = 1;
    for t in 0..5 {
        let inst = draw_instance(&cfg, trial_seed(23, 0, t)).unwrap();
        let x = inst.truth.x_hat.clone();
        assert_eq!(score(&cfg, &inst, &x, &cfg.detector), 1.0);
    }
}
