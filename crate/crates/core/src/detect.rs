//! Activity detection and channel recovery from the delay-angle estimate,
//! and scoring against the ground truth.
//!
//! Rows are taken in order of energy until a `theta1` share of the total is
//! covered; inside each row the strongest bins covering `theta2` of the row
//! power are kept and split into angular clusters wherever two selected bins
//! are more than `theta3` bins apart (circularly). Each cluster is one user,
//! recovered by zeroing the other clusters of its row (see [`ClusterMask`]).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::airlink::{nmse_db, ratio_db, GroundTruth};
use crate::pilot::ExtendedPilotMatrix;
use crate::{CMat, Complex64, Error, Result};

/// Floor used for NMSE values of exact estimates.
pub const NMSE_FLOOR_DB: f64 = -200.0;

/// Which bins a cluster's channel estimate keeps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterMask {
    /// Zero the bins of the row's other clusters; bins below the `theta2`
    /// cut stay in every estimate of the row.
    #[default]
    OtherClusters,
    /// Keep only the cluster's own bins.
    OwnBins,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    /// Row-energy share; `None` derives it from the SNR as `1 / (1 + 10^(-snr/10))`.
    pub theta1: Option<f64>,
    /// Per-row power share kept before clustering.
    pub theta2: f64,
    /// Largest circular gap (in bins) between selected bins of one cluster.
    pub theta3: usize,
    /// Per-user channel NMSE a detection must reach, dB.
    pub user_nmse_gate_db: f64,
    pub cluster_mask: ClusterMask,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            theta1: None,
            theta2: 0.98,
            theta3: 3,
            user_nmse_gate_db: -15.0,
            cluster_mask: ClusterMask::OtherClusters,
        }
    }
}

impl DetectorConfig {
    /// Signal share of the received power at `snr_db`; 1 for a noiseless link.
    pub fn theta1_for(&self, snr_db: f64) -> f64 {
        self.theta1
            .unwrap_or_else(|| 1.0 / (1.0 + 10f64.powf(-snr_db / 10.0)))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.theta1 {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Config(format!("theta1 must lie in (0, 1], got {t}")));
            }
        }
        if !(self.theta2 > 0.0 && self.theta2 <= 1.0) {
            return Err(Error::Config(format!(
                "theta2 must lie in (0, 1], got {}",
                self.theta2
            )));
        }
        if self.theta3 == 0 {
            return Err(Error::Config("theta3 must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectedUser {
    pub row: usize,
    pub pilot_index: usize,
    pub delay: usize,
    /// Angular bins of the cluster in circular order.
    pub cluster_bins: Vec<usize>,
    pub channel_estimate: DVector<Complex64>,
    /// Index into `GroundTruth::users` once matched.
    pub matched_truth: Option<usize>,
    /// NMSE against the matched user's channel; NaN when unmatched.
    pub nmse_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreReport {
    pub mu_ad: f64,
    pub nmse_ce_db: f64,
    pub detected_count: usize,
    pub truth_count: usize,
    pub false_rows: usize,
}

/// Indices ordered by descending weight, ties to the lower index, cut at the
/// shortest prefix whose cumulative weight reaches `share` of the total.
fn minimal_prefix(weights: &[f64], share: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let total: f64 = order.iter().map(|&i| weights[i]).sum();
    if total <= 0.0 {
        return Vec::new();
    }
    let target = share * total;
    let mut acc = 0.0;
    let mut out = Vec::new();
    for i in order {
        if weights[i] <= 0.0 {
            break;
        }
        acc += weights[i];
        out.push(i);
        if acc >= target {
            break;
        }
    }
    out
}

/// Rows by descending energy, up to the minimal prefix holding `theta1` of
/// the total energy. Empty iff `x` is identically zero.
pub fn detect_rows(x: &CMat, theta1: f64) -> Vec<usize> {
    let energies: Vec<f64> = x.row_iter().map(|r| r.norm_squared()).collect();
    minimal_prefix(&energies, theta1)
}

/// Minimal set of strongest bins holding `theta2` of the row power, grouped
/// into circular runs whose consecutive members are at most `theta3` apart.
pub fn segment_clusters(row: &[Complex64], theta2: f64, theta3: usize) -> Vec<Vec<usize>> {
    let m = row.len();
    let power: Vec<f64> = row.iter().map(|z| z.norm_sqr()).collect();
    let mut bins = minimal_prefix(&power, theta2);
    bins.sort_unstable();
    group_circular(&bins, m, theta3)
}

/// Splits sorted bins into circular runs with gaps `<= max_gap`.
pub fn group_circular(bins: &[usize], m: usize, max_gap: usize) -> Vec<Vec<usize>> {
    let k = bins.len();
    if k == 0 {
        return Vec::new();
    }
    let gap_after = |i: usize| {
        if i + 1 < k {
            bins[i + 1] - bins[i]
        } else {
            bins[0] + m - bins[k - 1]
        }
    };
    // Start right after the first break so wrap-around runs stay whole.
    let Some(first_break) = (0..k).find(|&i| gap_after(i) > max_gap) else {
        return vec![bins.to_vec()];
    };
    let mut clusters = Vec::new();
    let mut current = Vec::new();
    for step in 1..=k {
        let i = (first_break + step) % k;
        current.push(bins[i]);
        if gap_after(i) > max_gap {
            clusters.push(std::mem::take(&mut current));
        }
    }
    debug_assert!(current.is_empty());
    clusters
}

/// Antenna-domain channel of a delay-angle row vector: `x psi^H`.
pub fn to_antenna_domain(x: &[Complex64], psi: &CMat) -> DVector<Complex64> {
    let m = psi.nrows();
    DVector::from_fn(m, |a, _| {
        x.iter()
            .enumerate()
            .map(|(n, v)| v * psi[(a, n)].conj())
            .sum()
    })
}

/// Antenna-domain channel estimate of every cluster of `row`.
pub fn recover_user_channels(
    row: &[Complex64],
    clusters: &[Vec<usize>],
    psi: &CMat,
    mask: ClusterMask,
) -> Vec<(Vec<usize>, DVector<Complex64>)> {
    let zero = Complex64::new(0.0, 0.0);
    clusters
        .iter()
        .enumerate()
        .map(|(ci, bins)| {
            let masked = match mask {
                ClusterMask::OwnBins => {
                    let mut m = vec![zero; row.len()];
                    for &b in bins {
                        m[b] = row[b];
                    }
                    m
                }
                ClusterMask::OtherClusters => {
                    let mut m = row.to_vec();
                    for (cj, other) in clusters.iter().enumerate() {
                        if cj != ci {
                            for &b in other {
                                m[b] = zero;
                            }
                        }
                    }
                    m
                }
            };
            (bins.clone(), to_antenna_domain(&masked, psi))
        })
        .collect()
}

/// `(pilot, delay)` of extended row `row`.
pub fn extract_identity(row: usize, t_m: usize, n_hat: usize) -> Result<(usize, usize)> {
    if row >= n_hat {
        return Err(Error::OutOfRange {
            what: "row",
            value: row as i64,
            range: format!("[0, {n_hat})"),
        });
    }
    Ok((row / (t_m + 1), row % (t_m + 1)))
}

/// Full detection pass over a complex `N_hat x M` estimate.
pub fn detect_users(
    x_est: &CMat,
    ext: &ExtendedPilotMatrix,
    psi: &CMat,
    theta1: f64,
    cfg: &DetectorConfig,
) -> Result<Vec<DetectedUser>> {
    let mut out = Vec::new();
    for row in detect_rows(x_est, theta1) {
        let (pilot_index, delay) = extract_identity(row, ext.max_delay(), ext.cols())?;
        let values: Vec<Complex64> = x_est.row(row).iter().copied().collect();
        let clusters = segment_clusters(&values, cfg.theta2, cfg.theta3);
        for (cluster_bins, channel_estimate) in recover_user_channels(&values, &clusters, psi, cfg.cluster_mask) {
            out.push(DetectedUser {
                row,
                pilot_index,
                delay,
                cluster_bins,
                channel_estimate,
                matched_truth: None,
                nmse_db: f64::NAN,
            });
        }
    }
    Ok(out)
}

/// Matches detections to users and computes the scores.
///
/// A user counts as detected when a detection on its (pilot, delay) row is
/// assigned to it and that detection's channel NMSE is within the gate.
/// Within each row, (user, cluster) pairs are assigned greedily by the
/// number of shared bins between the cluster and the user's dominant bins
/// (same `theta2` rule), ties to the cluster with the lower first bin and
/// then the lower user index; pairs without shared bins are never assigned.
pub fn match_and_score(
    truth: &GroundTruth,
    ext: &ExtendedPilotMatrix,
    psi: &CMat,
    x_est: &CMat,
    detections: &mut [DetectedUser],
    detected_rows: &[usize],
    cfg: &DetectorConfig,
) -> Result<ScoreReport> {
    if truth.users.is_empty() {
        return Err(Error::Config("scoring needs at least one true user".into()));
    }
    let mut by_row: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for k in 0..truth.users.len() {
        by_row.entry(truth.row_of(k, ext)).or_default().0.push(k);
    }
    for (d, det) in detections.iter().enumerate() {
        if let Some(entry) = by_row.get_mut(&det.row) {
            entry.1.push(d);
        }
    }

    let mut detected = 0;
    for (users, dets) in by_row.values() {
        if dets.is_empty() {
            continue;
        }
        let dominant: Vec<Vec<usize>> = users
            .iter()
            .map(|&k| {
                let x_k: Vec<Complex64> =
                    (truth.users[k].channel.transpose() * psi).iter().copied().collect();
                let power: Vec<f64> = x_k.iter().map(|z| z.norm_sqr()).collect();
                minimal_prefix(&power, cfg.theta2)
            })
            .collect();
        let mut pairs = Vec::new();
        for (ui, &k) in users.iter().enumerate() {
            for &d in dets {
                let bins = &detections[d].cluster_bins;
                let overlap = bins.iter().filter(|b| dominant[ui].contains(b)).count();
                if overlap > 0 {
                    let first = bins.iter().copied().min().unwrap_or(usize::MAX);
                    pairs.push((overlap, first, k, d));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut user_taken = vec![false; truth.users.len()];
        let mut det_taken = vec![false; detections.len()];
        for (_, _, k, d) in pairs {
            if user_taken[k] || det_taken[d] {
                continue;
            }
            user_taken[k] = true;
            det_taken[d] = true;
            let det = &mut detections[d];
            let actual = &truth.users[k].channel;
            let err = (&det.channel_estimate - actual).norm_squared();
            det.nmse_db = ratio_db(err, det.channel_estimate.norm_squared(), NMSE_FLOOR_DB);
            det.matched_truth = Some(k);
            if det.nmse_db <= cfg.user_nmse_gate_db {
                detected += 1;
            }
        }
    }

    let false_rows = detected_rows
        .iter()
        .filter(|r| !truth.support_rows.contains(r))
        .count();
    let truth_count = truth.users.len();
    Ok(ScoreReport {
        mu_ad: detected as f64 / truth_count as f64,
        nmse_ce_db: nmse_db(x_est, &truth.x_hat, NMSE_FLOOR_DB),
        detected_count: detected,
        truth_count,
        false_rows,
    })
}

/// One line per detection: `pilot delay bins nmse_db matched`.
pub fn report_text(detections: &[DetectedUser]) -> String {
    let mut out = String::from("# pilot delay cluster_bins nmse_db matched\n");
    for d in detections {
        let bins: Vec<String> = d.cluster_bins.iter().map(|b| b.to_string()).collect();
        let matched = match d.matched_truth {
            Some(k) => format!("user{k}"),
            None => "-".into(),
        };
        writeln!(
            out,
            "{} {} {} {:.3} {}",
            d.pilot_index,
            d.delay,
            bins.join(","),
            d.nmse_db,
            matched
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airlink::{assemble_ground_truth, dft_transform_matrix};
    use crate::channel::{array_response, UserRealization};
    use crate::pilot::{build_extended_matrix, generate_pilot_pool};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn single_nonzero_row() {
        let mut x = CMat::zeros(5, 3);
        x[(3, 1)] = Complex64::new(0.0, 2.0);
        for theta in [0.1, 0.5, 0.99] {
            assert_eq!(detect_rows(&x, theta), vec![3]);
        }
        assert!(detect_rows(&CMat::zeros(4, 2), 0.9).is_empty());
    }

    #[test]
    fn cumulative_row_energy() {
        let x = CMat::from_column_slice(3, 1, &[c(3.0), c(0.9f64.sqrt()), c(0.1f64.sqrt())]);
        assert_eq!(detect_rows(&x, 0.969), vec![0, 1]);
        let t = DetectorConfig::default().theta1_for(15.0);
        assert!((t - 0.96935).abs() < 1e-5);
        assert!((t - 1.0 / (1.0 + 10f64.powf(-1.5))).abs() < 1e-15);
        assert_eq!(DetectorConfig::default().theta1_for(f64::INFINITY), 1.0);
    }

    #[test]
    fn prefix_is_minimal() {
        let e = [4.0, 1.0, 3.0, 0.5, 2.0];
        let rows = minimal_prefix(&e, 0.8);
        let total: f64 = e.iter().sum();
        let got: f64 = rows.iter().map(|&i| e[i]).sum();
        let without_last: f64 = rows[..rows.len() - 1].iter().map(|&i| e[i]).sum();
        assert!(got >= 0.8 * total);
        assert!(without_last < 0.8 * total);
    }

    #[test]
    fn contiguous_bump_is_one_cluster() {
        let mut row = vec![c(0.0); 16];
        row[5] = c(1.0);
        row[6] = c(2.0);
        row[7] = c(1.0);
        assert_eq!(segment_clusters(&row, 0.98, 3), vec![vec![5, 6, 7]]);
    }

    #[test]
    fn gap_splits_clusters() {
        assert_eq!(
            group_circular(&[2, 3, 10, 11], 64, 3),
            vec![vec![10, 11], vec![2, 3]]
        );
        assert_eq!(group_circular(&[0, 63], 64, 3), vec![vec![63, 0]]);
        assert_eq!(group_circular(&[1, 4], 64, 3), vec![vec![1, 4]]);
        assert_eq!(group_circular(&[7], 64, 3), vec![vec![7]]);
    }

    #[test]
    fn partition_is_exhaustive_and_disjoint() {
        let bins = [0, 1, 5, 9, 10, 20, 30, 31, 62];
        let clusters = group_circular(&bins, 64, 3);
        let mut all: Vec<usize> = clusters.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, bins.to_vec());
        assert_eq!(clusters.len(), 5);
    }

    #[test]
    fn cluster_estimates_sum_to_the_masked_row() {
        let psi = dft_transform_matrix(8);
        let row: Vec<Complex64> = (0..8).map(|i| Complex64::new(i as f64, 1.0 - i as f64)).collect();
        let clusters = vec![vec![1, 2], vec![5, 6, 7]];
        let parts = recover_user_channels(&row, &clusters, &psi, ClusterMask::OwnBins);
        let mut masked = row.clone();
        for b in [0, 3, 4] {
            masked[b] = c(0.0);
        }
        let full = to_antenna_domain(&masked, &psi);
        let sum = &parts[0].1 + &parts[1].1;
        assert!((sum - full).norm() < 1e-12);

        // the unselected bins stay in both estimates
        let parts = recover_user_channels(&row, &clusters, &psi, ClusterMask::OtherClusters);
        let rest: Vec<Complex64> = (0..8)
            .map(|b| if [0, 3, 4].contains(&b) { row[b] } else { c(0.0) })
            .collect();
        let sum = &parts[0].1 + &parts[1].1;
        let expect = to_antenna_domain(&row, &psi) + to_antenna_domain(&rest, &psi);
        assert!((sum - expect).norm() < 1e-12);
    }

    #[test]
    fn single_cluster_keeps_the_whole_row() {
        let psi = dft_transform_matrix(8);
        let row: Vec<Complex64> = (0..8).map(|i| Complex64::new(1.0 / (1.0 + i as f64), 0.3)).collect();
        let clusters = segment_clusters(&row, 0.98, 3);
        assert_eq!(clusters.len(), 1);
        let (_, est) = &recover_user_channels(&row, &clusters, &psi, ClusterMask::OtherClusters)[0];
        assert!((est - to_antenna_domain(&row, &psi)).norm() < 1e-12);
    }

    #[test]
    fn on_grid_user_is_recovered() {
        // sin(angle) = 2 * 3 / 16 puts the path exactly on DFT bin 16 - 3
        let m = 16;
        let psi = dft_transform_matrix(m);
        let h = array_response((6.0f64 / 16.0).asin(), m, 0.5);
        let x = h.transpose() * &psi;
        let row: Vec<Complex64> = x.iter().copied().collect();
        let clusters = segment_clusters(&row, 0.98, 3);
        assert_eq!(clusters, vec![vec![13]]);
        let (_, est) = &recover_user_channels(&row, &clusters, &psi, ClusterMask::OwnBins)[0];
        let nmse = 10.0 * ((est - &h).norm_squared() / est.norm_squared()).log10();
        assert!(nmse < -20.0, "{nmse}");
    }

    #[test]
    fn identity_extraction() {
        assert_eq!(extract_identity(0, 4, 320).unwrap(), (0, 0));
        assert_eq!(extract_identity(7, 4, 320).unwrap(), (1, 2));
        assert_eq!(extract_identity(319, 4, 320).unwrap(), (63, 4));
        assert!(extract_identity(320, 4, 320).is_err());
        let pool = generate_pilot_pool(4, 6, 0).unwrap();
        let ext = build_extended_matrix(&pool, 2);
        for p in 0..6 {
            for t in 0..=2 {
                let j = ext.index_of(p, t).unwrap();
                assert_eq!(extract_identity(j, 2, ext.cols()).unwrap(), (p, t));
            }
        }
    }

    fn user(pilot: usize, delay: usize, angle: f64, m: usize) -> UserRealization {
        UserRealization {
            pilot_index: pilot,
            frame_delay: delay,
            center_angle: angle,
            paths: vec![],
            channel: array_response(angle, m, 0.5) * Complex64::new(2.0, -1.0),
        }
    }

    fn score(
        users: &[UserRealization],
        x_est: &CMat,
    ) -> (ScoreReport, Vec<DetectedUser>) {
        let m = x_est.ncols();
        let pool = generate_pilot_pool(8, 4, 1).unwrap();
        let ext = build_extended_matrix(&pool, 1);
        let psi = dft_transform_matrix(m);
        let truth = assemble_ground_truth(users, &ext, &psi).unwrap();
        let cfg = DetectorConfig::default();
        let rows = detect_rows(x_est, 0.999);
        let mut dets = detect_users(x_est, &ext, &psi, 0.999, &cfg).unwrap();
        let r = match_and_score(&truth, &ext, &psi, x_est, &mut dets, &rows, &cfg).unwrap();
        (r, dets)
    }

    #[test]
    fn perfect_recovery_scores_one() {
        let m = 16;
        let psi = dft_transform_matrix(m);
        let users = vec![
            user(0, 1, (2.0f64 / 16.0).asin(), m),
            user(0, 1, (-10.0f64 / 16.0).asin(), m),
            user(3, 0, 0.0, m),
        ];
        let pool = generate_pilot_pool(8, 4, 1).unwrap();
        let ext = build_extended_matrix(&pool, 1);
        let truth = assemble_ground_truth(&users, &ext, &psi).unwrap();
        let (r, dets) = score(&users, &truth.x_hat);
        assert_eq!(r.mu_ad, 1.0);
        assert_eq!(r.detected_count, 3);
        assert_eq!(r.nmse_ce_db, NMSE_FLOOR_DB);
        assert_eq!(r.false_rows, 0);
        let mut matched: Vec<_> = dets.iter().filter_map(|d| d.matched_truth).collect();
        matched.sort_unstable();
        assert_eq!(matched, vec![0, 1, 2]);
        assert!(report_text(&dets).lines().count() == 4);
    }

    #[test]
    fn scaled_estimate_fails_the_gate() {
        let m = 16;
        let psi = dft_transform_matrix(m);
        let users = vec![user(1, 0, 0.0, m)];
        let pool = generate_pilot_pool(8, 4, 1).unwrap();
        let ext = build_extended_matrix(&pool, 1);
        let truth = assemble_ground_truth(&users, &ext, &psi).unwrap();
        let est = &truth.x_hat * Complex64::new(2.0, 0.0);
        let (r, dets) = score(&users, &est);
        assert_eq!(r.mu_ad, 0.0);
        let expected = 10.0 * (0.25f64).log10();
        assert!((dets[0].nmse_db - expected).abs() < 1e-9);
        assert!((dets[0].nmse_db + 6.0206).abs() < 1e-4);
        assert_eq!(dets[0].matched_truth, Some(0));
    }

    #[test]
    fn assignment_is_injective() {
        // two users on the same row and bin; one cluster can serve only one
        let m = 16;
        let psi = dft_transform_matrix(m);
        let users = vec![user(2, 1, 0.0, m), user(2, 1, 0.0, m)];
        let pool = generate_pilot_pool(8, 4, 1).unwrap();
        let ext = build_extended_matrix(&pool, 1);
        let truth = assemble_ground_truth(&users, &ext, &psi).unwrap();
        let (r, dets) = score(&users, &truth.x_hat);
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].matched_truth, Some(0));
        assert_eq!(r.truth_count, 2);
        assert!(r.mu_ad <= 0.5);
    }

    #[test]
    fn ratio_of_detected_users() {
        let r = ScoreReport {
            mu_ad: 24.0 / 30.0,
            nmse_ce_db: 0.0,
            detected_count: 24,
            truth_count: 30,
            false_rows: 0,
        };
        assert!((r.mu_ad - 0.8).abs() < 1e-15);
    }
}
