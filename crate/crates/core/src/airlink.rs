//! Ground-truth assembly, the delay-angle transform, the noisy observation
//! and the real-valued stacking consumed by the solvers.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::Rng;

use crate::channel::{complex_normal, UserRealization};
use crate::pilot::ExtendedPilotMatrix;
use crate::{CMat, Complex64, Error, RMat, Result};

/// Unitary DFT, entry `(m, n) = exp(-i 2 pi m n / M) / sqrt(M)`.
pub fn dft_transform_matrix(m: usize) -> CMat {
    let scale = 1.0 / (m as f64).sqrt();
    CMat::from_fn(m, m, |r, c| {
        let k = (r * c) % m;
        Complex64::from_polar(scale, -2.0 * PI * k as f64 / m as f64)
    })
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub users: Vec<UserRealization>,
    /// Antenna-domain effective channel, `N_hat x M`.
    pub d_hat: CMat,
    /// Delay-angle channel `d_hat * psi`.
    pub x_hat: CMat,
    pub support_rows: BTreeSet<usize>,
}

impl GroundTruth {
    /// Extended row occupied by user `k`.
    pub fn row_of(&self, k: usize, ext: &ExtendedPilotMatrix) -> usize {
        let u = &self.users[k];
        ext.index_of(u.pilot_index, u.frame_delay)
            .expect("user was drawn for this pilot matrix")
    }
}

/// Scatter-adds each user's channel into its (pilot, delay) row.
pub fn assemble_ground_truth(
    users: &[UserRealization],
    ext: &ExtendedPilotMatrix,
    psi: &CMat,
) -> Result<GroundTruth> {
    if users.is_empty() {
        return Err(Error::Config("ground truth needs at least one user".into()));
    }
    let m = psi.nrows();
    let mut d_hat = CMat::zeros(ext.cols(), m);
    let mut support_rows = BTreeSet::new();
    for u in users {
        if u.channel.len() != m {
            return Err(Error::InvalidDimension(format!(
                "user channel has {} entries, transform expects {m}",
                u.channel.len()
            )));
        }
        let row = ext.index_of(u.pilot_index, u.frame_delay)?;
        let mut r = d_hat.row_mut(row);
        r += u.channel.transpose();
        support_rows.insert(row);
    }
    let x_hat = &d_hat * psi;
    Ok(GroundTruth {
        users: users.to_vec(),
        d_hat,
        x_hat,
        support_rows,
    })
}

#[derive(Debug, Clone)]
pub struct Measurement {
    /// `L_hat x M` delay-angle observation.
    pub y_hat: CMat,
    /// Noise variance per complex entry.
    pub sigma2: f64,
    pub snr_db: f64,
}

/// `Y = S X + N` with `N` i.i.d. CN(0, sigma2) and `sigma2` set so that the
/// mean per-entry power of `S X` over the noise power equals the SNR.
/// An infinite SNR gives a noiseless observation with `sigma2 = 0`.
pub fn synthesize_received<R: Rng + ?Sized>(
    ext: &ExtendedPilotMatrix,
    truth: &GroundTruth,
    snr_db: f64,
    rng: &mut R,
) -> Result<Measurement> {
    if ext.cols() != truth.x_hat.nrows() {
        return Err(Error::InvalidDimension(format!(
            "sensing matrix has {} columns, channel has {} rows",
            ext.cols(),
            truth.x_hat.nrows()
        )));
    }
    if snr_db.is_nan() {
        return Err(Error::Config("snr_db is NaN".into()));
    }
    let clean = ext.matrix() * &truth.x_hat;
    let power = clean.norm_squared() / clean.len() as f64;
    if power == 0.0 {
        return Err(Error::DegenerateSignal);
    }
    if snr_db == f64::INFINITY {
        return Ok(Measurement {
            y_hat: clean,
            sigma2: 0.0,
            snr_db,
        });
    }
    let sigma2 = power * 10f64.powf(-snr_db / 10.0);
    let mut y_hat = clean;
    // Column-major fill keeps the noise stream order independent of shape
    // bookkeeping elsewhere.
    for z in y_hat.iter_mut() {
        *z += complex_normal(rng, sigma2);
    }
    Ok(Measurement {
        y_hat,
        sigma2,
        snr_db,
    })
}

/// Real-valued system `[Re Y; Im Y] = [[Re S, -Im S], [Im S, Re S]] [Re X; Im X]`.
///
/// Unknown row `i` and row `i + n` (with `n = N_hat`) are the real and
/// imaginary parts of the same complex coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSystem {
    pub a: RMat,
    pub y: RMat,
}

impl RealSystem {
    /// Number of complex unknowns per column, `N_hat`.
    pub fn logical_rows(&self) -> usize {
        self.a.ncols() / 2
    }

    /// `L_hat`.
    pub fn observations(&self) -> usize {
        self.a.nrows() / 2
    }

    pub fn columns(&self) -> usize {
        self.y.ncols()
    }

    /// Index of the row paired with `i`.
    pub fn paired(&self, i: usize) -> usize {
        let n = self.logical_rows();
        if i < n {
            i + n
        } else {
            i - n
        }
    }

    /// Recovers the complex sensing matrix from the top-left/bottom-left blocks.
    pub fn complex_sensing(&self) -> CMat {
        let (l, n) = (self.observations(), self.logical_rows());
        CMat::from_fn(l, n, |r, c| Complex64::new(self.a[(r, c)], self.a[(r + l, c)]))
    }

    pub fn complex_observation(&self) -> CMat {
        complexify(&self.y)
    }
}

/// Stacks a complex matrix as `[Re; Im]`.
pub fn stack_real(z: &CMat) -> RMat {
    let (r, c) = z.shape();
    RMat::from_fn(2 * r, c, |i, j| {
        if i < r {
            z[(i, j)].re
        } else {
            z[(i - r, j)].im
        }
    })
}

/// Inverse of [`stack_real`].
pub fn complexify(x: &RMat) -> CMat {
    let r = x.nrows() / 2;
    CMat::from_fn(r, x.ncols(), |i, j| Complex64::new(x[(i, j)], x[(i + r, j)]))
}

pub fn realify(s: &CMat, y: &CMat) -> Result<RealSystem> {
    if s.nrows() != y.nrows() {
        return Err(Error::InvalidDimension(format!(
            "sensing matrix has {} rows, observation has {}",
            s.nrows(),
            y.nrows()
        )));
    }
    let (l, n) = s.shape();
    let a = RMat::from_fn(2 * l, 2 * n, |i, j| {
        let z = s[(i % l, j % n)];
        match (i < l, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    Ok(RealSystem {
        a,
        y: stack_real(y),
    })
}

/// `10 log10(||est - truth||^2 / ||est||^2)`, normalized by the estimate as
/// in the scoring rule; floored at `floor_db`.
pub fn nmse_db(estimate: &CMat, truth: &CMat, floor_db: f64) -> f64 {
    let err = (estimate - truth).norm_squared();
    let den = estimate.norm_squared();
    ratio_db(err, den, floor_db)
}

pub(crate) fn ratio_db(err: f64, den: f64, floor_db: f64) -> f64 {
    if err == 0.0 {
        return floor_db;
    }
    if den == 0.0 {
        return f64::INFINITY;
    }
    (10.0 * (err / den).log10()).max(floor_db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_actives, ChannelParams};
    use crate::pilot::{build_extended_matrix, generate_pilot_pool};
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn user(pilot: usize, delay: usize, h: Vec<Complex64>) -> UserRealization {
        UserRealization {
            pilot_index: pilot,
            frame_delay: delay,
            center_angle: 0.0,
            paths: vec![],
            channel: DVector::from_vec(h),
        }
    }

    #[test]
    fn dft_small_cases() {
        assert_eq!(dft_transform_matrix(1)[(0, 0)], Complex64::new(1.0, 0.0));
        let f = dft_transform_matrix(2);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expect = [[r, r], [r, -r]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((f[(i, j)] - Complex64::new(expect[i][j], 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn dft_is_unitary() {
        let f = dft_transform_matrix(64);
        let g = &f * f.adjoint() - CMat::identity(64, 64);
        assert!(g.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10);
    }

    #[test]
    fn scatter_single_and_colliding_users() {
        let pool = generate_pilot_pool(4, 2, 1).unwrap();
        let ext = build_extended_matrix(&pool, 1);
        let psi = dft_transform_matrix(3);
        let h1 = vec![Complex64::new(1.0, 2.0), Complex64::new(0.5, 0.0), Complex64::new(0.0, -1.0)];
        let h2 = vec![Complex64::new(-1.0, 0.0), Complex64::new(2.0, 1.0), Complex64::new(3.0, 0.0)];

        let gt = assemble_ground_truth(&[user(0, 0, h1.clone())], &ext, &psi).unwrap();
        assert_eq!(gt.support_rows.iter().copied().collect::<Vec<_>>(), vec![0]);
        for (j, h) in h1.iter().enumerate() {
            assert_eq!(gt.d_hat[(0, j)], *h);
        }
        assert_eq!(gt.d_hat.rows(1, 3).norm(), 0.0);

        let gt = assemble_ground_truth(&[user(1, 1, h1.clone()), user(1, 1, h2.clone())], &ext, &psi)
            .unwrap();
        assert_eq!(gt.support_rows.len(), 1);
        for j in 0..3 {
            assert_eq!(gt.d_hat[(3, j)], h1[j] + h2[j]);
        }
        assert!((gt.x_hat.norm() - gt.d_hat.norm()).abs() < 1e-9);
    }

    fn random_truth(seed: u64, k: usize) -> (ExtendedPilotMatrix, GroundTruth) {
        let pool = generate_pilot_pool(16, 8, seed).unwrap();
        let ext = build_extended_matrix(&pool, 2);
        let params = ChannelParams::with_antennas(16);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let users = sample_actives(k, &params, 8, 2, &mut rng).unwrap();
        let gt = assemble_ground_truth(&users, &ext, &dft_transform_matrix(16)).unwrap();
        (ext, gt)
    }

    #[test]
    fn row_sparsity_bounded_by_user_count() {
        for seed in 0..10 {
            let (ext, gt) = random_truth(seed, 5);
            let nonzero = (0..ext.cols()).filter(|&r| gt.x_hat.row(r).norm() > 0.0).count();
            assert!(nonzero <= 5);
            assert_eq!(nonzero, gt.support_rows.len());
        }
    }

    #[test]
    fn noiseless_observation_is_exact() {
        let (ext, gt) = random_truth(3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let meas = synthesize_received(&ext, &gt, f64::INFINITY, &mut rng).unwrap();
        assert_eq!(meas.sigma2, 0.0);
        assert_eq!(meas.y_hat, ext.matrix() * &gt.x_hat);
    }

    #[test]
    fn zero_db_noise_matches_signal_power() {
        // 100 x 100 = 10^4 noise entries
        let pool = generate_pilot_pool(96, 4, 2).unwrap();
        let ext = build_extended_matrix(&pool, 4);
        let params = ChannelParams::with_antennas(100);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let users = sample_actives(6, &params, 4, 4, &mut rng).unwrap();
        let gt = assemble_ground_truth(&users, &ext, &dft_transform_matrix(100)).unwrap();
        let meas = synthesize_received(&ext, &gt, 0.0, &mut rng).unwrap();
        let clean = ext.matrix() * &gt.x_hat;
        let signal = clean.norm_squared();
        let noise = (&meas.y_hat - &clean).norm_squared();
        assert!((noise / signal - 1.0).abs() < 0.05, "ratio {}", noise / signal);
    }

    #[test]
    fn received_signal_is_reproducible() {
        let (ext, gt) = random_truth(5, 3);
        let a = synthesize_received(&ext, &gt, 10.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = synthesize_received(&ext, &gt, 10.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a.y_hat, b.y_hat);
    }

    #[test]
    fn zero_signal_is_degenerate() {
        let (ext, mut gt) = random_truth(5, 3);
        gt.x_hat.fill(Complex64::new(0.0, 0.0));
        let r = synthesize_received(&ext, &gt, 10.0, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(matches!(r, Err(Error::DegenerateSignal)));
    }

    #[test]
    fn realify_imaginary_unit() {
        let s = CMat::from_element(1, 1, Complex64::new(0.0, 1.0));
        let y = CMat::from_element(1, 1, Complex64::new(0.0, 1.0));
        let sys = realify(&s, &y).unwrap();
        assert_eq!(sys.a, RMat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
        let x = stack_real(&CMat::from_element(1, 1, Complex64::new(1.0, 0.0)));
        assert_eq!(&sys.a * x, RMat::from_column_slice(2, 1, &[0.0, 1.0]));
    }

    #[test]
    fn realify_matches_complex_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let s = CMat::from_fn(4, 6, |_, _| complex_normal(&mut rng, 1.0));
        let x = CMat::from_fn(6, 3, |_, _| complex_normal(&mut rng, 1.0));
        let y = &s * &x;
        let sys = realify(&s, &y).unwrap();
        let diff = &sys.a * stack_real(&x) - stack_real(&y);
        assert!(diff.norm() < 1e-12);
        assert_eq!(sys.y, stack_real(&y));
        assert_eq!(sys.complex_sensing(), s);
        assert_eq!(sys.complex_observation(), y);
        assert_eq!(sys.paired(1), 7);
        assert_eq!(sys.paired(7), 1);
    }

    #[test]
    fn nmse_invariant_under_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = CMat::from_fn(5, 8, |_, _| complex_normal(&mut rng, 1.0));
        let b = CMat::from_fn(5, 8, |_, _| complex_normal(&mut rng, 1.0));
        let psi = dft_transform_matrix(8);
        let d1 = nmse_db(&a, &b, -200.0);
        let d2 = nmse_db(&(&a * &psi), &(&b * &psi), -200.0);
        assert!((d1 - d2).abs() < 1e-10);
        assert_eq!(nmse_db(&a, &a, -200.0), -200.0);
        let back = &a * &psi * psi.adjoint();
        assert!((back - &a).norm() < 1e-10);
    }
}
