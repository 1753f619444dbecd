//! Identifiability bounds for row-sparse and cluster-sparse recovery, with a
//! brute-force uniqueness check for tiny noiseless systems.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::Rng;

use crate::channel::complex_normal;
use crate::{CMat, Error, Result};

/// Default cap on enumerated candidate supports.
pub const DEFAULT_SUPPORT_CAP: u128 = 1 << 20;

/// Relative residual under which a support counts as an exact fit.
pub const EXACT_FIT_TOL: f64 = 1e-8;

fn ceil_half(x: usize) -> usize {
    x.div_ceil(2)
}

/// Largest row sparsity with a unique solution for an MMV system with
/// `l_hat` measurements and observation rank `rank`: `ceil((L + rank)/2) - 1`.
pub fn lemma1_bound(l_hat: usize, rank: usize) -> Result<usize> {
    if l_hat == 0 || rank == 0 || rank > l_hat {
        return Err(Error::Config(format!(
            "need 1 <= rank <= L_hat, got L_hat={l_hat}, rank={rank}"
        )));
    }
    Ok(ceil_half(l_hat + rank) - 1)
}

/// Cluster-structured bound `floor(M/D) (ceil((L + D)/2) - 1)` for clusters
/// of at most `d` angular bins out of `m`.
pub fn theorem1_bound(l_hat: usize, m: usize, d: usize) -> Result<usize> {
    if l_hat == 0 || m == 0 || d == 0 || d > m {
        return Err(Error::Config(format!(
            "need L_hat >= 1 and 1 <= D <= M, got L_hat={l_hat}, M={m}, D={d}"
        )));
    }
    Ok((m / d) * (ceil_half(l_hat + d) - 1))
}

/// `theorem1_bound - lemma1_bound` with the full column count as the rank.
/// Negative when the cluster bound is the smaller one.
pub fn delta_gap(l_hat: usize, m: usize, d: usize) -> Result<i64> {
    let t = theorem1_bound(l_hat, m, d)? as i64;
    let l = lemma1_bound(l_hat, m.min(l_hat))? as i64;
    Ok(t - l)
}

/// Real-valued lower bound on [`delta_gap`] from relaxing the floor and
/// ceilings: `M/(2D) (L - 2) - L - D/2 + 1`.
pub fn delta_lower_bound(l_hat: usize, m: usize, d: usize) -> f64 {
    let (l, m, d) = (l_hat as f64, m as f64, d as f64);
    m / (2.0 * d) * (l - 2.0) - l - d / 2.0 + 1.0
}

/// `L_hat,M,D,lemma1,theorem1,delta` rows over the given grid. Rows whose
/// lemma bound is undefined (`M > L_hat`) use rank `min(M, L_hat)`.
pub fn bounds_table(l_values: &[usize], m_values: &[usize], d_values: &[usize]) -> Result<String> {
    let mut out = String::from("L_hat,M,D,lemma1,theorem1,delta\n");
    for &l in l_values {
        for &m in m_values {
            for &d in d_values.iter().filter(|&&d| d >= 1 && d <= m) {
                let lemma = lemma1_bound(l, m.min(l))?;
                let theorem = theorem1_bound(l, m, d)?;
                writeln!(
                    out,
                    "{l},{m},{d},{lemma},{theorem},{}",
                    theorem as i64 - lemma as i64
                )
                .unwrap();
            }
        }
    }
    Ok(out)
}

/// Noiseless `Y = S X` with a known row support.
#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub s: CMat,
    pub x: CMat,
    pub y: CMat,
    pub support: Vec<usize>,
}

/// Gaussian `l_hat x n_hat` sensing matrix and `r` Gaussian rows on a
/// uniformly drawn support.
pub fn plant_row_sparse<R: Rng + ?Sized>(
    l_hat: usize,
    n_hat: usize,
    cols: usize,
    r: usize,
    rng: &mut R,
) -> Result<PlantedInstance> {
    if r > n_hat || l_hat == 0 || cols == 0 {
        return Err(Error::Config(format!(
            "cannot plant {r} rows in {n_hat} with L_hat={l_hat}, {cols} columns"
        )));
    }
    let s = CMat::from_fn(l_hat, n_hat, |_, _| complex_normal(rng, 1.0));
    let mut support = sample(rng, n_hat, r).into_vec();
    support.sort_unstable();
    let mut x = CMat::zeros(n_hat, cols);
    for &i in &support {
        for j in 0..cols {
            x[(i, j)] = complex_normal(rng, 1.0);
        }
    }
    let y = &s * &x;
    Ok(PlantedInstance { s, x, y, support })
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Relative residual of the least-squares fit of `y` on the columns `cols` of `s`.
fn fit_residual(s: &CMat, y: &CMat, cols: &[usize]) -> f64 {
    let y_norm = y.norm_squared();
    if y_norm == 0.0 {
        return 0.0;
    }
    if cols.is_empty() {
        return 1.0;
    }
    let sub = s.select_columns(cols);
    let q = sub.qr().q();
    let resid = y - &q * (q.adjoint() * y);
    resid.norm_squared() / y_norm
}

/// Whether `planted` is the only row support of size at most `r` that fits
/// `y = s x` exactly. Every support of size `0..=r` is enumerated.
pub fn brute_force_uniqueness(
    s: &CMat,
    y: &CMat,
    planted: &[usize],
    r: usize,
    cap: u128,
) -> Result<bool> {
    let n = s.ncols();
    if r > n {
        return Err(Error::Config(format!("sparsity {r} exceeds {n} columns")));
    }
    let needed: u128 = (0..=r).map(|k| binomial(n, k)).sum();
    if needed > cap {
        return Err(Error::Budget { needed, cap });
    }
    let mut planted = planted.to_vec();
    planted.sort_unstable();
    for k in 0..=r {
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            if combo != planted && fit_residual(s, y, &combo) < EXACT_FIT_TOL {
                return Ok(false);
            }
            if !next_combination(&mut combo, n) {
                break;
            }
        }
    }
    Ok(true)
}

/// Advances a sorted k-subset of `0..n` in lexicographic order.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    for i in (0..k).rev() {
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Cluster-aligned uniqueness: the columns are split into consecutive
/// blocks of the given widths and each block is checked as its own MMV
/// problem with the support of `x` restricted to that block.
pub fn brute_force_block_uniqueness(
    s: &CMat,
    x: &CMat,
    widths: &[usize],
    cap: u128,
) -> Result<bool> {
    if widths.iter().sum::<usize>() != x.ncols() {
        return Err(Error::InvalidDimension(format!(
            "block widths sum to {}, matrix has {} columns",
            widths.iter().sum::<usize>(),
            x.ncols()
        )));
    }
    let mut start = 0;
    for &w in widths {
        let block = x.columns(start, w).into_owned();
        let support: Vec<usize> = (0..block.nrows())
            .filter(|&i| block.row(i).norm_squared() > 0.0)
            .collect();
        let y = s * &block;
        if !brute_force_uniqueness(s, &y, &support, support.len(), cap)? {
            return Ok(false);
        }
        start += w;
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lemma_examples() {
        assert_eq!(lemma1_bound(68, 64).unwrap(), 65);
        assert_eq!(lemma1_bound(1, 1).unwrap(), 0);
        assert_eq!(lemma1_bound(4, 3).unwrap(), 3);
        assert!(lemma1_bound(3, 4).is_err());
        assert!(lemma1_bound(3, 0).is_err());
    }

    #[test]
    fn theorem_examples() {
        assert_eq!(theorem1_bound(68, 64, 8).unwrap(), 296);
        assert_eq!(theorem1_bound(6, 6, 2).unwrap(), 9);
        for l in 4..40 {
            for m in 1..=l {
                assert_eq!(theorem1_bound(l, m, m).unwrap(), lemma1_bound(l, m).unwrap());
            }
        }
        assert!(theorem1_bound(6, 4, 5).is_err());
    }

    #[test]
    fn gap_examples() {
        assert_eq!(delta_gap(68, 64, 8).unwrap(), 231);
        assert_eq!(delta_gap(6, 6, 2).unwrap(), 4);
        assert_eq!(delta_gap(200, 64, 64).unwrap(), 0);
    }

    #[test]
    fn relaxed_bound_never_exceeds_gap() {
        for l in 4..=128 {
            for m in 2..=l {
                for d in 1..=m {
                    let gap = delta_gap(l, m, d).unwrap() as f64;
                    assert!(delta_lower_bound(l, m, d) <= gap + 1e-9, "{l} {m} {d}");
                }
            }
        }
    }

    #[test]
    fn cluster_bound_shrinks_with_fewer_clusters() {
        // Adjacent cluster widths with fewer whole clusters never raise the
        // bound once the pilot is long enough; short pilots have exceptions
        // such as (L=4, M=9, D=2 -> 3).
        for l in 21..=128 {
            for m in 2..=128 {
                for d in 1..m {
                    if m / (d + 1) < m / d {
                        assert!(
                            theorem1_bound(l, m, d + 1).unwrap() <= theorem1_bound(l, m, d).unwrap(),
                            "{l} {m} {d}"
                        );
                    }
                }
            }
        }
        assert!(theorem1_bound(4, 9, 3).unwrap() > theorem1_bound(4, 9, 2).unwrap());
    }

    #[test]
    fn combinations_enumerate_all_subsets() {
        let mut c = vec![0, 1];
        let mut count = 1;
        while next_combination(&mut c, 5) {
            count += 1;
        }
        assert_eq!(count, 10);
        assert_eq!(binomial(12, 4), 495);
        assert_eq!(binomial(5, 0), 1);
    }

    #[test]
    fn single_row_is_unique() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = plant_row_sparse(4, 8, 2, 1, &mut rng).unwrap();
        assert!(brute_force_uniqueness(&inst.s, &inst.y, &inst.support, 1, DEFAULT_SUPPORT_CAP).unwrap());
    }

    #[test]
    fn lemma_bound_sparsity_is_unique() {
        let bound = lemma1_bound(4, 4).unwrap();
        assert_eq!(bound, 3);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inst = plant_row_sparse(4, 10, 4, bound, &mut rng).unwrap();
            assert!(
                brute_force_uniqueness(&inst.s, &inst.y, &inst.support, bound, DEFAULT_SUPPORT_CAP)
                    .unwrap(),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn full_length_support_is_ambiguous() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inst = plant_row_sparse(4, 8, 3, 4, &mut rng).unwrap();
        assert!(!brute_force_uniqueness(&inst.s, &inst.y, &inst.support, 4, DEFAULT_SUPPORT_CAP).unwrap());
    }

    #[test]
    fn budget_is_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inst = plant_row_sparse(4, 12, 2, 2, &mut rng).unwrap();
        let err = brute_force_uniqueness(&inst.s, &inst.y, &inst.support, 3, 100).unwrap_err();
        assert!(matches!(err, Error::Budget { needed: 299, cap: 100 }));
    }

    #[test]
    fn blockwise_clusters_exceed_the_row_bound() {
        // L=4, M=4, D=1: two rows per single-column block, eight active
        // (row, bin) cells against a row-sparse bound of three rows.
        let (l, n, m) = (4, 8, 4);
        assert_eq!(theorem1_bound(l, m, 1).unwrap(), 8);
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let s = CMat::from_fn(l, n, |_, _| complex_normal(&mut rng, 1.0));
            let mut x = CMat::zeros(n, m);
            for j in 0..m {
                for i in sample(&mut rng, n, 2).into_iter() {
                    x[(i, j)] = complex_normal(&mut rng, 1.0);
                }
            }
            assert!(brute_force_block_uniqueness(&s, &x, &[1, 1, 1, 1], DEFAULT_SUPPORT_CAP).unwrap());
        }
    }

    #[test]
    fn table_has_header_and_rows() {
        let t = bounds_table(&[68], &[64], &[8, 64]).unwrap();
        let lines: Vec<_> = t.lines().collect();
        assert_eq!(lines[0], "L_hat,M,D,lemma1,theorem1,delta");
        assert_eq!(lines[1], "68,64,8,65,296,231");
        assert_eq!(lines[2], "68,64,64,65,65,0");
    }
}
