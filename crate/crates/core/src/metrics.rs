//! Objective distances between pose sequences: MAE, dynamic time warping,
//! discrete and Gaussian Frechet distances, and Pearson correlation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::motion::{PoseFrame, PoseSequence};
use crate::stats;

/// Per-(utterance, variant) metric values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub utterance_id: String,
    pub variant: String,
    pub mae: f64,
    pub dtw: f64,
    pub fd_gaussian: f64,
    pub fd_discrete: f64,
}

/// Pearson correlation with a two-sided t-test p-value (n-2 df).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

#[inline]
fn frame_dist(a: &PoseFrame, b: &PoseFrame) -> f64 {
    let dx = a.rx - b.rx;
    let dy = a.ry - b.ry;
    let dz = a.rz - b.rz;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Mean absolute error over all T x 3 entries. Shares its definition with
/// the L1 training loss.
pub fn mae(a: &PoseSequence, b: &PoseSequence) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            context: "mae: sequence lengths",
            expected: a.len(),
            actual: b.len(),
        });
    }
    let mut acc = 0.0;
    for (fa, fb) in a.frames().iter().zip(b.frames()) {
        acc += (fa.rx - fb.rx).abs() + (fa.ry - fb.ry).abs() + (fa.rz - fb.rz).abs();
    }
    Ok(acc / (3 * a.len()) as f64)
}

/// Dynamic time warping distance: minimum cumulative Euclidean frame
/// distance over monotone warping paths with steps (1,0), (0,1), (1,1).
/// No path-length normalization and no band constraint.
pub fn dtw(a: &PoseSequence, b: &PoseSequence) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("dtw"));
    }
    let (na, nb) = (a.len(), b.len());
    // One DP row at a time; row[j] holds D(i, j).
    let mut prev = vec![f64::INFINITY; nb];
    let mut curr = vec![f64::INFINITY; nb];
    for i in 0..na {
        for j in 0..nb {
            let d = frame_dist(&a.frames()[i], &b.frames()[j]);
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let up = if i > 0 { prev[j] } else { f64::INFINITY };
                let left = if j > 0 { curr[j - 1] } else { f64::INFINITY };
                let diag = if i > 0 && j > 0 { prev[j - 1] } else { f64::INFINITY };
                up.min(left).min(diag)
            };
            curr[j] = d + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[nb - 1])
}

/// Discrete Frechet (coupling) distance: minimax Euclidean frame distance
/// over monotone couplings.
pub fn frechet_discrete(a: &PoseSequence, b: &PoseSequence) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("frechet_discrete"));
    }
    let (na, nb) = (a.len(), b.len());
    let mut prev = vec![f64::INFINITY; nb];
    let mut curr = vec![f64::INFINITY; nb];
    for i in 0..na {
        for j in 0..nb {
            let d = frame_dist(&a.frames()[i], &b.frames()[j]);
            let reach = if i == 0 && j == 0 {
                d
            } else {
                let up = if i > 0 { prev[j] } else { f64::INFINITY };
                let left = if j > 0 { curr[j - 1] } else { f64::INFINITY };
                let diag = if i > 0 && j > 0 { prev[j - 1] } else { f64::INFINITY };
                d.max(up.min(left).min(diag))
            };
            curr[j] = reach;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[nb - 1])
}

fn fit_gaussian(seq: &PoseSequence) -> ([f64; 3], Vec<Vec<f64>>) {
    let n = seq.len() as f64;
    let mut mu = [0.0f64; 3];
    for f in seq.frames() {
        let a = f.as_array();
        for k in 0..3 {
            mu[k] += a[k];
        }
    }
    for m in &mut mu {
        *m /= n;
    }
    let mut cov = vec![vec![0.0; 3]; 3];
    for f in seq.frames() {
        let a = f.as_array();
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += (a[i] - mu[i]) * (a[j] - mu[j]);
            }
        }
    }
    // Unbiased estimator.
    for row in &mut cov {
        for v in row.iter_mut() {
            *v /= n - 1.0;
        }
    }
    (mu, cov)
}

/// Frechet distance between the 3-dimensional Gaussians fitted to the two
/// sequences' frames:
/// ihat = |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)).
///
/// The matrix square root is taken through the symmetric form
/// (S_a^(1/2) S_b S_a^(1/2))^(1/2), eigenvalues floored at zero.
pub fn frechet_gaussian(a: &PoseSequence, b: &PoseSequence) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidValue(
            "frechet_gaussian needs at least 2 frames per sequence".into(),
        ));
    }
    let (mu_a, cov_a) = fit_gaussian(a);
    let (mu_b, cov_b) = fit_gaussian(b);

    let sqrt_a = linalg::sym_sqrt(&cov_a);
    let inner = linalg::mat_mul(&linalg::mat_mul(&sqrt_a, &cov_b), &sqrt_a);
    // Symmetrize against round-off before the second square root.
    let mut inner_sym = vec![vec![0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            inner_sym[i][j] = 0.5 * (inner[i][j] + inner[j][i]);
        }
    }
    let (eig, _) = linalg::sym_eigen(&inner_sym);
    let tr_sqrt: f64 = eig.iter().map(|&l| l.max(0.0).sqrt()).sum();

    let mean_term: f64 = (0..3).map(|k| (mu_a[k] - mu_b[k]).powi(2)).sum();
    let tr_term: f64 = (0..3).map(|k| cov_a[k][k] + cov_b[k][k]).sum::<f64>() - 2.0 * tr_sqrt;
    Ok(mean_term + tr_term)
}

/// Sample Pearson correlation with two-sided p-value from
/// t = r sqrt((n-2) / (1-r^2)) on n-2 degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch {
            context: "pearson: input lengths",
            expected: x.len(),
            actual: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InvalidValue("pearson needs at least 3 points".into()));
    }
    let mx = stats::mean(x);
    let my = stats::mean(y);
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        syy += (yi - my) * (yi - my);
        sxy += (xi - mx) * (yi - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("degenerate input"));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if 1.0 - r * r < 1e-15 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        stats::t_test_two_sided(t, df)
    };
    Ok(CorrelationResult { r, p, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::Axis;
    use proptest::prelude::*;
    use rand::Rng;

    fn seq(frames: &[[f64; 3]]) -> PoseSequence {
        PoseSequence::new(
            frames
                .iter()
                .map(|f| PoseFrame::new(f[0], f[1], f[2]))
                .collect(),
        )
        .unwrap()
    }

    fn seq_x(values: &[f64]) -> PoseSequence {
        seq(&values.iter().map(|&v| [v, 0.0, 0.0]).collect::<Vec<_>>())
    }

    fn random_seq(rng: &mut impl Rng, len: usize) -> PoseSequence {
        seq(&(0..len)
            .map(|_| {
                [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ]
            })
            .collect::<Vec<_>>())
    }

    /// Exhaustive enumeration of all monotone warping paths; the oracle
    /// for both the DTW and the discrete-Frechet dynamic programs.
    fn enumerate_paths(na: usize, nb: usize) -> Vec<Vec<(usize, usize)>> {
        let mut paths = Vec::new();
        let mut stack = vec![vec![(0usize, 0usize)]];
        while let Some(path) = stack.pop() {
            let &(i, j) = path.last().unwrap();
            if i == na - 1 && j == nb - 1 {
                paths.push(path);
                continue;
            }
            for (di, dj) in [(1usize, 0usize), (0, 1), (1, 1)] {
                let (ni, nj) = (i + di, j + dj);
                if ni < na && nj < nb {
                    let mut next = path.clone();
                    next.push((ni, nj));
                    stack.push(next);
                }
            }
        }
        paths
    }

    fn dtw_brute(a: &PoseSequence, b: &PoseSequence) -> f64 {
        enumerate_paths(a.len(), b.len())
            .iter()
            .map(|path| {
                path.iter()
                    .map(|&(i, j)| frame_dist(&a.frames()[i], &b.frames()[j]))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn frechet_brute(a: &PoseSequence, b: &PoseSequence) -> f64 {
        enumerate_paths(a.len(), b.len())
            .iter()
            .map(|path| {
                path.iter()
                    .map(|&(i, j)| frame_dist(&a.frames()[i], &b.frames()[j]))
                    .fold(0.0f64, f64::max)
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn mae_identity_and_offset() {
        let a = seq(&[[0.1, 0.2, 0.3], [0.0, -0.1, 0.4]]);
        assert_eq!(mae(&a, &a).unwrap(), 0.0);

        let b = seq(&[[0.6, 0.7, 0.8], [0.5, 0.4, 0.9]]);
        assert!((mae(&a, &b).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mae_hand_example() {
        // Differences: 0.2 and 0.6 on x, zeros elsewhere, over 2 frames.
        let a = seq(&[[0.2, 0.0, 0.0], [0.6, 0.0, 0.0]]);
        let b = seq(&[[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        assert!((mae(&a, &b).unwrap() - 0.8 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn mae_length_mismatch_errors() {
        let a = seq(&[[0.0; 3]]);
        let b = seq(&[[0.0; 3], [0.0; 3]]);
        assert!(mae(&a, &b).is_err());
    }

    #[test]
    fn dtw_identity_is_zero() {
        let a = seq(&[[0.1, 0.2, 0.3], [0.4, 0.5, 0.6], [0.0, 0.0, 0.1]]);
        assert_eq!(dtw(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn dtw_hand_example() {
        // a = (0, 2, 4), b = (0, 4) on x: the best path warps 2 to either
        // endpoint at cost 2.
        let a = seq_x(&[0.0, 2.0, 4.0]);
        let b = seq_x(&[0.0, 4.0]);
        assert!((dtw(&a, &b).unwrap() - 2.0).abs() < 1e-15);
        assert!((dtw_brute(&a, &b) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn frechet_discrete_hand_example() {
        let a = seq_x(&[0.0, 2.0, 4.0]);
        let b = seq_x(&[0.0, 4.0]);
        assert!((frechet_discrete(&a, &b).unwrap() - 2.0).abs() < 1e-15);
        assert!((frechet_brute(&a, &b) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn frechet_discrete_endpoint_lower_bound() {
        let mut rng = crate::seeds::rng(7);
        for _ in 0..20 {
            let len_a = rng.random_range(1..6);
            let len_b = rng.random_range(1..6);
            let a = random_seq(&mut rng, len_a);
            let b = random_seq(&mut rng, len_b);
            let fd = frechet_discrete(&a, &b).unwrap();
            let first = frame_dist(&a.frames()[0], &b.frames()[0]);
            let last = frame_dist(
                a.frames().last().unwrap(),
                b.frames().last().unwrap(),
            );
            assert!(fd >= first.max(last) - 1e-12);
        }
    }

    #[test]
    fn frechet_discrete_row_lower_bound() {
        // Every frame of a is coupled to some frame of b, so the
        // bottleneck is at least min_j d(a_i, b_j) for every i.
        let mut rng = crate::seeds::rng(9);
        for _ in 0..20 {
            let len_a = rng.random_range(1..8);
            let len_b = rng.random_range(1..8);
            let a = random_seq(&mut rng, len_a);
            let b = random_seq(&mut rng, len_b);
            let fd = frechet_discrete(&a, &b).unwrap();
            for fa in a.frames() {
                let row_min = b
                    .frames()
                    .iter()
                    .map(|fb| frame_dist(fa, fb))
                    .fold(f64::INFINITY, f64::min);
                assert!(fd >= row_min - 1e-12);
            }
        }
    }

    #[test]
    fn pearson_independent_inputs_near_zero() {
        // Independent draws at n = 1070 put |r| under 0.1 with margin
        // (sd of r is about 1/sqrt(n-1) = 0.031).
        let mut rng = crate::seeds::rng(31);
        let x: Vec<f64> = (0..1070).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..1070).map(|_| rng.random_range(-1.0..1.0)).collect();
        let res = pearson(&x, &y).unwrap();
        assert!(res.r.abs() < 0.1, "r = {}", res.r);
    }

    #[test]
    fn dp_matches_exhaustive_enumeration() {
        let mut rng = crate::seeds::rng(41);
        for _ in 0..60 {
            let len_a = rng.random_range(1..=6);
            let len_b = rng.random_range(1..=6);
            let a = random_seq(&mut rng, len_a);
            let b = random_seq(&mut rng, len_b);
            let fast = dtw(&a, &b).unwrap();
            let brute = dtw_brute(&a, &b);
            assert!((fast - brute).abs() < 1e-12, "dtw {fast} vs {brute}");
            let fast = frechet_discrete(&a, &b).unwrap();
            let brute = frechet_brute(&a, &b);
            assert!((fast - brute).abs() < 1e-12, "frechet {fast} vs {brute}");
        }
    }

    #[test]
    fn frechet_gaussian_identical_is_zero() {
        let mut rng = crate::seeds::rng(3);
        let a = random_seq(&mut rng, 50);
        assert!(frechet_gaussian(&a, &a).unwrap().abs() < 1e-10);
    }

    #[test]
    fn frechet_gaussian_unit_shift() {
        // Six points with sample mean 0 and unbiased covariance exactly I:
        // +-c e_k with c = sqrt(5/2). Shifting by (1,0,0) moves the mean
        // only, so the distance is exactly 1.
        let c = (5.0f64 / 2.0).sqrt();
        let base = [
            [c, 0.0, 0.0],
            [-c, 0.0, 0.0],
            [0.0, c, 0.0],
            [0.0, -c, 0.0],
            [0.0, 0.0, c],
            [0.0, 0.0, -c],
        ];
        let a = seq(&base);
        let shifted: Vec<[f64; 3]> = base.iter().map(|f| [f[0] + 1.0, f[1], f[2]]).collect();
        let b = seq(&shifted);
        assert!((frechet_gaussian(&a, &b).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn frechet_gaussian_symmetric() {
        let mut rng = crate::seeds::rng(11);
        let a = random_seq(&mut rng, 30);
        let b = random_seq(&mut rng, 40);
        let ab = frechet_gaussian(&a, &b).unwrap();
        let ba = frechet_gaussian(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-10);
    }

    #[test]
    fn frechet_gaussian_too_short_errors() {
        let a = seq(&[[0.0; 3]]);
        let b = seq(&[[0.0; 3], [0.1, 0.0, 0.0]]);
        assert!(frechet_gaussian(&a, &b).is_err());
    }

    #[test]
    fn pearson_affine_and_sign() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let r = pearson(&x, &y).unwrap();
        assert!((r.r - 1.0).abs() < 1e-12);

        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let r = pearson(&x, &neg).unwrap();
        assert!((r.r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_known_small_dataset() {
        // x=(1,2,3,4), y=(1,3,2,4): r = 0.8, and with df = 2 the p-value
        // has the closed form 1 - t/sqrt(2+t^2) = 0.2.
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 3.0, 2.0, 4.0];
        let res = pearson(&x, &y).unwrap();
        assert!((res.r - 0.8).abs() < 1e-12);
        assert!((res.p - 0.2).abs() < 1e-10);
        assert_eq!(res.n, 4);
    }

    #[test]
    fn pearson_degenerate_errors() {
        let x = [1.0, 1.0, 1.0];
        let y = [1.0, 2.0, 3.0];
        assert!(matches!(pearson(&x, &y), Err(Error::Degenerate(_))));
    }

    #[test]
    fn mirror_mae_identity_against_motion_module() {
        // MAE(mirror(s, a), s) == (2/3) mean_t |s_t,a|
        let mut rng = crate::seeds::rng(23);
        for _ in 0..20 {
            let s = random_seq(&mut rng, 40);
            for axis in Axis::ALL {
                let m = crate::motion::mirror(&s, axis);
                let lhs = mae(&m, &s).unwrap();
                let mean_abs = s
                    .frames()
                    .iter()
                    .map(|f| f.component(axis).abs())
                    .sum::<f64>()
                    / s.len() as f64;
                assert!((lhs - 2.0 / 3.0 * mean_abs).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn dtw_is_symmetric_and_bounded_by_diagonal(
            frames_a in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0), 1..12),
            frames_b in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0), 1..12),
        ) {
            let a = seq(&frames_a.iter().map(|&(x, y, z)| [x, y, z]).collect::<Vec<_>>());
            let b = seq(&frames_b.iter().map(|&(x, y, z)| [x, y, z]).collect::<Vec<_>>());
            let ab = dtw(&a, &b).unwrap();
            let ba = dtw(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            if a.len() == b.len() {
                let diagonal: f64 = a.frames().iter().zip(b.frames())
                    .map(|(fa, fb)| frame_dist(fa, fb)).sum();
                prop_assert!(ab <= diagonal + 1e-12);
            }
        }

        #[test]
        fn frechet_gaussian_invariant_under_common_permutation(
            frames in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0), 4..20),
            shift in -0.5f64..0.5,
        ) {
            let fa: Vec<[f64; 3]> = frames.iter().map(|&(x, y, z)| [x, y, z]).collect();
            let fb: Vec<[f64; 3]> = fa.iter().map(|f| [f[0] + shift, f[1], f[2]]).collect();
            let a = seq(&fa);
            let b = seq(&fb);
            let d1 = frechet_gaussian(&a, &b).unwrap();

            let mut fa_rev = fa.clone();
            fa_rev.reverse();
            let mut fb_rev = fb.clone();
            fb_rev.reverse();
            let d2 = frechet_gaussian(&seq(&fa_rev), &seq(&fb_rev)).unwrap();
            prop_assert!((d1 - d2).abs() < 1e-9);
        }
    }
}
