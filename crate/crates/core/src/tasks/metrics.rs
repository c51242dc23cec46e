use crate::error::{Error, Result};
use crate::numerics::{singular_values, DenseMatrix};
use crate::tasks::image::Mask;

/// Mean squared error over the selected pixels (all pixels when `over` is
/// `None`).
pub fn mse(a: &DenseMatrix, b: &DenseMatrix, over: Option<&Mask>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension {
            op: "mse",
            left: a.shape(),
            right: b.shape(),
        });
    }
    if let Some(mask) = over {
        if mask.shape() != a.shape() {
            return Err(Error::Dimension {
                op: "mse mask",
                left: a.shape(),
                right: mask.shape(),
            });
        }
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (k, (x, y)) in a.as_slice().iter().zip(b.as_slice()).enumerate() {
        if over.is_none_or(|m| m.as_slice()[k]) {
            total += (x - y) * (x - y);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::contract("metric over an empty pixel selection"));
    }
    Ok(total / count as f64)
}

/// `10·log10(1/MSE)` with unit peak. Identical inputs give `f64::INFINITY`.
pub fn psnr(a: &DenseMatrix, b: &DenseMatrix, over: Option<&Mask>) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b, over)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

/// `exp(−Σ p_k ln p_k)` with `p_k = σ_k / Σσ`.
pub fn effective_rank(m: &DenseMatrix) -> Result<f64> {
    let sigma = singular_values(m)?;
    let total: f64 = sigma.iter().sum();
    if !(total > 0.0) {
        return Err(Error::contract("effective rank of a zero matrix"));
    }
    let entropy: f64 = sigma
        .iter()
        .map(|s| s / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    Ok(entropy.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Similarity among rows: covariance of `Xᵀ`'s columns (`m × m`).
    Rows,
    /// Similarity among columns (`n × n`).
    Cols,
}

/// Sample covariance (denominator `N − 1`) between the rows or columns of `x`.
pub fn covariance_matrix(x: &DenseMatrix, axis: Axis) -> Result<DenseMatrix> {
    let data = match axis {
        Axis::Cols => x.clone(),
        Axis::Rows => x.transpose(),
    };
    let (samples, vars) = data.shape();
    if samples < 2 || vars == 0 {
        return Err(Error::contract(format!(
            "covariance needs >= 2 samples along the reduced axis, got {:?}",
            x.shape()
        )));
    }
    let means: Vec<f64> = (0..vars)
        .map(|j| (0..samples).map(|i| data[(i, j)]).sum::<f64>() / samples as f64)
        .collect();
    let centered = DenseMatrix::from_fn(samples, vars, |i, j| data[(i, j)] - means[j]);
    let gram = crate::numerics::matrix::gemm(&centered, true, &centered, false)?;
    let mut cov = gram.scale(1.0 / (samples - 1) as f64);
    // exact symmetry
    for i in 0..vars {
        for j in (i + 1)..vars {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::linalg::min_eigenvalue;
    use crate::rng::seeded;
    use rand::Rng;

    fn random(m: usize, n: usize, seed: u64) -> DenseMatrix {
        let mut rng = seeded(seed, 0);
        DenseMatrix::from_fn(m, n, |_, _| rng.random::<f64>())
    }

    #[test]
    fn identical_images_give_infinite_psnr() {
        let a = random(4, 4, 1);
        assert_eq!(psnr(&a, &a, None).unwrap(), f64::INFINITY);
    }

    #[test]
    fn uniform_offset_of_tenth_is_20_db() {
        let a = DenseMatrix::filled(5, 5, 0.3);
        let b = DenseMatrix::filled(5, 5, 0.4);
        assert!((psnr(&a, &b, None).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn masked_psnr_matches_scalar_oracle() {
        let a = random(6, 7, 2);
        let b = random(6, 7, 3);
        let mask = Mask::from_vec(6, 7, (0..42).map(|k| k % 3 != 0).collect()).unwrap();
        let mut s = 0.0;
        let mut c = 0.0;
        for i in 0..6 {
            for j in 0..7 {
                if (i * 7 + j) % 3 != 0 {
                    s += (a[(i, j)] - b[(i, j)]).powi(2);
                    c += 1.0;
                }
            }
        }
        let oracle = 10.0 * (1.0 / (s / c)).log10();
        assert!((psnr(&a, &b, Some(&mask)).unwrap() - oracle).abs() < 1e-9);
        assert_eq!(psnr(&a, &b, Some(&mask)).unwrap(), psnr(&b, &a, Some(&mask)).unwrap());
    }

    #[test]
    fn empty_selection_is_an_error() {
        let a = random(2, 2, 4);
        let none = Mask::from_vec(2, 2, vec![false; 4]).unwrap();
        assert!(psnr(&a, &a, Some(&none)).is_err());
    }

    #[test]
    fn effective_rank_cases() {
        assert!((effective_rank(&DenseMatrix::identity(5)).unwrap() - 5.0).abs() < 1e-12);
        let u = DenseMatrix::column(&[1.0, 2.0, 3.0]);
        let v = DenseMatrix::from_rows(&[vec![0.5, -1.0, 2.0, 4.0]]);
        assert!((effective_rank(&u.matmul(&v).unwrap()).unwrap() - 1.0).abs() < 1e-6);
        let near = DenseMatrix::diag(&[1.0, 1.0, 1e-12]);
        assert!((effective_rank(&near).unwrap() - 2.0).abs() < 1e-6);
        assert!(effective_rank(&DenseMatrix::zeros(3, 3)).is_err());
    }

    proptest::proptest! {
        #[test]
        fn effective_rank_is_bounded(seed in 0u64..500, m in 1usize..7, n in 1usize..7) {
            let x = random(m, n, seed).map(|v| v - 0.5);
            let r = effective_rank(&x).unwrap();
            proptest::prop_assert!(r >= 1.0 - 1e-12 && r <= m.min(n) as f64 + 1e-9);
        }
    }

    #[test]
    fn covariance_of_constant_is_zero() {
        let c = covariance_matrix(&DenseMatrix::filled(4, 3, 0.7), Axis::Cols).unwrap();
        assert_eq!(c.max_abs(), 0.0);
    }

    #[test]
    fn covariance_hand_instance() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 2.0, 0.0], vec![3.0, 2.0, 1.0], vec![5.0, 8.0, 2.0]]);
        let c = covariance_matrix(&x, Axis::Cols).unwrap();
        // scalar oracle
        for a in 0..3 {
            for b in 0..3 {
                let ma = (0..3).map(|i| x[(i, a)]).sum::<f64>() / 3.0;
                let mb = (0..3).map(|i| x[(i, b)]).sum::<f64>() / 3.0;
                let s: f64 = (0..3).map(|i| (x[(i, a)] - ma) * (x[(i, b)] - mb)).sum::<f64>() / 2.0;
                assert!((c[(a, b)] - s).abs() < 1e-12);
            }
        }
        assert!((c[(0, 0)] - 4.0).abs() < 1e-12);
        let rows = covariance_matrix(&x, Axis::Rows).unwrap();
        assert_eq!(rows.shape(), (3, 3));
        assert_eq!(rows, covariance_matrix(&x.transpose(), Axis::Cols).unwrap());
    }

    proptest::proptest! {
        #[test]
        fn covariance_is_symmetric_psd(seed in 0u64..1000, m in 2usize..12, n in 2usize..8, rows in proptest::bool::ANY) {
            let axis = if rows { Axis::Rows } else { Axis::Cols };
            let c = covariance_matrix(&random(m, n, seed), axis).unwrap();
            proptest::prop_assert_eq!(c.symmetry_error(), 0.0);
            proptest::prop_assert!(min_eigenvalue(&c).unwrap() >= -1e-10);
        }

        #[test]
        fn psnr_is_symmetric(seed in 0u64..1000, m in 1usize..8, n in 1usize..8) {
            let (a, b) = (random(m, n, seed), random(m, n, seed + 7919));
            proptest::prop_assert_eq!(psnr(&a, &b, None).unwrap(), psnr(&b, &a, None).unwrap());
        }
    }

    #[test]
    fn covariance_needs_two_samples() {
        assert!(covariance_matrix(&DenseMatrix::zeros(1, 4), Axis::Cols).is_err());
    }
}
