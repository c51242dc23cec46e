//! Central finite-difference checks for reverse-mode gradients.

use crate::numerics::DenseMatrix;

/// Worst relative error between `analytic` and central differences of `f`
/// around `params`, perturbing every entry of every matrix.
///
/// Each parameter matrix is compared as a whole:
/// `‖a − n‖ / max(‖a‖, ‖n‖, floor)` in the Frobenius norm. Entries whose true
/// derivative is zero would otherwise be scored on roundoff alone.
pub fn max_relative_error(
    params: &[DenseMatrix],
    analytic: &[DenseMatrix],
    step: f64,
    floor: f64,
    mut f: impl FnMut(&[DenseMatrix]) -> f64,
) -> f64 {
    let mut work: Vec<DenseMatrix> = params.to_vec();
    let mut worst = 0.0f64;
    for k in 0..params.len() {
        let (mut diff, mut a_norm, mut n_norm) = (0.0, 0.0, 0.0);
        for idx in 0..params[k].len() {
            let orig = params[k].as_slice()[idx];
            work[k].as_mut_slice()[idx] = orig + step;
            let plus = f(&work);
            work[k].as_mut_slice()[idx] = orig - step;
            let minus = f(&work);
            work[k].as_mut_slice()[idx] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic[k].as_slice()[idx];
            diff += (a - numeric).powi(2);
            a_norm += a * a;
            n_norm += numeric * numeric;
        }
        let denom = a_norm.sqrt().max(n_norm.sqrt()).max(floor);
        worst = worst.max(diff.sqrt() / denom);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_gradient_scores_near_zero() {
        let x = DenseMatrix::from_rows(&[vec![1.0, -2.0, 0.5]]);
        let g = x.scale(2.0);
        let err = max_relative_error(std::slice::from_ref(&x), std::slice::from_ref(&g), 1e-5, 1e-8, |p| {
            p[0].as_slice().iter().map(|v| v * v).sum()
        });
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let x = DenseMatrix::from_rows(&[vec![1.0, -2.0]]);
        let g = x.scale(3.0);
        let err = max_relative_error(std::slice::from_ref(&x), std::slice::from_ref(&g), 1e-5, 1e-8, |p| {
            p[0].as_slice().iter().map(|v| v * v).sum()
        });
        assert!(err > 0.3);
    }
}
