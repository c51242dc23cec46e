use std::f64::consts::PI;

use crate::numerics::DenseMatrix;

/// Raw ring pattern `sin(25π · sin(π/3 · √(x² + y²)))` sampled on a uniform
/// `m × n` grid over `[−1, 1]²`; row index maps to `x`, column index to `y`.
pub fn synthetic_ring_raw(m: usize, n: usize) -> DenseMatrix {
    assert!(m >= 2 && n >= 2, "ring grid needs at least 2x2 samples");
    DenseMatrix::from_fn(m, n, |i, j| {
        let x = -1.0 + 2.0 * i as f64 / (m - 1) as f64;
        let y = -1.0 + 2.0 * j as f64 / (n - 1) as f64;
        ring_value(x, y)
    })
}

/// [`synthetic_ring_raw`] rescaled to `[0, 1]` via `(s + 1) / 2`.
pub fn synthetic_ring(m: usize, n: usize) -> DenseMatrix {
    synthetic_ring_raw(m, n).map(|s| (s + 1.0) / 2.0)
}

pub fn ring_value(x: f64, y: f64) -> f64 {
    (25.0 * PI * (PI / 3.0 * (x * x + y * y).sqrt()).sin()).sin()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_zero() {
        assert_eq!(ring_value(0.0, 0.0), 0.0);
        // odd grid places a sample exactly at the origin
        let g = synthetic_ring_raw(11, 11);
        assert_eq!(g[(5, 5)], 0.0);
    }

    #[test]
    fn four_fold_symmetry() {
        let g = synthetic_ring_raw(9, 13);
        for i in 0..9 {
            for j in 0..13 {
                assert!((g[(i, j)] - g[(8 - i, j)]).abs() < 1e-12);
                assert!((g[(i, j)] - g[(i, 12 - j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grid_point_matches_direct_formula() {
        let g = synthetic_ring_raw(11, 11);
        // x = -1 + 0.2·8 = 0.6, y = -1 + 0.2·9 = 0.8, radius 1
        let direct = (25.0 * PI * (PI / 3.0_f64).sin()).sin();
        assert!((g[(8, 9)] - direct).abs() < 1e-12);
    }

    #[test]
    fn stored_variant_is_in_unit_interval() {
        let g = synthetic_ring(32, 32);
        assert!(g.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
