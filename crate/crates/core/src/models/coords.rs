use crate::numerics::DenseMatrix;

/// Grid coordinates `(i/m, j/n)` for `i = 1..=m`, `j = 1..=n`, row-major,
/// as a `(m·n) × 2` matrix.
pub fn grid_coords(m: usize, n: usize) -> DenseMatrix {
    DenseMatrix::from_fn(m * n, 2, |k, c| {
        let (i, j) = (k / n, k % n);
        if c == 0 {
            (i + 1) as f64 / m as f64
        } else {
            (j + 1) as f64 / n as f64
        }
    })
}

/// Maps a grid coordinate in `(0, 1]` affinely to `[−1, 1]`.
pub fn to_symmetric(c: f64) -> f64 {
    2.0 * c - 1.0
}

/// [`grid_coords`] mapped to `[−1, 1]²`; the network input used for images.
pub fn network_grid(m: usize, n: usize) -> DenseMatrix {
    grid_coords(m, n).map(to_symmetric)
}

/// Sample coordinates `u = [1/m', 2/m', …, 1]` as an `m' × 1` column.
pub fn axis_coords(len: usize) -> DenseMatrix {
    DenseMatrix::from_fn(len, 1, |i, _| (i + 1) as f64 / len as f64)
}
