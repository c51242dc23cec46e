use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// `γ(x) = (1/√D)[cos(Bx), sin(Bx)]` for a single point.
pub fn fourier_features(b: &DenseMatrix, x: &[f64]) -> Result<Vec<f64>> {
    if b.cols() != x.len() {
        return Err(Error::Dimension {
            op: "fourier_features",
            left: b.shape(),
            right: (x.len(), 1),
        });
    }
    let d = b.rows();
    let scale = 1.0 / (d as f64).sqrt();
    let mut out = vec![0.0; 2 * d];
    for l in 0..d {
        let phase: f64 = b.row(l).iter().zip(x).map(|(bi, xi)| bi * xi).sum();
        out[l] = scale * phase.cos();
        out[d + l] = scale * phase.sin();
    }
    Ok(out)
}

/// Row-wise [`fourier_features`] of a `k × d` coordinate matrix → `k × 2D`.
pub fn fourier_feature_matrix(b: &DenseMatrix, coords: &DenseMatrix) -> Result<DenseMatrix> {
    if b.cols() != coords.cols() {
        return Err(Error::Dimension {
            op: "fourier_feature_matrix",
            left: b.shape(),
            right: coords.shape(),
        });
    }
    let d = b.rows();
    let mut out = DenseMatrix::zeros(coords.rows(), 2 * d);
    for i in 0..coords.rows() {
        let feats = fourier_features(b, coords.row(i))?;
        out.as_mut_slice()[i * 2 * d..(i + 1) * 2 * d].copy_from_slice(&feats);
    }
    Ok(out)
}

/// `γ(a)·γ(b) = (1/D) Σ_l cos(B_l·(a − b))`, the mean cosine feature.
pub fn mean_cosine(b: &DenseMatrix, diff: &[f64]) -> Result<f64> {
    if b.cols() != diff.len() {
        return Err(Error::Dimension {
            op: "mean_cosine",
            left: b.shape(),
            right: (diff.len(), 1),
        });
    }
    let total: f64 = (0..b.rows())
        .map(|l| b.row(l).iter().zip(diff).map(|(bi, di)| bi * di).sum::<f64>().cos())
        .sum();
    Ok(total / b.rows() as f64)
}
