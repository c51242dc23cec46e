use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::tasks::save_pgm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorScale {
    #[default]
    Linear,
    /// `log10(max(|x|, 1e-12))`.
    Log,
}

pub const LOG_FLOOR: f64 = 1e-12;

/// Min–max normalized gray levels in `[0, 1]`; a constant input maps to 0.5.
/// The flag reports that case.
pub fn heatmap_levels(m: &DenseMatrix, scale: ColorScale) -> Result<(DenseMatrix, bool)> {
    if !m.is_finite() {
        return Err(Error::NumericRange("heatmap input has non-finite entries".into()));
    }
    let v = match scale {
        ColorScale::Linear => m.clone(),
        ColorScale::Log => m.map(|x| x.abs().max(LOG_FLOOR).log10()),
    };
    let lo = v.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if v.is_empty() || hi <= lo {
        return Ok((DenseMatrix::filled(m.rows(), m.cols(), 0.5), true));
    }
    Ok((v.map(|x| (x - lo) / (hi - lo)), false))
}

/// Writes a grayscale PGM heatmap; returns true when the matrix was constant.
pub fn export_heatmap(m: &DenseMatrix, path: impl AsRef<Path>, scale: ColorScale) -> Result<bool> {
    let (levels, constant) = heatmap_levels(m, scale)?;
    if constant {
        eprintln!(
            "warning: constant matrix exported as uniform gray: {}",
            path.as_ref().display()
        );
    }
    save_pgm(&levels, path)?;
    Ok(constant)
}
