//! Observation mask generators: random, rectangular patches, texture files
//! and unions of those.

use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded, streams};
use crate::tasks::image::Mask;
use crate::tasks::pgm::decode_pgm;

/// Axis-aligned rectangle of pixels, `rows × cols` starting at `(row, col)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskKind {
    /// Each pixel independently missing with probability `p`.
    Random { p: f64 },
    /// Listed rectangles are missing.
    Patch { rects: Vec<Rect> },
    /// Graymap thresholded at 0.5; dark pixels are missing.
    File { path: PathBuf },
    /// Missing set is the union of the components' missing sets.
    Mixture { components: Vec<MaskKind> },
}

pub fn gen_mask(kind: &MaskKind, m: usize, n: usize, seed: u64) -> Result<Mask> {
    gen_mask_stream(kind, m, n, seed, 0)
}

fn gen_mask_stream(kind: &MaskKind, m: usize, n: usize, seed: u64, depth: u64) -> Result<Mask> {
    match kind {
        MaskKind::Random { p } => {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::contract(format!("missing rate {p} outside [0, 1]")));
            }
            let mut rng = seeded(seed, streams::MASK + 16 * depth);
            let observed = (0..m * n).map(|_| rng.random::<f64>() >= *p).collect();
            Mask::from_vec(m, n, observed)
        }
        MaskKind::Patch { rects } => {
            let mut mask = Mask::all_observed(m, n);
            for r in rects {
                if r.row + r.height > m || r.col + r.width > n {
                    return Err(Error::contract(format!("patch {r:?} exceeds the {m}x{n} image")));
                }
                for i in r.row..r.row + r.height {
                    for j in r.col..r.col + r.width {
                        mask.set(i, j, false);
                    }
                }
            }
            Ok(mask)
        }
        MaskKind::File { path } => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            let img = decode_pgm(&bytes)?;
            if img.shape() != (m, n) {
                return Err(Error::Dimension {
                    op: "mask file",
                    left: (m, n),
                    right: img.shape(),
                });
            }
            Mask::from_vec(m, n, img.as_slice().iter().map(|&v| v >= 0.5).collect())
        }
        MaskKind::Mixture { components } => {
            let mut mask = Mask::all_observed(m, n);
            for (k, c) in components.iter().enumerate() {
                let part = gen_mask_stream(c, m, n, seed, depth * 8 + k as u64 + 1)?;
                for i in 0..m {
                    for j in 0..n {
                        if !part.get(i, j) {
                            mask.set(i, j, false);
                        }
                    }
                }
            }
            Ok(mask)
        }
    }
}
