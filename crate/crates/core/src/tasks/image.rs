use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// Boolean observation mask, row-major; `true` = observed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    observed: Vec<bool>,
}

impl Mask {
    pub fn all_observed(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            observed: vec![true; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, observed: Vec<bool>) -> Result<Self> {
        if observed.len() != rows * cols {
            return Err(Error::Dimension {
                op: "mask",
                left: (rows, cols),
                right: (observed.len(), 1),
            });
        }
        Ok(Self { rows, cols, observed })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.observed[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.observed[i * self.cols + j] = value;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.observed
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&b| b).count()
    }

    pub fn unobserved_count(&self) -> usize {
        self.observed.len() - self.observed_count()
    }

    pub fn complement(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            observed: self.observed.iter().map(|b| !b).collect(),
        }
    }

    /// 1.0 where observed, 0.0 elsewhere.
    pub fn to_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_vec(
            self.rows,
            self.cols,
            self.observed.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
        .expect("shape is consistent")
    }
}

/// Averages non-overlapping `factor × factor` blocks; trailing rows and
/// columns that do not fill a block are dropped.
pub fn box_downsample(pixels: &DenseMatrix, factor: usize) -> Result<DenseMatrix> {
    let (m, n) = pixels.shape();
    if factor == 0 || m / factor == 0 || n / factor == 0 {
        return Err(Error::contract(format!("cannot downsample {m}x{n} by {factor}")));
    }
    let area = (factor * factor) as f64;
    Ok(DenseMatrix::from_fn(m / factor, n / factor, |i, j| {
        let mut s = 0.0;
        for di in 0..factor {
            for dj in 0..factor {
                s += pixels[(i * factor + di, j * factor + dj)];
            }
        }
        s / area
    }))
}

/// Grayscale image in `[0, 1]` with its observation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedImage {
    pub pixels: DenseMatrix,
    pub mask: Mask,
    pub name: String,
}

impl MaskedImage {
    pub fn new(pixels: DenseMatrix, mask: Mask, name: impl Into<String>) -> Result<Self> {
        if pixels.shape() != mask.shape() {
            return Err(Error::Dimension {
                op: "masked image",
                left: pixels.shape(),
                right: mask.shape(),
            });
        }
        if pixels.as_slice().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::contract("pixel values must lie in [0, 1]"));
        }
        if mask.observed_count() == 0 {
            return Err(Error::contract("at least one pixel must be observed"));
        }
        Ok(Self {
            pixels,
            mask,
            name: name.into(),
        })
    }

    pub fn fully_observed(pixels: DenseMatrix, name: impl Into<String>) -> Result<Self> {
        let (m, n) = pixels.shape();
        Self::new(pixels, Mask::all_observed(m, n), name)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.pixels.shape()
    }

    /// Pixel value if observed and inside the image, otherwise 0.
    pub fn observed_or_zero(&self, i: isize, j: isize) -> f64 {
        let (m, n) = self.shape();
        if i < 0 || j < 0 || i as usize >= m || j as usize >= n {
            return 0.0;
        }
        let (i, j) = (i as usize, j as usize);
        if self.mask.get(i, j) {
            self.pixels[(i, j)]
        } else {
            0.0
        }
    }
}
