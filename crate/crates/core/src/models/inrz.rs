//! INR-Z: a coordinate network whose input is the coordinate concatenated with
//! the observed values of a square neighborhood around it.

use crate::error::{Error, Result};
use crate::models::coords::to_symmetric;
use crate::models::network::{forward, NetworkSpec, ParamSet};
use crate::numerics::DenseMatrix;
use crate::tasks::MaskedImage;

/// Odd square patch side; `patch = 3` gives `N0 = 9` neighbor values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighborhood {
    pub patch: usize,
}

impl Default for Neighborhood {
    fn default() -> Self {
        Self { patch: 3 }
    }
}

impl Neighborhood {
    pub fn size(&self) -> usize {
        self.patch * self.patch
    }

    pub fn input_dim(&self) -> usize {
        2 + self.size()
    }

    pub fn check(&self, spec: &NetworkSpec) -> Result<()> {
        if self.patch % 2 == 0 || self.patch == 0 {
            return Err(Error::contract(format!("patch side must be odd, got {}", self.patch)));
        }
        if spec.input_dim != self.input_dim() {
            return Err(Error::contract(format!(
                "INR-Z network expects input_dim {} for a {}x{} patch, spec has {}",
                self.input_dim(),
                self.patch,
                self.patch,
                spec.input_dim
            )));
        }
        Ok(())
    }

    /// `[x, y, v_1, …, v_N0]` for pixel `(i, j)`; out-of-bounds and unobserved
    /// neighbors are 0. `x, y` are the `[−1, 1]` grid coordinates.
    pub fn input_row(&self, image: &MaskedImage, i: usize, j: usize) -> Vec<f64> {
        let (m, n) = image.shape();
        let r = (self.patch / 2) as isize;
        let mut row = Vec::with_capacity(self.input_dim());
        row.push(to_symmetric((i + 1) as f64 / m as f64));
        row.push(to_symmetric((j + 1) as f64 / n as f64));
        for di in -r..=r {
            for dj in -r..=r {
                row.push(image.observed_or_zero(i as isize + di, j as isize + dj));
            }
        }
        row
    }

    /// Inputs for the full grid, row-major: `(m·n) × (2 + N0)`.
    pub fn grid_inputs(&self, image: &MaskedImage) -> DenseMatrix {
        let (m, n) = image.shape();
        let mut data = Vec::with_capacity(m * n * self.input_dim());
        for i in 0..m {
            for j in 0..n {
                data.extend(self.input_row(image, i, j));
            }
        }
        DenseMatrix::from_vec(m * n, self.input_dim(), data).expect("consistent shape")
    }
}

/// Evaluates INR-Z at pixel `(i, j)`.
pub fn inrz_forward(
    spec: &NetworkSpec,
    params: &ParamSet,
    hood: Neighborhood,
    image: &MaskedImage,
    coord: (usize, usize),
) -> Result<f64> {
    hood.check(spec)?;
    let (m, n) = image.shape();
    if coord.0 >= m || coord.1 >= n {
        return Err(Error::contract(format!("pixel {coord:?} outside {m}x{n} image")));
    }
    let row = hood.input_row(image, coord.0, coord.1);
    let input = DenseMatrix::from_vec(1, row.len(), row)?;
    Ok(forward(spec, params, &input)?.as_slice()[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::network::init_network;
    use crate::tasks::Mask;

    fn image(m: usize, n: usize) -> MaskedImage {
        let px = DenseMatrix::from_fn(m, n, |i, j| ((i * n + j) % 10) as f64 / 10.0);
        MaskedImage::fully_observed(px, "t").unwrap()
    }

    #[test]
    fn center_patch_layout() {
        let img = image(5, 5);
        let row = Neighborhood::default().input_row(&img, 2, 2);
        assert_eq!(row.len(), 11);
        assert_eq!(row[0], to_symmetric(3.0 / 5.0));
        let expect: Vec<f64> = (1..4)
            .flat_map(|i| (1..4).map(move |j| ((i * 5 + j) % 10) as f64 / 10.0))
            .collect();
        assert_eq!(&row[2..], expect.as_slice());
    }

    #[test]
    fn corner_pads_with_zero() {
        let img = image(4, 4);
        let row = Neighborhood::default().input_row(&img, 0, 0);
        // first patch row and first column are outside the image
        assert_eq!(&row[2..5], &[0.0, 0.0, 0.0]);
        assert_eq!(row[5], 0.0);
        assert_eq!(row[8], 0.0);
        assert_eq!(row[6], img.pixels[(0, 0)]);
    }

    #[test]
    fn unobserved_neighbors_are_zero() {
        let mut img = image(4, 4);
        let mut mask = Mask::all_observed(4, 4);
        mask.set(1, 2, false);
        img.mask = mask;
        let row = Neighborhood::default().input_row(&img, 1, 1);
        // (1,2) is the right neighbor: patch index 5
        assert_eq!(row[2 + 5], 0.0);
    }

    #[test]
    fn zero_image_matches_plain_network_on_padded_input() {
        let spec = NetworkSpec::siren(11, 1, vec![8, 8], 30.0);
        let params = init_network(&spec, 1).unwrap();
        let img = MaskedImage::fully_observed(DenseMatrix::zeros(6, 6), "z").unwrap();
        for (i, j) in [(0, 0), (2, 3), (5, 5)] {
            let v = inrz_forward(&spec, &params, Neighborhood::default(), &img, (i, j)).unwrap();
            let mut input = vec![0.0; 11];
            input[0] = to_symmetric((i + 1) as f64 / 6.0);
            input[1] = to_symmetric((j + 1) as f64 / 6.0);
            let plain = forward(&spec, &params, &DenseMatrix::from_vec(1, 11, input).unwrap()).unwrap();
            assert_eq!(v, plain.as_slice()[0]);
        }
    }

    #[test]
    fn inconsistent_input_dim() {
        let spec = NetworkSpec::siren(2, 1, vec![4], 30.0);
        let params = init_network(&spec, 0).unwrap();
        assert!(inrz_forward(&spec, &params, Neighborhood::default(), &image(3, 3), (1, 1)).is_err());
    }
}
