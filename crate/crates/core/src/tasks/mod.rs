//! Data plane: images, masks, noise, synthetic signals and metrics.

pub mod image;
pub mod mask;
pub mod metrics;
pub mod noise;
pub mod pgm;
pub mod synthetic;

pub use image::{box_downsample, Mask, MaskedImage};
pub use mask::{gen_mask, MaskKind, Rect};
pub use metrics::{covariance_matrix, effective_rank, mse, psnr, Axis};
pub use noise::{add_noise, NoiseSpec};
pub use pgm::{decode_pgm, encode_pgm, load_pgm, save_mask, save_pgm, PgmFormat};
pub use synthetic::{synthetic_ring, synthetic_ring_raw};
