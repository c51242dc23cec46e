use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::rng::{seeded, streams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// Additive Gaussian noise; `sigma` is on the 0–255 scale.
    Gaussian { sigma: f64 },
    /// Each pixel kept with probability `r`, otherwise set to 0 or 1.
    SaltPepper { r: f64 },
    /// `Poisson(λ·x)/λ`.
    Poisson { lambda: f64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::Gaussian { sigma } if !(sigma >= 0.0) => {
                Err(Error::contract(format!("gaussian sigma must be >= 0, got {sigma}")))
            }
            NoiseSpec::SaltPepper { r } if !(r > 0.0 && r <= 1.0) => Err(Error::contract(format!(
                "salt & pepper keep rate must be in (0, 1], got {r}"
            ))),
            NoiseSpec::Poisson { lambda } if !(lambda > 0.0) => {
                Err(Error::contract(format!("poisson lambda must be > 0, got {lambda}")))
            }
            _ => Ok(()),
        }
    }
}

/// Corrupts a clean `[0, 1]` image; the result is clamped back to `[0, 1]`.
pub fn add_noise(image: &DenseMatrix, spec: &NoiseSpec, seed: u64) -> Result<DenseMatrix> {
    spec.validate()?;
    let mut rng = seeded(seed, streams::NOISE);
    let out = match *spec {
        NoiseSpec::Gaussian { sigma } => {
            if sigma == 0.0 {
                return Ok(image.clone());
            }
            let normal = Normal::new(0.0, sigma / 255.0).expect("sigma > 0");
            image.map(|v| (v + normal.sample(&mut rng)).clamp(0.0, 1.0))
        }
        NoiseSpec::SaltPepper { r } => image.map(|v| {
            if rng.random::<f64>() < r {
                v
            } else if rng.random::<bool>() {
                1.0
            } else {
                0.0
            }
        }),
        NoiseSpec::Poisson { lambda } => image.map(|v| {
            let rate = lambda * v;
            if rate <= 0.0 {
                return 0.0;
            }
            let k: f64 = Poisson::new(rate).expect("rate > 0").sample(&mut rng);
            (k / lambda).clamp(0.0, 1.0)
        }),
    };
    Ok(out)
}
