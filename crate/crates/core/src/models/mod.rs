//! Coordinate networks and matrix factorizations.

pub mod coords;
pub mod dmf;
pub mod fourier;
pub mod inrz;
pub mod network;

pub use coords::{axis_coords, grid_coords, network_grid};
pub use dmf::{dmf_product, init_dmf, record_dmf, DmfSpec};
pub use fourier::{fourier_feature_matrix, fourier_features, mean_cosine};
pub use inrz::{inrz_forward, Neighborhood};
pub use network::{
    forward, init_network, record_forward, record_forward_lifted, Activation, FeatureMapSpec, Layer, NetworkNodes,
    NetworkSpec, ParamSet,
};
