//! Matrix algebra, reverse-mode differentiation, decompositions and Adam.

pub mod adam;
pub mod gradcheck;
pub mod graph;
pub mod linalg;
pub mod matrix;

pub use adam::AdamState;
pub use graph::{Gradients, Graph, NodeId};
pub use linalg::{singular_values, symmetric_eigen, RidgePolicy, SymmetricEigen};
pub use matrix::DenseMatrix;
