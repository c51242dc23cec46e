use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Graph, NodeId};

/// `tr(Mᵀ L M)` for a square `L` acting on the rows of `M`.
pub fn dirichlet_energy(l: &DenseMatrix, m: &DenseMatrix) -> Result<f64> {
    check(l.shape(), m.shape())?;
    let lm = l.matmul(m)?;
    Ok(m.as_slice().iter().zip(lm.as_slice()).map(|(a, b)| a * b).sum())
}

/// Records `tr(Mᵀ L M)` as `Σ M ⊙ (L M)`.
pub fn record_dirichlet(graph: &mut Graph, l: NodeId, m: NodeId) -> Result<NodeId> {
    check(graph.value(l).shape(), graph.value(m).shape())?;
    let lm = graph.matmul(l, m)?;
    let prod = graph.mul(m, lm)?;
    Ok(graph.sum(prod))
}

fn check(l: (usize, usize), m: (usize, usize)) -> Result<()> {
    if l.0 != l.1 || l.1 != m.0 {
        return Err(Error::Dimension {
            op: "dirichlet_energy",
            left: l,
            right: m,
        });
    }
    Ok(())
}
