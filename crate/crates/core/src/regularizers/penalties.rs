//! Classical penalties: anisotropic total variation and weight norms.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numerics::linalg::top_singular_triplet;
use crate::numerics::{DenseMatrix, Graph, NodeId};

/// Σ|X_{i+1,j} − X_{i,j}| + Σ|X_{i,j+1} − X_{i,j}|.
pub fn tv_penalty(grid: &DenseMatrix) -> f64 {
    let (m, n) = grid.shape();
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..n {
            if i + 1 < m {
                total += (grid[(i + 1, j)] - grid[(i, j)]).abs();
            }
            if j + 1 < n {
                total += (grid[(i, j + 1)] - grid[(i, j)]).abs();
            }
        }
    }
    total
}

/// `(k−1) × k` forward-difference operator.
fn difference_operator(k: usize) -> DenseMatrix {
    DenseMatrix::from_fn(k.saturating_sub(1), k, |i, j| {
        if j == i + 1 {
            1.0
        } else if j == i {
            -1.0
        } else {
            0.0
        }
    })
}

/// Records [`tv_penalty`] of an `m × n` grid node via difference operators.
pub fn record_tv(graph: &mut Graph, grid: NodeId) -> Result<NodeId> {
    let (m, n) = graph.value(grid).shape();
    let dm = graph.constant(difference_operator(m));
    let dn = graph.constant(difference_operator(n));
    let row_diff = graph.matmul(dm, grid)?;
    let col_diff = graph.matmul_nt(grid, dn)?;
    let a = graph.abs(row_diff);
    let b = graph.abs(col_diff);
    let sa = graph.sum(a);
    let sb = graph.sum(b);
    graph.add(sa, sb)
}

/// Which matrix norm the L2 weight penalty sums over layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightNorm {
    #[default]
    Frobenius,
    Spectral,
}

/// `Σ_ℓ ‖W^(ℓ)‖` over the given weight matrices.
pub fn l2_penalty<'a>(weights: impl IntoIterator<Item = &'a DenseMatrix>, norm: WeightNorm) -> Result<f64> {
    weights
        .into_iter()
        .map(|w| match norm {
            WeightNorm::Frobenius => Ok(w.frobenius_norm()),
            WeightNorm::Spectral => Ok(top_singular_triplet(w)?.0),
        })
        .sum()
}

pub fn record_l2(graph: &mut Graph, weights: &[NodeId], norm: WeightNorm) -> Result<NodeId> {
    let mut total: Option<NodeId> = None;
    for &w in weights {
        let term = match norm {
            WeightNorm::Frobenius => {
                let sq = graph.square(w);
                let s = graph.sum(sq);
                graph.sqrt(s)
            }
            WeightNorm::Spectral => graph.spectral_norm(w)?,
        };
        total = Some(match total {
            Some(t) => graph.add(t, term)?,
            None => term,
        });
    }
    Ok(total.unwrap_or_else(|| graph.constant(DenseMatrix::zeros(1, 1))))
}
