//! Learned adjacency matrices and their Laplacians.
//!
//! Both sources produce a Gram matrix `GᵀG` over `m'` sample positions, which
//! is clamped, exponentiated and normalized by its grand sum:
//!
//! ```text
//! A = exp(GᵀG) / 1ᵀ exp(GᵀG) 1,      L = diag(A 1) − A
//! ```
//!
//! With a free matrix `G = C` this is the adaptive (AIR) adjacency; with
//! `G = g(u)` for a tiny sine network `g: R → R^r` evaluated at
//! `u = [1/m', …, 1]` it is the INRR adjacency, whose rows vary smoothly in `u`.

use crate::error::{Error, Result};
use crate::models::{axis_coords, forward, init_network, record_forward, NetworkSpec, ParamSet};
use crate::numerics::{DenseMatrix, Graph, NodeId};
use crate::rng::seeded;
use rand_distr::{Distribution, Normal};

/// Gram entries are clamped to this value before exponentiation.
pub const GRAM_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub enum AdjacencySource {
    /// Free `r × m'` matrix `C`.
    Free { c: DenseMatrix },
    /// Tiny INR `g: R → R^r` sampled at `m'` positions.
    TinyInr {
        spec: NetworkSpec,
        params: ParamSet,
        samples: usize,
    },
}

impl AdjacencySource {
    pub fn free_random(rank: usize, samples: usize, std: f64, seed: u64, stream: u64) -> Result<Self> {
        let normal = Normal::new(0.0, std).map_err(|e| Error::contract(format!("bad init std: {e}")))?;
        let mut rng = seeded(seed, stream);
        let c = DenseMatrix::from_fn(rank, samples, |_, _| normal.sample(&mut rng));
        let src = Self::Free { c };
        src.validate()?;
        Ok(src)
    }

    /// Tiny sine network with the given hidden widths, output dim `rank`.
    pub fn tiny_inr(rank: usize, samples: usize, hidden: Vec<usize>, omega0: f64, seed: u64) -> Result<Self> {
        let spec = NetworkSpec::siren(1, rank, hidden, omega0);
        let params = init_network(&spec, seed)?;
        let src = Self::TinyInr { spec, params, samples };
        src.validate()?;
        Ok(src)
    }

    pub fn validate(&self) -> Result<()> {
        let (rank, samples) = (self.rank(), self.samples());
        if rank < 1 {
            return Err(Error::contract("adjacency rank r must be >= 1"));
        }
        if samples < 2 {
            return Err(Error::contract("adjacency needs m' >= 2 samples"));
        }
        if let Self::TinyInr { spec, .. } = self {
            if spec.input_dim != 1 {
                return Err(Error::contract("tiny INR must map R -> R^r"));
            }
        }
        Ok(())
    }

    pub fn rank(&self) -> usize {
        match self {
            Self::Free { c } => c.rows(),
            Self::TinyInr { spec, .. } => spec.output_dim,
        }
    }

    pub fn samples(&self) -> usize {
        match self {
            Self::Free { c } => c.cols(),
            Self::TinyInr { samples, .. } => *samples,
        }
    }

    /// The `r × m'` embedding `G` whose Gram matrix defines `A`.
    pub fn embedding(&self) -> Result<DenseMatrix> {
        match self {
            Self::Free { c } => Ok(c.clone()),
            Self::TinyInr { spec, params, samples } => Ok(forward(spec, params, &axis_coords(*samples))?.transpose()),
        }
    }

    pub fn trainable(&self) -> Vec<&DenseMatrix> {
        match self {
            Self::Free { c } => vec![c],
            Self::TinyInr { params, .. } => params.trainable(),
        }
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut DenseMatrix> {
        match self {
            Self::Free { c } => vec![c],
            Self::TinyInr { params, .. } => params.trainable_mut(),
        }
    }
}

/// Evaluates `A` for a source.
pub fn build_adjacency(src: &AdjacencySource) -> Result<DenseMatrix> {
    let mut g = Graph::new();
    let (a, _) = record_adjacency(&mut g, src, false)?;
    Ok(g.value(a).clone())
}

/// Records `A` on `graph`; returns the node and the source's parameter ids
/// (in [`AdjacencySource::trainable`] order).
pub fn record_adjacency(graph: &mut Graph, src: &AdjacencySource, trainable: bool) -> Result<(NodeId, Vec<NodeId>)> {
    src.validate()?;
    let (gram, ids) = match src {
        AdjacencySource::Free { c } => {
            let id = if trainable {
                graph.parameter(c.clone())
            } else {
                graph.constant(c.clone())
            };
            let ct = graph.transpose(id);
            (graph.matmul(ct, id)?, vec![id])
        }
        AdjacencySource::TinyInr { spec, params, samples } => {
            let nodes = record_forward(graph, spec, params, &axis_coords(*samples), trainable)?;
            // rows of the output are g(u_i), so out·outᵀ = GᵀG
            (graph.matmul_nt(nodes.output, nodes.output)?, nodes.params)
        }
    };
    // the clamp would mask NaN, so check before it
    if !graph.value(gram).is_finite() {
        return Err(Error::NumericRange(
            "adjacency Gram matrix has non-finite entries".into(),
        ));
    }
    let clamped = graph.clamp_max(gram, GRAM_CLAMP);
    let e = graph.exp(clamped);
    if !graph.value(e).is_finite() {
        return Err(Error::NumericRange("adjacency has non-finite entries".into()));
    }
    let total = graph.sum(e);
    let a = graph.div_scalar(e, total)?;
    Ok((a, ids))
}

/// `L = diag(A 1) − A`; `A` must be square and symmetric.
pub fn build_laplacian(a: &DenseMatrix) -> Result<DenseMatrix> {
    if !a.is_square() {
        return Err(Error::contract(format!(
            "adjacency must be square, got {:?}",
            a.shape()
        )));
    }
    let scale = a.max_abs().max(1.0);
    if a.symmetry_error() > 1e-12 * scale {
        return Err(Error::contract("adjacency must be symmetric"));
    }
    let mut l = a.scale(-1.0);
    for (i, s) in a.row_sums().into_iter().enumerate() {
        l[(i, i)] += s;
    }
    Ok(l)
}

pub fn record_laplacian(graph: &mut Graph, a: NodeId) -> Result<NodeId> {
    let degrees = graph.row_sums(a);
    let d = graph.diag(degrees)?;
    graph.sub(d, a)
}
