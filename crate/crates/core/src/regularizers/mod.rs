//! Penalty family and the regularized training objective.
//!
//! The objective is `Σ_observed (φ(x) − z)² + penalty`, where the penalty is
//! one of TV, a weight norm, or a learned Dirichlet energy over rows and
//! columns (AIR with a free embedding, INRR with a tiny INR embedding).

pub mod adjacency;
pub mod dirichlet;
pub mod pair;
pub mod penalties;

pub use adjacency::{
    build_adjacency, build_laplacian, record_adjacency, record_laplacian, AdjacencySource, GRAM_CLAMP,
};
pub use dirichlet::{dirichlet_energy, record_dirichlet};
pub use pair::{inrr_penalty, LaplacianPair, LaplacianSide, PairNodes};
pub use penalties::{l2_penalty, record_l2, record_tv, tv_penalty, WeightNorm};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Graph, NodeId};
use crate::tasks::MaskedImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianKind {
    Air,
    Inrr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegularizerState {
    None,
    Tv {
        lambda: f64,
    },
    L2 {
        lambda: f64,
        norm: WeightNorm,
    },
    Laplacian {
        kind: LaplacianKind,
        pair: LaplacianPair,
        lambda_r: f64,
        lambda_c: f64,
    },
}

/// Nodes recorded by [`RegularizerState::record`].
#[derive(Debug, Clone)]
pub struct PenaltyNodes {
    /// `None` for [`RegularizerState::None`].
    pub penalty: Option<NodeId>,
    /// Aligned with [`RegularizerState::trainable`]; `None` marks a frozen slot.
    pub params: Vec<Option<NodeId>>,
}

impl RegularizerState {
    pub fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Tv { .. } => "tv",
            Self::L2 { .. } => "l2",
            Self::Laplacian {
                kind: LaplacianKind::Air,
                ..
            } => "air",
            Self::Laplacian {
                kind: LaplacianKind::Inrr,
                ..
            } => "inrr",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::contract(format!("{name} must be finite and >= 0, got {v}")))
            }
        };
        match self {
            Self::None => Ok(()),
            Self::Tv { lambda } | Self::L2 { lambda, .. } => check("lambda", *lambda),
            Self::Laplacian {
                pair,
                lambda_r,
                lambda_c,
                ..
            } => {
                check("lambda_r", *lambda_r)?;
                check("lambda_c", *lambda_c)?;
                pair.rows.source.validate()?;
                pair.cols.source.validate()
            }
        }
    }

    pub fn pair(&self) -> Option<&LaplacianPair> {
        match self {
            Self::Laplacian { pair, .. } => Some(pair),
            _ => None,
        }
    }

    pub fn pair_mut(&mut self) -> Option<&mut LaplacianPair> {
        match self {
            Self::Laplacian { pair, .. } => Some(pair),
            _ => None,
        }
    }

    /// Regularizer-owned parameters: row source then column source.
    pub fn trainable(&self) -> Vec<&DenseMatrix> {
        match self {
            Self::Laplacian { pair, .. } => {
                let mut v = pair.rows.source.trainable();
                v.extend(pair.cols.source.trainable());
                v
            }
            _ => Vec::new(),
        }
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut DenseMatrix> {
        match self {
            Self::Laplacian { pair, .. } => {
                let mut v = pair.rows.source.trainable_mut();
                v.extend(pair.cols.source.trainable_mut());
                v
            }
            _ => Vec::new(),
        }
    }

    /// Plain penalty value for a predicted grid and the network weights.
    pub fn value<'a>(&self, grid: &DenseMatrix, weights: impl IntoIterator<Item = &'a DenseMatrix>) -> Result<f64> {
        match self {
            Self::None => Ok(0.0),
            Self::Tv { lambda } => Ok(lambda * tv_penalty(grid)),
            Self::L2 { lambda, norm } => Ok(lambda * l2_penalty(weights, *norm)?),
            Self::Laplacian {
                pair,
                lambda_r,
                lambda_c,
                ..
            } => inrr_penalty(pair, grid, *lambda_r, *lambda_c),
        }
    }

    /// Records the penalty on `graph` given the predicted grid node and the
    /// network's weight-matrix nodes.
    pub fn record(&self, graph: &mut Graph, grid: NodeId, weights: &[NodeId]) -> Result<PenaltyNodes> {
        match self {
            Self::None => Ok(PenaltyNodes {
                penalty: None,
                params: Vec::new(),
            }),
            Self::Tv { lambda } => {
                let tv = record_tv(graph, grid)?;
                Ok(PenaltyNodes {
                    penalty: Some(graph.scale(tv, *lambda)),
                    params: Vec::new(),
                })
            }
            Self::L2 { lambda, norm } => {
                let l2 = record_l2(graph, weights, *norm)?;
                Ok(PenaltyNodes {
                    penalty: Some(graph.scale(l2, *lambda)),
                    params: Vec::new(),
                })
            }
            Self::Laplacian {
                pair,
                lambda_r,
                lambda_c,
                ..
            } => {
                let nodes = pair.record_penalty(graph, grid, *lambda_r, *lambda_c)?;
                let side = |ids: Option<Vec<NodeId>>, count: usize| match ids {
                    Some(ids) => ids.into_iter().map(Some).collect::<Vec<_>>(),
                    None => vec![None; count],
                };
                let mut params = side(nodes.row_params, pair.rows.source.trainable().len());
                params.extend(side(nodes.col_params, pair.cols.source.trainable().len()));
                Ok(PenaltyNodes {
                    penalty: Some(nodes.penalty),
                    params,
                })
            }
        }
    }
}

/// Nodes of the full objective `fidelity + penalty`.
#[derive(Debug, Clone)]
pub struct ObjectiveNodes {
    pub loss: NodeId,
    pub fidelity: NodeId,
    pub penalty: Option<NodeId>,
    pub reg_params: Vec<Option<NodeId>>,
}

/// Sum of squared errors over observed pixels, `Σ_mask (X − Z)²`.
pub fn fidelity_loss(grid: &DenseMatrix, target: &MaskedImage) -> Result<f64> {
    let diff = grid.sub(&target.pixels)?;
    Ok(diff
        .as_slice()
        .iter()
        .zip(target.mask.as_slice())
        .filter(|(_, &m)| m)
        .map(|(d, _)| d * d)
        .sum())
}

pub fn record_fidelity(graph: &mut Graph, grid: NodeId, target: &MaskedImage) -> Result<NodeId> {
    let z = graph.constant(target.pixels.clone());
    let w = graph.constant(target.mask.to_matrix());
    let diff = graph.sub(grid, z)?;
    let masked = graph.mul(diff, w)?;
    let sq = graph.square(masked);
    Ok(graph.sum(sq))
}

/// Records `Σ_observed (X − Z)² + penalty(X)` on `graph`.
pub fn record_objective(
    graph: &mut Graph,
    grid: NodeId,
    weights: &[NodeId],
    target: &MaskedImage,
    reg: &RegularizerState,
) -> Result<ObjectiveNodes> {
    let fidelity = record_fidelity(graph, grid, target)?;
    let pen = reg.record(graph, grid, weights)?;
    let loss = match pen.penalty {
        Some(p) => graph.add(fidelity, p)?,
        None => fidelity,
    };
    Ok(ObjectiveNodes {
        loss,
        fidelity,
        penalty: pen.penalty,
        reg_params: pen.params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{init_network, network_grid, record_forward, NetworkSpec};
    use crate::numerics::gradcheck::max_relative_error;
    use crate::numerics::linalg::min_eigenvalue;
    use crate::rng::seeded;
    use crate::tasks::{gen_mask, MaskKind};
    use rand::Rng;

    fn random(m: usize, n: usize, seed: u64) -> DenseMatrix {
        let mut rng = seeded(seed, 0);
        DenseMatrix::from_fn(m, n, |_, _| rng.random::<f64>())
    }

    #[test]
    fn laplacian_invariants_over_many_sources() {
        for seed in 0..100u64 {
            let k = 3 + (seed as usize % 10);
            let src = if seed % 2 == 0 {
                AdjacencySource::free_random(1 + seed as usize % 4, k, 1.0, seed, 0).unwrap()
            } else {
                AdjacencySource::tiny_inr(1 + seed as usize % 4, k, vec![4, 4], 10.0, seed).unwrap()
            };
            let a = build_adjacency(&src).unwrap();
            assert!(a.as_slice().iter().all(|&v| v > 0.0));
            assert!((a.sum() - 1.0).abs() < 1e-10);
            let l = build_laplacian(&a).unwrap();
            assert!(l.symmetry_error() < 1e-12);
            assert!(l.row_sums().iter().all(|s| s.abs() < 1e-10));
            assert!(min_eigenvalue(&l).unwrap() >= -1e-8);
        }
    }

    #[test]
    fn inrr_degenerates_to_air_at_matched_adjacency() {
        for seed in 0..5 {
            let rows = AdjacencySource::tiny_inr(6, 8, vec![8, 8], 30.0, seed).unwrap();
            let cols = AdjacencySource::tiny_inr(6, 7, vec![8, 8], 30.0, seed + 50).unwrap();
            let air = LaplacianPair::new(
                AdjacencySource::Free {
                    c: rows.embedding().unwrap(),
                },
                AdjacencySource::Free {
                    c: cols.embedding().unwrap(),
                },
            );
            let inrr = LaplacianPair::new(rows, cols);
            let x = random(8, 7, 100 + seed);
            let a = inrr_penalty(&inrr, &x, 0.5, 0.25).unwrap();
            let b = inrr_penalty(&air, &x, 0.5, 0.25).unwrap();
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn state_value_matches_recorded_value() {
        let x = random(6, 5, 1);
        let w = [random(3, 2, 2), random(1, 3, 3)];
        let pair = LaplacianPair::new(
            AdjacencySource::free_random(2, 6, 0.5, 4, 0).unwrap(),
            AdjacencySource::free_random(2, 5, 0.5, 5, 0).unwrap(),
        );
        let states = [
            RegularizerState::None,
            RegularizerState::Tv { lambda: 0.3 },
            RegularizerState::L2 {
                lambda: 0.2,
                norm: WeightNorm::Frobenius,
            },
            RegularizerState::Laplacian {
                kind: LaplacianKind::Air,
                pair,
                lambda_r: 0.1,
                lambda_c: 0.4,
            },
        ];
        for s in &states {
            s.validate().unwrap();
            let mut g = Graph::new();
            let xid = g.constant(x.clone());
            let wids: Vec<NodeId> = w.iter().map(|m| g.constant(m.clone())).collect();
            let nodes = s.record(&mut g, xid, &wids).unwrap();
            let recorded = nodes.penalty.map(|p| g.scalar(p)).unwrap_or(0.0);
            let plain = s.value(&x, w.iter()).unwrap();
            assert!((recorded - plain).abs() < 1e-12, "{}", s.name());
            assert_eq!(nodes.params.len(), s.trainable().len());
        }
    }

    #[test]
    fn negative_lambda_rejected() {
        assert!(RegularizerState::Tv { lambda: -1.0 }.validate().is_err());
        assert!(RegularizerState::L2 {
            lambda: f64::NAN,
            norm: WeightNorm::Spectral
        }
        .validate()
        .is_err());
    }

    #[test]
    fn frozen_pair_reports_none_slots() {
        let mut s = RegularizerState::Laplacian {
            kind: LaplacianKind::Inrr,
            pair: LaplacianPair::new(
                AdjacencySource::tiny_inr(2, 4, vec![3], 30.0, 1).unwrap(),
                AdjacencySource::tiny_inr(2, 4, vec![3], 30.0, 2).unwrap(),
            ),
            lambda_r: 1.0,
            lambda_c: 1.0,
        };
        s.pair_mut().unwrap().freeze(10).unwrap();
        let mut g = Graph::new();
        let x = g.parameter(random(4, 4, 3));
        let nodes = s.record(&mut g, x, &[]).unwrap();
        assert_eq!(nodes.params.len(), s.trainable().len());
        assert!(nodes.params.iter().all(Option::is_none));
    }

    #[test]
    fn fidelity_ignores_unobserved_pixels() {
        let target = random(5, 5, 9);
        let mask = gen_mask(&MaskKind::Random { p: 0.5 }, 5, 5, 1).unwrap();
        let img = MaskedImage::new(target.clone(), mask.clone(), "t").unwrap();
        let mut pred = target.clone();
        for i in 0..5 {
            for j in 0..5 {
                if !mask.get(i, j) {
                    pred.as_mut_slice()[i * 5 + j] += 10.0;
                }
            }
        }
        assert_eq!(fidelity_loss(&pred, &img).unwrap(), 0.0);
        let mut g = Graph::new();
        let p = g.constant(pred);
        let f = record_fidelity(&mut g, p, &img).unwrap();
        assert_eq!(g.scalar(f), 0.0);
    }

    /// Gradient of the full objective w.r.t. network, row and column parameters.
    #[test]
    fn full_objective_gradient_matches_finite_differences() {
        let (m, n) = (6, 5);
        let coords = network_grid(m, n);
        for (seed, kind) in [
            (0u64, LaplacianKind::Inrr),
            (1, LaplacianKind::Air),
            (2, LaplacianKind::Inrr),
        ] {
            let spec = NetworkSpec::siren(2, 1, vec![8, 8], 3.0);
            let net = init_network(&spec, seed).unwrap();
            let pair = match kind {
                LaplacianKind::Inrr => LaplacianPair::new(
                    AdjacencySource::tiny_inr(3, m, vec![5], 3.0, seed + 10).unwrap(),
                    AdjacencySource::tiny_inr(3, n, vec![5], 3.0, seed + 20).unwrap(),
                ),
                LaplacianKind::Air => LaplacianPair::new(
                    AdjacencySource::free_random(3, m, 0.5, seed, 1).unwrap(),
                    AdjacencySource::free_random(3, n, 0.5, seed, 2).unwrap(),
                ),
            };
            let reg = RegularizerState::Laplacian {
                kind,
                pair,
                lambda_r: 0.7,
                lambda_c: 0.9,
            };
            let mask = gen_mask(&MaskKind::Random { p: 0.3 }, m, n, seed).unwrap();
            let target = MaskedImage::new(random(m, n, 40 + seed), mask, "t").unwrap();
            let n_net = net.trainable().len();

            let eval = |xs: &[DenseMatrix]| -> (f64, Vec<DenseMatrix>) {
                let mut net = net.clone();
                let mut reg = reg.clone();
                for (d, s) in net.trainable_mut().into_iter().zip(xs) {
                    *d = s.clone();
                }
                for (d, s) in reg.trainable_mut().into_iter().zip(&xs[n_net..]) {
                    *d = s.clone();
                }
                let mut g = Graph::new();
                let out = record_forward(&mut g, &spec, &net, &coords, true).unwrap();
                let grid = g.reshape(out.output, m, n).unwrap();
                let obj = record_objective(&mut g, grid, &[], &target, &reg).unwrap();
                let grads = g.backward(obj.loss).unwrap();
                let ids = out
                    .params
                    .iter()
                    .copied()
                    .chain(obj.reg_params.iter().map(|p| p.unwrap()));
                let gs = ids.map(|id| grads.get(id).unwrap().clone()).collect();
                (g.scalar(obj.loss), gs)
            };
            let mut flat: Vec<DenseMatrix> = net.trainable().into_iter().cloned().collect();
            flat.extend(reg.trainable().into_iter().cloned());
            let (_, analytic) = eval(&flat);
            let err = max_relative_error(&flat, &analytic, 1e-5, 1e-8, |xs| eval(xs).0);
            assert!(err < 1e-5, "{kind:?} seed {seed}: {err}");
        }
    }
}
