use rand::RngCore;

use crate::error::{Error, Result};
use crate::harness::config::{ModelFamily, ModelSection, RegularizerKind, RegularizerSection};
use crate::models::{
    dmf_product, init_dmf, init_network, network_grid, record_dmf, record_forward, DmfSpec, Neighborhood, NetworkSpec,
    ParamSet,
};
use crate::numerics::{DenseMatrix, Graph, NodeId};
use crate::regularizers::{AdjacencySource, LaplacianKind, LaplacianPair, RegularizerState};
use crate::rng::{seeded, streams};
use crate::tasks::MaskedImage;

/// The trainable representation of an `m × n` image.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    /// Coordinate network evaluated on a fixed per-pixel input matrix.
    Network {
        spec: NetworkSpec,
        params: ParamSet,
        input: DenseMatrix,
        shape: (usize, usize),
    },
    Dmf {
        factors: Vec<DenseMatrix>,
    },
}

/// Nodes of a recorded model evaluation.
#[derive(Debug, Clone)]
pub struct ModelNodes {
    /// `m × n` predicted grid.
    pub grid: NodeId,
    /// In [`Model::trainable`] order.
    pub params: Vec<NodeId>,
    /// Weight matrices only (for weight-norm penalties).
    pub weights: Vec<NodeId>,
}

/// Seed for an auxiliary component derived from the experiment seed.
pub fn derived_seed(seed: u64, stream: u64) -> u64 {
    seeded(seed, stream).next_u64()
}

impl Model {
    pub fn build(section: &ModelSection, target: &MaskedImage, seed: u64) -> Result<Self> {
        let (m, n) = target.shape();
        match section.network_spec()? {
            Some(spec) => {
                let input = match section.family {
                    ModelFamily::Inrz => {
                        let hood = Neighborhood { patch: section.patch };
                        hood.check(&spec)?;
                        hood.grid_inputs(target)
                    }
                    _ => network_grid(m, n),
                };
                Self::network(spec, input, (m, n), seed)
            }
            None => {
                let spec = DmfSpec::chain(m, n, section.depth, section.init_std);
                Ok(Self::Dmf {
                    factors: init_dmf(&spec, derived_seed(seed, streams::DMF))?,
                })
            }
        }
    }

    pub fn network(spec: NetworkSpec, input: DenseMatrix, shape: (usize, usize), seed: u64) -> Result<Self> {
        if input.rows() != shape.0 * shape.1 {
            return Err(Error::Dimension {
                op: "network input grid",
                left: input.shape(),
                right: shape,
            });
        }
        let params = init_network(&spec, seed)?;
        Ok(Self::Network {
            spec,
            params,
            input,
            shape,
        })
    }

    pub fn trainable(&self) -> Vec<&DenseMatrix> {
        match self {
            Self::Network { params, .. } => params.trainable(),
            Self::Dmf { factors } => factors.iter().collect(),
        }
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut DenseMatrix> {
        match self {
            Self::Network { params, .. } => params.trainable_mut(),
            Self::Dmf { factors } => factors.iter_mut().collect(),
        }
    }

    pub fn record(&self, graph: &mut Graph) -> Result<ModelNodes> {
        match self {
            Self::Network {
                spec,
                params,
                input,
                shape,
            } => {
                let nodes = record_forward(graph, spec, params, input, true)?;
                let grid = graph.reshape(nodes.output, shape.0, shape.1)?;
                let mut weights = Vec::new();
                let mut ids = nodes.params.iter();
                for layer in &params.layers {
                    weights.push(*ids.next().expect("weight id"));
                    if layer.bias.is_some() {
                        ids.next();
                    }
                }
                Ok(ModelNodes {
                    grid,
                    params: nodes.params,
                    weights,
                })
            }
            Self::Dmf { factors } => {
                let (grid, params) = record_dmf(graph, factors)?;
                Ok(ModelNodes {
                    grid,
                    params,
                    weights: Vec::new(),
                })
            }
        }
    }

    pub fn predict(&self) -> Result<DenseMatrix> {
        match self {
            Self::Dmf { factors } => dmf_product(factors),
            Self::Network { .. } => {
                let mut g = Graph::new();
                let nodes = self.record(&mut g)?;
                Ok(g.value(nodes.grid).clone())
            }
        }
    }
}

/// Builds the regularizer for an `m × n` image.
pub fn build_regularizer(section: &RegularizerSection, shape: (usize, usize), seed: u64) -> Result<RegularizerState> {
    let (m, n) = shape;
    let rank = section.rank.unwrap_or(m.max(n));
    let state = match section.kind {
        RegularizerKind::None => RegularizerState::None,
        RegularizerKind::Tv => RegularizerState::Tv { lambda: section.lambda },
        RegularizerKind::L2 => RegularizerState::L2 {
            lambda: section.lambda,
            norm: section.norm,
        },
        RegularizerKind::Air => RegularizerState::Laplacian {
            kind: LaplacianKind::Air,
            pair: LaplacianPair::new(
                AdjacencySource::free_random(rank, m, section.air_init_std, seed, streams::ADJACENCY)?,
                AdjacencySource::free_random(rank, n, section.air_init_std, seed, streams::ADJACENCY + 16)?,
            ),
            lambda_r: section.lambda_r,
            lambda_c: section.lambda_c,
        },
        RegularizerKind::Inrr => {
            let tiny = |samples, stream| {
                AdjacencySource::tiny_inr(
                    rank,
                    samples,
                    section.tiny_hidden.clone(),
                    section.tiny_omega0,
                    derived_seed(seed, stream),
                )
            };
            RegularizerState::Laplacian {
                kind: LaplacianKind::Inrr,
                pair: LaplacianPair::new(tiny(m, streams::ROW_INR)?, tiny(n, streams::COL_INR)?),
                lambda_r: section.lambda_r,
                lambda_c: section.lambda_c,
            }
        }
    };
    state.validate()?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::forward;

    fn image(m: usize, n: usize) -> MaskedImage {
        MaskedImage::fully_observed(DenseMatrix::from_fn(m, n, |i, j| ((i + j) % 3) as f64 / 2.0), "t").unwrap()
    }

    #[test]
    fn network_grid_matches_plain_forward() {
        let section = ModelSection::siren(vec![6, 6], 10.0);
        let model = Model::build(&section, &image(4, 5), 3).unwrap();
        let Model::Network { spec, params, .. } = &model else {
            unreachable!()
        };
        let flat = forward(spec, params, &network_grid(4, 5)).unwrap();
        let grid = model.predict().unwrap();
        assert_eq!(grid.shape(), (4, 5));
        assert_eq!(grid.as_slice(), flat.as_slice());
    }

    #[test]
    fn weight_ids_skip_biases() {
        let model = Model::build(&ModelSection::siren(vec![3, 3], 10.0), &image(3, 3), 1).unwrap();
        let mut g = Graph::new();
        let nodes = model.record(&mut g).unwrap();
        assert_eq!(nodes.params.len(), 6);
        assert_eq!(nodes.weights, vec![nodes.params[0], nodes.params[2], nodes.params[4]]);
    }

    #[test]
    fn dmf_and_inrz_build() {
        let mut section = ModelSection::siren(vec![4], 10.0);
        section.family = ModelFamily::Dmf;
        section.depth = 3;
        let dmf = Model::build(&section, &image(5, 4), 0).unwrap();
        assert_eq!(dmf.trainable().len(), 3);
        assert_eq!(dmf.predict().unwrap().shape(), (5, 4));
        section.family = ModelFamily::Inrz;
        let inrz = Model::build(&section, &image(5, 4), 0).unwrap();
        assert_eq!(inrz.predict().unwrap().shape(), (5, 4));
    }

    #[test]
    fn regularizer_shapes_follow_the_image() {
        let mut section = RegularizerSection::of(RegularizerKind::Inrr);
        section.tiny_hidden = vec![4];
        let reg = build_regularizer(&section, (6, 4), 0).unwrap();
        let pair = reg.pair().unwrap();
        assert_eq!(pair.grid_shape(), (6, 4));
        assert_eq!(pair.rows.source.rank(), 6);
        section.kind = RegularizerKind::Air;
        section.rank = Some(2);
        let reg = build_regularizer(&section, (6, 4), 0).unwrap();
        assert_eq!(reg.pair().unwrap().cols.source.rank(), 2);
    }
}
