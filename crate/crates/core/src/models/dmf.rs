//! Deep matrix factorization `X = W_1 W_2 ⋯ W_L`.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Graph, NodeId};
use crate::rng::{seeded, streams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmfSpec {
    /// Factor shapes in multiplication order.
    pub shapes: Vec<(usize, usize)>,
    /// Standard deviation of the i.i.d. Gaussian factor entries.
    pub init_std: f64,
}

impl DmfSpec {
    /// `depth` factors whose product is `m × n`; inner dimensions are `m`.
    pub fn chain(m: usize, n: usize, depth: usize, init_std: f64) -> Self {
        let shapes = match depth {
            0 => Vec::new(),
            1 => vec![(m, n)],
            _ => {
                let mut s = vec![(m, m); depth - 1];
                s.push((m, n));
                s
            }
        };
        Self { shapes, init_std }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shapes.is_empty() {
            return Err(Error::contract("DMF needs at least one factor"));
        }
        for w in self.shapes.windows(2) {
            if w[0].1 != w[1].0 {
                return Err(Error::Dimension {
                    op: "dmf factors",
                    left: w[0],
                    right: w[1],
                });
            }
        }
        Ok(())
    }

    pub fn output_shape(&self) -> (usize, usize) {
        (self.shapes[0].0, self.shapes[self.shapes.len() - 1].1)
    }
}

pub fn init_dmf(spec: &DmfSpec, seed: u64) -> Result<Vec<DenseMatrix>> {
    spec.validate()?;
    let mut rng = seeded(seed, streams::DMF);
    let normal = Normal::new(0.0, spec.init_std.max(0.0))
        .map_err(|e| Error::contract(format!("invalid DMF init scale: {e}")))?;
    Ok(spec
        .shapes
        .iter()
        .map(|&(r, c)| DenseMatrix::from_fn(r, c, |_, _| normal.sample(&mut rng)))
        .collect())
}

/// Ordered product of the factors.
pub fn dmf_product(factors: &[DenseMatrix]) -> Result<DenseMatrix> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| Error::contract("DMF product of zero factors"))?;
    rest.iter().try_fold(first.clone(), |acc, f| acc.matmul(f))
}

/// Records the product on `graph` with every factor trainable.
pub fn record_dmf(graph: &mut Graph, factors: &[DenseMatrix]) -> Result<(NodeId, Vec<NodeId>)> {
    let ids: Vec<NodeId> = factors.iter().map(|f| graph.parameter(f.clone())).collect();
    let (first, rest) = ids
        .split_first()
        .ok_or_else(|| Error::contract("DMF product of zero factors"))?;
    let mut acc = *first;
    for id in rest {
        acc = graph.matmul(acc, *id)?;
    }
    Ok((acc, ids))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::max_relative_error;

    #[test]
    fn single_factor_is_itself() {
        let f = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(dmf_product(std::slice::from_ref(&f)).unwrap(), f);
    }

    #[test]
    fn zero_factor_zeroes_product() {
        let spec = DmfSpec::chain(4, 4, 3, 1.0);
        let mut factors = init_dmf(&spec, 1).unwrap();
        factors[1] = DenseMatrix::zeros(4, 4);
        assert_eq!(dmf_product(&factors).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn three_factors_match_chained_loops() {
        let factors = init_dmf(&DmfSpec::chain(4, 4, 3, 1.0), 2).unwrap();
        let product = dmf_product(&factors).unwrap();
        let mut expect = DenseMatrix::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                let mut s = 0.0;
                for k in 0..4 {
                    for l in 0..4 {
                        s += factors[0][(i, k)] * factors[1][(k, l)] * factors[2][(l, j)];
                    }
                }
                expect[(i, j)] = s;
            }
        }
        assert!(product.sub(&expect).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn nonconforming_shapes_rejected() {
        let spec = DmfSpec {
            shapes: vec![(3, 4), (5, 2)],
            init_std: 0.1,
        };
        assert!(matches!(spec.validate(), Err(Error::Dimension { .. })));
        assert!(dmf_product(&[DenseMatrix::zeros(3, 4), DenseMatrix::zeros(5, 2)]).is_err());
    }

    #[test]
    fn factor_gradients_match_finite_differences() {
        let spec = DmfSpec::chain(5, 4, 3, 0.7);
        let target = DenseMatrix::from_fn(5, 4, |i, j| ((i * 4 + j) as f64).sin());
        for seed in 0..3 {
            let factors = init_dmf(&spec, seed).unwrap();
            let loss = |fs: &[DenseMatrix]| -> (f64, Vec<DenseMatrix>) {
                let mut g = Graph::new();
                let (x, ids) = record_dmf(&mut g, fs).unwrap();
                let t = g.constant(target.clone());
                let d = g.sub(x, t).unwrap();
                let sq = g.square(d);
                let s = g.sum(sq);
                let grads = g.backward(s).unwrap();
                (
                    g.scalar(s),
                    ids.iter().map(|id| grads.get(*id).unwrap().clone()).collect(),
                )
            };
            let (_, analytic) = loss(&factors);
            let err = max_relative_error(&factors, &analytic, 1e-5, 1e-6, |fs| loss(fs).0);
            assert!(err < 1e-5, "relative error {err}");
        }
    }
}
