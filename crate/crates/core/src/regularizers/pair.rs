//! Row/column Laplacian pair and the learned Dirichlet-energy penalty
//! `λ_r tr(Xᵀ L_r X) + λ_c tr(X L_c Xᵀ)`.

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Graph, NodeId};
use crate::regularizers::adjacency::{
    build_adjacency, build_laplacian, record_adjacency, record_laplacian, AdjacencySource,
};
use crate::regularizers::dirichlet::{dirichlet_energy, record_dirichlet};

/// One side (rows or columns) of a [`LaplacianPair`].
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianSide {
    pub source: AdjacencySource,
    frozen: Option<DenseMatrix>,
}

impl LaplacianSide {
    pub fn new(source: AdjacencySource) -> Self {
        Self { source, frozen: None }
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen.is_some()
    }

    /// Current `L`: the frozen value if frozen, otherwise rebuilt from the source.
    pub fn laplacian(&self) -> Result<DenseMatrix> {
        match &self.frozen {
            Some(l) => Ok(l.clone()),
            None => build_laplacian(&build_adjacency(&self.source)?),
        }
    }

    /// Current `A`. Frozen sources are never updated, so rebuilding from the
    /// source reproduces the adjacency at freeze time.
    pub fn adjacency(&self) -> Result<DenseMatrix> {
        build_adjacency(&self.source)
    }

    /// Records `L`; returns the node and, unless frozen, the source's
    /// trainable parameter ids.
    pub fn record(&self, graph: &mut Graph) -> Result<(NodeId, Option<Vec<NodeId>>)> {
        match &self.frozen {
            Some(l) => Ok((graph.constant(l.clone()), None)),
            None => {
                let (a, ids) = record_adjacency(graph, &self.source, true)?;
                Ok((record_laplacian(graph, a)?, Some(ids)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianPair {
    pub rows: LaplacianSide,
    pub cols: LaplacianSide,
    freeze_step: Option<usize>,
}

/// Node ids produced by [`LaplacianPair::record_penalty`].
#[derive(Debug, Clone)]
pub struct PairNodes {
    pub penalty: NodeId,
    pub row_laplacian: NodeId,
    pub col_laplacian: NodeId,
    /// `None` when the side is frozen.
    pub row_params: Option<Vec<NodeId>>,
    pub col_params: Option<Vec<NodeId>>,
}

impl LaplacianPair {
    pub fn new(rows: AdjacencySource, cols: AdjacencySource) -> Self {
        Self {
            rows: LaplacianSide::new(rows),
            cols: LaplacianSide::new(cols),
            freeze_step: None,
        }
    }

    /// `(m', n')` grid shape the pair acts on.
    pub fn grid_shape(&self) -> (usize, usize) {
        (self.rows.source.samples(), self.cols.source.samples())
    }

    pub fn freeze_step(&self) -> Option<usize> {
        self.freeze_step
    }

    pub fn is_frozen(&self) -> bool {
        self.freeze_step.is_some()
    }

    /// Holds both Laplacians at their current values from `step` on. Frozen
    /// sources receive no further gradient.
    pub fn freeze(&mut self, step: usize) -> Result<()> {
        if self.freeze_step.is_some() {
            return Err(Error::contract("Laplacian pair is already frozen"));
        }
        self.rows.frozen = Some(self.rows.laplacian()?);
        self.cols.frozen = Some(self.cols.laplacian()?);
        self.freeze_step = Some(step);
        Ok(())
    }

    fn check_grid(&self, shape: (usize, usize)) -> Result<()> {
        if shape != self.grid_shape() {
            return Err(Error::Dimension {
                op: "laplacian penalty grid",
                left: self.grid_shape(),
                right: shape,
            });
        }
        Ok(())
    }

    /// Records `λ_r tr(Xᵀ L_r X) + λ_c tr(X L_c Xᵀ)` for an `m' × n'` grid node.
    pub fn record_penalty(&self, graph: &mut Graph, grid: NodeId, lambda_r: f64, lambda_c: f64) -> Result<PairNodes> {
        self.check_grid(graph.value(grid).shape())?;
        let (lr, row_params) = self.rows.record(graph)?;
        let (lc, col_params) = self.cols.record(graph)?;
        let row_energy = record_dirichlet(graph, lr, grid)?;
        let gt = graph.transpose(grid);
        let col_energy = record_dirichlet(graph, lc, gt)?;
        let a = graph.scale(row_energy, lambda_r);
        let b = graph.scale(col_energy, lambda_c);
        let penalty = graph.add(a, b)?;
        Ok(PairNodes {
            penalty,
            row_laplacian: lr,
            col_laplacian: lc,
            row_params,
            col_params,
        })
    }
}

/// Plain evaluation of the pair penalty on an `m' × n'` grid.
pub fn inrr_penalty(pair: &LaplacianPair, grid: &DenseMatrix, lambda_r: f64, lambda_c: f64) -> Result<f64> {
    pair.check_grid(grid.shape())?;
    let row = dirichlet_energy(&pair.rows.laplacian()?, grid)?;
    let col = dirichlet_energy(&pair.cols.laplacian()?, &grid.transpose())?;
    Ok(lambda_r * row + lambda_c * col)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::max_relative_error;
    use crate::rng::seeded;
    use rand::Rng;

    fn pair(m: usize, n: usize, seed: u64) -> LaplacianPair {
        LaplacianPair::new(
            AdjacencySource::tiny_inr(4, m, vec![6, 6], 3.0, seed).unwrap(),
            AdjacencySource::tiny_inr(4, n, vec![6, 6], 3.0, seed + 100).unwrap(),
        )
    }

    fn random(m: usize, n: usize, seed: u64) -> DenseMatrix {
        let mut rng = seeded(seed, 0);
        DenseMatrix::from_fn(m, n, |_, _| rng.random::<f64>())
    }

    #[test]
    fn constant_image_has_zero_penalty() {
        let p = pair(6, 5, 1);
        let v = inrr_penalty(&p, &DenseMatrix::filled(6, 5, 0.4), 1.0, 1.0).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn zero_weights_zero_penalty_and_gradient() {
        let p = pair(6, 5, 2);
        let x = random(6, 5, 3);
        let mut g = Graph::new();
        let id = g.parameter(x.clone());
        let nodes = p.record_penalty(&mut g, id, 0.0, 0.0).unwrap();
        assert_eq!(g.scalar(nodes.penalty), 0.0);
        let grads = g.backward(nodes.penalty).unwrap();
        for pid in nodes
            .row_params
            .unwrap()
            .iter()
            .chain(nodes.col_params.as_ref().unwrap())
        {
            assert_eq!(grads.get(*pid).unwrap().max_abs(), 0.0);
        }
        assert_eq!(grads.get(id).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn penalty_is_two_dirichlet_energies() {
        let p = pair(7, 4, 4);
        let x = random(7, 4, 5);
        let direct = 0.3 * dirichlet_energy(&p.rows.laplacian().unwrap(), &x).unwrap()
            + 0.7 * dirichlet_energy(&p.cols.laplacian().unwrap(), &x.transpose()).unwrap();
        assert!((inrr_penalty(&p, &x, 0.3, 0.7).unwrap() - direct).abs() < 1e-14);
        let mut g = Graph::new();
        let id = g.constant(x);
        let nodes = p.record_penalty(&mut g, id, 0.3, 0.7).unwrap();
        assert!((g.scalar(nodes.penalty) - direct).abs() < 1e-14);
    }

    #[test]
    fn grid_mismatch() {
        let p = pair(6, 5, 1);
        assert!(matches!(
            inrr_penalty(&p, &DenseMatrix::zeros(5, 6), 1.0, 1.0),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn freezing_holds_values_and_cuts_gradients() {
        let mut p = pair(5, 5, 6);
        let before = p.rows.laplacian().unwrap();
        p.freeze(0).unwrap();
        assert!(p.is_frozen());
        assert_eq!(p.freeze_step(), Some(0));
        // perturbing the source no longer changes L
        for w in p.rows.source.trainable_mut() {
            w.as_mut_slice().iter_mut().for_each(|v| *v += 0.1);
        }
        assert_eq!(p.rows.laplacian().unwrap(), before);
        let mut g = Graph::new();
        let id = g.parameter(random(5, 5, 7));
        let nodes = p.record_penalty(&mut g, id, 1.0, 1.0).unwrap();
        assert!(nodes.row_params.is_none() && nodes.col_params.is_none());
        assert!(matches!(p.freeze(3), Err(Error::Contract(_))));
    }

    #[test]
    fn frozen_uniform_graph_is_a_fixed_smoother() {
        let uniform = |k: usize| AdjacencySource::Free {
            c: DenseMatrix::zeros(2, k),
        };
        let mut p = LaplacianPair::new(uniform(4), uniform(3));
        p.freeze(0).unwrap();
        let x = random(4, 3, 8);
        // uniform A = 1/m'^2: tr(XᵀLX) = (1/m') Σ_i ‖X_i − mean‖²
        let mean: Vec<f64> = (0..3).map(|j| (0..4).map(|i| x[(i, j)]).sum::<f64>() / 4.0).collect();
        let spread: f64 = (0..4)
            .map(|i| (0..3).map(|j| (x[(i, j)] - mean[j]).powi(2)).sum::<f64>())
            .sum::<f64>()
            / 4.0;
        let v = inrr_penalty(&p, &x, 1.0, 0.0).unwrap();
        assert!((v - spread).abs() < 1e-14);
    }

    #[test]
    fn full_penalty_gradient_matches_finite_differences() {
        for seed in 0..3 {
            let (m, n) = (6, 5);
            let p = pair(m, n, 20 + seed);
            let x = random(m, n, 30 + seed);
            let eval = |xs: &[DenseMatrix]| -> (f64, Vec<DenseMatrix>) {
                let mut q = p.clone();
                let k_rows = q.rows.source.trainable().len();
                for (dst, src) in q.rows.source.trainable_mut().into_iter().zip(&xs[1..]) {
                    *dst = src.clone();
                }
                for (dst, src) in q.cols.source.trainable_mut().into_iter().zip(&xs[1 + k_rows..]) {
                    *dst = src.clone();
                }
                let mut g = Graph::new();
                let id = g.parameter(xs[0].clone());
                let nodes = q.record_penalty(&mut g, id, 0.8, 1.3).unwrap();
                let grads = g.backward(nodes.penalty).unwrap();
                let mut out = vec![grads.get(id).unwrap().clone()];
                for pid in nodes
                    .row_params
                    .unwrap()
                    .iter()
                    .chain(nodes.col_params.as_ref().unwrap())
                {
                    out.push(grads.get(*pid).unwrap().clone());
                }
                (g.scalar(nodes.penalty), out)
            };
            let mut flat = vec![x];
            flat.extend(p.rows.source.trainable().into_iter().cloned());
            flat.extend(p.cols.source.trainable().into_iter().cloned());
            let (_, analytic) = eval(&flat);
            let err = max_relative_error(&flat, &analytic, 1e-5, 1e-8, |xs| eval(xs).0);
            assert!(err < 1e-5, "seed {seed}: {err}");
        }
    }
}
