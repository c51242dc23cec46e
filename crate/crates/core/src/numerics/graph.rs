//! Matrix-valued reverse-mode automatic differentiation.
//!
//! A [`Graph`] is an append-only list of nodes. Every node stores its forward
//! value; construction order is a valid topological order, so the backward
//! pass is a single reverse sweep. Graphs are rebuilt for every forward pass.

use crate::error::{Error, Result};
use crate::numerics::linalg::top_singular_triplet;
use crate::numerics::matrix::gemm;
use crate::numerics::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    /// `a · bᵀ`
    MatMulNt(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// Adds a `1 × c` row to every row of a `r × c` node.
    AddRow(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    Sin(NodeId),
    Relu(NodeId),
    Exp(NodeId),
    Abs(NodeId),
    Square(NodeId),
    Sqrt(NodeId),
    Sum(NodeId),
    Transpose(NodeId),
    Reshape(NodeId),
    RowSums(NodeId),
    Diag(NodeId),
    /// Divides a node by a `1 × 1` node.
    DivScalar(NodeId, NodeId),
    ClampMax(NodeId, f64),
    SpectralNorm {
        input: NodeId,
        u: Vec<f64>,
        v: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: DenseMatrix,
    trainable: bool,
    needs_grad: bool,
}

/// Computation graph recorded during one forward pass.
#[derive(Debug, Default, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Adjoints of the trainable leaves after [`Graph::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    adjoints: Vec<Option<DenseMatrix>>,
}

impl Gradients {
    /// Adjoint of a trainable leaf. `None` for nodes that are not trainable
    /// leaves.
    pub fn get(&self, id: NodeId) -> Option<&DenseMatrix> {
        self.adjoints.get(id.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, id: NodeId) -> Option<DenseMatrix> {
        self.adjoints.get_mut(id.0).and_then(Option::take)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &DenseMatrix {
        &self.nodes[id.0].value
    }

    /// Scalar value of a `1 × 1` node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value.as_slice()[0]
    }

    /// Trainable leaf.
    pub fn parameter(&mut self, value: DenseMatrix) -> NodeId {
        self.push_leaf(value, true)
    }

    /// Leaf that receives no adjoint.
    pub fn constant(&mut self, value: DenseMatrix) -> NodeId {
        self.push_leaf(value, false)
    }

    fn push_leaf(&mut self, value: DenseMatrix, trainable: bool) -> NodeId {
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
            trainable,
            needs_grad: trainable,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn push(&mut self, op: Op, value: DenseMatrix, inputs: &[NodeId]) -> NodeId {
        let needs_grad = inputs.iter().any(|i| self.nodes[i.0].needs_grad);
        self.nodes.push(Node {
            op,
            value,
            trainable: false,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = gemm(self.value(a), false, self.value(b), false)?;
        Ok(self.push(Op::MatMul(a, b), v, &[a, b]))
    }

    /// `a · bᵀ` without materializing the transpose.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = gemm(self.value(a), false, self.value(b), true)?;
        Ok(self.push(Op::MatMulNt(a, b), v, &[a, b]))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(Op::Add(a, b), v, &[a, b]))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).sub(self.value(b))?;
        Ok(self.push(Op::Sub(a, b), v, &[a, b]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).hadamard(self.value(b))?;
        Ok(self.push(Op::Mul(a, b), v, &[a, b]))
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let (r, c) = self.value(a).shape();
        let bias = self.value(row);
        if bias.shape() != (1, c) {
            return Err(Error::Dimension {
                op: "add_row",
                left: (r, c),
                right: bias.shape(),
            });
        }
        let mut v = self.value(a).clone();
        let b = bias.as_slice().to_vec();
        for chunk in v.as_mut_slice().chunks_exact_mut(c.max(1)) {
            for (x, y) in chunk.iter_mut().zip(&b) {
                *x += y;
            }
        }
        Ok(self.push(Op::AddRow(a, row), v, &[a, row]))
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let v = self.value(a).scale(s);
        self.push(Op::Scale(a, s), v, &[a])
    }

    pub fn add_scalar(&mut self, a: NodeId, s: f64) -> NodeId {
        let v = self.value(a).map(|x| x + s);
        self.push(Op::AddScalar(a), v, &[a])
    }

    pub fn sin(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::sin);
        self.push(Op::Sin(a), v, &[a])
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(Op::Relu(a), v, &[a])
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::exp);
        self.push(Op::Exp(a), v, &[a])
    }

    pub fn abs(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::abs);
        self.push(Op::Abs(a), v, &[a])
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x * x);
        self.push(Op::Square(a), v, &[a])
    }

    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::sqrt);
        self.push(Op::Sqrt(a), v, &[a])
    }

    /// Sum of all entries as a `1 × 1` node.
    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let v = DenseMatrix::filled(1, 1, self.value(a).sum());
        self.push(Op::Sum(a), v, &[a])
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).transpose();
        self.push(Op::Transpose(a), v, &[a])
    }

    pub fn reshape(&mut self, a: NodeId, rows: usize, cols: usize) -> Result<NodeId> {
        let v = self.value(a).reshape(rows, cols)?;
        Ok(self.push(Op::Reshape(a), v, &[a]))
    }

    /// `r × c` → `r × 1` column of row sums.
    pub fn row_sums(&mut self, a: NodeId) -> NodeId {
        let v = DenseMatrix::column(&self.value(a).row_sums());
        self.push(Op::RowSums(a), v, &[a])
    }

    /// `n × 1` column → `n × n` diagonal matrix.
    pub fn diag(&mut self, a: NodeId) -> Result<NodeId> {
        let col = self.value(a);
        if col.cols() != 1 {
            return Err(Error::Dimension {
                op: "diag",
                left: col.shape(),
                right: (col.rows(), 1),
            });
        }
        let v = DenseMatrix::diag(col.as_slice());
        Ok(self.push(Op::Diag(a), v, &[a]))
    }

    pub fn div_scalar(&mut self, a: NodeId, s: NodeId) -> Result<NodeId> {
        let denom = self.value(s);
        if denom.shape() != (1, 1) {
            return Err(Error::Dimension {
                op: "div_scalar",
                left: self.value(a).shape(),
                right: denom.shape(),
            });
        }
        let d = denom.as_slice()[0];
        let v = self.value(a).map(|x| x / d);
        Ok(self.push(Op::DivScalar(a, s), v, &[a, s]))
    }

    /// `min(a, limit)` elementwise; clamped entries pass no gradient.
    pub fn clamp_max(&mut self, a: NodeId, limit: f64) -> NodeId {
        let v = self.value(a).map(|x| x.min(limit));
        self.push(Op::ClampMax(a, limit), v, &[a])
    }

    /// Largest singular value as a `1 × 1` node.
    pub fn spectral_norm(&mut self, a: NodeId) -> Result<NodeId> {
        let (sigma, u, v) = top_singular_triplet(self.value(a))?;
        Ok(self.push(
            Op::SpectralNorm { input: a, u, v },
            DenseMatrix::filled(1, 1, sigma),
            &[a],
        ))
    }

    /// Reverse sweep from a scalar root. Values are left untouched.
    pub fn backward(&self, root: NodeId) -> Result<Gradients> {
        if self.value(root).shape() != (1, 1) {
            return Err(Error::contract(format!(
                "backward root must be 1x1, got {:?}",
                self.value(root).shape()
            )));
        }
        let n = self.nodes.len();
        let mut adj: Vec<Option<DenseMatrix>> = vec![None; n];
        adj[root.0] = Some(DenseMatrix::filled(1, 1, 1.0));

        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = adj[idx].take() else { continue };
            self.propagate(node, &g, &mut adj)?;
            adj[idx] = Some(g);
        }

        let adjoints = self
            .nodes
            .iter()
            .zip(adj)
            .map(|(node, a)| {
                if node.trainable {
                    Some(a.unwrap_or_else(|| DenseMatrix::zeros(node.value.rows(), node.value.cols())))
                } else {
                    None
                }
            })
            .collect();
        Ok(Gradients { adjoints })
    }

    fn propagate(&self, node: &Node, g: &DenseMatrix, adj: &mut [Option<DenseMatrix>]) -> Result<()> {
        let val = |id: NodeId| &self.nodes[id.0].value;
        let wants = |id: NodeId| self.nodes[id.0].needs_grad;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if wants(*a) {
                    accumulate(adj, *a, gemm(g, false, val(*b), true)?)?;
                }
                if wants(*b) {
                    accumulate(adj, *b, gemm(val(*a), true, g, false)?)?;
                }
            }
            Op::MatMulNt(a, b) => {
                if wants(*a) {
                    accumulate(adj, *a, gemm(g, false, val(*b), false)?)?;
                }
                if wants(*b) {
                    accumulate(adj, *b, gemm(g, true, val(*a), false)?)?;
                }
            }
            Op::Add(a, b) => {
                if wants(*a) {
                    accumulate(adj, *a, g.clone())?;
                }
                if wants(*b) {
                    accumulate(adj, *b, g.clone())?;
                }
            }
            Op::Sub(a, b) => {
                if wants(*a) {
                    accumulate(adj, *a, g.clone())?;
                }
                if wants(*b) {
                    accumulate(adj, *b, g.scale(-1.0))?;
                }
            }
            Op::Mul(a, b) => {
                if wants(*a) {
                    accumulate(adj, *a, g.hadamard(val(*b))?)?;
                }
                if wants(*b) {
                    accumulate(adj, *b, g.hadamard(val(*a))?)?;
                }
            }
            Op::AddRow(a, row) => {
                if wants(*a) {
                    accumulate(adj, *a, g.clone())?;
                }
                if wants(*row) {
                    let c = g.cols();
                    let mut sums = vec![0.0; c];
                    for chunk in g.as_slice().chunks_exact(c.max(1)) {
                        for (s, x) in sums.iter_mut().zip(chunk) {
                            *s += x;
                        }
                    }
                    accumulate(adj, *row, DenseMatrix::from_vec(1, c, sums)?)?;
                }
            }
            Op::Scale(a, s) => accumulate(adj, *a, g.scale(*s))?,
            Op::AddScalar(a) => accumulate(adj, *a, g.clone())?,
            Op::Sin(a) => accumulate(adj, *a, g.zip_map(val(*a), "sin'", |gi, x| gi * x.cos())?)?,
            Op::Relu(a) => accumulate(
                adj,
                *a,
                g.zip_map(val(*a), "relu'", |gi, x| if x > 0.0 { gi } else { 0.0 })?,
            )?,
            Op::Exp(a) => accumulate(adj, *a, g.hadamard(&node.value)?)?,
            Op::Abs(a) => accumulate(
                adj,
                *a,
                g.zip_map(val(*a), "abs'", |gi, x| {
                    if x > 0.0 {
                        gi
                    } else if x < 0.0 {
                        -gi
                    } else {
                        0.0
                    }
                })?,
            )?,
            Op::Square(a) => accumulate(adj, *a, g.zip_map(val(*a), "square'", |gi, x| 2.0 * x * gi)?)?,
            Op::Sqrt(a) => accumulate(
                adj,
                *a,
                g.zip_map(&node.value, "sqrt'", |gi, y| if y > 0.0 { gi / (2.0 * y) } else { 0.0 })?,
            )?,
            Op::Sum(a) => {
                let (r, c) = val(*a).shape();
                accumulate(adj, *a, DenseMatrix::filled(r, c, g.as_slice()[0]))?;
            }
            Op::Transpose(a) => accumulate(adj, *a, g.transpose())?,
            Op::Reshape(a) => {
                let (r, c) = val(*a).shape();
                accumulate(adj, *a, g.reshape(r, c)?)?;
            }
            Op::RowSums(a) => {
                let (r, c) = val(*a).shape();
                accumulate(adj, *a, DenseMatrix::from_fn(r, c, |i, _| g.as_slice()[i]))?;
            }
            Op::Diag(a) => {
                let n = val(*a).rows();
                let d: Vec<f64> = (0..n).map(|i| g[(i, i)]).collect();
                accumulate(adj, *a, DenseMatrix::column(&d))?;
            }
            Op::DivScalar(a, s) => {
                let d = val(*s).as_slice()[0];
                if wants(*a) {
                    accumulate(adj, *a, g.scale(1.0 / d))?;
                }
                if wants(*s) {
                    let dot: f64 = g.as_slice().iter().zip(val(*a).as_slice()).map(|(x, y)| x * y).sum();
                    accumulate(adj, *s, DenseMatrix::filled(1, 1, -dot / (d * d)))?;
                }
            }
            Op::ClampMax(a, limit) => accumulate(
                adj,
                *a,
                g.zip_map(val(*a), "clamp'", |gi, x| if x <= *limit { gi } else { 0.0 })?,
            )?,
            Op::SpectralNorm { input, u, v } => {
                let s = g.as_slice()[0];
                let grad = DenseMatrix::from_fn(u.len(), v.len(), |i, j| s * u[i] * v[j]);
                accumulate(adj, *input, grad)?;
            }
        }
        Ok(())
    }
}

fn accumulate(adj: &mut [Option<DenseMatrix>], id: NodeId, g: DenseMatrix) -> Result<()> {
    match &mut adj[id.0] {
        Some(existing) => existing.axpy(1.0, &g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}
