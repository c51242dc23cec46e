//! Fully connected coordinate networks (SIREN, ReLU MLP, linear).

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::fourier::fourier_feature_matrix;
use crate::numerics::{DenseMatrix, Graph, NodeId};
use crate::rng::{seeded, streams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sine,
    Relu,
    Linear,
}

/// Random Fourier feature lifting `x ↦ (1/√D)[cos Bx, sin Bx]` with
/// `B_ij ~ N(0, δ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureMapSpec {
    pub features: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Frequency scale of sine layers: each hidden layer computes
    /// `sin(ω0 · (W x + b))`.
    pub omega0: f64,
    pub feature_map: Option<FeatureMapSpec>,
    pub bias: bool,
}

impl NetworkSpec {
    pub fn siren(input_dim: usize, output_dim: usize, hidden: Vec<usize>, omega0: f64) -> Self {
        Self {
            input_dim,
            output_dim,
            hidden,
            activation: Activation::Sine,
            omega0,
            feature_map: None,
            bias: true,
        }
    }

    pub fn relu(input_dim: usize, output_dim: usize, hidden: Vec<usize>) -> Self {
        Self {
            input_dim,
            output_dim,
            hidden,
            activation: Activation::Relu,
            omega0: 1.0,
            feature_map: None,
            bias: true,
        }
    }

    pub fn with_feature_map(mut self, features: usize, delta: f64) -> Self {
        self.feature_map = Some(FeatureMapSpec { features, delta });
        self
    }

    pub fn without_bias(mut self) -> Self {
        self.bias = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.iter().any(|&w| w == 0) {
            return Err(Error::contract("network widths must all be >= 1"));
        }
        if self.activation == Activation::Sine && !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::contract(format!(
                "sine networks need omega0 > 0, got {}",
                self.omega0
            )));
        }
        if let Some(fm) = &self.feature_map {
            if fm.features == 0 || !(fm.delta >= 0.0) {
                return Err(Error::contract("feature map needs D >= 1 and delta >= 0"));
            }
        }
        Ok(())
    }

    /// Width of the first layer's input (after the optional feature map).
    pub fn first_layer_input(&self) -> usize {
        self.feature_map.map_or(self.input_dim, |fm| 2 * fm.features)
    }

    /// `(fan_in, fan_out)` for each affine layer, output layer last.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut fan_in = self.first_layer_input();
        for &w in &self.hidden {
            dims.push((fan_in, w));
            fan_in = w;
        }
        dims.push((fan_in, self.output_dim));
        dims
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `fan_out × fan_in`
    pub weight: DenseMatrix,
    /// `1 × fan_out`; absent when the spec disables biases.
    pub bias: Option<DenseMatrix>,
}

/// Trainable parameters of a network plus the frozen feature matrix `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub layers: Vec<Layer>,
    pub features: Option<DenseMatrix>,
}

impl ParamSet {
    /// Trainable matrices in a fixed order: `W0, b0, W1, b1, …`.
    pub fn trainable(&self) -> Vec<&DenseMatrix> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.push(&layer.weight);
            if let Some(b) = &layer.bias {
                out.push(b);
            }
        }
        out
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut DenseMatrix> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.push(&mut layer.weight);
            if let Some(b) = &mut layer.bias {
                out.push(b);
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.trainable().iter().map(|m| m.len()).sum()
    }

    pub fn weights(&self) -> impl Iterator<Item = &DenseMatrix> {
        self.layers.iter().map(|l| &l.weight)
    }
}

/// SIREN initialization for sine networks (first layer `U(±1/fan_in)`, deeper
/// layers `U(±√(6/fan_in)/ω0)`), He-uniform otherwise; zero biases.
pub fn init_network(spec: &NetworkSpec, seed: u64) -> Result<ParamSet> {
    spec.validate()?;
    let mut rng = seeded(seed, streams::WEIGHTS);
    let dims = spec.layer_dims();
    let mut layers = Vec::with_capacity(dims.len());
    for (idx, &(fan_in, fan_out)) in dims.iter().enumerate() {
        let bound = match spec.activation {
            Activation::Sine if idx == 0 => 1.0 / fan_in as f64,
            Activation::Sine => (6.0 / fan_in as f64).sqrt() / spec.omega0,
            Activation::Relu | Activation::Linear => (6.0 / fan_in as f64).sqrt(),
        };
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let weight = DenseMatrix::from_fn(fan_out, fan_in, |_, _| dist.sample(&mut rng));
        let bias = spec.bias.then(|| DenseMatrix::zeros(1, fan_out));
        layers.push(Layer { weight, bias });
    }
    let features = match spec.feature_map {
        Some(fm) => {
            let mut frng = seeded(seed, streams::FEATURES);
            Some(sample_feature_matrix(fm.features, spec.input_dim, fm.delta, &mut frng))
        }
        None => None,
    };
    Ok(ParamSet { layers, features })
}

/// `D × d` matrix with i.i.d. `N(0, δ²)` entries.
pub fn sample_feature_matrix(features: usize, dim: usize, delta: f64, rng: &mut impl Rng) -> DenseMatrix {
    if delta == 0.0 {
        return DenseMatrix::zeros(features, dim);
    }
    let normal = Normal::new(0.0, delta).expect("delta is finite and positive");
    DenseMatrix::from_fn(features, dim, |_, _| normal.sample(rng))
}

/// Node ids of a network recorded on a graph, in [`ParamSet::trainable`] order.
#[derive(Debug, Clone)]
pub struct NetworkNodes {
    pub output: NodeId,
    pub params: Vec<NodeId>,
}

/// Records the batched forward pass `coords (k × d) → k × o` on `graph`.
/// Parameters become trainable leaves when `trainable` is set, constants
/// otherwise.
pub fn record_forward(
    graph: &mut Graph,
    spec: &NetworkSpec,
    params: &ParamSet,
    coords: &DenseMatrix,
    trainable: bool,
) -> Result<NetworkNodes> {
    if coords.cols() != spec.input_dim {
        return Err(Error::Dimension {
            op: "network forward",
            left: coords.shape(),
            right: (coords.rows(), spec.input_dim),
        });
    }
    let input = match (&spec.feature_map, &params.features) {
        (Some(_), Some(b)) => fourier_feature_matrix(b, coords)?,
        (None, None) => coords.clone(),
        _ => return Err(Error::contract("feature matrix does not match the network spec")),
    };
    record_forward_lifted(graph, spec, params, input, trainable)
}

/// Like [`record_forward`] but `input` is already the first-layer input
/// (i.e. after any feature map).
pub fn record_forward_lifted(
    graph: &mut Graph,
    spec: &NetworkSpec,
    params: &ParamSet,
    input: DenseMatrix,
    trainable: bool,
) -> Result<NetworkNodes> {
    if params.layers.len() != spec.hidden.len() + 1 {
        return Err(Error::contract("parameter set does not match the network spec"));
    }
    let leaf = |g: &mut Graph, m: &DenseMatrix| {
        if trainable {
            g.parameter(m.clone())
        } else {
            g.constant(m.clone())
        }
    };
    let mut ids = Vec::new();
    let mut x = graph.constant(input);
    let last = params.layers.len() - 1;
    for (idx, layer) in params.layers.iter().enumerate() {
        let w = leaf(graph, &layer.weight);
        ids.push(w);
        let mut z = graph.matmul_nt(x, w)?;
        if let Some(b) = &layer.bias {
            let b = leaf(graph, b);
            ids.push(b);
            z = graph.add_row(z, b)?;
        }
        x = if idx == last {
            z
        } else {
            match spec.activation {
                Activation::Sine => {
                    let scaled = graph.scale(z, spec.omega0);
                    graph.sin(scaled)
                }
                Activation::Relu => graph.relu(z),
                Activation::Linear => z,
            }
        };
    }
    Ok(NetworkNodes { output: x, params: ids })
}

/// Batched evaluation without gradients.
pub fn forward(spec: &NetworkSpec, params: &ParamSet, coords: &DenseMatrix) -> Result<DenseMatrix> {
    let mut graph = Graph::new();
    let nodes = record_forward(&mut graph, spec, params, coords, false)?;
    Ok(graph.value(nodes.output).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::max_relative_error;
    use std::f64::consts::PI;

    /// Straight-line scalar evaluation of one input row.
    fn scalar_forward(spec: &NetworkSpec, params: &ParamSet, x: &[f64]) -> Vec<f64> {
        let mut act: Vec<f64> = x.to_vec();
        let last = params.layers.len() - 1;
        for (idx, layer) in params.layers.iter().enumerate() {
            let w = &layer.weight;
            let mut next = vec![0.0; w.rows()];
            for i in 0..w.rows() {
                let mut s = layer.bias.as_ref().map_or(0.0, |b| b.as_slice()[i]);
                for j in 0..w.cols() {
                    s += w[(i, j)] * act[j];
                }
                next[i] = if idx == last {
                    s
                } else {
                    match spec.activation {
                        Activation::Sine => (spec.omega0 * s).sin(),
                        Activation::Relu => s.max(0.0),
                        Activation::Linear => s,
                    }
                };
            }
            act = next;
        }
        act
    }

    #[test]
    fn hidden_weights_respect_siren_bound() {
        let spec = NetworkSpec::siren(2, 1, vec![256, 256], 30.0);
        let params = init_network(&spec, 3).unwrap();
        let bound = (6.0f64 / 256.0).sqrt() / 30.0;
        assert!(params.layers[1].weight.max_abs() <= bound);
        assert!(params.layers[2].weight.max_abs() <= bound);
        assert!(params.layers[0].weight.max_abs() <= 0.5);
        assert!(params.layers.iter().all(|l| l.bias.as_ref().unwrap().max_abs() == 0.0));
    }

    #[test]
    fn same_seed_same_parameters() {
        let spec = NetworkSpec::relu(2, 1, vec![8, 8]).with_feature_map(16, 3.0);
        assert_eq!(init_network(&spec, 42).unwrap(), init_network(&spec, 42).unwrap());
        assert_ne!(init_network(&spec, 42).unwrap(), init_network(&spec, 43).unwrap());
    }

    #[test]
    fn feature_matrix_std_matches_delta() {
        let spec = NetworkSpec::relu(2, 1, vec![1]).with_feature_map(4096, 10.0);
        let b = init_network(&spec, 1).unwrap().features.unwrap();
        let n = b.len() as f64;
        let mean = b.sum() / n;
        let var = b.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var.sqrt() - 10.0).abs() / 10.0 < 0.02, "std {}", var.sqrt());
    }

    #[test]
    fn zero_network_outputs_zero() {
        let spec = NetworkSpec::siren(2, 1, vec![4, 4], 30.0);
        let mut params = init_network(&spec, 0).unwrap();
        for m in params.trainable_mut() {
            m.as_mut_slice().fill(0.0);
        }
        let coords = DenseMatrix::from_fn(5, 2, |i, j| (i + j) as f64 * 0.1);
        assert!(forward(&spec, &params, &coords).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn one_unit_sine_network_by_hand() {
        let spec = NetworkSpec::siren(1, 1, vec![1], PI);
        let params = ParamSet {
            layers: vec![
                Layer {
                    weight: DenseMatrix::filled(1, 1, 1.0),
                    bias: Some(DenseMatrix::zeros(1, 1)),
                },
                Layer {
                    weight: DenseMatrix::filled(1, 1, 1.0),
                    bias: Some(DenseMatrix::zeros(1, 1)),
                },
            ],
            features: None,
        };
        let out = forward(&spec, &params, &DenseMatrix::filled(1, 1, 0.5)).unwrap();
        assert!((out.as_slice()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn batched_matches_scalar_oracle() {
        for spec in [
            NetworkSpec::siren(2, 3, vec![7, 5], 30.0),
            NetworkSpec::relu(2, 1, vec![6, 6, 6]),
        ] {
            let mut params = init_network(&spec, 9).unwrap();
            // non-zero biases exercise the broadcast
            for layer in &mut params.layers {
                if let Some(b) = &mut layer.bias {
                    for (i, v) in b.as_mut_slice().iter_mut().enumerate() {
                        *v = 0.01 * i as f64 - 0.02;
                    }
                }
            }
            let coords = DenseMatrix::from_fn(11, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5);
            let batched = forward(&spec, &params, &coords).unwrap();
            for i in 0..coords.rows() {
                let expect = scalar_forward(&spec, &params, coords.row(i));
                for (a, b) in batched.row(i).iter().zip(&expect) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn wrong_coordinate_width_is_rejected() {
        let spec = NetworkSpec::siren(2, 1, vec![4], 30.0);
        let params = init_network(&spec, 0).unwrap();
        assert!(matches!(
            forward(&spec, &params, &DenseMatrix::zeros(3, 3)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(NetworkSpec::siren(2, 1, vec![4, 0], 30.0).validate().is_err());
        assert!(NetworkSpec::siren(2, 1, vec![4], 0.0).validate().is_err());
    }

    #[test]
    fn siren_gradient_matches_finite_differences() {
        let spec = NetworkSpec::siren(2, 1, vec![8, 8], 3.0);
        let coords = DenseMatrix::from_fn(6, 2, |i, j| (i as f64 * 0.3 + j as f64 * 0.7).sin());
        for seed in 0..3 {
            let mut params = init_network(&spec, seed).unwrap();
            for (k, b) in params.layers.iter_mut().filter_map(|l| l.bias.as_mut()).enumerate() {
                for (i, v) in b.as_mut_slice().iter_mut().enumerate() {
                    *v = 0.05 * ((i + k) as f64).cos();
                }
            }
            let loss = |ps: &[DenseMatrix]| -> (f64, Vec<DenseMatrix>) {
                let mut p = params.clone();
                for (dst, src) in p.trainable_mut().into_iter().zip(ps) {
                    *dst = src.clone();
                }
                let mut g = Graph::new();
                let nodes = record_forward(&mut g, &spec, &p, &coords, true).unwrap();
                let sq = g.square(nodes.output);
                let s = g.sum(sq);
                let grads = g.backward(s).unwrap();
                let gs = nodes.params.iter().map(|id| grads.get(*id).unwrap().clone()).collect();
                (g.scalar(s), gs)
            };
            let flat: Vec<DenseMatrix> = params.trainable().into_iter().cloned().collect();
            let (_, analytic) = loss(&flat);
            let err = max_relative_error(&flat, &analytic, 1e-5, 1e-6, |ps| loss(ps).0);
            assert!(err < 1e-5, "seed {seed}: relative error {err}");
        }
    }
}
