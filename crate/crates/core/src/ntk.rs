//! Neural tangent kernel oracles.
//!
//! * [`empirical_ntk`]: Monte Carlo average of parameter-gradient inner
//!   products over fresh initializations.
//! * [`composed_kernel`]: `h((1/D) 1ᵀ cos(B(x_i − x_j)))`, the NTK of a
//!   network behind a Fourier feature map, and its `D → ∞` limit
//!   [`gaussian_limit_kernel`].
//! * [`kernel_regression`] and the closed-form two-level kernel of
//!   [`two_value_prediction`], where every off-diagonal entry is `h(0)` and
//!   every diagonal entry `h(1)`.

use rand::RngCore;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::models::fourier::mean_cosine;
use crate::models::{grid_coords, init_network, record_forward, NetworkSpec, ParamSet};
use crate::numerics::linalg::{min_eigenvalue, solve, RidgePolicy, SolveInfo};
use crate::numerics::{DenseMatrix, Graph};
use crate::rng::{seeded, streams};
use crate::tasks::MaskedImage;

/// Where a kernel matrix came from.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelProvenance {
    Empirical { samples: usize, seed: u64 },
    Composed { features: usize, delta: f64 },
    GaussianLimit { delta: f64 },
    ClosedForm { h0: f64, h1: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    /// `N × d`, one point per row.
    pub points: DenseMatrix,
    pub k: DenseMatrix,
    pub provenance: KernelProvenance,
    /// Monte Carlo standard error per entry (empirical kernels only).
    pub std_error: Option<DenseMatrix>,
}

impl KernelMatrix {
    pub fn len(&self) -> usize {
        self.k.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.k.rows() == 0
    }

    pub fn symmetry_error(&self) -> f64 {
        self.k.symmetry_error()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        min_eigenvalue(&self.k)
    }
}

/// Gradient of the scalar network output at `x` w.r.t. all trainable
/// parameters, flattened in [`ParamSet::trainable`] order.
pub fn parameter_gradient(spec: &NetworkSpec, params: &ParamSet, x: &[f64]) -> Result<Vec<f64>> {
    if spec.output_dim != 1 {
        return Err(Error::contract("NTK needs a scalar-output network"));
    }
    let mut g = Graph::new();
    let coords = DenseMatrix::from_vec(1, x.len(), x.to_vec())?;
    let nodes = record_forward(&mut g, spec, params, &coords, true)?;
    let mut grads = g.backward(nodes.output)?;
    let mut flat = Vec::with_capacity(params.parameter_count());
    for id in nodes.params {
        flat.extend(grads.take(id).expect("trainable leaf").into_vec());
    }
    Ok(flat)
}

/// Deterministic per-sample initialization seeds derived from `seed`.
pub fn sample_seeds(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = seeded(seed, streams::NTK);
    (0..count).map(|_| rng.next_u64()).collect()
}

/// Monte Carlo NTK `E_θ ⟨∂φ(x_i)/∂θ, ∂φ(x_j)/∂θ⟩` over `samples` fresh
/// initializations.
pub fn empirical_ntk(spec: &NetworkSpec, points: &DenseMatrix, samples: usize, seed: u64) -> Result<KernelMatrix> {
    if samples == 0 {
        return Err(Error::contract("empirical NTK needs at least one sample"));
    }
    spec.validate()?;
    let n = points.rows();
    let mut sum = DenseMatrix::zeros(n, n);
    let mut sum_sq = DenseMatrix::zeros(n, n);
    for s in sample_seeds(seed, samples) {
        let params = init_network(spec, s)?;
        let mut jac = Vec::with_capacity(n);
        for i in 0..n {
            jac.extend(parameter_gradient(spec, &params, points.row(i))?);
        }
        let p = jac.len() / n.max(1);
        let j = DenseMatrix::from_vec(n, p, jac)?;
        let k = j.matmul(&j.transpose())?;
        sum.axpy(1.0, &k)?;
        sum_sq.axpy(1.0, &k.hadamard(&k)?)?;
    }
    let s = samples as f64;
    let mean = sum.scale(1.0 / s);
    let std_error = if samples > 1 {
        let var = sum_sq.zip_map(&mean, "ntk variance", |q, m| ((q / s - m * m) * s / (s - 1.0)).max(0.0))?;
        Some(var.map(|v| (v / s).sqrt()))
    } else {
        None
    };
    Ok(KernelMatrix {
        points: points.clone(),
        k: mean,
        provenance: KernelProvenance::Empirical { samples, seed },
        std_error,
    })
}

/// `h((1/D) Σ_l cos(B_l (x_i − x_j)))`.
pub fn composed_kernel(b: &DenseMatrix, h: impl Fn(f64) -> f64, xi: &[f64], xj: &[f64]) -> Result<f64> {
    let diff = difference(xi, xj)?;
    Ok(h(mean_cosine(b, &diff)?))
}

/// The Fourier-feature inner product in the `D → ∞` limit for `B_ij ~ N(0, δ²)`:
/// `E cos(bᵀΔ) = exp(−δ²‖Δ‖²/2)`.
pub fn gaussian_limit(delta: f64, diff: &[f64]) -> f64 {
    let sq: f64 = diff.iter().map(|v| v * v).sum();
    (-delta * delta * sq / 2.0).exp()
}

/// `h(exp(−δ²‖x_i − x_j‖²/2))`.
pub fn gaussian_limit_kernel(h: impl Fn(f64) -> f64, delta: f64, xi: &[f64], xj: &[f64]) -> Result<f64> {
    Ok(h(gaussian_limit(delta, &difference(xi, xj)?)))
}

fn difference(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            op: "kernel point difference",
            left: (1, a.len()),
            right: (1, b.len()),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
}

/// Kernel matrix of `kernel` over the rows of `points`.
pub fn kernel_matrix(
    points: &DenseMatrix,
    provenance: KernelProvenance,
    mut kernel: impl FnMut(&[f64], &[f64]) -> Result<f64>,
) -> Result<KernelMatrix> {
    let n = points.rows();
    let mut k = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel(points.row(i), points.row(j))?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(KernelMatrix {
        points: points.clone(),
        k,
        provenance,
        std_error: None,
    })
}

/// `Q × N` cross-kernel between query rows and training rows.
pub fn cross_kernel(
    queries: &DenseMatrix,
    points: &DenseMatrix,
    mut kernel: impl FnMut(&[f64], &[f64]) -> Result<f64>,
) -> Result<DenseMatrix> {
    let mut out = DenseMatrix::zeros(queries.rows(), points.rows());
    for q in 0..queries.rows() {
        for i in 0..points.rows() {
            out[(q, i)] = kernel(queries.row(q), points.row(i))?;
        }
    }
    Ok(out)
}

/// `K = h0 11ᵀ + (h1 − h0) I` over `n` points.
pub fn closed_form_kernel(n: usize, h0: f64, h1: f64) -> KernelMatrix {
    KernelMatrix {
        points: DenseMatrix::zeros(n, 0),
        k: DenseMatrix::from_fn(n, n, |i, j| if i == j { h1 } else { h0 }),
        provenance: KernelProvenance::ClosedForm { h0, h1 },
        std_error: None,
    }
}

/// Regression weights `K⁻¹ z`.
pub fn regression_weights(km: &KernelMatrix, z: &[f64], policy: RidgePolicy) -> Result<(Vec<f64>, SolveInfo)> {
    if z.len() != km.len() {
        return Err(Error::Dimension {
            op: "kernel regression targets",
            left: km.k.shape(),
            right: (z.len(), 1),
        });
    }
    let (alpha, info) = solve(&km.k, &DenseMatrix::column(z), policy)?;
    Ok((alpha.into_vec(), info))
}

/// `φ(x) = Σ_i (K⁻¹z)_i k(x_i, x)` for each row of the `Q × N` cross-kernel.
pub fn kernel_regression(km: &KernelMatrix, z: &[f64], k_query: &DenseMatrix, policy: RidgePolicy) -> Result<Vec<f64>> {
    if k_query.cols() != km.len() {
        return Err(Error::Dimension {
            op: "kernel regression query",
            left: km.k.shape(),
            right: k_query.shape(),
        });
    }
    let (alpha, _) = regression_weights(km, z, policy)?;
    Ok(k_query.matmul(&DenseMatrix::column(&alpha))?.into_vec())
}

/// Prediction of kernel regression with the closed-form kernel: `z_l` on a
/// training point, `h0 1ᵀz / ((N−1)h0 + h1)` elsewhere.
pub fn two_value_prediction(h0: f64, h1: f64, z: &[f64], on_training: Option<usize>) -> Result<f64> {
    if h1 == h0 || h1 == 0.0 {
        return Err(Error::contract(format!("degenerate kernel levels h0={h0}, h1={h1}")));
    }
    let n = z.len();
    if let Some(l) = on_training {
        return z
            .get(l)
            .copied()
            .ok_or_else(|| Error::contract(format!("training index {l} out of range for N={n}")));
    }
    let denom = (n as f64 - 1.0) * h0 + h1;
    if denom == 0.0 {
        return Err(Error::contract("closed-form kernel is singular: (N-1)h0 + h1 = 0"));
    }
    Ok(h0 * z.iter().sum::<f64>() / denom)
}

/// Scalar map `h: [−1, 1] → R` tabulated at knots and linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedH {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl FittedH {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(Error::contract("fitted h needs >= 2 knots with one value each"));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::contract("fitted h knots must be strictly increasing"));
        }
        Ok(Self { knots, values })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation, clamped to the knot range.
    pub fn eval(&self, t: f64) -> f64 {
        let (k, v) = (&self.knots, &self.values);
        if t <= k[0] {
            return v[0];
        }
        if t >= k[k.len() - 1] {
            return v[v.len() - 1];
        }
        let hi = k.partition_point(|&x| x < t);
        let lo = hi - 1;
        let w = (t - k[lo]) / (k[hi] - k[lo]);
        v[lo] * (1.0 - w) + v[hi] * w
    }
}

/// Fits `h` from an empirical NTK of a 2-input network on the unit circle:
/// `h(t) = K(e₁, (t, √(1−t²)))` at `knots` evenly spaced values of `t ∈ [−1, 1]`.
/// On unit-norm inputs a rotation-invariant initialization makes the NTK a
/// function of the inner product only, and Fourier features have unit norm.
pub fn fit_h_ntk(spec: &NetworkSpec, knots: usize, samples: usize, seed: u64) -> Result<FittedH> {
    if spec.input_dim != 2 || spec.feature_map.is_some() {
        return Err(Error::contract("fit_h_ntk needs a plain 2-input network"));
    }
    if knots < 2 {
        return Err(Error::contract("fit_h_ntk needs >= 2 knots"));
    }
    let ts: Vec<f64> = (0..knots).map(|k| -1.0 + 2.0 * k as f64 / (knots - 1) as f64).collect();
    let mut pts = vec![1.0, 0.0];
    for &t in &ts {
        pts.push(t);
        pts.push((1.0 - t * t).max(0.0).sqrt());
    }
    let points = DenseMatrix::from_vec(knots + 1, 2, pts)?;
    let km = empirical_ntk(spec, &points, samples, seed)?;
    let values = (0..knots).map(|k| km.k[(0, k + 1)]).collect();
    FittedH::new(ts, values)
}

/// Summary of the Monte Carlo Fourier-feature convergence check.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub features: Vec<usize>,
    /// RMS deviation of the Monte Carlo inner feature from `exp(−δ²‖Δ‖²/2)`.
    pub deviations: Vec<f64>,
    /// Least-squares slope of log deviation vs log `D`.
    pub slope: f64,
    /// Mean inner feature at the largest `D`.
    pub mean_at_largest: f64,
    /// `exp(−δ²‖Δ‖²/2)`.
    pub limit_half: f64,
    /// `exp(−δ²‖Δ‖²)`.
    pub limit_full: f64,
}

impl ConvergenceReport {
    /// True when the Monte Carlo mean is closer to the `½` exponent.
    pub fn half_exponent_matches(&self) -> bool {
        (self.mean_at_largest - self.limit_half).abs() < (self.mean_at_largest - self.limit_full).abs()
    }
}

/// Draws `trials` feature matrices `B ∈ R^{D×d}`, `B_ij ~ N(0, δ²)`, for each
/// `D` and measures how fast `(1/D) Σ cos(B_l Δ)` approaches its limit.
pub fn fourier_convergence(
    delta: f64,
    diff: &[f64],
    features: &[usize],
    trials: usize,
    seed: u64,
) -> Result<ConvergenceReport> {
    if features.len() < 2 || trials == 0 || features.contains(&0) {
        return Err(Error::contract(
            "convergence check needs >= 2 feature counts and >= 1 trial",
        ));
    }
    let normal = Normal::new(0.0, delta).map_err(|e| Error::contract(format!("bad delta: {e}")))?;
    let limit_half = gaussian_limit(delta, diff);
    let sq: f64 = diff.iter().map(|v| v * v).sum();
    let limit_full = (-delta * delta * sq).exp();
    let mut rng = seeded(seed, streams::FEATURES);
    let mut deviations = Vec::new();
    let mut mean_at_largest = 0.0;
    for &d in features {
        let mut sum_sq = 0.0;
        let mut mean = 0.0;
        for _ in 0..trials {
            let mut acc = 0.0;
            for _ in 0..d {
                let proj: f64 = diff.iter().map(|x| normal.sample(&mut rng) * x).sum();
                acc += proj.cos();
            }
            let inner = acc / d as f64;
            sum_sq += (inner - limit_half).powi(2);
            mean += inner;
        }
        deviations.push((sum_sq / trials as f64).sqrt());
        mean_at_largest = mean / trials as f64;
    }
    let xs: Vec<f64> = features.iter().map(|&d| (d as f64).ln()).collect();
    let ys: Vec<f64> = deviations.iter().map(|d| d.ln()).collect();
    let slope = least_squares_slope(&xs, &ys);
    Ok(ConvergenceReport {
        features: features.to_vec(),
        deviations,
        slope,
        mean_at_largest,
        limit_half,
        limit_full,
    })
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

/// Kernel-regression inpainting: regress observed pixels at grid coordinates
/// `(i/m, j/n)` and predict every pixel.
pub fn kernel_inpaint(
    image: &MaskedImage,
    mut kernel: impl FnMut(&[f64], &[f64]) -> Result<f64>,
    provenance: KernelProvenance,
    policy: RidgePolicy,
) -> Result<(DenseMatrix, SolveInfo)> {
    let (m, n) = image.shape();
    let coords = grid_coords(m, n);
    let observed: Vec<usize> = (0..m * n).filter(|&k| image.mask.as_slice()[k]).collect();
    let mut train = Vec::with_capacity(observed.len() * 2);
    for &k in &observed {
        train.extend_from_slice(coords.row(k));
    }
    let train = DenseMatrix::from_vec(observed.len(), 2, train)?;
    let z: Vec<f64> = observed.iter().map(|&k| image.pixels.as_slice()[k]).collect();
    let km = kernel_matrix(&train, provenance, &mut kernel)?;
    let (alpha, info) = regression_weights(&km, &z, policy)?;
    let cross = cross_kernel(&coords, &train, &mut kernel)?;
    let pred = cross.matmul(&DenseMatrix::column(&alpha))?;
    Ok((pred.reshape(m, n)?, info))
}
