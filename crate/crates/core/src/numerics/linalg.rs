//! Dense decompositions: symmetric eigen, singular values and linear solves.
//!
//! Everything here is Jacobi- or factorization-based and sized for matrices of
//! a few hundred rows at most.

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: DenseMatrix,
}

/// Cyclic Jacobi eigenvalue iteration. Only the upper triangle is trusted to be
/// consistent with the lower one; callers pass symmetric input.
pub fn symmetric_eigen(m: &DenseMatrix) -> Result<SymmetricEigen> {
    if !m.is_square() {
        return Err(Error::contract(format!(
            "symmetric_eigen needs a square matrix, got {:?}",
            m.shape()
        )));
    }
    let n = m.rows();
    let mut a = m.clone();
    let mut v = DenseMatrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymmetricEigen { values, vectors })
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DenseMatrix) -> Result<f64> {
    Ok(symmetric_eigen(m)?.values.first().copied().unwrap_or(0.0))
}

/// Singular values, descending, via one-sided (Hestenes) Jacobi rotations.
pub fn singular_values(m: &DenseMatrix) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Err(Error::contract("singular_values of an empty matrix"));
    }
    // Orthogonalize the columns of the tall orientation.
    let tall = if m.rows() >= m.cols() { m.clone() } else { m.transpose() };
    let (rows, cols) = tall.shape();
    let mut columns: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| tall[(i, j)]).collect()).collect();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&columns[p], &columns[q]);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for k in 0..rows {
                        alpha += cp[k] * cp[k];
                        beta += cq[k] * cq[k];
                        gamma += cp[k] * cq[k];
                    }
                    (alpha, beta, gamma)
                };
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (head, tail) = columns.split_at_mut(q);
                let cp = &mut head[p];
                let cq = &mut tail[0];
                for k in 0..rows {
                    let x = cp[k];
                    let y = cq[k];
                    cp[k] = c * x - s * y;
                    cq[k] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    Ok(sigma)
}

/// Largest singular value with its left/right singular vectors.
pub fn top_singular_triplet(m: &DenseMatrix) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if m.is_empty() {
        return Err(Error::contract("top_singular_triplet of an empty matrix"));
    }
    let gram = crate::numerics::matrix::gemm(m, true, m, false)?;
    let eig = symmetric_eigen(&gram)?;
    let n = gram.rows();
    let sigma = eig.values[n - 1].max(0.0).sqrt();
    let v: Vec<f64> = (0..n).map(|i| eig.vectors[(i, n - 1)]).collect();
    let mv = m.matmul(&DenseMatrix::column(&v))?;
    let u: Vec<f64> = if sigma > 0.0 {
        mv.as_slice().iter().map(|x| x / sigma).collect()
    } else {
        vec![0.0; m.rows()]
    };
    Ok((sigma, u, v))
}

/// How a near-singular system is handled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RidgePolicy {
    /// Fail with a solver error when the condition estimate exceeds the limit.
    Never,
    /// Add `1e-8 · trace/N` to the diagonal when the condition estimate exceeds
    /// [`CONDITION_LIMIT`] or the factorization breaks down.
    Auto,
}

pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveInfo {
    pub condition_estimate: f64,
    pub ridge: f64,
}

/// Solves `K x = rhs` for square `K` (columns of `rhs` solved jointly).
///
/// Tries a Cholesky factorization first and falls back to partially pivoted LU
/// when `K` is symmetric but indefinite.
pub fn solve(k: &DenseMatrix, rhs: &DenseMatrix, policy: RidgePolicy) -> Result<(DenseMatrix, SolveInfo)> {
    if !k.is_square() || k.rows() != rhs.rows() {
        return Err(Error::Dimension {
            op: "solve",
            left: k.shape(),
            right: rhs.shape(),
        });
    }
    let n = k.rows();
    let attempt = |mat: &DenseMatrix| -> Option<(DenseMatrix, f64)> {
        if let Some((l, cond)) = cholesky(mat) {
            return Some((cholesky_solve(&l, rhs), cond));
        }
        lu_solve(mat, rhs)
    };

    let first = attempt(k);
    if let Some((x, cond)) = &first {
        if *cond <= CONDITION_LIMIT {
            return Ok((
                x.clone(),
                SolveInfo {
                    condition_estimate: *cond,
                    ridge: 0.0,
                },
            ));
        }
    }
    let cond = first.as_ref().map_or(f64::INFINITY, |(_, c)| *c);
    match policy {
        RidgePolicy::Never => Err(Error::Solver {
            condition: cond,
            reason: "matrix is singular or ill-conditioned and ridge is disabled".into(),
        }),
        RidgePolicy::Auto => {
            let ridge = 1e-8 * k.trace().abs().max(f64::MIN_POSITIVE) / n as f64;
            let mut reg = k.clone();
            for i in 0..n {
                reg[(i, i)] += ridge;
            }
            let (x, cond) = attempt(&reg).ok_or(Error::Solver {
                condition: cond,
                reason: "factorization failed after ridge".into(),
            })?;
            Ok((
                x,
                SolveInfo {
                    condition_estimate: cond,
                    ridge,
                },
            ))
        }
    }
}

/// Lower Cholesky factor and a condition estimate `(max l_ii / min l_ii)^2`.
fn cholesky(k: &DenseMatrix) -> Option<(DenseMatrix, f64)> {
    let n = k.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = k[(j, j)];
        for p in 0..j {
            d -= l[(j, p)] * l[(j, p)];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = k[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    let (lo, hi) = (0..n).fold((f64::INFINITY, 0.0f64), |(lo, hi), i| {
        (lo.min(l[(i, i)]), hi.max(l[(i, i)]))
    });
    Some((l, (hi / lo).powi(2)))
}

fn cholesky_solve(l: &DenseMatrix, rhs: &DenseMatrix) -> DenseMatrix {
    let n = l.rows();
    let mut x = rhs.clone();
    for c in 0..rhs.cols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for p in 0..i {
                s -= l[(i, p)] * x[(p, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for p in (i + 1)..n {
                s -= l[(p, i)] * x[(p, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

fn lu_solve(k: &DenseMatrix, rhs: &DenseMatrix) -> Option<(DenseMatrix, f64)> {
    let n = k.rows();
    let mut a = k.clone();
    let mut x = rhs.clone();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))?;
        if a[(pivot, col)] == 0.0 || !a[(pivot, col)].is_finite() {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                let t = a[(col, j)];
                a[(col, j)] = a[(pivot, j)];
                a[(pivot, j)] = t;
            }
            for j in 0..x.cols() {
                let t = x[(col, j)];
                x[(col, j)] = x[(pivot, j)];
                x[(pivot, j)] = t;
            }
        }
        for i in (col + 1)..n {
            let f = a[(i, col)] / a[(col, col)];
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[(i, j)] -= f * a[(col, j)];
            }
            for j in 0..x.cols() {
                x[(i, j)] -= f * x[(col, j)];
            }
        }
    }
    for c in 0..x.cols() {
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for j in (i + 1)..n {
                s -= a[(i, j)] * x[(j, c)];
            }
            x[(i, c)] = s / a[(i, i)];
        }
    }
    let (lo, hi) = (0..n).fold((f64::INFINITY, 0.0f64), |(lo, hi), i| {
        (lo.min(a[(i, i)].abs()), hi.max(a[(i, i)].abs()))
    });
    Some((x, hi / lo))
}
