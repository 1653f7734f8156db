//! Power-iteration norm estimates and the projection orthogonal to the
//! all-ones vector.

use super::{CsrMatrix, DenseMatrix, LinalgError};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Outcome of a power iteration. `converged == false` means `value` is the
/// best estimate after `max_iter` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restarted: bool,
}

/// Largest singular value of `a` by power iteration on `aᵀa`.
pub fn spectral_norm(a: &DenseMatrix, tol: f64, max_iter: usize) -> Result<NormEstimate, LinalgError> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(LinalgError::Empty("spectral_norm"));
    }
    let at = a.transpose();
    let est = operator_norm(
        a.cols(),
        |v| dense_mv(a, v),
        |u| dense_mv(&at, u),
        tol,
        max_iter,
    );
    if !est.converged {
        log::warn!(
            "spectral_norm: no convergence after {} iterations, best estimate {:.6e}",
            est.iterations,
            est.value
        );
    }
    Ok(est)
}

/// Spectral norm with the default tolerance and iteration cap.
pub fn spectral_norm_default(a: &DenseMatrix) -> Result<NormEstimate, LinalgError> {
    spectral_norm(a, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

/// `X − 1γ_X` where `γ_X` is the row of column means.
pub fn project_b(x: &DenseMatrix) -> DenseMatrix {
    let n = x.rows();
    if n == 0 {
        return x.clone();
    }
    let means = column_means(x);
    let mut out = x.clone();
    for r in 0..n {
        for (v, m) in out.row_mut(r).iter_mut().zip(&means) {
            *v -= m;
        }
    }
    out
}

pub(crate) fn column_means(x: &DenseMatrix) -> Vec<f64> {
    let mut sums = vec![0.0; x.cols()];
    for r in 0..x.rows() {
        for (s, v) in sums.iter_mut().zip(x.row(r)) {
            *s += v;
        }
    }
    let n = x.rows() as f64;
    sums.iter().map(|s| s / n).collect()
}

fn project_vec(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

/// Operator norm of `B·(adjᵀ)^k`, the factor that controls how fast the
/// non-constant part of a back-propagated signal shrinks over `k` layers.
pub fn b_power_norm_with(
    adj: &CsrMatrix,
    k: usize,
    tol: f64,
    max_iter: usize,
) -> Result<NormEstimate, LinalgError> {
    if adj.rows() != adj.cols() {
        return Err(LinalgError::shape("b_power_norm", adj.shape(), adj.shape()));
    }
    if adj.rows() == 0 {
        return Err(LinalgError::Empty("b_power_norm"));
    }
    let adj_t = adj.transpose();
    let forward = |v: &[f64]| {
        let mut cur = v.to_vec();
        for _ in 0..k {
            cur = adj_t.spmv(&cur);
        }
        project_vec(&mut cur);
        cur
    };
    let backward = |u: &[f64]| {
        let mut cur = u.to_vec();
        project_vec(&mut cur);
        for _ in 0..k {
            cur = adj.spmv(&cur);
        }
        cur
    };
    let est = operator_norm(adj.rows(), forward, backward, tol, max_iter);
    if !est.converged {
        log::warn!(
            "b_power_norm(k={k}): no convergence after {} iterations, best estimate {:.6e}",
            est.iterations,
            est.value
        );
    }
    Ok(est)
}

pub fn b_power_norm(adj: &CsrMatrix, k: usize) -> Result<NormEstimate, LinalgError> {
    b_power_norm_with(adj, k, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

fn dense_mv(a: &DenseMatrix, v: &[f64]) -> Vec<f64> {
    (0..a.rows())
        .map(|r| a.row(r).iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn restart_vector(n: usize, first: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|i| ((i.wrapping_mul(2_654_435_761) % 1000) as f64) / 1000.0 - 0.5 + 1e-3 * i as f64)
        .collect();
    let dot: f64 = v.iter().zip(first).map(|(a, b)| a * b).sum();
    for (x, f) in v.iter_mut().zip(first) {
        *x -= dot * f;
    }
    let nrm = norm2(&v);
    if nrm > 0.0 {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
    v
}

/// Power iteration on `MᵀM` for an operator given by its action and the
/// action of its adjoint. Starts from the normalized all-ones vector; if that
/// lies in the null space, restarts once from a fixed vector orthogonal to it.
fn operator_norm(
    n: usize,
    apply: impl Fn(&[f64]) -> Vec<f64>,
    apply_t: impl Fn(&[f64]) -> Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> NormEstimate {
    let start = vec![1.0 / (n as f64).sqrt(); n];
    let mut v = start.clone();
    let mut restarted = false;
    let mut sigma = 0.0;
    for it in 1..=max_iter {
        let u = apply(&v);
        let next_sigma = norm2(&u);
        let w = apply_t(&u);
        let wn = norm2(&w);
        if wn == 0.0 || !wn.is_finite() {
            if !restarted && it == 1 {
                restarted = true;
                v = restart_vector(n, &start);
                if norm2(&v) == 0.0 {
                    return NormEstimate {
                        value: 0.0,
                        iterations: it,
                        converged: true,
                        restarted,
                    };
                }
                continue;
            }
            return NormEstimate {
                value: next_sigma,
                iterations: it,
                converged: wn == 0.0,
                restarted,
            };
        }
        let delta = (next_sigma - sigma).abs();
        sigma = next_sigma;
        v = w.iter().map(|x| x / wn).collect();
        if it > 1 && delta <= tol * sigma.max(1.0) {
            // One more Rayleigh evaluation on the refreshed iterate.
            let final_sigma = norm2(&apply(&v)).max(sigma);
            return NormEstimate {
                value: final_sigma,
                iterations: it,
                converged: true,
                restarted,
            };
        }
    }
    NormEstimate {
        value: sigma,
        iterations: max_iter,
        converged: false,
        restarted,
    }
}
