use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dot, norm, SkylineCholesky};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralOptions {
    /// Relative change of the Rayleigh quotient that ends inverse iteration.
    pub inverse_tol: f64,
    pub inverse_max_iter: usize,
    /// Relative residual bound that ends Lanczos.
    pub lanczos_tol: f64,
    pub lanczos_max_steps: usize,
    /// Seed for the random start vectors.
    pub seed: u64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            inverse_tol: 1e-6,
            inverse_max_iter: 10_000,
            lanczos_tol: 1e-8,
            lanczos_max_steps: 5_000,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenEstimate {
    pub value: f64,
    pub iterations: usize,
    /// Bound on the distance from `value` to the spectrum, relative to `value`.
    pub relative_bound: f64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralEstimate {
    pub lambda_min: EigenEstimate,
    pub lambda_max: EigenEstimate,
}

impl SpectralEstimate {
    pub fn kappa(&self) -> f64 {
        self.lambda_max.value / self.lambda_min.value
    }
}

fn random_unit(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let s = norm(&v);
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Number of eigenvalues of the tridiagonal `(alpha, beta)` below `x`.
fn sturm_count(alpha: &[f64], beta: &[f64], x: f64) -> usize {
    let scale = alpha
        .iter()
        .chain(beta)
        .fold(f64::MIN_POSITIVE, |s, v| s.max(v.abs()));
    let tiny = f64::EPSILON * scale;
    let mut count = 0;
    let mut d = 1.0;
    for i in 0..alpha.len() {
        let b2 = if i == 0 {
            0.0
        } else {
            beta[i - 1] * beta[i - 1]
        };
        d = alpha[i] - x - b2 / d;
        if d == 0.0 {
            d = -tiny;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

fn tridiagonal_max(alpha: &[f64], beta: &[f64]) -> f64 {
    let k = alpha.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        let r = if i > 0 { beta[i - 1].abs() } else { 0.0 }
            + if i + 1 < k { beta[i].abs() } else { 0.0 };
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(alpha, beta, mid) == k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Solves the tridiagonal system `(T - shift I) x = b` with partial pivoting.
/// Exact zero pivots are nudged, which is what inverse iteration wants.
fn tridiagonal_shifted_solve(alpha: &[f64], beta: &[f64], shift: f64, b: &mut [f64]) {
    let n = alpha.len();
    let mut d: Vec<f64> = alpha.iter().map(|a| a - shift).collect();
    let mut dl = beta.to_vec();
    let mut du = beta.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let tiny = f64::EPSILON
        * alpha
            .iter()
            .chain(beta)
            .fold(f64::MIN_POSITIVE, |s, v| s.max(v.abs()));
    for i in 0..n.saturating_sub(1) {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = tiny;
            }
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            b[i + 1] -= fact * b[i];
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du2[i];
            }
            du[i] = temp;
            b.swap(i, i + 1);
            b[i + 1] -= fact * b[i];
        }
        dl[i] = 0.0;
    }
    if n == 0 {
        return;
    }
    if d[n - 1] == 0.0 {
        d[n - 1] = tiny;
    }
    b[n - 1] /= d[n - 1];
    if n > 1 {
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
    }
}

/// Last component of the normalized eigenvector of `T` for eigenvalue `theta`.
fn ritz_last_component(alpha: &[f64], beta: &[f64], theta: f64) -> f64 {
    let k = alpha.len();
    let mut s = vec![1.0; k];
    for _ in 0..3 {
        tridiagonal_shifted_solve(alpha, beta, theta, &mut s);
        let nrm = norm(&s);
        if !nrm.is_finite() || nrm == 0.0 {
            return 1.0;
        }
        s.iter_mut().for_each(|x| *x /= nrm);
    }
    s[k - 1]
}

/// Largest eigenvalue by Lanczos without reorthogonalization.
///
/// Loss of orthogonality only produces spurious copies of converged Ritz
/// values, so the top Ritz value stays valid. Stops when the residual bound
/// `beta_k |s_k|` drops below `lanczos_tol * theta`.
pub fn lambda_max_lanczos(a: &CsrMatrix, opts: &SpectralOptions) -> Result<EigenEstimate> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::invalid("empty matrix"));
    }
    let mut q = random_unit(n, opts.seed);
    let mut q_prev = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let max_steps = opts.lanczos_max_steps.min(n).max(1);
    let mut theta = 0.0;
    let mut bound = f64::INFINITY;
    for k in 1..=max_steps {
        a.mul_vec_into(&q, &mut w);
        if let Some(&b) = beta.last() {
            for i in 0..n {
                w[i] -= b * q_prev[i];
            }
        }
        let al = dot(&w, &q);
        for i in 0..n {
            w[i] -= al * q[i];
        }
        alpha.push(al);
        let b = norm(&w);
        let check = k % 5 == 0 || k == max_steps || b <= f64::EPSILON * a.max_abs();
        if check {
            theta = tridiagonal_max(&alpha, &beta);
            let s_k = ritz_last_component(&alpha, &beta, theta);
            bound = b * s_k.abs() / theta.abs().max(f64::MIN_POSITIVE);
            if bound <= opts.lanczos_tol || b <= f64::EPSILON * a.max_abs() {
                return Ok(EigenEstimate {
                    value: theta,
                    iterations: k,
                    relative_bound: bound,
                    converged: true,
                });
            }
        }
        beta.push(b);
        std::mem::swap(&mut q_prev, &mut q);
        for i in 0..n {
            q[i] = w[i] / b;
        }
    }
    Ok(EigenEstimate {
        value: theta,
        iterations: max_steps,
        relative_bound: bound,
        converged: false,
    })
}

/// Smallest eigenvalue by inverse iteration on a Cholesky factor.
pub fn lambda_min_inverse_iteration(
    a: &CsrMatrix,
    factor: &SkylineCholesky,
    opts: &SpectralOptions,
) -> Result<EigenEstimate> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::invalid("empty matrix"));
    }
    let mut x = random_unit(n, opts.seed.wrapping_add(1));
    let mut ax = vec![0.0; n];
    let mut rho_prev = f64::INFINITY;
    for it in 1..=opts.inverse_max_iter {
        factor.solve_in_place(&mut x);
        let nrm = norm(&x);
        x.iter_mut().for_each(|v| *v /= nrm);
        a.mul_vec_into(&x, &mut ax);
        let rho = dot(&x, &ax);
        if (rho - rho_prev).abs() <= opts.inverse_tol * rho.abs() {
            let res: f64 = ax
                .iter()
                .zip(&x)
                .map(|(p, q)| (p - rho * q).powi(2))
                .sum::<f64>()
                .sqrt();
            return Ok(EigenEstimate {
                value: rho,
                iterations: it,
                relative_bound: res / rho,
                converged: true,
            });
        }
        rho_prev = rho;
    }
    Ok(EigenEstimate {
        value: rho_prev,
        iterations: opts.inverse_max_iter,
        relative_bound: f64::INFINITY,
        converged: false,
    })
}

/// Extreme eigenvalues of an SPD matrix. Fails with `NotSpd` if the
/// Cholesky factorization breaks down.
pub fn condition_estimate(a: &CsrMatrix, opts: &SpectralOptions) -> Result<SpectralEstimate> {
    let factor = SkylineCholesky::factor(a)?;
    let lambda_min = lambda_min_inverse_iteration(a, &factor, opts)?;
    let lambda_max = lambda_max_lanczos(a, opts)?;
    if !(lambda_min.value > 0.0) {
        return Err(Error::NotSpd(format!(
            "lambda_min = {:e}",
            lambda_min.value
        )));
    }
    Ok(SpectralEstimate {
        lambda_min,
        lambda_max,
    })
}
