//! Lanczos on `X^2` and the Ritz-residual bound on `||X||_2` used to rescale
//! a matrix into `[-1, 1]` before the sign chain.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::densemat::{sym_eig, SymmetricMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_LANCZOS_STEPS: usize = 20;

/// Largest Ritz pair of `X^2` from a Lanczos run.
#[derive(Debug, Clone, PartialEq)]
pub struct RitzPair {
    /// Ritz value of `X^2`, clamped at zero.
    pub sigma: f64,
    /// Unit Ritz vector in `R^n`.
    pub q: Vec<f64>,
    /// Krylov dimension actually built.
    pub steps: usize,
    /// The recurrence hit an invariant subspace before `steps` were requested.
    pub breakdown: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBound {
    pub lambda_tilde: f64,
    pub sigma: f64,
    /// `||X^2 q - sigma q||_2`.
    pub residual: f64,
    pub lanczos_steps: usize,
    pub breakdown: bool,
}

/// Runs `steps` Lanczos iterations on `v -> X (X v)` with full
/// reorthogonalization, starting from a seeded Gaussian vector.
pub fn lanczos_x2(x: &SymmetricMatrix, steps: usize, seed: u64) -> Result<RitzPair> {
    Ok(lanczos_x2_with_basis(x, steps, seed)?.0)
}

/// As [`lanczos_x2`], also returning the orthonormal Krylov basis.
pub fn lanczos_x2_with_basis(x: &SymmetricMatrix, steps: usize, seed: u64) -> Result<(RitzPair, Vec<Vec<f64>>)> {
    if steps == 0 {
        return Err(Error::InvalidArgument("lanczos needs at least one step".into()));
    }
    if !x.as_matrix().is_finite() {
        return Err(Error::NonFinite("lanczos input".into()));
    }
    let n = x.n();
    let fro = x.frobenius_norm();
    // the operator is X^2, so its scale is ||X||_F^2
    let tiny = 1e-14 * fro * fro;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|e| *e /= nv);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut breakdown = false;
    for j in 0..steps {
        let mut w = x.matvec(&x.matvec(&v));
        let a = dot(&v, &w);
        basis.push(v);
        alpha.push(a);
        // two Gram-Schmidt passes against the whole basis
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                axpy(-c, b, &mut w);
            }
        }
        let bj = norm(&w);
        if j + 1 == steps {
            break;
        }
        if bj <= tiny || basis.len() == n {
            breakdown = true;
            break;
        }
        beta.push(bj);
        v = w.into_iter().map(|e| e / bj).collect();
    }

    let k = alpha.len();
    let mut t = vec![vec![0.0; k]; k];
    for i in 0..k {
        t[i][i] = alpha[i];
        if i + 1 < k {
            t[i][i + 1] = beta[i];
            t[i + 1][i] = beta[i];
        }
    }
    let eig = sym_eig(&SymmetricMatrix::from_rows(&t)?)?;
    let theta = eig.values[0];
    let mut q = vec![0.0; n];
    for (i, b) in basis.iter().enumerate() {
        axpy(eig.vectors[(i, 0)], b, &mut q);
    }
    let nq = norm(&q);
    q.iter_mut().for_each(|e| *e /= nq);
    let pair = RitzPair {
        sigma: theta.max(0.0),
        q,
        steps: k,
        breakdown,
    };
    Ok((pair, basis))
}

/// `sqrt(sigma + ||X^2 q - sigma q||_2)` for the largest Ritz pair of `X^2`.
///
/// Not a guaranteed bound: it holds when `sigma` is the Ritz value closest to
/// the top eigenvalue of `X^2`, which the tests check empirically.
pub fn spectral_norm_upper_bound(x: &SymmetricMatrix, steps: usize, seed: u64) -> Result<NormBound> {
    let pair = lanczos_x2(x, steps, seed)?;
    let mut r = x.matvec(&x.matvec(&pair.q));
    axpy(-pair.sigma, &pair.q, &mut r);
    let residual = norm(&r);
    Ok(NormBound {
        lambda_tilde: (pair.sigma + residual).sqrt(),
        sigma: pair.sigma,
        residual,
        lanczos_steps: pair.steps,
        breakdown: pair.breakdown,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_converges_in_three_steps() {
        let x = SymmetricMatrix::from_diag(&[3.0, 1.0, -2.0]);
        let p = lanczos_x2(&x, 3, 7).unwrap();
        assert!((p.sigma - 9.0).abs() < 1e-10);
        assert!((p.q[0].abs() - 1.0).abs() < 1e-10);
        let b = spectral_norm_upper_bound(&x, 3, 7).unwrap();
        assert!(b.lambda_tilde >= 3.0 && b.lambda_tilde <= 3.0 + 1e-8);
    }

    #[test]
    fn identity_and_zero() {
        let b = spectral_norm_upper_bound(&SymmetricMatrix::identity(5), 20, 1).unwrap();
        assert!((b.lambda_tilde - 1.0).abs() < 1e-10);
        let p = lanczos_x2(&SymmetricMatrix::zeros(4), 20, 1).unwrap();
        assert_eq!(p.sigma, 0.0);
        assert!(p.breakdown);
        assert!((norm(&p.q) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_steps_rejected() {
        assert!(lanczos_x2(&SymmetricMatrix::identity(2), 0, 0).is_err());
    }
}
