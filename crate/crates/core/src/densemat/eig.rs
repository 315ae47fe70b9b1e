//! Symmetric eigensolver used as the f64 ground-truth oracle.
//!
//! Cyclic Jacobi rotations for `n <= JACOBI_MAX_N`, Householder
//! tridiagonalization followed by implicit QL above that. Both paths are
//! checked against the same reconstruction and orthogonality invariants.

use super::matrix::{naive_mul, symmetrize_unchecked, Matrix, SymmetricMatrix};
use crate::error::{Error, Result};

pub const JACOBI_MAX_N: usize = 128;
const MAX_JACOBI_SWEEPS: usize = 100;
const MAX_QL_ITERATIONS: usize = 60;

/// Eigenvectors as the columns of `vectors`, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub vectors: Matrix,
    pub values: Vec<f64>,
}

impl EigenDecomposition {
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymmetricMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let w = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= w;
            }
        }
        symmetrize_unchecked(&naive_mul(&scaled, &self.vectors.transpose()))
    }

    pub fn reconstruct(&self) -> SymmetricMatrix {
        self.reconstruct_with(|v| v)
    }

    pub fn spectral_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }
}

pub fn sym_eig(x: &SymmetricMatrix) -> Result<EigenDecomposition> {
    if !x.as_matrix().is_finite() {
        return Err(Error::NonFinite("sym_eig input".into()));
    }
    let (values, vectors) = if x.n() <= JACOBI_MAX_N {
        jacobi(x.as_matrix())?
    } else {
        tridiagonal_ql(x.as_matrix())?
    };
    Ok(sort_descending(values, vectors))
}

/// Eigenvalues only, descending.
pub fn sym_eigenvalues(x: &SymmetricMatrix) -> Result<Vec<f64>> {
    Ok(sym_eig(x)?.values)
}

/// Nearest PSD matrix in Frobenius norm: negative eigenvalues are zeroed.
pub fn eig_project(x: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    Ok(sym_eig(x)?.reconstruct_with(|v| v.max(0.0)))
}

/// `||candidate - P(X)||_F / ||P(X)||_F` with `P` the exact projection, or the
/// absolute error `||candidate||_F` when `P(X) = 0`.
pub fn rel_error(candidate: &SymmetricMatrix, x: &SymmetricMatrix) -> Result<f64> {
    let reference = eig_project(x)?;
    rel_error_against(candidate, &reference)
}

/// Same metric with a precomputed reference projection.
pub fn rel_error_against(candidate: &SymmetricMatrix, reference: &SymmetricMatrix) -> Result<f64> {
    if candidate.n() != reference.n() {
        return Err(Error::DimensionMismatch(format!(
            "rel_error {} vs {}",
            candidate.n(),
            reference.n()
        )));
    }
    let denom = reference.frobenius_norm();
    let diff = candidate.sub(reference).frobenius_norm();
    if denom == 0.0 {
        Ok(candidate.frobenius_norm())
    } else {
        Ok(diff / denom)
    }
}

fn sort_descending(values: Vec<f64>, vectors: Matrix) -> EigenDecomposition {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut sorted = Matrix::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            sorted[(i, new_j)] = vectors[(i, old_j)];
        }
    }
    EigenDecomposition {
        vectors: sorted,
        values: order.iter().map(|&j| values[j]).collect(),
    }
}

fn jacobi(x: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = x.rows();
    let mut a = x.clone();
    let mut v = Matrix::identity(n);
    let scale = x.frobenius_norm();
    if scale == 0.0 {
        return Ok((vec![0.0; n], v));
    }
    let tol = (f64::EPSILON * 1e-2 * scale).powi(2);

    for _sweep in 0..MAX_JACOBI_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off <= tol {
            return Ok(((0..n).map(|i| a[(i, i)]).collect(), v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / t.hypot(1.0);
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
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::EigNoConvergence(MAX_JACOBI_SWEEPS))
}

/// Householder reduction to tridiagonal form then implicit QL with shifts
/// (the EISPACK tred2/tql2 pair).
fn tridiagonal_ql(x: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = x.rows();
    let mut v = x.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];

    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for item in e.iter_mut().take(i) {
                *item = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n.saturating_sub(1) {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;

    // implicit QL
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::EigNoConvergence(MAX_QL_ITERATIONS));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().skip(l + 2) {
                    *item -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[(k, i + 1)];
                        v[(k, i + 1)] = s * v[(k, i)] + c * h;
                        v[(k, i)] = c * v[(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok((d, v))
}
