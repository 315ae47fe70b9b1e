use std::cell::RefCell;
use std::ops::{AddAssign, Mul};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use half::f16;

use super::matrix::Matrix;
use super::precision::{round_to_precision, Precision, PrecisionMode};
use crate::error::{Error, Result};

const BLOCK: usize = 64;

thread_local! {
    static ACTIVE_COUNTERS: RefCell<Vec<Arc<AtomicUsize>>> = const { RefCell::new(Vec::new()) };
}

/// Counts GEMM calls made on the current thread while installed.
///
/// Counters nest: every installed counter on the thread sees every GEMM.
/// Matrix-vector products are never counted.
#[derive(Debug, Clone, Default)]
pub struct GemmCounter {
    count: Arc<AtomicUsize>,
}

impl GemmCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }

    /// Installs the counter until the returned guard is dropped.
    pub fn install(&self) -> GemmCounterGuard {
        ACTIVE_COUNTERS.with(|c| c.borrow_mut().push(Arc::clone(&self.count)));
        GemmCounterGuard {
            count: Arc::clone(&self.count),
        }
    }
}

#[must_use = "the counter is uninstalled when the guard is dropped"]
pub struct GemmCounterGuard {
    count: Arc<AtomicUsize>,
}

impl Drop for GemmCounterGuard {
    fn drop(&mut self) {
        ACTIVE_COUNTERS.with(|c| {
            let mut stack = c.borrow_mut();
            if let Some(pos) = stack.iter().rposition(|a| Arc::ptr_eq(a, &self.count)) {
                stack.remove(pos);
            }
        });
    }
}

fn record_gemm() {
    ACTIVE_COUNTERS.with(|c| {
        for counter in c.borrow().iter() {
            counter.fetch_add(1, Ordering::Relaxed);
        }
    });
}

/// Output of a precision-emulated product.
#[derive(Debug, Clone)]
pub struct GemmProduct {
    pub matrix: Matrix,
    /// Set when a binary16 rounding saturated.
    pub overflow: bool,
}

/// `A * B` with inputs rounded to the storage width of `mode`, accumulation in
/// `mode.accumulate()` width, and the result rounded back to storage width.
pub fn gemm(a: &Matrix, b: &Matrix, mode: PrecisionMode) -> Result<GemmProduct> {
    if a.cols() != b.rows() {
        return Err(Error::DimensionMismatch(format!(
            "gemm {}x{} * {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite("gemm input".into()));
    }
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let product = match mode.tag() {
        Precision::F64 => GemmProduct {
            matrix: Matrix::from_vec(m, n, blocked_mul(a.as_slice(), b.as_slice(), m, k, n))?,
            overflow: false,
        },
        Precision::F32 => {
            let a32: Vec<f32> = a.as_slice().iter().map(|&v| v as f32).collect();
            let b32: Vec<f32> = b.as_slice().iter().map(|&v| v as f32).collect();
            let c = blocked_mul(&a32, &b32, m, k, n);
            GemmProduct {
                matrix: Matrix::from_vec(m, n, c.into_iter().map(f64::from).collect())?,
                overflow: false,
            }
        }
        Precision::F16Emu => {
            let ra = round_to_precision(a, mode);
            let rb = round_to_precision(b, mode);
            // binary16 values are exact in binary32
            let a32: Vec<f32> = ra.matrix.as_slice().iter().map(|&v| v as f32).collect();
            let b32: Vec<f32> = rb.matrix.as_slice().iter().map(|&v| v as f32).collect();
            let c = blocked_mul(&a32, &b32, m, k, n);
            let mut overflow = ra.overflow || rb.overflow;
            let data = c
                .into_iter()
                .map(|v| {
                    let h = f16::from_f32(v);
                    if h.is_infinite() && v.is_finite() {
                        overflow = true;
                        super::precision::F16_MAX.copysign(v as f64)
                    } else {
                        h.to_f64()
                    }
                })
                .collect();
            GemmProduct {
                matrix: Matrix::from_vec(m, n, data)?,
                overflow,
            }
        }
    };
    record_gemm();
    if !product.matrix.is_finite() {
        return Err(Error::NonFinite("gemm output".into()));
    }
    Ok(product)
}

/// Cache-blocked i-k-j product, accumulating in `T`.
fn blocked_mul<T>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T>
where
    T: Copy + Default + Mul<Output = T> + AddAssign,
{
    let mut c = vec![T::default(); m * n];
    for kk in (0..k).step_by(BLOCK) {
        let k_end = (kk + BLOCK).min(k);
        for jj in (0..n).step_by(BLOCK) {
            let j_end = (jj + BLOCK).min(n);
            for i in 0..m {
                let crow = &mut c[i * n + jj..i * n + j_end];
                for p in kk..k_end {
                    let aip = a[i * k + p];
                    let brow = &b[p * n + jj..p * n + j_end];
                    for (cv, &bv) in crow.iter_mut().zip(brow) {
                        *cv += aip * bv;
                    }
                }
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut c = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for p in 0..a.cols() {
                    s += a[(i, p)] * b[(p, j)];
                }
                c[(i, j)] = s;
            }
        }
        c
    }

    #[test]
    fn identity_is_neutral_in_all_modes() {
        let a = Matrix::from_rows(&[vec![0.5, -1.0, 2.0], vec![0.25, 3.0, -0.125], vec![1.0, 0.0, 4.0]]).unwrap();
        let id = Matrix::identity(3);
        for mode in [PrecisionMode::F64, PrecisionMode::F32, PrecisionMode::F16_EMU] {
            assert_eq!(gemm(&id, &a, mode).unwrap().matrix, a);
        }
    }

    #[test]
    fn diagonal_product() {
        let a = Matrix::from_diag(&[2.0, 3.0]);
        let b = Matrix::from_diag(&[5.0, 7.0]);
        let c = gemm(&a, &b, PrecisionMode::F64).unwrap().matrix;
        assert_eq!(c, Matrix::from_diag(&[10.0, 21.0]));
    }

    #[test]
    fn f64_matches_naive_reference() {
        let n = 70;
        let a = Matrix::from_vec(n, n, (0..n * n).map(|i| ((i * 37 % 101) as f64 - 50.0) / 7.0).collect()).unwrap();
        let b = Matrix::from_vec(n, n, (0..n * n).map(|i| ((i * 53 % 89) as f64 - 44.0) / 3.0).collect()).unwrap();
        let c = gemm(&a, &b, PrecisionMode::F64).unwrap().matrix;
        let r = naive(&a, &b);
        let tol = 1e-13 * a.frobenius_norm() * b.frobenius_norm();
        for (x, y) in c.as_slice().iter().zip(r.as_slice()) {
            assert!((x - y).abs() <= tol);
        }
    }

    #[test]
    fn dimension_and_finiteness_errors() {
        let a = Matrix::zeros(2, 3);
        assert!(matches!(
            gemm(&a, &a, PrecisionMode::F64),
            Err(Error::DimensionMismatch(_))
        ));
        let mut b = Matrix::zeros(2, 2);
        b[(0, 1)] = f64::INFINITY;
        assert!(matches!(gemm(&b, &b, PrecisionMode::F64), Err(Error::NonFinite(_))));
    }

    #[test]
    fn counters_nest_and_uninstall() {
        let outer = GemmCounter::new();
        let a = Matrix::identity(2);
        {
            let _g = outer.install();
            gemm(&a, &a, PrecisionMode::F64).unwrap();
            let inner = GemmCounter::new();
            {
                let _h = inner.install();
                gemm(&a, &a, PrecisionMode::F32).unwrap();
            }
            assert_eq!(inner.count(), 1);
        }
        gemm(&a, &a, PrecisionMode::F64).unwrap();
        assert_eq!(outer.count(), 2);
    }
}
