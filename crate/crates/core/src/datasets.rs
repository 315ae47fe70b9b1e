//! Seeded synthetic symmetric matrices for benchmarks and tests.
//!
//! Each family stands in for a kind of dense test matrix:
//! - `GaussianSym`: generic well-spread spectrum.
//! - `HaarSpectrum`: a prescribed spectrum in a Haar-random basis.
//! - `DominantPlusTiny`: one large eigenvalue over many small nonzero ones,
//!   the case where rescaling by `||X||_2` pushes most of the spectrum into
//!   the filter's transition band.
//! - `ClusteredPm1`: eigenvalues bunched near `+1` and `-1`, easy for filters.
//! - `RankDeficient`: half the spectrum exactly zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::densemat::{Matrix, SymmetricMatrix};
use crate::error::{Error, Result};

/// Eigenvalue recipe for `HaarSpectrum`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Spectrum {
    /// Uniform magnitudes in `[gap, 1]` with random signs.
    UniformGap { gap: f64 },
    /// Uniform in `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// Exactly these values; length must equal `n`.
    Explicit { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DatasetFamily {
    GaussianSym,
    HaarSpectrum {
        spectrum: Spectrum,
    },
    DominantPlusTiny,
    #[serde(rename = "clustered_pm1")]
    ClusteredPm1,
    RankDeficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    #[serde(flatten)]
    pub family: DatasetFamily,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(family: DatasetFamily, n: usize, seed: u64) -> Self {
        DatasetSpec { family, n, seed }
    }

    /// Short label used in benchmark output.
    pub fn label(&self) -> String {
        let name = match &self.family {
            DatasetFamily::GaussianSym => "gaussian_sym",
            DatasetFamily::HaarSpectrum { .. } => "haar_spectrum",
            DatasetFamily::DominantPlusTiny => "dominant_plus_tiny",
            DatasetFamily::ClusteredPm1 => "clustered_pm1",
            DatasetFamily::RankDeficient => "rank_deficient",
        };
        name.to_string()
    }

    pub fn generate(&self) -> Result<SymmetricMatrix> {
        generate(self)
    }
}

pub fn generate(spec: &DatasetSpec) -> Result<SymmetricMatrix> {
    let n = spec.n;
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "dataset size must be at least 2, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match &spec.family {
        DatasetFamily::GaussianSym => {
            let g = gaussian(n, &mut rng);
            let mut x = Matrix::zeros(n, n);
            let s = 1.0 / (2.0 * n as f64).sqrt();
            for i in 0..n {
                for j in 0..n {
                    x[(i, j)] = s * (g[(i, j)] + g[(j, i)]);
                }
            }
            SymmetricMatrix::new(x)
        }
        DatasetFamily::HaarSpectrum { spectrum } => {
            let values = match spectrum {
                Spectrum::UniformGap { gap } => {
                    if !(*gap >= 0.0 && *gap <= 1.0) {
                        return Err(Error::InvalidArgument(format!(
                            "spectral gap must lie in [0, 1], got {gap}"
                        )));
                    }
                    (0..n)
                        .map(|_| {
                            let m = rng.random_range(*gap..=1.0);
                            if rng.random::<bool>() {
                                m
                            } else {
                                -m
                            }
                        })
                        .collect()
                }
                Spectrum::Uniform { lo, hi } => {
                    if !(lo <= hi) {
                        return Err(Error::InvalidArgument(format!("empty spectrum range [{lo}, {hi}]")));
                    }
                    (0..n).map(|_| rng.random_range(*lo..=*hi)).collect()
                }
                Spectrum::Explicit { values } => {
                    if values.len() != n {
                        return Err(Error::InvalidArgument(format!(
                            "{} eigenvalues given for n = {n}",
                            values.len()
                        )));
                    }
                    values.clone()
                }
            };
            Ok(with_spectrum(&values, &mut rng))
        }
        DatasetFamily::DominantPlusTiny => {
            let mut values = vec![1.0];
            values.extend((1..n).map(|_| {
                let m = 10f64.powf(rng.random_range(-5.0..-2.0));
                if rng.random::<bool>() {
                    m
                } else {
                    -m
                }
            }));
            Ok(with_spectrum(&values, &mut rng))
        }
        DatasetFamily::ClusteredPm1 => {
            let values: Vec<f64> = (0..n)
                .map(|i| {
                    let m = 1.0 - rng.random_range(0.0..0.05);
                    if i % 2 == 0 {
                        m
                    } else {
                        -m
                    }
                })
                .collect();
            Ok(with_spectrum(&values, &mut rng))
        }
        DatasetFamily::RankDeficient => {
            let values: Vec<f64> = (0..n)
                .map(|i| if i < n / 2 { rng.random_range(-1.0..=1.0) } else { 0.0 })
                .collect();
            Ok(with_spectrum(&values, &mut rng))
        }
    }
}

/// `Q diag(values) Q'` with `Q` Haar-distributed.
pub fn with_spectrum(values: &[f64], rng: &mut ChaCha8Rng) -> SymmetricMatrix {
    let q = haar_orthogonal(values.len(), rng);
    SymmetricMatrix::from_diag(values).conjugate(&q)
}

/// Haar-distributed orthogonal matrix: Householder QR of a Gaussian matrix
/// with the columns of `Q` flipped so that `R` has a positive diagonal.
pub fn haar_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut a = gaussian(n, rng);
    let mut q = Matrix::identity(n);
    let mut signs = vec![1.0; n];
    for k in 0..n {
        let norm: f64 = (k..n).map(|i| a[(i, k)] * a[(i, k)]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[(k, k)] > 0.0 { -norm } else { norm };
        // R_kk = alpha
        signs[k] = alpha.signum();
        let mut v: Vec<f64> = (k..n).map(|i| a[(i, k)]).collect();
        v[0] -= alpha;
        let vn: f64 = v.iter().map(|x| x * x).sum();
        if vn == 0.0 {
            continue;
        }
        for j in k..n {
            let d: f64 = (k..n).map(|i| v[i - k] * a[(i, j)]).sum::<f64>() * 2.0 / vn;
            for i in k..n {
                a[(i, j)] -= d * v[i - k];
            }
        }
        // accumulate Q = H_1 H_2 ... by applying H_k on the right
        for r in 0..n {
            let d: f64 = (k..n).map(|i| q[(r, i)] * v[i - k]).sum::<f64>() * 2.0 / vn;
            for i in k..n {
                q[(r, i)] -= d * v[i - k];
            }
        }
    }
    for j in 0..n {
        if signs[j] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

fn gaussian(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let data = (0..n * n).map(|_| StandardNormal.sample(rng)).collect();
    Matrix::from_vec(n, n, data).expect("n x n buffer")
}
