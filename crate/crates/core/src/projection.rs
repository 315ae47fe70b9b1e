//! Run-time PSD projection through GEMMs only.
//!
//! `X` is rescaled by a Lanczos bound on its spectral norm, pushed through the
//! sign chain in the configured precision, and reassembled as
//! `lambda * 0.5 * X0 (I + X_T)`.

use serde::{Deserialize, Serialize};

use crate::densemat::{gemm, round_to_precision, symmetrize, Matrix, PrecisionMode, SymmetricMatrix};
use crate::design::{CompositeFilter, Provenance};
use crate::error::{Error, Result};
use crate::spectral::{spectral_norm_upper_bound, DEFAULT_LANCZOS_STEPS};

/// Rescaling applied to the iterate after chain stages to keep rounding from
/// pushing eigenvalues past the filter's stable range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stabilization {
    #[default]
    None,
    /// Multiply by `1/1.01` after every stage that feeds another stage.
    HalfStyle,
    /// Multiply by `1/1.001` after each of the first eight stages.
    SingleStyle,
}

impl Stabilization {
    /// Factor applied after stage `t` (zero-based) of `stages`, if any.
    ///
    /// The half-style shrink is skipped after the last stage: there it would
    /// only scale the sign estimate itself down by one percent.
    pub fn factor_after(self, t: usize, stages: usize) -> Option<f64> {
        match self {
            Stabilization::None => None,
            Stabilization::HalfStyle => (t + 1 < stages).then_some(1.0 / 1.01),
            Stabilization::SingleStyle => (t < 8).then_some(1.0 / 1.001),
        }
    }
}

impl std::str::FromStr for Stabilization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "none" => Ok(Stabilization::None),
            "half" | "half_style" => Ok(Stabilization::HalfStyle),
            "single" | "single_style" => Ok(Stabilization::SingleStyle),
            other => Err(Error::InvalidArgument(format!("unknown stabilization '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionConfig {
    pub filter: CompositeFilter,
    pub mode: PrecisionMode,
    pub stabilization: Stabilization,
    pub lanczos_steps: usize,
    pub seed: u64,
    /// Skips Lanczos and rescales by this value instead.
    pub lambda_override: Option<f64>,
}

impl ProjectionConfig {
    /// `mode` with its customary stabilization: half style for binary16,
    /// single style for binary32, none for f64.
    pub fn new(filter: CompositeFilter, mode: PrecisionMode) -> Self {
        let stabilization = match mode.tag() {
            crate::densemat::Precision::F16Emu => Stabilization::HalfStyle,
            crate::densemat::Precision::F32 => Stabilization::SingleStyle,
            crate::densemat::Precision::F64 => Stabilization::None,
        };
        ProjectionConfig {
            filter,
            mode,
            stabilization,
            lanczos_steps: DEFAULT_LANCZOS_STEPS,
            seed: 0,
            lambda_override: None,
        }
    }

    pub fn half(filter: CompositeFilter) -> Self {
        Self::new(filter, PrecisionMode::F16_EMU)
    }

    pub fn single(filter: CompositeFilter) -> Self {
        Self::new(filter, PrecisionMode::F32)
    }

    pub fn f64(filter: CompositeFilter) -> Self {
        Self::new(filter, PrecisionMode::F64)
    }

    pub fn with_stabilization(mut self, stabilization: Stabilization) -> Self {
        self.stabilization = stabilization;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub lambda_tilde: f64,
    pub gemm_count: usize,
    /// A binary16 rounding saturated somewhere in the pipeline.
    pub overflow_flag: bool,
    /// `max |x_ij|` of the iterate after each stage.
    pub stage_norms: Vec<f64>,
}

/// GEMMs needed by a chain plus the final reconstruction: `(d+1)/2` per
/// stage of degree `d > 1`, none for a linear stage (a scalar multiple).
pub fn gemm_count_of(filter: &CompositeFilter) -> usize {
    filter
        .degrees()
        .iter()
        .map(|&d| if d > 1 { d.div_ceil(2) } else { 0 })
        .sum::<usize>()
        + 1
}

/// `iterations` stages of `1.5 x - 0.5 x^3`.
pub fn newton_schulz_filter(iterations: usize) -> Result<CompositeFilter> {
    if iterations == 0 {
        return Err(Error::InvalidArgument(
            "newton-schulz needs at least one iteration".into(),
        ));
    }
    let rows = vec![vec![1.5, -0.5]; iterations];
    let mut filter = CompositeFilter::from_coefficients(&rows, 0.5, Provenance::NewtonSchulz)?;
    filter.epsilon = half_gain_point(&filter);
    Ok(filter)
}

/// Newton-Schulz has no design interval; its `epsilon` records the input at
/// which the chain output reaches `1/2`, a comparable transition width.
fn half_gain_point(filter: &CompositeFilter) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if filter.sign_chain(mid) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Runs the sign chain on `x0` (eigenvalues assumed in `[-1, 1]`) in the
/// configured precision. Returns `X_T` unsymmetrized.
pub fn apply_sign_chain(x0: &SymmetricMatrix, config: &ProjectionConfig) -> Result<(Matrix, ProjectionReport)> {
    let mode = config.mode;
    let n = x0.n();
    let start = round_to_precision(x0.as_matrix(), mode);
    let mut x = start.matrix;
    let mut overflow = start.overflow;
    let mut gemms = 0;
    let mut stage_norms = Vec::with_capacity(config.filter.len());
    for (t, stage) in config.filter.stages.iter().enumerate() {
        let c = stage.coeffs();
        let run = || -> Result<(Matrix, bool, usize)> {
            if c.len() == 1 {
                let r = round_to_precision(&x.scale(c[0]), mode);
                return Ok((r.matrix, r.overflow, 0));
            }
            let mut overflow = false;
            let mut used = 0;
            // p = c1 I + c3 X^2 + c5 X^4 + ..., then X p
            let x2 = gemm(&x, &x, mode)?;
            used += 1;
            overflow |= x2.overflow;
            let x2 = x2.matrix;
            let mut p = Matrix::identity(n).scale(c[0]);
            p.axpy(c[1], &x2);
            let mut power = x2.clone();
            for &cj in &c[2..] {
                let next = gemm(&power, &x2, mode)?;
                used += 1;
                overflow |= next.overflow;
                power = next.matrix;
                p.axpy(cj, &power);
            }
            let p = round_to_precision(&p, mode);
            overflow |= p.overflow;
            let out = gemm(&x, &p.matrix, mode)?;
            used += 1;
            Ok((out.matrix, overflow | out.overflow, used))
        };
        let (mut next, o, used) = run().map_err(|e| e.at_stage(t))?;
        overflow |= o;
        gemms += used;
        if let Some(f) = config.stabilization.factor_after(t, config.filter.len()) {
            let r = round_to_precision(&next.scale(f), mode);
            overflow |= r.overflow;
            next = r.matrix;
        }
        if !next.is_finite() {
            return Err(Error::NonFinite("sign chain iterate".into()).at_stage(t));
        }
        stage_norms.push(next.max_abs());
        x = next;
    }
    Ok((
        x,
        ProjectionReport {
            lambda_tilde: 1.0,
            gemm_count: gemms,
            overflow_flag: overflow,
            stage_norms,
        },
    ))
}

/// Approximate projection of `x` onto the PSD cone.
///
/// The zero matrix short-circuits to zero with no GEMMs, since its rescaling
/// is undefined.
pub fn project_psd(x: &SymmetricMatrix, config: &ProjectionConfig) -> Result<(SymmetricMatrix, ProjectionReport)> {
    let lambda = match config.lambda_override {
        Some(l) if l > 0.0 && l.is_finite() => l,
        Some(l) => {
            return Err(Error::InvalidArgument(format!(
                "lambda override must be positive, got {l}"
            )))
        }
        None => spectral_norm_upper_bound(x, config.lanczos_steps, config.seed)?.lambda_tilde,
    };
    if lambda == 0.0 {
        return Ok((
            SymmetricMatrix::zeros(x.n()),
            ProjectionReport {
                lambda_tilde: 0.0,
                gemm_count: 0,
                overflow_flag: false,
                stage_norms: Vec::new(),
            },
        ));
    }
    let x0 = round_to_precision(&x.as_matrix().scale(1.0 / lambda), config.mode);
    // exact symmetry survives elementwise scaling and rounding
    let x0 = SymmetricMatrix::new(x0.matrix)?;
    let (xt, mut report) = apply_sign_chain(&x0, config)?;
    let mut i_plus = xt;
    i_plus.add_diag(1.0);
    let i_plus = round_to_precision(&i_plus, config.mode);
    let prod = gemm(x0.as_matrix(), &i_plus.matrix, config.mode)?;
    report.gemm_count += 1;
    report.overflow_flag |= i_plus.overflow | prod.overflow;
    report.lambda_tilde = lambda;
    let out = symmetrize(&prod.matrix.scale(0.5 * lambda))?;
    Ok((out, report))
}
