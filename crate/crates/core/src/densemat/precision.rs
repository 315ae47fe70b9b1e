use half::f16;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;

/// Storage format of matrix entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F64,
    F32,
    #[serde(rename = "f16emu")]
    F16Emu,
}

/// Width used for GEMM accumulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Accumulate {
    F64,
    F32,
}

/// Storage format plus accumulation width. Half precision always accumulates
/// in single precision, modelling a tensor-core multiply-accumulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrecisionMode {
    tag: Precision,
    accumulate: Accumulate,
}

impl PrecisionMode {
    pub const F64: PrecisionMode = PrecisionMode {
        tag: Precision::F64,
        accumulate: Accumulate::F64,
    };
    pub const F32: PrecisionMode = PrecisionMode {
        tag: Precision::F32,
        accumulate: Accumulate::F32,
    };
    pub const F16_EMU: PrecisionMode = PrecisionMode {
        tag: Precision::F16Emu,
        accumulate: Accumulate::F32,
    };

    pub fn new(tag: Precision) -> Self {
        match tag {
            Precision::F64 => Self::F64,
            Precision::F32 => Self::F32,
            Precision::F16Emu => Self::F16_EMU,
        }
    }

    #[inline]
    pub fn tag(&self) -> Precision {
        self.tag
    }

    #[inline]
    pub fn accumulate(&self) -> Accumulate {
        self.accumulate
    }
}

impl std::str::FromStr for Precision {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f64" | "fp64" | "double" => Ok(Precision::F64),
            "f32" | "fp32" | "single" => Ok(Precision::F32),
            "f16emu" | "f16" | "fp16" | "half" => Ok(Precision::F16Emu),
            other => Err(crate::Error::InvalidArgument(format!(
                "unknown precision mode '{other}'"
            ))),
        }
    }
}

/// Largest finite binary16 value.
pub const F16_MAX: f64 = 65504.0;

/// Rounds one value to the storage width of `tag`. The flag reports binary16
/// overflow, in which case the value saturates to `±65504`.
#[inline]
pub fn round_scalar(x: f64, tag: Precision) -> (f64, bool) {
    match tag {
        Precision::F64 => (x, false),
        Precision::F32 => ((x as f32) as f64, false),
        Precision::F16Emu => {
            let h = f16::from_f64(x);
            if h.is_infinite() && x.is_finite() {
                (F16_MAX.copysign(x), true)
            } else {
                (h.to_f64(), false)
            }
        }
    }
}

/// Result of rounding a whole matrix.
#[derive(Debug, Clone)]
pub struct RoundedMatrix {
    pub matrix: Matrix,
    pub overflow: bool,
}

/// Rounds every entry to nearest-even in the storage width of `mode`.
pub fn round_to_precision(a: &Matrix, mode: PrecisionMode) -> RoundedMatrix {
    if mode.tag == Precision::F64 {
        return RoundedMatrix {
            matrix: a.clone(),
            overflow: false,
        };
    }
    let mut out = a.clone();
    let mut overflow = false;
    for v in out.as_mut_slice() {
        let (r, o) = round_scalar(*v, mode.tag);
        *v = r;
        overflow |= o;
    }
    RoundedMatrix { matrix: out, overflow }
}
