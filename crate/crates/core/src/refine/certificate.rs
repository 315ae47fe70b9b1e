//! Certified worst-case ReLU error over every binary32 value in `[-1, 1]`.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::eval::better;
use super::grid::SampleGrid;
use super::kernel::apply_stage;
use crate::design::CompositeFilter;

/// Bit pattern of `1.0f32`.
const ONE_BITS: u32 = 0x3F80_0000;
const SIGN_BIT: u32 = 0x8000_0000;
/// Work unit for the parallel enumeration.
const CHUNK: u32 = 1 << 16;

/// Finite binary32 values in `[-1, 1]`, with zero counted once.
pub const FLOAT32_COUNT: u64 = 2 * (ONE_BITS as u64 + 1) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorMode {
    FullFloat32Enumeration,
    Grid { size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCertificate {
    /// SHA-256 over stage degrees and coefficient bits.
    pub filter_hash: String,
    pub mode: ErrorMode,
    pub count: u64,
    pub e_value: f64,
    pub argmax_x: f64,
    pub wall_time_s: f64,
}

impl ErrorCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

/// Stable digest of a filter's coefficients.
pub fn filter_hash(filter: &CompositeFilter) -> String {
    let mut h = Sha256::new();
    h.update((filter.len() as u64).to_le_bytes());
    for stage in &filter.stages {
        h.update((stage.degree() as u64).to_le_bytes());
        for c in stage.coeffs() {
            h.update(c.to_bits().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Maximum ReLU error over every float32 in `[-1, 1]`. Both signs are
/// scanned: the error is not odd, so one half-line does not certify the other.
pub fn e_float_full(filter: &CompositeFilter) -> ErrorCertificate {
    let start = Instant::now();
    let (e, x, count) = enumerate_range(filter, 0, ONE_BITS, false);
    let (en, xn, countn) = enumerate_range(filter, 1, ONE_BITS, true);
    let (e_value, argmax_x) = if better(en, xn, e, x) { (en, xn) } else { (e, x) };
    ErrorCertificate {
        filter_hash: filter_hash(filter),
        mode: ErrorMode::FullFloat32Enumeration,
        count: count + countn,
        e_value,
        argmax_x,
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}

/// Maxima over the non-negative and the non-positive half-lines separately.
pub fn e_float_half_lines(filter: &CompositeFilter) -> ((f64, f64), (f64, f64)) {
    let (e, x, _) = enumerate_range(filter, 0, ONE_BITS, false);
    let (en, xn, _) = enumerate_range(filter, 0, ONE_BITS, true);
    ((e, x), (en, xn))
}

/// Same metric over the points of a sample grid.
pub fn e_float_grid(filter: &CompositeFilter, grid: &SampleGrid) -> ErrorCertificate {
    let start = Instant::now();
    let (e_value, argmax_x) = super::eval::relu_loss(filter, grid);
    ErrorCertificate {
        filter_hash: filter_hash(filter),
        mode: ErrorMode::Grid { size: grid.len() },
        count: grid.len() as u64,
        e_value,
        argmax_x,
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}

/// Scans magnitudes with bit patterns `lo..=hi`, negated when `negative`.
fn enumerate_range(filter: &CompositeFilter, lo: u32, hi: u32, negative: bool) -> (f64, f64, u64) {
    let coeffs: Vec<Vec<f64>> = filter.coefficient_rows();
    let n_chunks = (hi - lo) / CHUNK + 1;
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let a = lo + c * CHUNK;
            let b = a.saturating_add(CHUNK - 1).min(hi);
            scan_chunk(&coeffs, a, b, negative)
        })
        .reduce(
            || (f64::NEG_INFINITY, 0.0, 0),
            |p, q| {
                let (e, x) = if better(q.0, q.1, p.0, p.1) {
                    (q.0, q.1)
                } else {
                    (p.0, p.1)
                };
                (e, x, p.2 + q.2)
            },
        )
}

fn scan_chunk(coeffs: &[Vec<f64>], a: u32, b: u32, negative: bool) -> (f64, f64, u64) {
    const LANES: usize = 256;
    let sign = if negative { SIGN_BIT } else { 0 };
    let mut xs = [0.0f64; LANES];
    let mut ys = [0.0f64; LANES];
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut count = 0u64;
    let mut bits = a;
    loop {
        let n = ((b - bits) as usize + 1).min(LANES);
        for i in 0..n {
            let x = f32::from_bits((bits + i as u32) | sign) as f64;
            xs[i] = x;
            ys[i] = x;
        }
        for stage in coeffs {
            apply_stage(stage, &mut ys[..n]);
        }
        for i in 0..n {
            let x = xs[i];
            let e = (0.5 * x * (1.0 + ys[i]) - x.max(0.0)).abs();
            let e = if e.is_nan() { f64::INFINITY } else { e };
            if better(e, x, best.0, best.1) {
                best = (e, x);
            }
        }
        count += n as u64;
        if b - bits < LANES as u32 {
            break;
        }
        bits += LANES as u32;
    }
    (best.0, best.1, count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::Provenance;

    #[test]
    fn count_constant() {
        assert_eq!(FLOAT32_COUNT, 2_130_706_433);
    }

    #[test]
    fn stage_kernel_matches_horner() {
        let f = crate::golden::half_stage1();
        let rows = f.coefficient_rows();
        let mut ys = [0.3, -0.9, 1e-4, 0.0];
        let xs = ys;
        for r in &rows {
            apply_stage(r, &mut ys);
        }
        for (x, y) in xs.iter().zip(ys) {
            assert_eq!(f.sign_chain(*x), y);
        }
    }

    #[test]
    fn hash_tracks_coefficients() {
        let a = CompositeFilter::from_coefficients(&[vec![1.5, -0.5]], 0.1, Provenance::NewtonSchulz).unwrap();
        let mut b = a.clone();
        assert_eq!(filter_hash(&a), filter_hash(&b));
        b.stages[0].coeffs_mut()[0] = 1.5000000000000002;
        assert_ne!(filter_hash(&a), filter_hash(&b));
    }

    #[test]
    fn grid_certificate_of_identity() {
        let id = CompositeFilter::from_coefficients(&[vec![1.0]], 0.5, Provenance::UserSupplied).unwrap();
        let c = e_float_grid(&id, &SampleGrid::uniform(5).unwrap());
        assert!((c.e_value - 0.125).abs() < 1e-15);
        assert_eq!(c.argmax_x, 0.5);
    }
}
