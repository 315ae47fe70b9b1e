//! Published coefficient sets, shipped with the crate.
//!
//! All four tables use degree-5 stages. The stage-I sets are what the
//! sequential design reproduces; the refined sets are the gradient-tuned
//! filters used by default for projection.

use crate::design::CompositeFilter;

pub const HALF_STAGE1_JSON: &str = include_str!("../data/half_stage1.json");
pub const HALF_REFINED_JSON: &str = include_str!("../data/half_refined.json");
pub const SINGLE_STAGE1_JSON: &str = include_str!("../data/single_stage1.json");
pub const SINGLE_REFINED_JSON: &str = include_str!("../data/single_refined.json");

fn parse(text: &str) -> CompositeFilter {
    CompositeFilter::from_json(text).expect("shipped coefficient file parses")
}

/// Seven-stage minimax design for half precision.
pub fn half_stage1() -> CompositeFilter {
    parse(HALF_STAGE1_JSON)
}

/// Refined seven-stage filter for half precision (22 GEMMs).
pub fn half_refined() -> CompositeFilter {
    parse(HALF_REFINED_JSON)
}

/// Ten-stage minimax design for single precision.
pub fn single_stage1() -> CompositeFilter {
    parse(SINGLE_STAGE1_JSON)
}

/// Refined ten-stage filter for single precision (31 GEMMs).
pub fn single_refined() -> CompositeFilter {
    parse(SINGLE_REFINED_JSON)
}
