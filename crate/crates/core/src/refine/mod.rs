//! Stage-II refinement of composite filters and error certification.

mod certificate;
mod eval;
mod grid;
mod kernel;
mod optimize;

pub use certificate::{
    e_float_full, e_float_grid, e_float_half_lines, filter_hash, ErrorCertificate, ErrorMode, FLOAT32_COUNT,
};
pub use eval::{composite_eval_scalar, loss_gradient, relu_error, relu_loss, sign_chain_scalar};
pub use grid::{GridScheme, SampleGrid, MIXED_LOG_FLOOR};
pub use optimize::{
    refine, refine_with_report, RefineConfig, RefineOutcome, Smoothing, DEFAULT_GRID_SIZE, DEFAULT_MAX_ITERS,
    DEFAULT_STEP,
};
