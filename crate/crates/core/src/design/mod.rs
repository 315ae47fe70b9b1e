//! Stage-I filter design: Remez exchange and the sequential composite design.

mod composite;
mod poly;
mod remez;

pub use composite::{
    interval_image, sequential_remez, sequential_remez_report, CompositeFilter, Provenance, SequentialDesign,
};
pub use poly::{Interval, OddPolynomial, MAX_DEGREE};
pub use remez::{
    equioscillation_check, osculating_limit, remez, EquioscillationReport, LocalResidual, RemezResult,
    CHECK_GRID_POINTS, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
