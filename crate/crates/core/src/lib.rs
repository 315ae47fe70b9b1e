//! Factorization-free projection onto the positive semidefinite cone.
//!
//! Composite odd-polynomial filters approximate the sign function on
//! `[-1, 1]`; applied to a rescaled symmetric matrix through GEMMs only they
//! yield `X_+ ~ 0.5 X (I + sign(X))`. The crate covers filter design
//! (sequential Remez), gradient refinement, error certification, spectral
//! norm estimation, the run-time projection, and an ADMM SDP solver that uses
//! the projection as a warm-start backend.

pub mod bench;
pub mod datasets;
pub mod densemat;
pub mod design;
pub mod error;
pub mod golden;
pub mod projection;
pub mod refine;
pub mod sdp;
mod small;
pub mod spectral;

pub use error::{Error, Result};
