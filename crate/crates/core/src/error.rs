use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("matrix is not symmetric (max |a_ij - a_ji| = {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("eigensolver did not converge after {0} sweeps")]
    EigNoConvergence(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular alternation system at iteration {iteration}")]
    SingularSystem { iteration: usize },

    #[error("residual has no sign change in bracket [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("remez did not converge in {iterations} iterations (last movement {movement:e}, levelled error {levelled_error:e})")]
    RemezNoConvergence {
        iterations: usize,
        movement: f64,
        levelled_error: f64,
    },

    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("singular constraint operator: {0}")]
    SingularConstraints(String),

    #[error("ADMM diverged at iteration {iteration} (residual {residual:e})")]
    Diverged {
        iteration: usize,
        residual: f64,
        trace: Box<crate::sdp::SolveTrace>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_stage(self, stage: usize) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
