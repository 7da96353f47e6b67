use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("matrix is not unitary (max |U^dag U - I| = {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("states do not share a layout")]
    LayoutMismatch,

    #[error(
        "dense representation needs {size} basis states (limit {limit}); \
         use success_projection_recording instead of materializing the translated state"
    )]
    TooLarge { size: u64, limit: u64 },

    #[error("invalid register: {0}")]
    InvalidRegister(String),

    #[error("projector class {class} is not defined in {mode} mode")]
    ClassModeMismatch { class: String, mode: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid algorithm: {0}")]
    InvalidAlgorithm(String),

    #[error("no prime found in [{from}, {to})")]
    NoPrime { from: u64, to: u64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
