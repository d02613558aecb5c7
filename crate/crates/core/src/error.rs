use std::path::PathBuf;

/// Errors raised by the laboratory. Every variant is a precondition failure;
/// numerical-tolerance violations are reported, not raised.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("lattice enumeration exceeds the cap of {cap} contributing points")]
    EnumerationCap { cap: u64 },

    #[error("density has zero mass")]
    ZeroMass,

    #[error("lambda = {lambda} is below the largest single-cell mass {max_cell_mass}")]
    GridAtomicity { lambda: f64, max_cell_mass: f64 },

    #[error("subdivision exceeded the maximum depth {max_depth}")]
    MaxDepthExceeded { max_depth: u32 },

    #[error("cube with corner {corner:?} and side {side} is not aligned to the grid")]
    MisalignedCube { corner: Vec<f64>, side: f64 },

    #[error("grid cells are not cubic (cell sizes {0:?})")]
    NonCubicCells(Vec<f64>),

    #[error("requested {requested} orbitals but only {available} modes are representable")]
    Capacity { requested: usize, available: usize },

    #[error("orbitals are not orthonormal: max deviation {deviation:e}")]
    NotOrthonormal { deviation: f64 },

    #[error("occupation {value} at index {index} is outside [0, 1]")]
    Occupation { index: usize, value: f64 },

    #[error("malformed state file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonPositive { name, value })
    }
}
