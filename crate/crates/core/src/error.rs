use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
    #[error("requested {requested} neighbours from a cloud of {available} points")]
    TooManyNeighbours { requested: usize, available: usize },
    #[error("cannot sample {requested} points from a subset of {available}")]
    SubsetTooSmall { requested: usize, available: usize },
    #[error("index {index} out of range for cloud of {len} points")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("degenerate neighbourhood around point {seed}: {neighbours} neighbours")]
    DegenerateNeighborhood { seed: usize, neighbours: usize },
    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("grasp jaw line does not touch any object")]
    NoContact,
    #[error("grasp width {width} exceeds gripper maximum {max}")]
    WidthExceeded { width: f64, max: f64 },
    #[error("cylinder group around seed {0} has no members")]
    NoSupport(usize),
    #[error("could not place object {object} after {retries} attempts")]
    PlacementFailed { object: usize, retries: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },
    #[error("object sets differ between clearing traces: {0}")]
    MismatchedTraces(String),
    #[error("malformed PLY: {0}")]
    Ply(String),
    #[error("schema error in {field}: {message}")]
    Schema { field: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            message: message.into(),
        }
    }
}
