use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty pool")]
    EmptyPool,
    #[error("no labels acquired")]
    NoLabels,
    #[error("degenerate proposal: probability {0} is not in (0, 1]")]
    DegenerateProposal(f64),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("corrupt trajectory: {0}")]
    CorruptTrajectory(String),
    #[error("invalid surrogate variance {0}")]
    InvalidSurrogateVariance(f64),
    #[error("invalid acquisition score: {0}")]
    InvalidScore(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("probability vector not normalized (sum = {0})")]
    NotNormalized(f64),
    #[error("mutual information requires an ensemble of at least 2 members")]
    EnsembleTooSmall,
    #[error("kernel matrix not SPD (last jitter tried: {0:e})")]
    NotSpd(f64),
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("double acquisition of pool index {0}")]
    DoubleAcquisition(usize),
    #[error("no information: all paired differences are zero")]
    NoInformation,
    #[error("incompatible configuration: {0}")]
    Incompatible(String),
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("csv schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
