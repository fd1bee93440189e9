use thiserror::Error;

/// Errors produced anywhere in the transfer pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty cloud")]
    EmptyCloud,

    #[error("unmatched label class: key `{key}` value {value} present in source but absent in target")]
    UnmatchedLabelClass { key: String, value: u8 },

    #[error("missing label key `{0}`")]
    MissingLabel(String),

    #[error("label `{key}` has {got} entries, cloud has {expected} points")]
    LabelLength {
        key: String,
        expected: usize,
        got: usize,
    },

    #[error("non-finite coordinate in point {0}")]
    NonFinite(usize),

    #[error("invalid rotation: {0}")]
    InvalidRotation(String),

    #[error("degenerate target")]
    DegenerateTarget,

    #[error("rank-deficient correspondence set")]
    RankDeficient,

    #[error("empty correspondence set")]
    NoCorrespondences,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("inference failed: {0}")]
    InferenceFailed(String),

    #[error("registration of instance {instance} failed: {source}")]
    InstanceRegistration {
        instance: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("no interaction found in demonstration")]
    NoInteraction,

    #[error("too many candidate relations: {0} (limit 12)")]
    TooManyRelations(usize),

    #[error("missing model for part `{0}`")]
    MissingModel(String),

    #[error("missing fit for part `{0}`")]
    MissingFit(String),

    #[error("parameter `{name}` = {value} outside [{min}, {max}]")]
    ParameterOutOfRange {
        name: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("empty view")]
    EmptyView,

    #[error("infeasible pair: {0}")]
    InfeasiblePair(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
