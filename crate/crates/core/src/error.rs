use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("attribute cannot be learned: {0}")]
    Unlearnable(String),

    #[error("training diverged at epoch {epoch} (loss is not finite)")]
    Divergence { epoch: usize },

    #[error("training failed for attribute `{attribute}`: {source}")]
    Training {
        attribute: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("entanglement matrix is not positive semi-definite: smallest eigenvalue {eigenvalue:.6e}")]
    NotPositiveSemiDefinite { eigenvalue: f64 },

    #[error("image layout error: {0}")]
    Layout(String),

    #[error("model bundle incomplete: {0}")]
    BundleIncomplete(String),

    #[error("unknown attribute `{name}` (known: {known})")]
    UnknownAttribute { name: String, known: String },

    #[error("unknown class `{class}` for attribute `{attribute}` (legal: {legal})")]
    UnknownClass {
        attribute: String,
        class: String,
        legal: String,
    },

    #[error("value {value} for attribute `{attribute}` outside [{lo}, {hi}]")]
    OutOfRange {
        attribute: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("malformed conditioning string: {0}")]
    Parse(String),

    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { expected: u32, found: u32 },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 2 for usage/configuration problems, 3 for
    /// training and runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Unlearnable(_)
            | Error::Divergence { .. }
            | Error::Training { .. }
            | Error::DegenerateModel(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
