use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },

    #[error("no data rows")]
    EmptyInput,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("unknown unit label `{0}`")]
    UnknownUnit(String),

    #[error("alias table line {line}: {message}")]
    AliasTable { line: usize, message: String },

    #[error("study `{0}` has conflicting metadata across datasets")]
    StudyConflict(String),

    #[error("points without assay id in studies: {0}")]
    MissingAssay(String),

    #[error("unknown study `{0}`")]
    UnknownStudy(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("underdetermined fit: {points} points for {params} parameters")]
    Underdetermined { points: usize, params: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("zero total sum of squares")]
    ZeroTotalVariance,

    #[error("non-finite model evaluation at x = {0}")]
    NonFinite(f64),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("duplicate model name `{0}`")]
    DuplicateModel(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
