use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("format error{}: {msg}", row_suffix(*row))]
    Format { row: Option<usize>, msg: String },

    #[error("dimension error{}: expected {expected}, got {actual}", row_suffix(*row))]
    Dimension {
        row: Option<usize>,
        expected: usize,
        actual: usize,
    },

    #[error("value error at row {row}, column {col}: {value} is not finite")]
    Value { row: usize, col: usize, value: f64 },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("no samples of class {class}")]
    EmptyClass { class: u8 },

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training data: {0}")]
    TrainingData(String),

    #[error("cannot stratify: class {class} has {count} samples, fewer than {folds} folds")]
    Stratification { class: u8, count: usize, folds: usize },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{cell}: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

fn row_suffix(row: Option<usize>) -> String {
    match row {
        Some(r) => format!(" at row {r}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(row: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Format {
            row,
            msg: msg.into(),
        }
    }

    /// Wraps `self` with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, with stage/fold/cell context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } | Error::Fold { source, .. } | Error::Cell { source, .. } => {
                source.root()
            }
            other => other,
        }
    }

    /// True for errors caused by the input data rather than by configuration
    /// or by a failure during computation.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self.root(),
            Error::Format { .. }
                | Error::Dimension { .. }
                | Error::Value { .. }
                | Error::Io { .. }
                | Error::EmptyClass { .. }
                | Error::EmptyInput(_)
        )
    }
}
