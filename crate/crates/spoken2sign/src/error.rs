use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("landmark {landmark} is behind the camera (depth {depth:.6} <= 1e-6)")]
    BehindCamera { landmark: usize, depth: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite objective or gradient at iteration {iteration} (last good value {last_value})")]
    NonFinite {
        iteration: usize,
        last_value: f64,
        last_point: Vec<f64>,
    },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("frame {frame}: {source}")]
    AtFrame {
        frame: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("alignment infeasible: {0}")]
    Infeasible(String),

    #[error("class label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("gloss {0:?} not found in dictionary")]
    UnknownGloss(String),

    #[error("kinematic tree mismatch: {0}")]
    TreeMismatch(String),

    #[error("translation produced an empty gloss sequence")]
    EmptyTranslation,

    #[error("lookup failed: {0}")]
    Lookup(String),

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("unsupported format version {found} (supported: {supported}) in {what}")]
    FormatVersion {
        what: String,
        found: u32,
        supported: u32,
    },

    #[error("corrupt {what}: {message}")]
    Corrupt { what: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Wraps an error with the index of the frame it occurred on.
    pub fn at_frame(self, frame: usize) -> Self {
        Error::AtFrame {
            frame,
            source: Box::new(self),
        }
    }

    /// Short category tag used by the CLI for exit diagnostics.
    pub fn category(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension",
            Error::BehindCamera { .. } => "projection",
            Error::InvalidConfig(_) => "config",
            Error::NonFinite { .. } => "optimization",
            Error::Calibration(_) => "calibration",
            Error::AtFrame { source, .. } => source.category(),
            Error::Infeasible(_) => "alignment",
            Error::LabelOutOfRange { .. } => "alignment",
            Error::UnknownGloss(_) => "retrieval",
            Error::TreeMismatch(_) => "tree",
            Error::EmptyTranslation => "translation",
            Error::Lookup(_) => "lookup",
            Error::Metric(_) => "metric",
            Error::Parse { .. } => "parse",
            Error::FormatVersion { .. } => "format",
            Error::Corrupt { .. } => "format",
            Error::Io { .. } => "io",
        }
    }
}
