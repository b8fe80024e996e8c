use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed box: {0}")]
    MalformedBox(String),

    #[error("degenerate box: {0}")]
    DegenerateBox(String),

    #[error("malformed polygon: {0}")]
    MalformedPolygon(String),

    #[error("invalid image dimensions {width}x{height}")]
    InvalidDims { width: i64, height: i64 },

    /// A record-level parse failure. `line` is 1-based; for JSON documents it
    /// names the record index instead.
    #[error("{}: {location} {line}: {message}", file.as_deref().unwrap_or("<input>"))]
    Parse {
        file: Option<String>,
        location: &'static str,
        line: usize,
        message: String,
    },

    #[error("unknown image id {0:?}")]
    UnknownImage(String),

    #[error("duplicate image id {0:?}")]
    DuplicateImage(String),

    #[error("ground truth file {path} for image {image_id:?} does not exist")]
    MissingFile { image_id: String, path: PathBuf },

    #[error("records span several images ({0:?} and {1:?})")]
    MixedImages(String, String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("dataset has no images")]
    EmptyDataset,

    #[error("ground truth corpus is empty; recall is undefined")]
    UndefinedRecall,

    #[error("precision-recall curve is empty")]
    EmptyCurve,

    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            file: None,
            location: "line",
            line,
            message: message.into(),
        }
    }

    pub(crate) fn record(index: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            file: None,
            location: "record",
            line: index,
            message: message.into(),
        }
    }

    /// Attach a file name to a parse error that was produced from in-memory
    /// content. Other variants pass through untouched.
    pub fn in_file(self, name: impl Into<String>) -> Self {
        match self {
            Error::Parse {
                file: None,
                location,
                line,
                message,
            } => Error::Parse {
                file: Some(name.into()),
                location,
                line,
                message,
            },
            Error::Json(e) => Error::Parse {
                file: Some(name.into()),
                location: "line",
                line: e.line(),
                message: e.to_string(),
            },
            other => other,
        }
    }
}
