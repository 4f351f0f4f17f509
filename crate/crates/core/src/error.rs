use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rigid alignment needs at least 3 correspondences, got {found}")]
    TooFewPoints { found: usize },

    #[error("degenerate point configuration (singular values {singular_values:?}); rotation is unobservable")]
    DegenerateConfiguration { singular_values: [f64; 3] },

    #[error("component {component}, frame {frame}: {source}")]
    Component {
        component: usize,
        frame: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("point lies behind the camera (depth {depth})")]
    BehindCamera { depth: f64 },

    #[error("depth must be positive, got {depth}")]
    NonPositiveDepth { depth: f64 },

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("resolution mismatch: {0}")]
    ResolutionMismatch(String),

    #[error("track {track} is never visible")]
    NoVisibleSample { track: usize },

    #[error("invalid depth {depth} sampled for track {track} at frame {frame}")]
    InvalidDepth { track: usize, frame: usize, depth: f64 },

    #[error("invalid motion spec: {0}")]
    InvalidSpec(String),

    #[error("label {label} at point {point} is out of range for {components} component(s)")]
    LabelOutOfRange {
        point: usize,
        label: usize,
        components: usize,
    },

    #[error("target has {found} component(s) but the prior has {expected}")]
    LabelCountMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("point cloud needs at least {required} points, got {found}")]
    EmptyCloud { required: usize, found: usize },

    #[error("cloud has a zero-extent bounding box")]
    DegenerateCloud,

    #[error("seed index {index} is out of range for {points} points")]
    InvalidSeed { index: usize, points: usize },

    #[error("no frames to render")]
    EmptySequence,

    #[error("image {width}x{height} is smaller than the {window}x{window} window")]
    TooSmall { width: usize, height: usize, window: usize },

    #[error("foreground is empty after masking")]
    EmptyForeground,

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_component(self, component: usize, frame: usize) -> Self {
        Error::Component {
            component,
            frame,
            source: Box::new(self),
        }
    }
}
