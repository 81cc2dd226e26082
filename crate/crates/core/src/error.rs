use std::path::PathBuf;

use crate::dataset::ValidationError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A pose component violates a gantry travel limit.
    #[error("{axis} = {value} mm is outside the travel range [0, {limit}] mm")]
    Bounds {
        axis: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("point is behind the camera (forward component {0})")]
    BehindCamera(f64),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("ray does not intersect the plane z = {0} in front of the camera")]
    NoIntersection(f64),

    #[error("problem size {size} exceeds the limit of {max}")]
    Size { size: usize, max: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("crop error: {0}")]
    Crop(String),

    #[error("pose {index}: {source}")]
    AtPose {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("no feasible poses for the requested target")]
    NoFeasiblePoses,

    #[error("{} validation error(s); first: {}", .0.len(), .0.first().map(ToString::to_string).unwrap_or_default())]
    Validation(Vec<ValidationError>),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
