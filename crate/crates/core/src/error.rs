use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("grid spec mismatch: {0}")]
    SpecMismatch(String),
    #[error("voxel index ({z}, {y}, {x}) outside dims {dims:?}")]
    OutOfBounds { z: i64, y: i64, x: i64, dims: [usize; 3] },
    #[error("invalid label id {0}")]
    InvalidLabel(i64),
    #[error("non-finite value: {0}")]
    NonFinite(&'static str),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid probability volume: {0}")]
    InvalidDistribution(String),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("frame {0} out of range")]
    FrameOutOfRange(usize),
    #[error("point references instance {0} with no track")]
    MissingTrack(u32),
    #[error("pseudo labels may not contain the noise class")]
    NoiseInPseudo,
    #[error("no voxels left after applying the ignore set")]
    AllIgnored,
    #[error("modality {0} requires depth images")]
    MissingDepth(&'static str),
    #[error("duplicate query for fine voxel {0}")]
    DuplicateQuery(usize),
    #[error("zero-sum distribution after resampling at voxel {0}")]
    ZeroSum(usize),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
