use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mesh is empty")]
    EmptyMesh,
    #[error("face {face} references vertex {index}, but the mesh has {count} vertices")]
    FaceIndexOutOfRange { face: usize, index: u32, count: usize },
    #[error("mesh has zero extent (all vertices coincide)")]
    ZeroExtent,
    #[error("mesh has zero surface area")]
    ZeroArea,
    #[error("sample count must be positive")]
    ZeroSampleCount,
    #[error("no samples")]
    NoSamples,
    #[error("no generators")]
    NoGenerators,
    #[error("at least two generators are required, got {0}")]
    TooFewGenerators(usize),
    #[error("neighbor count k = {k} is invalid for {n} generators (need 2 <= k <= n)")]
    InvalidNeighborCount { k: usize, n: usize },
    #[error("generators {0} and {1} coincide")]
    CoincidentGenerators(usize, usize),
    #[error("generator {0} lies outside the clip box")]
    GeneratorOutsideBox(usize),
    #[error("clip box must have positive extent on every axis")]
    InvalidClipBox,
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite gradient at step {step}")]
    NonFiniteGradient { step: usize },
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
