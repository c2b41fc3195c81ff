use alloc::string::String;

use crate::fields::FieldType;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("raster data length {len} does not match {width}x{height}")]
    RasterShape { width: usize, height: usize, len: usize },

    #[error("unusable field polygon: {0}")]
    DegeneratePolygon(String),

    #[error("empty cell interior between lines")]
    EmptyCell,

    #[error("character {ch:?} is not in the {field} alphabet")]
    InvalidCharacter { ch: char, field: FieldType },

    #[error("symbol {0:?} is not in the alphabet")]
    UnknownSymbol(String),

    #[error("invalid label sequence: {0}")]
    InvalidLabels(String),

    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("input height {actual} does not match network input height {expected}")]
    InputHeight { expected: usize, actual: usize },

    #[error("non-finite value in {stage} at column {x}, row {y}")]
    NonFinite { stage: String, x: usize, y: usize },

    #[error("weight store does not match network spec: {0}")]
    WeightShape(String),

    #[error("invalid output matrix: {0}")]
    InvalidMatrix(String),

    #[error("dictionary is empty")]
    EmptyDictionary,

    #[error("committee has no members")]
    EmptyCommittee,

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: u32 },
}
