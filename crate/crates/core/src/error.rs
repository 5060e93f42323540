use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("image buffer has {len} samples, expected {height}x{width}x3")]
    BufferLength {
        height: usize,
        width: usize,
        len: usize,
    },
    #[error("image has no pixels")]
    EmptyImage,
    #[error("patch dimensions must be at least 1x1, got {height}x{width}")]
    ZeroPatchDim { height: usize, width: usize },
    #[error("patch index {index} out of range for a grid of {len} tiles")]
    PatchIndex { index: usize, len: usize },
    #[error("expected {expected} patches, got {actual}")]
    PatchCount { expected: usize, actual: usize },
    #[error("patch {index} is {actual_height}x{actual_width}, grid tile is {height}x{width}")]
    PatchDims {
        index: usize,
        height: usize,
        width: usize,
        actual_height: usize,
        actual_width: usize,
    },
    #[error("grid covers a {grid_height}x{grid_width} image, got {height}x{width}")]
    GridMismatch {
        grid_height: usize,
        grid_width: usize,
        height: usize,
        width: usize,
    },
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimMismatch(usize, usize, usize, usize),
    #[error("score list is empty")]
    EmptyScores,
    #[error("score {0} is not finite")]
    NonFiniteScore(f64),
    #[error("need at least {needed} scores, got {got}")]
    TooFewScores { needed: usize, got: usize },
    #[error("width list is empty")]
    EmptyWidths,
    #[error("width list must be non-decreasing")]
    WidthOrder,
    #[error("width {0} is outside (0, 1]")]
    WidthRange(f64),
    #[error("{cutpoints} cutpoints cannot route into {groups} groups")]
    ThresholdCount { cutpoints: usize, groups: usize },
    #[error("invalid prior config: {0}")]
    PriorConfig(&'static str),
    #[error("invalid network spec: {0}")]
    Spec(&'static str),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("training diverged: loss is {0}")]
    Diverged(f64),
    #[error("weights: bad magic, not a DDAW file")]
    BadMagic,
    #[error("weights: unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("weights: unsupported sample width of {0} bytes")]
    UnsupportedPrecision(u8),
    #[error("weights: file is truncated")]
    Truncated,
    #[error("weights: {0} trailing bytes after the last layer")]
    TrailingBytes(usize),
    #[error("weights: layer {layer} shape does not match the embedded spec")]
    LayerShape { layer: usize },
}
