use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("unknown space kind `{0}`")]
    UnknownKind(String),
    #[error("level {requested} exceeds the resolution guard (max {max})")]
    ResolutionGuard { requested: u32, max: u32 },
    #[error("region is empty on the sample")]
    EmptyRegion,
    #[error("sets are not positively separated on the sample")]
    NotSeparated,
    #[error("region diameter {diam} is too small for depth {depth}")]
    RegionTooSmall { diam: f64, depth: u32 },
    #[error("outer radius {r2} is not below the largest usable radius {r_max}")]
    RadiusTooLarge { r2: f64, r_max: f64 },
    #[error("depth {depth} too shallow: need 2 s^-n < {bound}")]
    AnchorGuard { depth: u32, bound: f64 },
    #[error("no anchors at depth {0}")]
    NoAnchors(u32),
    #[error("level {n} out of range 1..={max}")]
    LevelOutOfRange { n: u32, max: u32 },
    #[error("depth exhausted: {0}")]
    DepthExhausted(String),
    #[error("resolution exhausted at vertex {0}")]
    ResolutionExhausted(usize),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("weights accumulate at 1 (sup below 1 is {0})")]
    AccumulatesAtOne(f64),
    #[error("relative distance {actual} is below the required threshold {required}")]
    ThresholdNotMet { required: f64, actual: f64 },
    #[error("cannot realize relative distance {0} on this sample")]
    Unrealizable(f64),
    #[error("control function is not increasing near {0}")]
    Nonmonotone(f64),
    #[error("solver did not converge after {iterations} iterations (gap {gap})")]
    NoConvergence { iterations: usize, gap: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
