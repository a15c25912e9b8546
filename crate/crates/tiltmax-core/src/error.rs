use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate mark measure")]
    DegenerateMarkMeasure,
    #[error("mark mass {mark_mass} does not match stream mass {stream_mass}")]
    MassMismatch { stream_mass: f64, mark_mass: f64 },
    #[error("shift leaves empty common domain")]
    EmptyShiftDomain,
    #[error("kernel not PSD on grid (jitter escalation exhausted)")]
    KernelNotPsd,
    #[error("tilt point almost surely killed")]
    TiltPointKilled,
    #[error("exact stopping requires bounded shapes (counting measure only)")]
    NonCountingMeasure,
    #[error("provenance not retained on this field sample")]
    NoProvenance,
    #[error("too few exceedances: {found} (need at least {needed})")]
    TooFewExceedances { found: usize, needed: usize },
    #[error("truncation radius too small: doubling moved the estimate by {shift:.3e} (> 3 combined stderr {limit:.3e})")]
    TruncationRadiusTooSmall { shift: f64, limit: f64 },
    #[error("fine-spacing sensitivity failure: halving moved the estimate by {shift:.3e} (> 3 combined stderr {limit:.3e})")]
    FineSpacingSensitivity { shift: f64, limit: f64 },
    #[error("functional failed the shift-invariance self-test")]
    FunctionalNotShiftInvariant,
    #[error("incremental variance must be positive, got {0}")]
    NonPositiveGamma(f64),
    #[error("window of {points} lattice points exceeds the {limit}-point budget; tile the window")]
    WindowTooLarge { points: usize, limit: usize },
    #[error("grid point {0:?} not on the grid")]
    PointNotOnGrid(Vec<f64>),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
