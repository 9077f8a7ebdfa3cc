use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AadsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("stencil error: {0}")]
    Stencil(String),
    #[error("construction error: {0}")]
    Construction(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("degenerate plane: {0}")]
    DegeneratePlane(String),
    #[error("singularity: {0}")]
    Singularity(String),
    #[error("non-convex: {0}")]
    NonConvex(String),
    #[error("ambiguous connection: {0}")]
    Ambiguous(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("out of region: {0}")]
    OutOfRegion(String),
    #[error("off horizon: {0}")]
    OffHorizon(String),
    #[error("divergent extrapolation: {0}")]
    Divergence(String),
    #[error("indeterminate: {0}")]
    Indeterminate(String),
}

impl AadsError {
    /// Stable numeric code, shared with the C ABI.
    pub fn code(&self) -> i32 {
        match self {
            AadsError::Domain(_) => 1,
            AadsError::Stencil(_) => 2,
            AadsError::Construction(_) => 3,
            AadsError::Config(_) => 4,
            AadsError::Coverage(_) => 5,
            AadsError::DegeneratePlane(_) => 6,
            AadsError::Singularity(_) => 7,
            AadsError::NonConvex(_) => 8,
            AadsError::Ambiguous(_) => 9,
            AadsError::Precondition(_) => 10,
            AadsError::Unsupported(_) => 11,
            AadsError::OutOfRegion(_) => 12,
            AadsError::OffHorizon(_) => 13,
            AadsError::Divergence(_) => 14,
            AadsError::Indeterminate(_) => 15,
        }
    }

    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            AadsError::Config(_)
                | AadsError::Construction(_)
                | AadsError::Precondition(_)
                | AadsError::Unsupported(_)
                | AadsError::Domain(_)
                | AadsError::Coverage(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, AadsError>;
