use alloc::string::String;

/// Failures raised by the numerical core.
///
/// Variants fall into two families: input validation (bad shapes, grids,
/// configs) and numerical failure (non-convergence, degenerate channels,
/// normalization drift). [`CoreError::is_validation`] tells them apart so
/// front ends can map them onto distinct exit codes.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("point outside the deformation domain: 1 + theta*x = {0} <= 0")]
    Domain(f64),
    #[error("no grid node lies inside the billiard")]
    EmptyInterior,
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("eigensolver did not converge after {iterations} iterations (worst residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("singular factorization at pivot {0}")]
    Singular(usize),
    #[error("ambiguous gauge: |overlap| = {0} <= 0.5")]
    AmbiguousGauge(f64),
    #[error("branch tracking failed at sample {sample}: best |overlap| = {overlap}")]
    TrackingFailure { sample: usize, overlap: f64 },
    #[error("gap is monotone over the sampled range; no avoided crossing")]
    MonotoneGap,
    #[error("no avoided crossing found among the tracked branches")]
    NoAvoidedCrossing,
    #[error("Wigner normalization drift {drift:e} exceeds {limit:e}; refine the position grid (dx = {dx}, dy = {dy})")]
    NormalizationDrift { drift: f64, limit: f64, dx: f64, dy: f64 },
    #[error("momentum grid too coarse: dp = {dp} exceeds pi/extent = {limit} along {axis}")]
    MomentumResolution { axis: char, dp: f64, limit: f64 },
    #[error("cut through the domain is empty")]
    EmptyCut,
    #[error("negative channel is degenerate (Z- = {0:e}); state is negativity-free")]
    DegenerateChannel(f64),
    #[error("score mask is empty: no shared support above the floor")]
    EmptyMask,
    #[error("entropy routes disagree: pi*N = {pi_n}, arg route = {arg}")]
    RouteMismatch { pi_n: f64, arg: f64 },
    #[error("no interior extremum of h_i in the supplied records")]
    NoExtremum,
    #[error("{context}: {source}")]
    AtTheta {
        context: String,
        theta: f64,
        #[source]
        source: alloc::boxed::Box<CoreError>,
    },
}

impl CoreError {
    /// True for errors caused by bad inputs rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        match self {
            CoreError::InvalidShape(_)
            | CoreError::InvalidGrid(_)
            | CoreError::Domain(_)
            | CoreError::GridMismatch(_)
            | CoreError::InvalidArgument(_)
            | CoreError::InvalidConfig(_)
            | CoreError::EmptyInterior
            | CoreError::EmptyCut => true,
            CoreError::AtTheta { source, .. } => source.is_validation(),
            _ => false,
        }
    }

    pub(crate) fn at_theta(self, theta: f64) -> CoreError {
        CoreError::AtTheta {
            context: alloc::format!("at theta = {theta}"),
            theta,
            source: alloc::boxed::Box::new(self),
        }
    }
}

pub type Result<T> = core::result::Result<T, CoreError>;
