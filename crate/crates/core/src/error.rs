use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid surface: {0}")]
    InvalidSurface(String),
    #[error("surface is not strictly convex: kappa_{which} = {value:e} at theta = {theta}")]
    NonConvex { which: u8, theta: f64, value: f64 },
    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("field shape {got_theta}x{got_phi} does not match grid {want_theta}x{want_phi}")]
    ShapeMismatch {
        got_theta: usize,
        got_phi: usize,
        want_theta: usize,
        want_phi: usize,
    },
    #[error("initial data must be positive; found {value:e} at node {node}")]
    NonPositiveInitialData { node: usize, value: f64 },
    #[error("mean curvature H must be positive; found {value:e} at node {node}")]
    NonPositiveMeanCurvature { node: usize, value: f64 },
    #[error("stable step {required:e} is below dr_min = {dr_min:e} at r = {r}")]
    StepUnderflow { r: f64, required: f64, dr_min: f64 },
    #[error("positivity lost at r = {r}: u = {value:e} at node {node}")]
    PositivityLoss { r: f64, node: usize, value: f64 },
    #[error("non-finite value encountered at r = {r}")]
    NonFinite { r: f64 },
    #[error("mass series too short for extrapolation: {0}")]
    InsufficientSamples(String),
    #[error("mass not converged: bracket width {width:e} exceeds tolerance {tol:e} at r = {r_final}")]
    NotConverged { width: f64, tol: f64, r_final: f64 },
    #[error("mass does not change sign on [{mu_lo}, {mu_hi}]: m = {mass_lo:e}, {mass_hi:e}")]
    BracketFailure {
        mu_lo: f64,
        mu_hi: f64,
        mass_lo: f64,
        mass_hi: f64,
    },
    #[error("margin {margin:e} is below the certified numerical error {required:e}")]
    MarginTooSmall { margin: f64, required: f64 },
    #[error("oracle mismatch: {0}")]
    OracleMismatch(String),
    #[error("syntax error at byte {offset}: {message}")]
    SyntaxError { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("expression is not positive on the grid: {value:e} at theta = {theta}, phi = {phi}")]
    NonPositiveOnGrid { theta: f64, phi: f64, value: f64 },
    #[error("refinement errors are not decreasing: {0:?}")]
    NonMonotoneErrors(Vec<f64>),
}

impl Error {
    /// Stable variant name for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSurface(..) => "InvalidSurface",
            Error::NonConvex { .. } => "NonConvex",
            Error::DegenerateProfile(..) => "DegenerateProfile",
            Error::InvalidConfig(..) => "InvalidConfig",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::NonPositiveInitialData { .. } => "NonPositiveInitialData",
            Error::NonPositiveMeanCurvature { .. } => "NonPositiveMeanCurvature",
            Error::StepUnderflow { .. } => "StepUnderflow",
            Error::PositivityLoss { .. } => "PositivityLoss",
            Error::NonFinite { .. } => "NonFinite",
            Error::InsufficientSamples(..) => "InsufficientSamples",
            Error::NotConverged { .. } => "NotConverged",
            Error::BracketFailure { .. } => "BracketFailure",
            Error::MarginTooSmall { .. } => "MarginTooSmall",
            Error::OracleMismatch(..) => "OracleMismatch",
            Error::SyntaxError { .. } => "SyntaxError",
            Error::UnknownIdentifier { .. } => "UnknownIdentifier",
            Error::NonPositiveOnGrid { .. } => "NonPositiveOnGrid",
            Error::NonMonotoneErrors(..) => "NonMonotoneErrors",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
