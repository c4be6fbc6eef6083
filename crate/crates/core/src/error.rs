use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurvError {
    #[error("invalid dimension {dim}: {reason}")]
    InvalidDimension { dim: usize, reason: &'static str },

    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("input violates the curvature symmetries (max defect {defect:e})")]
    SymmetryViolation { defect: f64 },

    #[error("vectors are not an orthonormal pair (defect {defect:e})")]
    InvalidPlane { defect: f64 },

    #[error("frame is not orthonormal (defect {defect:e})")]
    InvalidFrame { defect: f64 },

    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    #[error("normalized flow needs positive initial scalar curvature, got {scalar}")]
    InvalidNormalization { scalar: f64 },

    #[error("non-finite value encountered at t = {t}")]
    NumericFailure { t: f64 },

    #[error("invalid flow options: {0}")]
    InvalidOptions(String),

    #[error("no interior point found after {attempts} attempts")]
    BudgetExhausted { attempts: usize },

    #[error("ray stays inside the cone up to t = {t_max}")]
    RayStaysInside { t_max: f64 },

    #[error("starting tensor is not in the cone interior (margin {margin})")]
    NonInteriorStart { margin: f64 },

    #[error("tangent cone query at a tensor outside the cone (margin {margin})")]
    InvalidQuery { margin: f64 },

    #[error("unknown cone `{0}` (expected nic, nonneg_curv_op, nonneg_scalar, nonneg_ricci, nonneg_sectional)")]
    UnknownCone(String),

    #[error("cone {0} does not support this operation")]
    UnsupportedCone(&'static str),

    #[error("tensor is not Einstein (traceless Ricci {residual:e}, norm {norm:e})")]
    NotEinstein { residual: f64, norm: f64 },

    #[error("Einstein tensor has nonpositive scalar curvature {scalar}; Ricci-flat inputs are not processed")]
    NonpositiveScalar { scalar: f64 },

    #[error("tensor is not normalized to Ric = (n-1) delta (residual {residual:e})")]
    NotNormalized { residual: f64 },

    #[error("tensor is not a symmetric-space model (fixed-point residual {residual:e})")]
    NotSymmetricModel { residual: f64 },

    #[error("kappa* routes disagree: bisection {bisection}, closed form {closed_form}")]
    SearchInconsistency { bisection: f64, closed_form: f64 },

    #[error("tensor lies outside the cone (margin {margin})")]
    OutsideCone { margin: f64 },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("tensor projection residual {residual:e} exceeds {limit:e}")]
    ProjectionResidual { residual: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, CurvError>;
