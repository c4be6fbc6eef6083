//! Pinching of Einstein tensors against a cone.
//!
//! An Einstein tensor `R` is rescaled to `Ric = (n-1) delta`, and `kappa*`
//! is the largest `kappa` with `S = R - kappa I` still in the cone. Two exact
//! identities of the quadratic term are checked along the way:
//!
//! * `Q(R - kappa I) = Q(R) + 2(n-1) kappa (kappa - 2) I` whenever
//!   `Ric = (n-1) delta`;
//! * `Q(S) = 2(n-1) S + 2(n-1) kappa (kappa - 1) I` when in addition
//!   `Q(R) = 2(n-1) R`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::cone::{membership, membership_warm, ConeKind, ConeSpec, MembershipVerdict};
use crate::error::{CurvError, Result};
use crate::flow::{fixed_point_residual, q_term};
use crate::tensor::{identity_tensor, ricci, scalar, CurvTensor, SymMatrix};

pub const EINSTEIN_TOL: f64 = 1e-8;
pub const NORMALIZED_TOL: f64 = 1e-9;
pub const SYMMETRIC_MODEL_TOL: f64 = 1e-9;
pub const KAPPA_INTERVAL: (f64, f64) = (0.0, 2.0);
pub const KAPPA_MAX_ITERS: usize = 80;
/// Bisection and closed form must agree to this.
pub const KAPPA_CONSISTENCY_TOL: f64 = 1e-5;
/// `|S| <= CONSTANT_CURVATURE_TOL * |R|` means `kappa*` used up all of `R`.
pub const CONSTANT_CURVATURE_TOL: f64 = 1e-6;
pub const KAPPA_BOUND_SLACK: f64 = 1e-6;

fn ricci_defect(r: &CurvTensor, target: f64) -> f64 {
    let ric = ricci(r);
    let n = r.dim();
    (ric.matrix() - DMatrix::identity(n, n) * target).norm()
}

/// `|Ric - (n-1) delta|`.
pub fn normalization_residual(r: &CurvTensor) -> f64 {
    ricci_defect(r, r.dim() as f64 - 1.0)
}

/// Rescales an Einstein tensor so that `Ric = (n-1) delta`.
pub fn normalize_einstein(r: &CurvTensor) -> Result<CurvTensor> {
    let n = r.dim() as f64;
    let norm = r.norm();
    let sc = scalar(r);
    let residual = ricci_defect(r, sc / n);
    if residual > EINSTEIN_TOL * norm {
        return Err(CurvError::NotEinstein { residual, norm });
    }
    if !(sc > 0.0) {
        return Err(CurvError::NonpositiveScalar { scalar: sc });
    }
    Ok(r.scale(n * (n - 1.0) / sc))
}

fn require_normalized(r: &CurvTensor) -> Result<()> {
    let residual = normalization_residual(r);
    if residual > NORMALIZED_TOL * r.norm().max(1.0) {
        Err(CurvError::NotNormalized { residual })
    } else {
        Ok(())
    }
}

/// `R - kappa I`.
pub fn pinching_tensor(r: &CurvTensor, kappa: f64) -> Result<CurvTensor> {
    Ok(r.axpy(-kappa, &identity_tensor(r.dim())?))
}

fn relative(diff: &CurvTensor, r: &CurvTensor) -> f64 {
    diff.norm() / r.norm().powi(2).max(1.0)
}

/// Residual of `Q(R - kappa I) = Q(R) + 2(n-1) kappa (kappa - 2) I`,
/// relative to `max(1, |R|^2)`.
pub fn eq3_residual(r: &CurvTensor, kappa: f64) -> Result<f64> {
    require_normalized(r)?;
    let n1 = r.dim() as f64 - 1.0;
    let i = identity_tensor(r.dim())?;
    let lhs = q_term(&pinching_tensor(r, kappa)?);
    let rhs = q_term(r).axpy(2.0 * n1 * kappa * (kappa - 2.0), &i);
    Ok(relative(&(&lhs - &rhs), r))
}

/// Residual of `Q(S) = 2(n-1) S + 2(n-1) kappa (kappa - 1) I` for
/// `S = R - kappa I`, relative to `max(1, |R|^2)`. Needs `Q(R) = 2(n-1) R`.
pub fn prop1_residual_symmetric(r: &CurvTensor, kappa: f64) -> Result<f64> {
    require_normalized(r)?;
    let fp = fixed_point_residual(r);
    if fp > SYMMETRIC_MODEL_TOL {
        return Err(CurvError::NotSymmetricModel { residual: fp });
    }
    let n1 = r.dim() as f64 - 1.0;
    let i = identity_tensor(r.dim())?;
    let s = pinching_tensor(r, kappa)?;
    let rhs = s.scale(2.0 * n1).axpy(2.0 * n1 * kappa * (kappa - 1.0), &i);
    Ok(relative(&(&q_term(&s) - &rhs), r))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaStar {
    pub value: f64,
    /// `margin(R) / margin(I)`, exact because every margin functional is
    /// linear along `R - kappa I` with slope `-margin(I)`.
    pub closed_form: f64,
    /// The input itself lies on the boundary, so `kappa*` is 0 by fiat.
    pub on_boundary: bool,
    pub bisection_steps: usize,
}

/// Largest `kappa` in `[0, 2]` with `R - kappa I` in the cone, by bisection
/// on the membership margin, cross-checked against the closed form.
pub fn kappa_star(cone: &ConeSpec, r: &CurvTensor) -> Result<KappaStar> {
    require_normalized(r)?;
    let base = membership(cone, r)?;
    let closed_form = base.margin / cone.kind.identity_margin(cone.dim);
    if base.margin < -cone.tol {
        return Err(CurvError::OutsideCone { margin: base.margin });
    }
    if base.margin <= cone.tol {
        return Ok(KappaStar {
            value: 0.0,
            closed_form,
            on_boundary: true,
            bisection_steps: 0,
        });
    }
    let i = identity_tensor(cone.dim)?;
    let mut warm: Vec<DMatrix<f64>> = frame_of(&base).into_iter().collect();
    let (mut lo, mut hi) = KAPPA_INTERVAL;
    let mut steps = 0;
    let upper = membership_warm(cone, &r.axpy(-hi, &i), &warm)?;
    if upper.margin >= 0.0 {
        lo = hi;
    } else {
        while steps < KAPPA_MAX_ITERS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            steps += 1;
            let v = membership_warm(cone, &r.axpy(-mid, &i), &warm)?;
            warm.extend(frame_of(&v));
            if v.margin >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    if (lo - closed_form).abs() > KAPPA_CONSISTENCY_TOL {
        return Err(CurvError::SearchInconsistency {
            bisection: lo,
            closed_form,
        });
    }
    Ok(KappaStar {
        value: lo,
        closed_form,
        on_boundary: false,
        bisection_steps: steps,
    })
}

fn frame_of(v: &MembershipVerdict) -> Option<DMatrix<f64>> {
    use crate::cone::Witness;
    match &v.witness {
        Witness::Frame { frame } => Some(frame.matrix().clone()),
        Witness::Plane { u, v } => Some(DMatrix::from_fn(u.len(), 2, |i, c| if c == 0 { u[i] } else { v[i] })),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RigidityVerdict {
    ConstantCurvature,
    BoundaryModel,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct RigidityReport {
    pub input_id: String,
    pub cone: ConeKind,
    pub dim: usize,
    /// Factor applied to the input to reach `Ric = (n-1) delta`.
    pub normalization_scale: f64,
    /// `|Ric - (n-1) delta|` of the normalized tensor.
    pub einstein_residual: f64,
    pub fixed_point_residual: f64,
    pub kappa_star: f64,
    pub kappa_star_closed_form: f64,
    pub input_on_boundary: bool,
    pub classification_at_kappa_star: MembershipVerdict,
    pub eq3_residual: f64,
    /// Only defined when the normalized tensor is a fixed point of the
    /// normalized ODE; `null` otherwise.
    pub prop1_residual_symmetric: Option<f64>,
    pub s_norm: f64,
    /// Whether the upper bound `kappa* <= 1` is expected for this cone,
    /// i.e. whether the cone satisfies the nonnegative scalar curvature
    /// condition.
    pub kappa_bound_applies: bool,
    pub kappa_within_bound: bool,
    pub verdict: RigidityVerdict,
}

/// Normalizes `r`, computes `kappa*`, the pinching tensor at `kappa*` and
/// the identity residuals there.
pub fn rigidity_probe(cone: &ConeSpec, r: &CurvTensor, input_id: &str) -> Result<RigidityReport> {
    if r.dim() != cone.dim {
        return Err(CurvError::DimMismatch {
            left: cone.dim,
            right: r.dim(),
        });
    }
    let rn = normalize_einstein(r)?;
    let scale = rn.norm() / r.norm();
    let fp = fixed_point_residual(&rn);
    let ks = kappa_star(cone, &rn)?;
    let s = pinching_tensor(&rn, ks.value)?;
    let at_kappa = membership(cone, &s)?;
    let eq3 = eq3_residual(&rn, ks.value)?;
    let prop1 = if fp <= SYMMETRIC_MODEL_TOL {
        Some(prop1_residual_symmetric(&rn, ks.value)?)
    } else {
        None
    };
    let s_norm = s.norm();
    let kappa_bound_applies = matches!(cone.kind, ConeKind::Nic | ConeKind::NonnegCurvOp | ConeKind::NonnegScalar);
    let verdict = if s_norm <= CONSTANT_CURVATURE_TOL * rn.norm() {
        RigidityVerdict::ConstantCurvature
    } else if ks.on_boundary || ks.value <= cone.tol {
        RigidityVerdict::BoundaryModel
    } else {
        RigidityVerdict::Inconclusive
    };
    Ok(RigidityReport {
        input_id: input_id.to_string(),
        cone: cone.kind,
        dim: cone.dim,
        normalization_scale: scale,
        einstein_residual: normalization_residual(&rn),
        fixed_point_residual: fp,
        kappa_star: ks.value,
        kappa_star_closed_form: ks.closed_form,
        input_on_boundary: ks.on_boundary,
        classification_at_kappa_star: at_kappa,
        eq3_residual: eq3,
        prop1_residual_symmetric: prop1,
        s_norm,
        kappa_bound_applies,
        kappa_within_bound: ks.value <= 1.0 + KAPPA_BOUND_SLACK,
        verdict,
    })
}

/// `Ric(R - kappa I) = Ric(R) - (n-1) kappa delta`.
pub fn pinched_ricci(r: &CurvTensor, kappa: f64) -> Result<SymMatrix> {
    Ok(ricci(&pinching_tensor(r, kappa)?))
}
