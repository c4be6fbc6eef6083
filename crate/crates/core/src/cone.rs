//! Curvature-condition cones.
//!
//! Every cone here is cut out by a family of linear functionals of `R`
//! (isotropic curvature over 4-frames, `<M(R) w, w>` over unit bivectors,
//! and so on), so its membership margin is the minimum of that family and
//! is concave along lines. A [`Witness`] names the functional attaining the
//! margin and can be evaluated on any tensor.
//!
//! For NIC and nonnegative sectional curvature the minimum is found by
//! multistart search and is only an upper bound on the true margin.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CurvError, Result};
use crate::flow::{integrate, q_term, FlowMethod, FlowOptions};
use crate::functional::{FrameFunctional, ISOTROPIC, SECTIONAL};
use crate::models::{random_curvature, random_in_cone};
use crate::rng::{self, tag};
use crate::search::{local_minimize, multistart, LocalMin, SearchBudget, SearchOutcome};
use crate::tensor::{
    curv_operator_matrix, identity_tensor, pair_basis, ricci, scalar, CurvTensor, Frame4, SymMatrix,
};

pub const DEFAULT_TOL: f64 = 1e-9;
/// Constraints within this value of zero count as active in tangent-cone queries.
pub const ACTIVATION_TOL: f64 = 1e-6;
/// Largest ray parameter tried before a ray is declared to stay inside.
pub const RAY_T_MAX: f64 = 1e6;
const BOUNDARY_MAX_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    /// Nonnegative isotropic curvature.
    Nic,
    NonnegCurvOp,
    NonnegScalar,
    NonnegRicci,
    NonnegSectional,
}

impl ConeKind {
    pub const ALL: [ConeKind; 5] = [
        Self::Nic,
        Self::NonnegCurvOp,
        Self::NonnegScalar,
        Self::NonnegRicci,
        Self::NonnegSectional,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Nic => "nic",
            Self::NonnegCurvOp => "nonneg_curv_op",
            Self::NonnegScalar => "nonneg_scalar",
            Self::NonnegRicci => "nonneg_ricci",
            Self::NonnegSectional => "nonneg_sectional",
        }
    }

    /// Margin of the identity tensor `I` in dimension `n`.
    pub fn identity_margin(self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            Self::Nic => 4.0,
            Self::NonnegCurvOp | Self::NonnegSectional => 1.0,
            Self::NonnegScalar => nf * (nf - 1.0),
            Self::NonnegRicci => nf - 1.0,
        }
    }

    fn min_dim(self) -> usize {
        match self {
            Self::Nic => 4,
            _ => 3,
        }
    }

    fn frame_functional(self) -> Option<FrameFunctional> {
        match self {
            Self::Nic => Some(ISOTROPIC),
            Self::NonnegSectional => Some(SECTIONAL),
            _ => None,
        }
    }
}

impl fmt::Display for ConeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConeKind {
    type Err = CurvError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Ok(match key.as_str() {
            "nic" => Self::Nic,
            "nonneg_curv_op" | "curv_op" | "curvop" | "nonnegcurvop" => Self::NonnegCurvOp,
            "nonneg_scalar" | "scalar" | "nonnegscalar" => Self::NonnegScalar,
            "nonneg_ricci" | "ricci" | "nonnegricci" => Self::NonnegRicci,
            "nonneg_sectional" | "sectional" | "nonnegsectional" => Self::NonnegSectional,
            _ => return Err(CurvError::UnknownCone(s.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub kind: ConeKind,
    pub dim: usize,
    pub tol: f64,
    pub search: SearchBudget,
}

impl ConeSpec {
    pub fn new(kind: ConeKind, dim: usize) -> Result<Self> {
        Self {
            kind,
            dim,
            tol: DEFAULT_TOL,
            search: SearchBudget::default(),
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.dim < self.kind.min_dim() {
            return Err(CurvError::InvalidDimension {
                dim: self.dim,
                reason: "cone dimension too small (NIC needs n >= 4, others n >= 3)",
            });
        }
        if !(self.tol > 0.0) {
            return Err(CurvError::InvalidOptions(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.search.restarts == 0 && self.kind.frame_functional().is_some() {
            return Err(CurvError::InvalidOptions("search needs at least one restart".into()));
        }
        Ok(self)
    }

    fn check_dim(&self, r: &CurvTensor) -> Result<()> {
        if r.dim() == self.dim {
            Ok(())
        } else {
            Err(CurvError::DimMismatch {
                left: self.dim,
                right: r.dim(),
            })
        }
    }
}

/// The linear functional attaining a margin.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    /// Isotropic curvature on this 4-frame.
    Frame { frame: Frame4 },
    /// Sectional curvature of the plane spanned by `u`, `v`.
    Plane { u: Vec<f64>, v: Vec<f64> },
    /// `<M(R) w, w>` for a unit vector in the lexicographic pair basis of Lambda^2.
    Bivector { coefficients: Vec<f64> },
    /// `w^T Ric(R) w`.
    RicciDirection { vector: Vec<f64> },
    /// The scalar curvature itself.
    Trace,
}

impl Witness {
    pub fn evaluate(&self, r: &CurvTensor) -> f64 {
        match self {
            Self::Frame { frame } => ISOTROPIC.value(r, frame.matrix()),
            Self::Plane { u, v } => {
                let m = DMatrix::from_fn(u.len(), 2, |i, c| if c == 0 { u[i] } else { v[i] });
                SECTIONAL.value(r, &m)
            }
            Self::Bivector { coefficients } => {
                let pairs = pair_basis(r.dim());
                let mut s = 0.0;
                for (a, &(i, j)) in pairs.iter().enumerate() {
                    for (b, &(k, l)) in pairs.iter().enumerate() {
                        s += coefficients[a] * coefficients[b] * r.get(i, j, k, l);
                    }
                }
                s
            }
            Self::RicciDirection { vector } => {
                ricci(r).quadratic_form(&DVector::from_column_slice(vector))
            }
            Self::Trace => scalar(r),
        }
    }

    fn frame_matrix(&self) -> Option<DMatrix<f64>> {
        match self {
            Self::Frame { frame } => Some(frame.matrix().clone()),
            Self::Plane { u, v } => Some(DMatrix::from_fn(u.len(), 2, |i, c| if c == 0 { u[i] } else { v[i] })),
            _ => None,
        }
    }

    fn from_frame(kind: ConeKind, m: DMatrix<f64>) -> Self {
        match kind {
            ConeKind::Nic => Self::Frame {
                frame: Frame4::from_orthonormal(m),
            },
            _ => Self::Plane {
                u: m.column(0).iter().copied().collect(),
                v: m.column(1).iter().copied().collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Interior,
    Boundary,
    Outside,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchSummary {
    pub starts: usize,
    pub converged: usize,
    pub total_iters: usize,
}

impl From<&SearchOutcome> for SearchSummary {
    fn from(o: &SearchOutcome) -> Self {
        Self {
            starts: o.minima.len(),
            converged: o.converged_restarts(),
            total_iters: o.total_iters(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipVerdict {
    pub cone: ConeKind,
    pub margin: f64,
    pub witness: Witness,
    pub classification: Classification,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSummary>,
    /// Some restart stopped before its gradient reached `step_tol`. The
    /// margin is still the best value found, but a positive margin is then
    /// classified as boundary rather than interior.
    pub budget_exhausted: bool,
}

fn classify(margin: f64, tol: f64) -> Classification {
    if margin > tol {
        Classification::Interior
    } else if margin >= -tol {
        Classification::Boundary
    } else {
        Classification::Outside
    }
}

fn search_frames(
    cone: &ConeSpec,
    functional: &FrameFunctional,
    r: &CurvTensor,
    warm: &[DMatrix<f64>],
) -> SearchOutcome {
    multistart(functional, r, &cone.search, warm, &[cone.kind as u64])
}

pub fn membership(cone: &ConeSpec, r: &CurvTensor) -> Result<MembershipVerdict> {
    membership_warm(cone, r, &[])
}

/// Membership with extra starting frames for the search-based cones.
pub fn membership_warm(
    cone: &ConeSpec,
    r: &CurvTensor,
    warm: &[DMatrix<f64>],
) -> Result<MembershipVerdict> {
    cone.check_dim(r)?;
    let tol = cone.tol;
    let verdict = match cone.kind.frame_functional() {
        Some(functional) => {
            let out = search_frames(cone, &functional, r, warm);
            let best = out.best();
            let all_converged = out.all_converged();
            let margin = best.value;
            let mut classification = classify(margin, tol);
            if classification == Classification::Interior && !all_converged {
                // positive but uncertified
                classification = Classification::Boundary;
            }
            MembershipVerdict {
                cone: cone.kind,
                margin,
                witness: Witness::from_frame(cone.kind, best.frame.clone()),
                classification,
                search: Some(SearchSummary::from(&out)),
                budget_exhausted: !all_converged,
            }
        }
        None => {
            let (margin, witness) = match cone.kind {
                ConeKind::NonnegCurvOp => {
                    let (v, w) = curv_operator_matrix(r).min_eigen();
                    (v, Witness::Bivector {
                        coefficients: w.iter().copied().collect(),
                    })
                }
                ConeKind::NonnegRicci => {
                    let (v, w) = ricci(r).min_eigen();
                    (v, Witness::RicciDirection {
                        vector: w.iter().copied().collect(),
                    })
                }
                ConeKind::NonnegScalar => (scalar(r), Witness::Trace),
                ConeKind::Nic | ConeKind::NonnegSectional => unreachable!(),
            };
            MembershipVerdict {
                cone: cone.kind,
                margin,
                witness,
                classification: classify(margin, tol),
                search: None,
                budget_exhausted: false,
            }
        }
    };
    Ok(verdict)
}

/// Best isotropic curvature found over orthonormal 4-frames.
pub fn min_isotropic(r: &CurvTensor, search: &SearchBudget) -> Result<(f64, Frame4)> {
    let (best, _) = min_isotropic_detailed(r, search)?;
    Ok((best.value, Frame4::from_orthonormal(best.frame)))
}

pub fn min_isotropic_detailed(r: &CurvTensor, search: &SearchBudget) -> Result<(LocalMin, SearchOutcome)> {
    if r.dim() < 4 {
        return Err(CurvError::InvalidDimension {
            dim: r.dim(),
            reason: "isotropic curvature needs n >= 4",
        });
    }
    let out = multistart(&ISOTROPIC, r, search, &[], &[ConeKind::Nic as u64]);
    Ok((out.best().clone(), out))
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryPoint {
    pub tensor: CurvTensor,
    /// Ray parameter of the returned tensor.
    pub t: f64,
    /// Largest ray parameter seen with a positive margin.
    pub t_inside: f64,
    pub verdict: MembershipVerdict,
    pub evaluations: usize,
}

/// Walks from an interior tensor along `direction` (normalized internally)
/// to the cone boundary.
///
/// The margin along the ray is concave, so each evaluation brackets the exit
/// parameter: the witness line at an outside point overestimates it and the
/// chord between an inside and an outside point underestimates it. Those
/// estimates are tried first, with bisection as the fallback whenever the
/// bracket fails to halve.
pub fn project_to_boundary(
    cone: &ConeSpec,
    r_in: &CurvTensor,
    direction: &CurvTensor,
) -> Result<BoundaryPoint> {
    cone.check_dim(r_in)?;
    cone.check_dim(direction)?;
    let start = membership(cone, r_in)?;
    if start.classification != Classification::Interior {
        return Err(CurvError::NonInteriorStart { margin: start.margin });
    }
    let dn = direction.norm();
    if !(dn > 0.0) {
        return Err(CurvError::InvalidOptions("ray direction must be nonzero".into()));
    }
    let d = direction.scale(1.0 / dn);
    let tol = cone.tol;
    let mut warm: Vec<DMatrix<f64>> = start.witness.frame_matrix().into_iter().collect();
    let mut evaluations = 0;
    let mut eval = |t: f64, warm: &mut Vec<DMatrix<f64>>| -> Result<(CurvTensor, MembershipVerdict)> {
        let x = r_in.axpy(t, &d);
        let v = membership_warm(cone, &x, warm)?;
        if let Some(m) = v.witness.frame_matrix() {
            warm.push(m);
        }
        evaluations += 1;
        Ok((x, v))
    };

    let (mut lo, mut m_lo) = (0.0, start.margin);
    let mut t = 1.0;
    let (mut hi, mut hi_point) = loop {
        let (x, v) = eval(t, &mut warm)?;
        if v.margin.abs() <= tol {
            return Ok(BoundaryPoint {
                tensor: x,
                t,
                t_inside: if v.margin > 0.0 { t } else { lo },
                verdict: v,
                evaluations,
            });
        }
        if v.margin < 0.0 {
            break (t, (x, v));
        }
        lo = t;
        m_lo = v.margin;
        t *= 2.0;
        if t > RAY_T_MAX {
            return Err(CurvError::RayStaysInside { t_max: RAY_T_MAX });
        }
    };

    let mut force_bisect = false;
    for _ in 0..BOUNDARY_MAX_STEPS {
        let width = hi - lo;
        let m_hi = hi_point.1.margin;
        let inside = |c: f64| c > lo && c < hi;
        let mut cand = f64::NAN;
        if !force_bisect {
            let w = &hi_point.1.witness;
            let (a, b) = (w.evaluate(r_in), w.evaluate(&d));
            if b < 0.0 {
                cand = -a / b;
            }
            if !inside(cand) {
                cand = lo + m_lo * (hi - lo) / (m_lo - m_hi);
            }
        }
        if !inside(cand) {
            cand = 0.5 * (lo + hi);
        }
        if !inside(cand) {
            break;
        }
        let (x, v) = eval(cand, &mut warm)?;
        if v.margin.abs() <= tol {
            return Ok(BoundaryPoint {
                tensor: x,
                t: cand,
                t_inside: if v.margin > 0.0 { cand } else { lo },
                verdict: v,
                evaluations,
            });
        }
        if v.margin < 0.0 {
            hi = cand;
            hi_point = (x, v);
        } else {
            lo = cand;
            m_lo = v.margin;
        }
        force_bisect = !force_bisect && hi - lo > 0.5 * width;
    }
    // bracket collapsed in floating point without reaching |margin| <= tol
    let (x, v) = hi_point;
    Ok(BoundaryPoint {
        tensor: x,
        t: hi,
        t_inside: lo,
        verdict: v,
        evaluations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActiveWitness {
    pub witness: Witness,
    pub value_at_s: f64,
    pub value_at_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangentConeVerdict {
    pub contained: bool,
    /// `S` is interior, so the tangent cone is the whole space.
    pub interior: bool,
    pub active_set: Vec<ActiveWitness>,
    /// Smallest first-order constraint value of `V` over the active set
    /// (`+inf`, serialized as null, when nothing is active).
    pub min_directional_value: f64,
    /// Threshold used for `contained`: `tol * max(1, |V|)`.
    pub threshold: f64,
}

/// First-order test of `V in T_S C`: every active constraint must be
/// nondecreasing along `V`.
pub fn tangent_cone_contains(cone: &ConeSpec, s: &CurvTensor, v: &CurvTensor) -> Result<TangentConeVerdict> {
    cone.check_dim(s)?;
    cone.check_dim(v)?;
    let verdict = membership(cone, s)?;
    let threshold = cone.tol * v.norm().max(1.0);
    if verdict.classification == Classification::Outside {
        return Err(CurvError::InvalidQuery { margin: verdict.margin });
    }
    if verdict.classification == Classification::Interior {
        return Ok(TangentConeVerdict {
            contained: true,
            interior: true,
            active_set: Vec::new(),
            min_directional_value: f64::INFINITY,
            threshold,
        });
    }
    let active_set = match cone.kind {
        ConeKind::Nic | ConeKind::NonnegSectional => active_frames(cone, s, v, &verdict)?,
        ConeKind::NonnegCurvOp => active_eigenspace(&curv_operator_matrix(s), &curv_operator_matrix(v), |w| {
            Witness::Bivector {
                coefficients: w.iter().copied().collect(),
            }
        }),
        ConeKind::NonnegRicci => active_eigenspace(&ricci(s), &ricci(v), |w| Witness::RicciDirection {
            vector: w.iter().copied().collect(),
        }),
        ConeKind::NonnegScalar => {
            let value_at_s = scalar(s);
            if value_at_s <= ACTIVATION_TOL {
                vec![ActiveWitness {
                    witness: Witness::Trace,
                    value_at_s,
                    value_at_v: scalar(v),
                }]
            } else {
                Vec::new()
            }
        }
    };
    let min_directional_value = active_set
        .iter()
        .map(|a| a.value_at_v)
        .fold(f64::INFINITY, f64::min);
    Ok(TangentConeVerdict {
        contained: min_directional_value >= -threshold,
        interior: false,
        active_set,
        min_directional_value,
        threshold,
    })
}

/// Active eigenvectors of `ms` plus the minimizer of the compression of
/// `mv` to the active eigenspace, which is the first-order rate of the
/// smallest eigenvalue along `V`.
fn active_eigenspace(
    ms: &SymMatrix,
    mv: &SymMatrix,
    wrap: impl Fn(&DVector<f64>) -> Witness,
) -> Vec<ActiveWitness> {
    let (values, vectors) = ms.sorted_eigen();
    let active: Vec<usize> = (0..values.len()).filter(|&a| values[a] <= ACTIVATION_TOL).collect();
    if active.is_empty() {
        return Vec::new();
    }
    let basis = DMatrix::from_fn(ms.dim(), active.len(), |r, c| vectors[(r, active[c])]);
    let mut out: Vec<ActiveWitness> = active
        .iter()
        .map(|&a| {
            let w = vectors.column(a).into_owned();
            ActiveWitness {
                witness: wrap(&w),
                value_at_s: values[a],
                value_at_v: mv.quadratic_form(&w),
            }
        })
        .collect();
    if active.len() > 1 {
        let compressed = SymMatrix::new(basis.transpose() * mv.matrix() * &basis).expect("compression is symmetric");
        let (_, y) = compressed.min_eigen();
        let w = &basis * y;
        out.push(ActiveWitness {
            witness: wrap(&w),
            value_at_s: ms.quadratic_form(&w),
            value_at_v: mv.quadratic_form(&w),
        });
    }
    out
}

/// Pools local minima of the frame functional at `S` that are active, adds
/// minima of `S + eps V` started from each of them (these slide along a
/// degenerate active set towards the smallest value of `V`) and removes
/// duplicates by comparing functional values on a few probe tensors.
fn active_frames(
    cone: &ConeSpec,
    s: &CurvTensor,
    v: &CurvTensor,
    verdict: &MembershipVerdict,
) -> Result<Vec<ActiveWitness>> {
    let functional = cone.kind.frame_functional().expect("frame cone");
    let warm: Vec<DMatrix<f64>> = verdict.witness.frame_matrix().into_iter().collect();
    let out = search_frames(cone, &functional, s, &warm);
    let mut frames: Vec<DMatrix<f64>> = out
        .minima
        .iter()
        .filter(|m| m.value <= ACTIVATION_TOL)
        .map(|m| m.frame.clone())
        .collect();

    let vn = v.norm();
    if vn > 0.0 && !frames.is_empty() {
        let eps = 1e-4 * s.norm().max(1.0) / vn;
        let tilted = s.axpy(eps, v);
        let refined: Vec<DMatrix<f64>> = frames
            .iter()
            .map(|f| local_minimize(&functional, &tilted, f.clone(), cone.search.max_iters, cone.search.step_tol).frame)
            .filter(|f| functional.value(s, f) <= ACTIVATION_TOL)
            .collect();
        frames.extend(refined);
    }

    let mut g = rng::substream(cone.search.seed, &[tag::FINGERPRINT]);
    let probes = [
        s.clone(),
        v.clone(),
        CurvTensor::from_fn(s.dim(), |_, _, _, _| rng::gaussian(&mut g)),
        CurvTensor::from_fn(s.dim(), |_, _, _, _| rng::gaussian(&mut g)),
    ];
    let fp_tol = 1e-9 * s.norm().max(vn).max(1.0);
    let mut seen: Vec<Vec<f64>> = Vec::new();
    let mut active = Vec::new();
    for f in frames {
        let fp: Vec<f64> = probes.iter().map(|p| functional.value(p, &f)).collect();
        if seen
            .iter()
            .any(|o| o.iter().zip(&fp).all(|(a, b)| (a - b).abs() <= fp_tol))
        {
            continue;
        }
        active.push(ActiveWitness {
            witness: Witness::from_frame(cone.kind, f),
            value_at_s: fp[0],
            value_at_v: fp[1],
        });
        seen.push(fp);
    }
    Ok(active)
}

/// Outcome of one check in a statistical suite.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport<W: Serialize> {
    pub cone: ConeKind,
    pub dim: usize,
    pub seed: u64,
    pub trials: usize,
    pub pass: usize,
    pub fail: usize,
    pub worst: f64,
    pub witnesses: Vec<W>,
}

impl<W: Serialize> SuiteReport<W> {
    pub fn passed(&self) -> bool {
        self.fail == 0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionIiiSample {
    pub sample: usize,
    pub norm: f64,
    pub scalar: f64,
    pub ricci_norm: f64,
    pub passed: bool,
}

/// Threshold for "the Ricci tensor is nonzero", relative to `|R|`.
pub const RICCI_NONZERO_TOL: f64 = 1e-9;

/// Samples the cone and checks that nonzero elements have nonnegative scalar
/// curvature and nonzero Ricci tensor. `worst` is the smallest `scal / |R|`;
/// the witness list holds every failing sample plus the sample with the
/// smallest `|Ric| / |R|`.
pub fn check_condition_iii(cone: &ConeSpec, samples: usize, seed: u64) -> Result<SuiteReport<ConditionIiiSample>> {
    if !matches!(cone.kind, ConeKind::Nic | ConeKind::NonnegCurvOp) {
        return Err(CurvError::UnsupportedCone(cone.kind.name()));
    }
    let mut report = SuiteReport {
        cone: cone.kind,
        dim: cone.dim,
        seed,
        trials: samples,
        pass: 0,
        fail: 0,
        worst: f64::INFINITY,
        witnesses: Vec::new(),
    };
    let mut weakest_ricci: Option<ConditionIiiSample> = None;
    for k in 0..samples {
        let r = random_in_cone(cone, rng_seed(seed, tag::CONE_SAMPLE, k as u64))?;
        let norm = r.norm();
        let sc = scalar(&r);
        let ricci_norm = ricci(&r).frobenius();
        let passed = sc >= -1e-9 * norm && ricci_norm > RICCI_NONZERO_TOL * norm;
        report.worst = report.worst.min(sc / norm);
        let rec = ConditionIiiSample {
            sample: k,
            norm,
            scalar: sc,
            ricci_norm,
            passed,
        };
        if weakest_ricci
            .as_ref()
            .is_none_or(|w| ricci_norm / norm < w.ricci_norm / w.norm)
        {
            weakest_ricci = Some(rec.clone());
        }
        if passed {
            report.pass += 1;
        } else {
            report.fail += 1;
            report.witnesses.push(rec);
        }
    }
    if let Some(w) = weakest_ricci.filter(|w| w.passed) {
        report.witnesses.push(w);
    }
    Ok(report)
}

fn rng_seed(seed: u64, tag: u64, k: u64) -> u64 {
    use rand::Rng;
    rng::substream(seed, &[tag, k]).random()
}

/// Checks that `I` is interior with margin at least `1 - tol`.
pub fn check_condition_iv(cone: &ConeSpec) -> Result<SuiteReport<MembershipVerdict>> {
    let v = membership(cone, &identity_tensor(cone.dim)?)?;
    let ok = v.classification == Classification::Interior && v.margin >= 1.0 - cone.tol;
    Ok(SuiteReport {
        cone: cone.kind,
        dim: cone.dim,
        seed: cone.search.seed,
        trials: 1,
        pass: usize::from(ok),
        fail: usize::from(!ok),
        worst: v.margin,
        witnesses: vec![v],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceTrial {
    pub trial: usize,
    pub ray_t: f64,
    pub boundary_margin: f64,
    pub min_directional_value: f64,
    pub active_witnesses: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violating: Vec<ActiveWitness>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryTrial {
    pub trajectory: usize,
    pub final_time: f64,
    pub blowup_detected: bool,
    pub samples_checked: usize,
    /// Smallest margin along the trajectory, rescaled to the initial norm.
    pub min_normalized_margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub cone: ConeKind,
    pub dim: usize,
    pub seed: u64,
    pub trials: usize,
    pub pass: usize,
    pub fail: usize,
    /// Smallest `min_directional_value` over all trials.
    pub worst: f64,
    pub witnesses: Vec<InvarianceTrial>,
    pub trajectories: Vec<TrajectoryTrial>,
}

impl InvarianceReport {
    pub fn passed(&self) -> bool {
        self.fail == 0 && self.trajectories.iter().all(|t| t.passed)
    }
}

/// Attempts per trial to draw a ray that leaves the cone.
const EXIT_DIRECTION_ATTEMPTS: u64 = 32;
/// Samples per trajectory at which the margin is evaluated.
const TRAJECTORY_CHECKPOINTS: usize = 8;

/// Tests the ODE invariance of the cone at boundary points.
///
/// Each trial walks from `I` along a random direction to a boundary point
/// `S` and asks whether `Q(S)` lies in the tangent cone at `S`. A trial
/// fails when the directional value drops below `-10 tol max(1, |Q(S)|)`;
/// failing trials are listed in `witnesses`. The trajectory variant starts
/// from interior samples, integrates the ODE until blowup and checks the
/// margin (rescaled to the starting norm) at evenly spaced samples.
pub fn invariance_check(cone: &ConeSpec, trials: usize, seed: u64, trajectories: usize) -> Result<InvarianceReport> {
    let n = cone.dim;
    let start = identity_tensor(n)?;
    let mut report = InvarianceReport {
        cone: cone.kind,
        dim: n,
        seed,
        trials,
        pass: 0,
        fail: 0,
        worst: f64::INFINITY,
        witnesses: Vec::new(),
        trajectories: Vec::new(),
    };
    for trial in 0..trials {
        let mut boundary = None;
        for attempt in 0..EXIT_DIRECTION_ATTEMPTS {
            let dir = random_curvature(n, rng_seed(seed, tag::INVARIANCE, (trial as u64) << 8 | attempt))?;
            match project_to_boundary(cone, &start, &dir) {
                Ok(p) => {
                    boundary = Some(p);
                    break;
                }
                Err(CurvError::RayStaysInside { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        let p = boundary.ok_or(CurvError::BudgetExhausted {
            attempts: EXIT_DIRECTION_ATTEMPTS as usize,
        })?;
        let v = q_term(&p.tensor);
        let tc = tangent_cone_contains(cone, &p.tensor, &v)?;
        report.worst = report.worst.min(tc.min_directional_value);
        let limit = -10.0 * cone.tol * v.norm().max(1.0);
        if tc.min_directional_value >= limit {
            report.pass += 1;
        } else {
            report.fail += 1;
            report.witnesses.push(InvarianceTrial {
                trial,
                ray_t: p.t,
                boundary_margin: p.verdict.margin,
                min_directional_value: tc.min_directional_value,
                active_witnesses: tc.active_set.len(),
                violating: tc.active_set.into_iter().filter(|a| a.value_at_v < limit).collect(),
            });
        }
    }
    for j in 0..trajectories {
        report
            .trajectories
            .push(trajectory_trial(cone, j, rng_seed(seed, tag::INVARIANCE, u64::MAX - j as u64))?);
    }
    Ok(report)
}

fn trajectory_trial(cone: &ConeSpec, index: usize, seed: u64) -> Result<TrajectoryTrial> {
    let r0 = random_in_cone(cone, seed)?;
    let n0 = r0.norm();
    let opts = FlowOptions {
        method: FlowMethod::Rk4Adaptive,
        step: 1e-3 / n0.max(1e-12),
        t_end: 1e3 / n0.max(1e-12),
        normalized: false,
        blowup_threshold: 1e3 * n0,
        sample_every: 1,
        rel_tol: 1e-9,
    };
    let rec = integrate(&r0, &opts)?;
    let count = rec.tensors.len();
    let picks: Vec<usize> = if count <= TRAJECTORY_CHECKPOINTS {
        (0..count).collect()
    } else {
        (0..TRAJECTORY_CHECKPOINTS)
            .map(|a| a * (count - 1) / (TRAJECTORY_CHECKPOINTS - 1))
            .collect()
    };
    let mut min_margin = f64::INFINITY;
    for &a in &picks {
        let r = &rec.tensors[a];
        let m = membership(cone, &r.scale(n0 / r.norm()))?.margin;
        min_margin = min_margin.min(m);
    }
    Ok(TrajectoryTrial {
        trajectory: index,
        final_time: rec.final_time(),
        blowup_detected: rec.status == crate::flow::FlowStatus::BlowupDetected,
        samples_checked: picks.len(),
        min_normalized_margin: min_margin,
        passed: min_margin >= -10.0 * cone.tol,
    })
}
