//! The quadratic reaction term `Q(R)` and the ODE `dR/dt = Q(R)`.

use serde::{Deserialize, Serialize};

use crate::error::{CurvError, Result};
use crate::tensor::{scalar, CurvTensor};

/// `Q(R)_ijkl = sum_pq R_ijpq R_klpq + 2 sum_pq (R_ipkq R_jplq - R_iplq R_jpkq)`.
pub fn q_term(r: &CurvTensor) -> CurvTensor {
    q_term_checked(r).0
}

/// `Q(R)` plus the size of the Bianchi correction that was applied to it.
///
/// `Q` maps algebraic curvature tensors to algebraic curvature tensors, so
/// the correction should sit at round-off level.
pub fn q_term_checked(r: &CurvTensor) -> (CurvTensor, f64) {
    let n = r.dim();
    let nn = n * n;
    let data = r.data();
    // mixed[((i*n + k)*n + p)*n + q] = R_ipkq
    let mut mixed = vec![0.0; n * n * n * n];
    for i in 0..n {
        for p in 0..n {
            for k in 0..n {
                for q in 0..n {
                    mixed[((i * n + k) * n + p) * n + q] = r.get(i, p, k, q);
                }
            }
        }
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let row = |i: usize, j: usize| &data[(i * n + j) * nn..(i * n + j + 1) * nn];
    let mix = |i: usize, k: usize| &mixed[(i * n + k) * nn..(i * n + k + 1) * nn];

    let raw = CurvTensor::from_orbits(n, |i, j, k, l| {
        let square = dot(row(i, j), row(k, l));
        let sharp = dot(mix(i, k), mix(j, l)) - dot(mix(i, l), mix(j, k));
        square + 2.0 * sharp
    });
    let projected = CurvTensor::from_fn(n, |i, j, k, l| raw.get(i, j, k, l));
    let residual = (&raw - &projected).norm();
    (projected, residual)
}

/// `|Q(R) - 2(n-1) R| / max(1, |R|^2)`: zero exactly when `R` is a fixed
/// point of the curvature equation of a locally symmetric Einstein space
/// with `Ric = (n-1) g`.
pub fn fixed_point_residual(r: &CurvTensor) -> f64 {
    let n = r.dim() as f64;
    let diff = q_term(r).axpy(-2.0 * (n - 1.0), r);
    diff.norm() / r.norm().powi(2).max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMethod {
    Rk4Fixed,
    Rk4Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub method: FlowMethod,
    /// Fixed step, or the initial step for the adaptive method.
    pub step: f64,
    pub t_end: f64,
    /// Rescale after every accepted step so the scalar curvature keeps its
    /// initial value.
    pub normalized: bool,
    pub blowup_threshold: f64,
    /// Record every `sample_every`-th accepted step (the endpoints always).
    pub sample_every: usize,
    /// Relative local error target for the adaptive method.
    pub rel_tol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            method: FlowMethod::Rk4Adaptive,
            step: 1e-3,
            t_end: 0.1,
            normalized: false,
            blowup_threshold: 1e12,
            sample_every: 1,
            rel_tol: 1e-9,
        }
    }
}

impl FlowOptions {
    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(CurvError::InvalidOptions(format!("step must be > 0, got {}", self.step)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(CurvError::InvalidOptions(format!("t_end must be > 0, got {}", self.t_end)));
        }
        if self.sample_every == 0 {
            return Err(CurvError::InvalidOptions("sample_every must be >= 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(CurvError::InvalidOptions("rel_tol must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowStatus {
    Completed,
    BlowupDetected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub t: f64,
    pub norm: f64,
    pub scalar: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub tensors: Vec<CurvTensor>,
    pub status: FlowStatus,
    pub diagnostics: Vec<StepDiagnostics>,
    pub rejected_steps: usize,
}

impl TrajectoryRecord {
    pub fn final_tensor(&self) -> &CurvTensor {
        self.tensors.last().expect("trajectory always holds the initial tensor")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory always holds the initial time")
    }
}

fn rk4_step(y: &CurvTensor, h: f64) -> CurvTensor {
    let k1 = q_term(y);
    let k2 = q_term(&y.axpy(0.5 * h, &k1));
    let k3 = q_term(&y.axpy(0.5 * h, &k2));
    let k4 = q_term(&y.axpy(h, &k3));
    let incr = &(&k1 + &k4) + &(&k2 + &k3).scale(2.0);
    y.axpy(h / 6.0, &incr)
}

/// Integrates `dR/dt = Q(R)` from `r0` with classical RK4.
///
/// The adaptive method estimates the local error by step doubling and keeps
/// the Richardson-extrapolated value. Crossing `blowup_threshold` ends the
/// run with [`FlowStatus::BlowupDetected`]; that is a result, not an error.
pub fn integrate(r0: &CurvTensor, opts: &FlowOptions) -> Result<TrajectoryRecord> {
    opts.validate()?;
    let scalar0 = scalar(r0);
    if opts.normalized && scalar0 <= 0.0 {
        return Err(CurvError::InvalidNormalization { scalar: scalar0 });
    }
    let mut rec = TrajectoryRecord {
        times: vec![0.0],
        tensors: vec![r0.clone()],
        status: FlowStatus::Completed,
        diagnostics: Vec::new(),
        rejected_steps: 0,
    };
    let mut y = r0.clone();
    let mut t = 0.0;
    let mut h = opts.step;
    let mut accepted = 0usize;
    let end_eps = 1e-12 * opts.t_end;

    while opts.t_end - t > end_eps {
        let h_try = h.min(opts.t_end - t);
        let mut next = match opts.method {
            FlowMethod::Rk4Fixed => rk4_step(&y, h_try),
            FlowMethod::Rk4Adaptive => {
                let full = rk4_step(&y, h_try);
                let half = rk4_step(&rk4_step(&y, 0.5 * h_try), 0.5 * h_try);
                let diff = &half - &full;
                let err = diff.norm() / 15.0 / half.norm().max(f64::MIN_POSITIVE);
                if !err.is_finite() && !half.is_finite() {
                    return Err(CurvError::NumericFailure { t });
                }
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * (opts.rel_tol / err).powf(0.2)).clamp(0.1, 5.0)
                };
                if err > opts.rel_tol {
                    rec.rejected_steps += 1;
                    h = h_try * factor;
                    if h <= 1e-15 * t.max(1.0) {
                        // a step this small only happens at a finite-time singularity
                        rec.status = FlowStatus::BlowupDetected;
                        break;
                    }
                    continue;
                }
                h = if h_try < h { h } else { h_try * factor };
                half.axpy(1.0 / 15.0, &diff)
            }
        };
        if !next.is_finite() {
            return Err(CurvError::NumericFailure { t: t + h_try });
        }
        if opts.normalized {
            let s = scalar(&next);
            if !(s > 0.0) {
                return Err(CurvError::NumericFailure { t: t + h_try });
            }
            next = next.scale(scalar0 / s);
        }
        t += h_try;
        y = next;
        accepted += 1;
        let norm = y.norm();
        rec.diagnostics.push(StepDiagnostics {
            t,
            norm,
            scalar: scalar(&y),
            step: h_try,
        });
        let blown = norm > opts.blowup_threshold;
        let done = opts.t_end - t <= end_eps;
        if blown || done || accepted.is_multiple_of(opts.sample_every) {
            rec.times.push(t);
            rec.tensors.push(y.clone());
        }
        if blown {
            rec.status = FlowStatus::BlowupDetected;
            break;
        }
    }
    if rec.status == FlowStatus::BlowupDetected && *rec.times.last().unwrap() < t {
        rec.times.push(t);
        rec.tensors.push(y);
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::identity_tensor;

    #[test]
    fn q_of_identity_is_scaled_identity() {
        let i4 = identity_tensor(4).unwrap();
        let (q, residual) = q_term_checked(&i4);
        assert_eq!(q.get(0, 1, 0, 1), 6.0);
        assert!(q.max_abs_diff(&i4.scale(6.0)) < 1e-13);
        assert!(residual < 1e-13);
        let c = 0.7;
        let qc = q_term(&i4.scale(c));
        assert!(qc.max_abs_diff(&i4.scale(6.0 * c * c)) < 1e-13);
    }

    #[test]
    fn scalar_of_q_identity() {
        for n in 4..=6 {
            let nf = n as f64;
            let s = scalar(&q_term(&identity_tensor(n).unwrap()));
            assert!((s - 2.0 * (nf - 1.0) * nf * (nf - 1.0)).abs() < 1e-11);
        }
    }

    #[test]
    fn zero_stays_zero() {
        let z = CurvTensor::zeros(4);
        let rec = integrate(&z, &FlowOptions::default()).unwrap();
        assert_eq!(rec.status, FlowStatus::Completed);
        assert!(rec.tensors.iter().all(|t| t.norm() == 0.0));
        assert!((rec.final_time() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn normalized_flow_keeps_identity_fixed() {
        let i4 = identity_tensor(4).unwrap();
        let opts = FlowOptions {
            normalized: true,
            t_end: 0.5,
            step: 0.01,
            ..FlowOptions::default()
        };
        let rec = integrate(&i4, &opts).unwrap();
        assert!(rec.final_tensor().max_abs_diff(&i4) < 1e-12);
    }

    #[test]
    fn normalized_requires_positive_scalar() {
        let opts = FlowOptions {
            normalized: true,
            ..FlowOptions::default()
        };
        let neg = identity_tensor(4).unwrap().scale(-1.0);
        assert!(matches!(
            integrate(&neg, &opts),
            Err(CurvError::InvalidNormalization { .. })
        ));
    }

    #[test]
    fn blowup_is_reported() {
        // c(t) = 1 / (1 - 6t) blows up at t = 1/6
        let opts = FlowOptions {
            t_end: 1.0,
            step: 1e-3,
            blowup_threshold: 1e6,
            ..FlowOptions::default()
        };
        let rec = integrate(&identity_tensor(4).unwrap(), &opts).unwrap();
        assert_eq!(rec.status, FlowStatus::BlowupDetected);
        assert!(rec.final_time() < 1.0 / 6.0);
        assert!(rec.final_tensor().norm() > 1e6);
    }

    #[test]
    fn rejects_bad_options() {
        let opts = FlowOptions {
            step: 0.0,
            ..FlowOptions::default()
        };
        assert!(integrate(&identity_tensor(4).unwrap(), &opts).is_err());
    }

    #[test]
    fn samples_are_strictly_increasing() {
        let opts = FlowOptions {
            method: FlowMethod::Rk4Fixed,
            step: 0.003,
            t_end: 0.1,
            sample_every: 4,
            ..FlowOptions::default()
        };
        let rec = integrate(&identity_tensor(4).unwrap(), &opts).unwrap();
        assert!(rec.times.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(rec.times.len(), rec.tensors.len());
        assert!((rec.final_time() - 0.1).abs() < 1e-15);
    }
}
