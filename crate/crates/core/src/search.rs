//! Multistart local minimization of frame functionals over orthonormal
//! `n x k` frames (the Stiefel manifold).
//!
//! Each restart runs Riemannian steepest descent: the Euclidean gradient is
//! projected onto the tangent space `{Z : X^T Z skew}`, steps are retracted
//! by sign-fixed QR, step sizes start from a Barzilai-Borwein guess and are
//! cut back until a nonmonotone Armijo condition holds. The condition is
//! measured against the largest of the last few values and allows an
//! increase at rounding level, so the iteration can keep reducing the
//! gradient after the functional has stopped changing in floating point.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::functional::FrameFunctional;
use crate::rng::{self, tag};
use crate::tensor::CurvTensor;

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const NONMONOTONE_MEMORY: usize = 10;
/// Allowed increase of the functional per step, relative to the tensor scale.
const ROUNDING_SLACK: f64 = 64.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub restarts: usize,
    pub max_iters: usize,
    pub step_tol: f64,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            restarts: 64,
            max_iters: 500,
            step_tol: 1e-12,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LocalMin {
    pub value: f64,
    pub frame: DMatrix<f64>,
    pub grad_norm: f64,
    pub iters: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    /// One entry per start, warm starts first.
    pub minima: Vec<LocalMin>,
    pub best: usize,
}

impl SearchOutcome {
    pub fn best(&self) -> &LocalMin {
        &self.minima[self.best]
    }

    pub fn converged_restarts(&self) -> usize {
        self.minima.iter().filter(|m| m.converged).count()
    }

    pub fn all_converged(&self) -> bool {
        self.minima.iter().all(|m| m.converged)
    }

    pub fn total_iters(&self) -> usize {
        self.minima.iter().map(|m| m.iters).sum()
    }
}

/// `G - X sym(X^T G)`.
pub fn tangent_projection(x: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
    let xtg = x.transpose() * g;
    let sym = (&xtg + xtg.transpose()) * 0.5;
    g - x * sym
}

pub fn local_minimize(
    functional: &FrameFunctional,
    r: &CurvTensor,
    start: DMatrix<f64>,
    max_iters: usize,
    step_tol: f64,
) -> LocalMin {
    let scale = r.norm().max(1.0);
    let tol = step_tol * scale;
    let mut x = rng::orthonormalize(&start);
    let (mut f, g) = functional.value_and_grad(r, &x);
    let mut rg = tangent_projection(&x, &g);
    let mut gn = rg.norm();
    let mut t = 1.0 / scale;
    let mut iters = 0;
    let mut converged = gn <= tol;
    let slack = ROUNDING_SLACK * scale;
    let mut history = std::collections::VecDeque::from([f]);

    while !converged && iters < max_iters {
        iters += 1;
        let f_ref = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut accepted = None;
        let mut step = t;
        for _ in 0..MAX_BACKTRACKS {
            let cand = rng::orthonormalize(&(&x - &rg * step));
            let fc = functional.value(r, &cand);
            if fc <= f_ref - ARMIJO_C * step * gn * gn + slack {
                accepted = Some((cand, fc));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            break;
        };
        let (_, g_new) = functional.value_and_grad(r, &x_new);
        let rg_new = tangent_projection(&x_new, &g_new);
        let s = &x_new - &x;
        let y = &rg_new - &rg;
        let sy = s.dot(&y);
        t = if sy > 0.0 { s.norm_squared() / sy } else { 2.0 * step };
        t = t.clamp(1e-10 / scale, 1e10 / scale);
        x = x_new;
        f = f_new;
        history.push_back(f);
        if history.len() > NONMONOTONE_MEMORY {
            history.pop_front();
        }
        rg = rg_new;
        gn = rg.norm();
        converged = gn <= tol;
    }
    LocalMin {
        value: f,
        frame: x,
        grad_norm: gn,
        iters,
        converged,
    }
}

/// Runs one local minimization per warm start and per random restart.
///
/// Random starts are Haar-distributed frames drawn from the substream
/// `(budget.seed, stream_keys, restart)`, so results do not depend on
/// thread scheduling.
pub fn multistart(
    functional: &FrameFunctional,
    r: &CurvTensor,
    budget: &SearchBudget,
    warm_starts: &[DMatrix<f64>],
    stream_keys: &[u64],
) -> SearchOutcome {
    let n = r.dim();
    let k = functional.frame_size;
    let mut starts: Vec<DMatrix<f64>> = warm_starts.to_vec();
    for restart in 0..budget.restarts {
        let mut keys = vec![tag::FRAME_SEARCH];
        keys.extend_from_slice(stream_keys);
        keys.push(restart as u64);
        let mut g = rng::substream(budget.seed, &keys);
        starts.push(rng::random_frame(&mut g, n, k));
    }
    let minima: Vec<LocalMin> = starts
        .into_par_iter()
        .map(|s| local_minimize(functional, r, s, budget.max_iters, budget.step_tol))
        .collect();
    let best = minima
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value))
        .map_or(0, |(i, _)| i);
    SearchOutcome { minima, best }
}
