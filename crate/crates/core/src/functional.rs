//! Multilinear frame functionals.
//!
//! A frame functional is a fixed linear combination of pulled-back curvature
//! components `R(e_a, e_b, e_c, e_d)` where `e_0..e_{k-1}` are the columns of
//! an `n x k` frame. Isotropic curvature (k = 4) and sectional curvature
//! (k = 2) are both of this form, which gives a closed-form Euclidean
//! gradient with respect to the frame.

use nalgebra::DMatrix;

use crate::tensor::CurvTensor;

/// One weighted component `coef * R(e_a, e_b, e_c, e_d)`.
pub type Term = (f64, [usize; 4]);

/// `R_{1313} + R_{1414} + R_{2323} + R_{2424} - 2 R_{1234}` (frame numbered from 0 here).
pub const ISOTROPIC_TERMS: &[Term] = &[
    (1.0, [0, 2, 0, 2]),
    (1.0, [0, 3, 0, 3]),
    (1.0, [1, 2, 1, 2]),
    (1.0, [1, 3, 1, 3]),
    (-2.0, [0, 1, 2, 3]),
];

pub const SECTIONAL_TERMS: &[Term] = &[(1.0, [0, 1, 0, 1])];

#[derive(Debug, Clone, Copy)]
pub struct FrameFunctional {
    pub frame_size: usize,
    pub terms: &'static [Term],
}

pub const ISOTROPIC: FrameFunctional = FrameFunctional {
    frame_size: 4,
    terms: ISOTROPIC_TERMS,
};

pub const SECTIONAL: FrameFunctional = FrameFunctional {
    frame_size: 2,
    terms: SECTIONAL_TERMS,
};

/// `A[i][b][c][d] = sum_{jkl} R_{ijkl} F_{jb} F_{kc} F_{ld}`, stored flat.
struct Contraction {
    n: usize,
    k: usize,
    data: Vec<f64>,
}

impl Contraction {
    fn new(r: &CurvTensor, frame: &DMatrix<f64>) -> Self {
        let n = r.dim();
        let k = frame.ncols();
        let src = r.data();
        // contract the last slot: t1[i][j][kk][d]
        let mut t1 = vec![0.0; n * n * n * k];
        for ijk in 0..n * n * n {
            let row = &src[ijk * n..(ijk + 1) * n];
            for d in 0..k {
                let mut s = 0.0;
                for (l, &v) in row.iter().enumerate() {
                    s += v * frame[(l, d)];
                }
                t1[ijk * k + d] = s;
            }
        }
        // third slot: t2[i][j][c][d]
        let mut t2 = vec![0.0; n * n * k * k];
        for ij in 0..n * n {
            for c in 0..k {
                for d in 0..k {
                    let mut s = 0.0;
                    for kk in 0..n {
                        s += t1[(ij * n + kk) * k + d] * frame[(kk, c)];
                    }
                    t2[(ij * k + c) * k + d] = s;
                }
            }
        }
        // second slot: a[i][b][c][d]
        let mut data = vec![0.0; n * k * k * k];
        for i in 0..n {
            for b in 0..k {
                for cd in 0..k * k {
                    let mut s = 0.0;
                    for j in 0..n {
                        s += t2[(i * n + j) * k * k + cd] * frame[(j, b)];
                    }
                    data[(i * k + b) * k * k + cd] = s;
                }
            }
        }
        Self { n, k, data }
    }

    #[inline]
    fn at(&self, i: usize, b: usize, c: usize, d: usize) -> f64 {
        self.data[((i * self.k + b) * self.k + c) * self.k + d]
    }

    /// `R(e_a, e_b, e_c, e_d)`.
    fn component(&self, frame: &DMatrix<f64>, [a, b, c, d]: [usize; 4]) -> f64 {
        (0..self.n).map(|i| frame[(i, a)] * self.at(i, b, c, d)).sum()
    }
}

impl FrameFunctional {
    pub fn value(&self, r: &CurvTensor, frame: &DMatrix<f64>) -> f64 {
        let a = Contraction::new(r, frame);
        self.terms
            .iter()
            .map(|&(coef, idx)| coef * a.component(frame, idx))
            .sum()
    }

    /// Value and Euclidean gradient with respect to the frame entries.
    pub fn value_and_grad(&self, r: &CurvTensor, frame: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let a = Contraction::new(r, frame);
        let n = a.n;
        let mut grad = DMatrix::zeros(n, frame.ncols());
        let mut value = 0.0;
        for &(coef, [p, q, s, t]) in self.terms {
            value += coef * a.component(frame, [p, q, s, t]);
            // R(x,q,s,t) = A[x,q,s,t]; R(p,x,s,t) = -A[x,p,s,t];
            // R(p,q,x,t) = A[x,t,p,q]; R(p,q,s,x) = -A[x,s,p,q]
            for i in 0..n {
                grad[(i, p)] += coef * a.at(i, q, s, t);
                grad[(i, q)] -= coef * a.at(i, p, s, t);
                grad[(i, s)] += coef * a.at(i, t, p, q);
                grad[(i, t)] -= coef * a.at(i, s, p, q);
            }
        }
        (value, grad)
    }
}
