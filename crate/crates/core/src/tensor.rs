//! Algebraic curvature tensors at a point of R^n in an orthonormal frame.
//!
//! The metric is the identity, so indices are raised and lowered freely.
//! Sign convention: the identity tensor `I_{ijkl} = d_ik d_jl - d_il d_jk`
//! has `I_{ijij} = 1`, i.e. the unit sphere has sectional curvature +1.
//!
//! Components are stored densely (`n^4` entries). Every constructor fills
//! whole symmetry orbits from one representative, so the two antisymmetries
//! and pair symmetry hold bit-exactly; the first Bianchi identity holds up to
//! round-off.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{CurvError, Result};
use crate::functional::{ISOTROPIC, SECTIONAL};

/// Orthonormality tolerance for user-supplied frames and planes.
pub const ORTHONORMAL_TOL: f64 = 1e-12;

#[inline]
fn flat(n: usize, i: usize, j: usize, k: usize, l: usize) -> usize {
    ((i * n + j) * n + k) * n + l
}

/// Ordered pairs `(i, j)` with `i < j` in lexicographic order: the Lambda^2 basis.
pub fn pair_basis(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((i, j));
        }
    }
    pairs
}

/// A raw 4-index array, with no symmetry guarantees.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim.pow(4)],
        }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    for l in 0..dim {
                        t.data[flat(dim, i, j, k, l)] = f(i, j, k, l);
                    }
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[flat(self.dim, i, j, k, l)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        self.data[flat(self.dim, i, j, k, l)] = v;
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest violation of `T_ijkl = -T_jikl = -T_ijlk = T_klij`.
    pub fn pair_symmetry_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = self.get(i, j, k, l);
                        worst = worst
                            .max((v + self.get(j, i, k, l)).abs())
                            .max((v + self.get(i, j, l, k)).abs())
                            .max((v - self.get(k, l, i, j)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest violation of the first Bianchi identity.
    pub fn bianchi_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let s = self.get(i, j, k, l) + self.get(i, k, l, j) + self.get(i, l, j, k);
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }
}

/// An element of the space of algebraic curvature tensors on R^n.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvTensor {
    dim: usize,
    data: Vec<f64>,
}

impl CurvTensor {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim.pow(4)],
        }
    }

    /// Builds a tensor from `f` evaluated on one representative per symmetry
    /// orbit, then removes any totally antisymmetric part.
    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        Self::from_orbits(dim, f).bianchi_projected()
    }

    /// Like [`CurvTensor::from_fn`] but skips the Bianchi projection. Only for
    /// formulas that satisfy the Bianchi identity analytically.
    pub(crate) fn from_orbits(
        dim: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Self {
        let mut t = Self::zeros(dim);
        let pairs = pair_basis(dim);
        for (p, &(i, j)) in pairs.iter().enumerate() {
            for &(k, l) in &pairs[p..] {
                t.set_orbit(i, j, k, l, f(i, j, k, l));
            }
        }
        t
    }

    fn set_orbit(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        let n = self.dim;
        for &(a, b, c, d) in &[(i, j, k, l), (k, l, i, j)] {
            self.data[flat(n, a, b, c, d)] = v;
            self.data[flat(n, b, a, c, d)] = -v;
            self.data[flat(n, a, b, d, c)] = -v;
            self.data[flat(n, b, a, d, c)] = v;
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[flat(self.dim, i, j, k, l)]
    }

    pub fn as_tensor4(&self) -> Tensor4 {
        Tensor4 {
            dim: self.dim,
            data: self.data.clone(),
        }
    }

    fn bianchi_projected(&self) -> Self {
        Self::from_orbits(self.dim, |i, j, k, l| {
            let cyc = self.get(i, j, k, l) + self.get(i, k, l, j) + self.get(i, l, j, k);
            self.get(i, j, k, l) - cyc / 3.0
        })
    }

    /// Largest violation of any of the three algebraic symmetries.
    pub fn symmetry_defect(&self) -> f64 {
        let t = self.as_tensor4();
        t.pair_symmetry_defect().max(t.bianchi_defect())
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in axpy");
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        check_dims(self.dim, other.dim)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// The 4-index pullback `(g.R)_{ijkl} = sum g_ia g_jb g_kc g_ld R_abcd`.
    pub fn rotate(&self, g: &DMatrix<f64>) -> Self {
        let n = self.dim;
        assert_eq!((g.nrows(), g.ncols()), (n, n), "rotation must be n x n");
        let full = pullback(self, &g.transpose());
        Self::from_fn(n, |i, j, k, l| full[flat(n, i, j, k, l)])
    }
}

impl Add for &CurvTensor {
    type Output = CurvTensor;
    fn add(self, rhs: &CurvTensor) -> CurvTensor {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &CurvTensor {
    type Output = CurvTensor;
    fn sub(self, rhs: &CurvTensor) -> CurvTensor {
        self.axpy(-1.0, rhs)
    }
}

impl Neg for &CurvTensor {
    type Output = CurvTensor;
    fn neg(self) -> CurvTensor {
        self.scale(-1.0)
    }
}

impl Mul<&CurvTensor> for f64 {
    type Output = CurvTensor;
    fn mul(self, rhs: &CurvTensor) -> CurvTensor {
        rhs.scale(self)
    }
}

/// `T_{abcd} = sum R_ijkl M_ia M_jb M_kc M_ld` for an `n x m` matrix `M`, flat `m^4`.
fn pullback(r: &CurvTensor, m: &DMatrix<f64>) -> Vec<f64> {
    let n = r.dim();
    let k = m.ncols();
    let mut cur: Vec<f64> = r.data().to_vec();
    // contract one slot at a time, rotating the contracted slot to the front
    // shape before each step: [x][y][z][w] with sizes (s0, s1, s2, s3)
    let mut sizes = [n, n, n, n];
    for _ in 0..4 {
        let [s0, s1, s2, s3] = sizes;
        let mut next = vec![0.0; s1 * s2 * s3 * k];
        // next[y][z][w][a] = sum_x cur[x][y][z][w] m[x][a]
        for x in 0..s0 {
            for yzw in 0..s1 * s2 * s3 {
                let v = cur[x * s1 * s2 * s3 + yzw];
                if v == 0.0 {
                    continue;
                }
                for a in 0..k {
                    next[yzw * k + a] += v * m[(x, a)];
                }
            }
        }
        cur = next;
        sizes = [s1, s2, s3, k];
    }
    cur
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(CurvError::DimMismatch { left: a, right: b })
    }
}

/// A symmetric real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Wraps `m`, symmetrizing entries whose asymmetry is within round-off.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let scale = m.amax().max(1.0);
        let defect = (&m - m.transpose()).amax();
        if m.nrows() != m.ncols() || defect > 1e-12 * scale {
            return Err(CurvError::SymmetryViolation { defect });
        }
        Ok(Self((&m + m.transpose()) * 0.5))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.0[(a, b)]
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(&self.0 * c)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    /// Eigenvalues ascending with matching unit eigenvectors as columns.
    pub fn sorted_eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.0.clone());
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&a| eig.eigenvalues[a]).collect();
        let vectors = DMatrix::from_fn(self.dim(), self.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
        (values, vectors)
    }

    /// Smallest eigenvalue with a unit eigenvector.
    pub fn min_eigen(&self) -> (f64, DVector<f64>) {
        let (values, vectors) = self.sorted_eigen();
        (values[0], vectors.column(0).into_owned())
    }

    /// `w^T M w`.
    pub fn quadratic_form(&self, w: &DVector<f64>) -> f64 {
        w.dot(&(&self.0 * w))
    }
}

/// An ordered orthonormal 4-frame in R^n.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame4(DMatrix<f64>);

impl Frame4 {
    pub fn new(columns: DMatrix<f64>) -> Result<Self> {
        if columns.ncols() != 4 || columns.nrows() < 4 {
            return Err(CurvError::InvalidDimension {
                dim: columns.nrows(),
                reason: "a 4-frame needs 4 columns in dimension >= 4",
            });
        }
        let defect = orthonormality_defect(&columns);
        if defect > ORTHONORMAL_TOL {
            return Err(CurvError::InvalidFrame { defect });
        }
        Ok(Self(columns))
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let n = cols.first().map_or(0, Vec::len);
        if cols.len() != 4 || cols.iter().any(|c| c.len() != n) {
            return Err(CurvError::InvalidDimension {
                dim: n,
                reason: "a 4-frame needs 4 columns of equal length",
            });
        }
        Self::new(DMatrix::from_fn(n, 4, |r, c| cols[c][r]))
    }

    /// `(e_a, e_b, e_c, e_d)` for distinct coordinate indices.
    pub fn coordinate(n: usize, axes: [usize; 4]) -> Result<Self> {
        let mut m = DMatrix::zeros(n, 4);
        for (c, &a) in axes.iter().enumerate() {
            if a >= n {
                return Err(CurvError::InvalidDimension {
                    dim: n,
                    reason: "coordinate axis out of range",
                });
            }
            m[(a, c)] = 1.0;
        }
        Self::new(m)
    }

    pub(crate) fn from_orthonormal(m: DMatrix<f64>) -> Self {
        debug_assert!(orthonormality_defect(&m) < 1e-10);
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        self.0.column_iter().map(|c| c.iter().copied().collect()).collect()
    }

    /// `g f`.
    pub fn rotate(&self, g: &DMatrix<f64>) -> Self {
        Self(g * &self.0)
    }
}

impl Serialize for Frame4 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.columns().serialize(s)
    }
}

/// `max |F^T F - I|`.
pub fn orthonormality_defect(m: &DMatrix<f64>) -> f64 {
    let gram = m.transpose() * m;
    (gram - DMatrix::identity(m.ncols(), m.ncols())).amax()
}

/// `I_{ijkl} = d_ik d_jl - d_il d_jk`.
pub fn identity_tensor(n: usize) -> Result<CurvTensor> {
    if n < 3 {
        return Err(CurvError::InvalidDimension {
            dim: n,
            reason: "curvature tensors need n >= 3",
        });
    }
    Ok(unit_curvature(n))
}

/// The identity tensor without the `n >= 3` guard.
pub(crate) fn unit_curvature(n: usize) -> CurvTensor {
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    CurvTensor::from_orbits(n, |i, j, k, l| d(i, k) * d(j, l) - d(i, l) * d(j, k))
}

/// Removes the totally antisymmetric part:
/// `b(T)_ijkl = T_ijkl - (T_ijkl + T_iklj + T_iljk) / 3`.
pub fn project_bianchi(t: &Tensor4) -> Result<CurvTensor> {
    let defect = t.pair_symmetry_defect();
    if defect > 1e-12 * t.norm().max(1.0) {
        return Err(CurvError::SymmetryViolation { defect });
    }
    Ok(CurvTensor::from_fn(t.dim(), |i, j, k, l| t.get(i, j, k, l)))
}

/// `Ric_ik = sum_j R_ijkj`.
pub fn ricci(r: &CurvTensor) -> SymMatrix {
    let n = r.dim();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for k in i..n {
            let s: f64 = (0..n).map(|j| r.get(i, j, k, j)).sum();
            m[(i, k)] = s;
            m[(k, i)] = s;
        }
    }
    SymMatrix(m)
}

pub fn scalar(r: &CurvTensor) -> f64 {
    ricci(r).trace()
}

/// `(h ∧ k)_ijkl = h_ik k_jl + h_jl k_ik - h_il k_jk - h_jk k_il`.
pub fn kulkarni_nomizu(h: &SymMatrix, k: &SymMatrix) -> Result<CurvTensor> {
    check_dims(h.dim(), k.dim())?;
    let (h, k) = (h.matrix(), k.matrix());
    Ok(CurvTensor::from_orbits(h.nrows(), |i, j, a, b| {
        h[(i, a)] * k[(j, b)] + h[(j, b)] * k[(i, a)] - h[(i, b)] * k[(j, a)] - h[(j, a)] * k[(i, b)]
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RicciDecomposition {
    pub scalar_part: CurvTensor,
    pub traceless_ricci_part: CurvTensor,
    pub weyl_part: CurvTensor,
}

/// Orthogonal split `R = scalar part + traceless Ricci part + Weyl part`.
pub fn ricci_decomposition(r: &CurvTensor) -> Result<RicciDecomposition> {
    let n = r.dim();
    if n < 3 {
        return Err(CurvError::InvalidDimension {
            dim: n,
            reason: "Ricci decomposition needs n >= 3",
        });
    }
    let nf = n as f64;
    let ric = ricci(r);
    let scal = ric.trace();
    let delta = SymMatrix::identity(n);
    let scalar_part = kulkarni_nomizu(&delta, &delta)?.scale(scal / (2.0 * nf * (nf - 1.0)));
    let traceless = SymMatrix(ric.matrix() - delta.matrix() * (scal / nf));
    let traceless_ricci_part = kulkarni_nomizu(&traceless, &delta)?.scale(1.0 / (nf - 2.0));
    let weyl_part = if n == 3 {
        CurvTensor::zeros(n)
    } else {
        &(r - &scalar_part) - &traceless_ricci_part
    };
    Ok(RicciDecomposition {
        scalar_part,
        traceless_ricci_part,
        weyl_part,
    })
}

fn plane_matrix(n: usize, u: &[f64], v: &[f64]) -> Result<DMatrix<f64>> {
    if u.len() != n || v.len() != n {
        return Err(CurvError::DimMismatch {
            left: n,
            right: u.len().max(v.len()),
        });
    }
    let m = DMatrix::from_fn(n, 2, |r, c| if c == 0 { u[r] } else { v[r] });
    let defect = orthonormality_defect(&m);
    if defect > ORTHONORMAL_TOL {
        return Err(CurvError::InvalidPlane { defect });
    }
    Ok(m)
}

/// `R(u, v, u, v)` for an orthonormal pair.
pub fn sectional(r: &CurvTensor, u: &[f64], v: &[f64]) -> Result<f64> {
    let m = plane_matrix(r.dim(), u, v)?;
    Ok(SECTIONAL.value(r, &m))
}

/// The curvature operator on Lambda^2 in the unweighted pair basis
/// (`entry[(i,j),(k,l)] = R_ijkl`, `i < j`, `k < l`), so `I` maps to the identity.
pub fn curv_operator_matrix(r: &CurvTensor) -> SymMatrix {
    let pairs = pair_basis(r.dim());
    let m = DMatrix::from_fn(pairs.len(), pairs.len(), |a, b| {
        let ((i, j), (k, l)) = (pairs[a], pairs[b]);
        r.get(i, j, k, l)
    });
    SymMatrix(m)
}

/// Isotropic curvature of `R` on the frame `f`.
pub fn isotropic_curvature(r: &CurvTensor, f: &Frame4) -> Result<f64> {
    check_dims(r.dim(), f.dim())?;
    Ok(ISOTROPIC.value(r, f.matrix()))
}

pub fn inner(a: &CurvTensor, b: &CurvTensor) -> Result<f64> {
    a.inner(b)
}

pub fn norm(r: &CurvTensor) -> f64 {
    r.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn e(n: usize, a: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[a] = 1.0;
        v
    }

    fn product_unit_spheres() -> CurvTensor {
        // R_0101 = R_2323 = 1
        CurvTensor::from_fn(4, |i, j, k, l| match (i, j, k, l) {
            (0, 1, 0, 1) | (2, 3, 2, 3) => 1.0,
            _ => 0.0,
        })
    }

    #[test]
    fn identity_components() {
        let i4 = identity_tensor(4).unwrap();
        assert_eq!(i4.get(0, 1, 0, 1), 1.0);
        assert_eq!(i4.get(0, 1, 1, 0), -1.0);
        assert_eq!(i4.get(0, 1, 2, 3), 0.0);
        assert_eq!(scalar(&i4), 12.0);
        let ric5 = ricci(&identity_tensor(5).unwrap());
        assert_eq!(ric5, SymMatrix::identity(5).scale(4.0));
    }

    #[test]
    fn identity_rejects_small_dims() {
        assert!(matches!(
            identity_tensor(2),
            Err(CurvError::InvalidDimension { dim: 2, .. })
        ));
    }

    #[test]
    fn identity_contractions_exact_for_small_dims() {
        for n in 3..=8 {
            let i = identity_tensor(n).unwrap();
            let nf = n as f64;
            assert_eq!(ricci(&i), SymMatrix::identity(n).scale(nf - 1.0));
            assert_eq!(scalar(&i), nf * (nf - 1.0));
        }
    }

    #[test]
    fn ricci_is_linear() {
        let i5 = identity_tensor(5).unwrap();
        let ric = ricci(&i5.scale(2.5));
        assert_abs_diff_eq!(ric.get(3, 3), 10.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ric.get(1, 3), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn project_bianchi_kills_volume_form() {
        let perm_sign = |idx: [usize; 4]| {
            let mut v = idx;
            let mut sign = 1.0;
            for a in 0..4 {
                for b in a + 1..4 {
                    if v[a] == v[b] {
                        return 0.0;
                    }
                    if v[a] > v[b] {
                        sign = -sign;
                    }
                }
            }
            v.sort();
            sign
        };
        let eps = Tensor4::from_fn(4, |i, j, k, l| perm_sign([i, j, k, l]));
        let b = project_bianchi(&eps).unwrap();
        assert!(b.norm() < 1e-15);
    }

    #[test]
    fn project_bianchi_fixes_identity() {
        let i = identity_tensor(4).unwrap();
        let b = project_bianchi(&i.as_tensor4()).unwrap();
        assert_eq!(b, i);
    }

    #[test]
    fn project_bianchi_rejects_asymmetric_input() {
        let mut t = identity_tensor(4).unwrap().as_tensor4();
        t.set(0, 1, 0, 1, 2.0);
        assert!(matches!(
            project_bianchi(&t),
            Err(CurvError::SymmetryViolation { .. })
        ));
    }

    #[test]
    fn kulkarni_nomizu_delta_squared_is_twice_identity() {
        let d = SymMatrix::identity(5);
        let kn = kulkarni_nomizu(&d, &d).unwrap();
        assert_eq!(kn, identity_tensor(5).unwrap().scale(2.0));
    }

    #[test]
    fn kulkarni_nomizu_dim_mismatch() {
        let r = kulkarni_nomizu(&SymMatrix::identity(4), &SymMatrix::identity(5));
        assert_eq!(r, Err(CurvError::DimMismatch { left: 4, right: 5 }));
    }

    #[test]
    fn decomposition_of_identity() {
        let i = identity_tensor(4).unwrap();
        let parts = ricci_decomposition(&i).unwrap();
        assert!(parts.scalar_part.max_abs_diff(&i) < 1e-15);
        assert!(parts.traceless_ricci_part.norm() < 1e-15);
        assert!(parts.weyl_part.norm() < 1e-15);
    }

    #[test]
    fn sectional_on_model_planes() {
        let i = identity_tensor(4).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = vec![s, s, 0.0, 0.0];
        let v = vec![0.0, 0.0, s, -s];
        assert_abs_diff_eq!(sectional(&i, &u, &v).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sectional(&i.scale(-3.0), &u, &v).unwrap(), -3.0, epsilon = 1e-14);
        let p = product_unit_spheres();
        assert_eq!(sectional(&p, &e(4, 0), &e(4, 2)).unwrap(), 0.0);
        assert_eq!(sectional(&p, &e(4, 0), &e(4, 1)).unwrap(), 1.0);
    }

    #[test]
    fn sectional_rejects_non_orthonormal() {
        let i = identity_tensor(4).unwrap();
        let u = vec![1.0, 0.0, 0.0, 0.0];
        let v = vec![1.0, 1.0, 0.0, 0.0];
        assert!(matches!(
            sectional(&i, &u, &v),
            Err(CurvError::InvalidPlane { .. })
        ));
    }

    #[test]
    fn curvature_operator_of_models() {
        let i = identity_tensor(4).unwrap();
        assert_eq!(curv_operator_matrix(&i).matrix(), &DMatrix::identity(6, 6));
        assert_eq!(
            curv_operator_matrix(&i.scale(0.5)).matrix(),
            &(DMatrix::identity(6, 6) * 0.5)
        );
        let (vals, _) = curv_operator_matrix(&product_unit_spheres()).sorted_eigen();
        let expected = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0];
        for (v, x) in vals.iter().zip(expected) {
            assert_abs_diff_eq!(*v, x, epsilon = 1e-14);
        }
    }

    #[test]
    fn isotropic_on_models() {
        let i = identity_tensor(5).unwrap();
        let f = Frame4::coordinate(5, [4, 0, 2, 1]).unwrap();
        assert_abs_diff_eq!(isotropic_curvature(&i, &f).unwrap(), 4.0, epsilon = 1e-14);
        let p = product_unit_spheres();
        let f = Frame4::coordinate(4, [0, 1, 2, 3]).unwrap();
        assert_eq!(isotropic_curvature(&p, &f).unwrap(), 0.0);
    }

    #[test]
    fn frame_validation() {
        let mut m = DMatrix::identity(5, 4);
        m[(4, 0)] = 1e-6;
        assert!(matches!(Frame4::new(m), Err(CurvError::InvalidFrame { .. })));
        assert!(Frame4::new(DMatrix::identity(5, 3)).is_err());
    }

    #[test]
    fn inner_of_identity_matches_entry_count() {
        // brute force over all n^4 entries of I: each ordered pair i != j
        // contributes I_ijij^2 and I_ijji^2
        let n = 4;
        let mut brute = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = f64::from(u8::from(i == k && j == l)) - f64::from(u8::from(i == l && j == k));
                        brute += v * v;
                    }
                }
            }
        }
        let i4 = identity_tensor(4).unwrap();
        assert_eq!(brute, 24.0);
        assert_eq!(inner(&i4, &i4).unwrap(), brute);
        assert_eq!(norm(&CurvTensor::zeros(4)), 0.0);
        assert!(inner(&i4, &identity_tensor(5).unwrap()).is_err());
    }
}
