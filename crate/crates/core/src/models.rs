//! Model curvature tensors: space forms, sphere products and seeded random
//! tensors.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cone::{membership, project_to_boundary, ConeSpec};
use crate::error::{CurvError, Result};
use crate::rng::{self, tag};
use crate::tensor::{identity_tensor, ricci_decomposition, unit_curvature, CurvTensor, Tensor4};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Constant { dim: usize, c: f64 },
    ComplexSpaceForm { m: usize, c: f64 },
    ProductSpheres { dims: Vec<usize>, curvatures: Vec<f64> },
    Random { dim: usize, seed: u64 },
    RandomEinstein { dim: usize, seed: u64 },
}

impl ModelSpec {
    pub fn build(&self) -> Result<CurvTensor> {
        match self {
            Self::Constant { dim, c } => constant_curvature(*dim, *c),
            Self::ComplexSpaceForm { m, c } => complex_space_form(*m, *c),
            Self::ProductSpheres { dims, curvatures } => product_spheres(dims, curvatures),
            Self::Random { dim, seed } => random_curvature(*dim, *seed),
            Self::RandomEinstein { dim, seed } => random_einstein(*dim, *seed),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Constant { dim, .. } | Self::Random { dim, .. } | Self::RandomEinstein { dim, .. } => *dim,
            Self::ComplexSpaceForm { m, .. } => 2 * m,
            Self::ProductSpheres { dims, .. } => dims.iter().sum(),
        }
    }

    /// Replaces the seed of the random kinds.
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            Self::Random { dim, .. } => Self::Random { dim, seed },
            Self::RandomEinstein { dim, .. } => Self::RandomEinstein { dim, seed },
            other => other,
        }
    }
}

fn list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| CurvError::InvalidModel(format!("bad {what} `{x}`")))
        })
        .collect()
}

fn one<T: FromStr>(s: Option<&str>, what: &str) -> Result<T> {
    let s = s.ok_or_else(|| CurvError::InvalidModel(format!("missing {what}")))?;
    s.trim()
        .parse()
        .map_err(|_| CurvError::InvalidModel(format!("bad {what} `{s}`")))
}

/// `constant:<n>:<c>`, `complex_space_form:<m>:<c>`,
/// `product_spheres:<d1,d2,..>:<c1,c2,..>`, `random:<n>[:<seed>]`,
/// `random_einstein:<n>[:<seed>]`.
impl FromStr for ModelSpec {
    type Err = CurvError;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let kind = parts.next().unwrap_or_default();
        let spec = match kind {
            "constant" => Self::Constant {
                dim: one(parts.next(), "dimension")?,
                c: one(parts.next(), "curvature")?,
            },
            "complex_space_form" => Self::ComplexSpaceForm {
                m: one(parts.next(), "complex dimension")?,
                c: one(parts.next(), "curvature")?,
            },
            "product_spheres" => Self::ProductSpheres {
                dims: list(parts.next().unwrap_or_default(), "factor dimension")?,
                curvatures: list(parts.next().unwrap_or_default(), "curvature")?,
            },
            "random" | "random_einstein" => {
                let dim = one(parts.next(), "dimension")?;
                let seed = match parts.next() {
                    Some(x) => one(Some(x), "seed")?,
                    None => 0,
                };
                if kind == "random" {
                    Self::Random { dim, seed }
                } else {
                    Self::RandomEinstein { dim, seed }
                }
            }
            other => return Err(CurvError::InvalidModel(format!("unknown model `{other}`"))),
        };
        if let Some(extra) = parts.next() {
            return Err(CurvError::InvalidModel(format!("unexpected field `{extra}`")));
        }
        Ok(spec)
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: Vec<String>| v.join(",");
        match self {
            Self::Constant { dim, c } => write!(f, "constant:{dim}:{c}"),
            Self::ComplexSpaceForm { m, c } => write!(f, "complex_space_form:{m}:{c}"),
            Self::ProductSpheres { dims, curvatures } => write!(
                f,
                "product_spheres:{}:{}",
                join(dims.iter().map(ToString::to_string).collect()),
                join(curvatures.iter().map(ToString::to_string).collect())
            ),
            Self::Random { dim, seed } => write!(f, "random:{dim}:{seed}"),
            Self::RandomEinstein { dim, seed } => write!(f, "random_einstein:{dim}:{seed}"),
        }
    }
}

/// `c * I`.
pub fn constant_curvature(n: usize, c: f64) -> Result<CurvTensor> {
    Ok(identity_tensor(n)?.scale(c))
}

/// Complex space form of complex dimension `m` and holomorphic sectional
/// curvature `c` (`c > 0`: complex projective space with the Fubini-Study
/// metric), in real dimension `2m`.
pub fn complex_space_form(m: usize, c: f64) -> Result<CurvTensor> {
    if m < 1 {
        return Err(CurvError::InvalidModel("complex dimension must be >= 1".into()));
    }
    let n = 2 * m;
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    // J e_{2a} = e_{2a+1}
    let j = |a: usize, b: usize| {
        if a / 2 != b / 2 || a == b {
            0.0
        } else if a % 2 == 1 {
            1.0
        } else {
            -1.0
        }
    };
    Ok(CurvTensor::from_orbits(n, |a, b, c2, e| {
        0.25 * c
            * (d(a, c2) * d(b, e) - d(a, e) * d(b, c2) + j(a, c2) * j(b, e) - j(a, e) * j(b, c2)
                + 2.0 * j(a, b) * j(c2, e))
    }))
}

/// Riemannian product of round spheres of the given dimensions and curvatures.
pub fn product_spheres(dims: &[usize], curvatures: &[f64]) -> Result<CurvTensor> {
    if dims.len() != curvatures.len() || dims.is_empty() {
        return Err(CurvError::InvalidModel(format!(
            "{} factor dimensions but {} curvatures",
            dims.len(),
            curvatures.len()
        )));
    }
    if dims.iter().any(|&d| d < 2) {
        return Err(CurvError::InvalidModel("sphere factors need dimension >= 2".into()));
    }
    if curvatures.iter().any(|&c| !(c > 0.0)) {
        return Err(CurvError::InvalidModel("sphere curvatures must be positive".into()));
    }
    let n: usize = dims.iter().sum();
    if n < 3 {
        return Err(CurvError::InvalidDimension {
            dim: n,
            reason: "curvature tensors need n >= 3",
        });
    }
    let mut block = Vec::with_capacity(n);
    for (b, &d) in dims.iter().enumerate() {
        block.extend(std::iter::repeat_n(b, d));
    }
    let unit = unit_curvature(n);
    Ok(CurvTensor::from_orbits(n, |i, j, k, l| {
        let b = block[i];
        if block[j] == b && block[k] == b && block[l] == b {
            curvatures[b] * unit.get(i, j, k, l)
        } else {
            0.0
        }
    }))
}

/// Unit-norm random tensor: a standard-normal 4-index array averaged over
/// the curvature symmetry group, then Bianchi projected.
pub fn random_curvature(n: usize, seed: u64) -> Result<CurvTensor> {
    if n < 3 {
        return Err(CurvError::InvalidDimension {
            dim: n,
            reason: "curvature tensors need n >= 3",
        });
    }
    let mut g = rng::substream(seed, &[tag::RANDOM_CURVATURE, n as u64]);
    let raw = Tensor4::from_fn(n, |_, _, _, _| rng::gaussian(&mut g));
    let r = CurvTensor::from_fn(n, |i, j, k, l| {
        (raw.get(i, j, k, l) - raw.get(j, i, k, l) - raw.get(i, j, l, k) + raw.get(j, i, l, k)
            + raw.get(k, l, i, j)
            - raw.get(l, k, i, j)
            - raw.get(k, l, j, i)
            + raw.get(l, k, j, i))
            / 8.0
    });
    Ok(r.scale(1.0 / r.norm()))
}

/// `weyl(random_curvature(n, seed)) + I`, so that `Ric = (n-1) delta`.
pub fn random_einstein(n: usize, seed: u64) -> Result<CurvTensor> {
    if n < 4 {
        return Err(CurvError::InvalidDimension {
            dim: n,
            reason: "random Einstein tensors need n >= 4",
        });
    }
    let weyl = ricci_decomposition(&random_curvature(n, seed)?)?.weyl_part;
    Ok(&weyl + &identity_tensor(n)?)
}

const CONE_SAMPLE_ATTEMPTS: u64 = 32;

/// A point of the cone: from `I` along a random unit direction, a uniform
/// fraction of the way to the last point known to be inside.
pub fn random_in_cone(cone: &ConeSpec, seed: u64) -> Result<CurvTensor> {
    let n = cone.dim;
    let start = identity_tensor(n)?;
    let start_norm = start.norm();
    for attempt in 0..CONE_SAMPLE_ATTEMPTS {
        let mut g = rng::substream(seed, &[tag::CONE_SAMPLE, attempt]);
        let dir = random_curvature(n, g.random())?;
        let u: f64 = g.random();
        let reach = match project_to_boundary(cone, &start, &dir) {
            Ok(p) => p.t_inside,
            Err(CurvError::RayStaysInside { .. }) => start_norm,
            Err(e) => return Err(e),
        };
        let sample = start.axpy(u * reach, &dir);
        if membership(cone, &sample)?.margin >= 0.0 {
            return Ok(sample);
        }
    }
    Err(CurvError::BudgetExhausted {
        attempts: CONE_SAMPLE_ATTEMPTS as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{ricci, scalar, sectional, SymMatrix};

    fn ricci_error(r: &CurvTensor, expected: f64) -> f64 {
        let n = r.dim();
        (ricci(r).matrix() - SymMatrix::identity(n).scale(expected).matrix()).amax()
    }

    #[test]
    fn constant_models() {
        assert_eq!(constant_curvature(4, 1.0).unwrap(), identity_tensor(4).unwrap());
        assert_eq!(constant_curvature(4, 0.0).unwrap().norm(), 0.0);
        assert!(ricci_error(&constant_curvature(5, 2.0).unwrap(), 8.0) < 1e-15);
    }

    #[test]
    fn complex_projective_plane() {
        let r = complex_space_form(2, 2.0).unwrap();
        // direct contraction oracle
        let mut ric = [[0.0; 4]; 4];
        for (i, row) in ric.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = (0..4).map(|j| r.get(i, j, k, j)).sum();
            }
        }
        for (i, row) in ric.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                let want = if i == k { 3.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-14);
            }
        }
        // holomorphic plane (e0, J e0 = e1)
        let k = sectional(&r, &[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((k - 2.0).abs() < 1e-15);
        // totally real plane (e0, e2) has curvature c / 4
        let k = sectional(&r, &[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!((k - 0.5).abs() < 1e-15);
        assert!(r.symmetry_defect() < 1e-15);
    }

    #[test]
    fn complex_line_is_a_round_sphere() {
        let r = complex_space_form(1, 1.7).unwrap();
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let expected = CurvTensor::from_fn(2, |i, j, k, l| 1.7 * (d(i, k) * d(j, l) - d(i, l) * d(j, k)));
        assert!(r.max_abs_diff(&expected) < 1e-15);
        assert!(complex_space_form(0, 1.0).is_err());
    }

    #[test]
    fn sphere_products() {
        let r = product_spheres(&[2, 2], &[1.0, 1.0]).unwrap();
        assert_eq!(r.get(0, 1, 0, 1), 1.0);
        assert_eq!(r.get(2, 3, 2, 3), 1.0);
        assert_eq!(r.get(0, 2, 0, 2), 0.0);
        assert_eq!(r.get(0, 1, 2, 3), 0.0);
        let r = product_spheres(&[2, 2], &[3.0, 3.0]).unwrap();
        assert!(ricci_error(&r, 3.0) < 1e-15);
        assert!(product_spheres(&[2, 2], &[1.0]).is_err());
        assert!(product_spheres(&[1, 3], &[1.0, 1.0]).is_err());
        assert!(product_spheres(&[2, 2], &[1.0, -1.0]).is_err());
    }

    #[test]
    fn random_tensors_are_deterministic_unit_and_symmetric() {
        let a = random_curvature(5, 11).unwrap();
        let b = random_curvature(5, 11).unwrap();
        let c = random_curvature(5, 12).unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-14);
        assert!(a.symmetry_defect() < 1e-13);
        let cos = a.inner(&c).unwrap();
        assert!(cos.abs() < 1.0 - 1e-6, "cos = {cos}");
    }

    #[test]
    fn random_einstein_is_einstein() {
        for seed in 0..5 {
            for n in [4, 5, 6] {
                let r = random_einstein(n, seed).unwrap();
                assert!(ricci_error(&r, (n - 1) as f64) < 1e-11);
                assert!((&r - &identity_tensor(n).unwrap()).norm() > 0.1);
            }
        }
        assert!((scalar(&random_einstein(4, 3).unwrap()) - 12.0).abs() < 1e-12);
        assert!(random_einstein(3, 0).is_err());
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in [
            "constant:4:1",
            "complex_space_form:2:2",
            "product_spheres:2,2:3,3",
            "random:5:7",
            "random_einstein:4:0",
        ] {
            let spec: ModelSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert_eq!(
            "product_spheres:2,2:3,3".parse::<ModelSpec>().unwrap(),
            ModelSpec::ProductSpheres {
                dims: vec![2, 2],
                curvatures: vec![3.0, 3.0]
            }
        );
        assert!("torus:4".parse::<ModelSpec>().is_err());
        assert!("constant:4".parse::<ModelSpec>().is_err());
        assert!("constant:4:1:9".parse::<ModelSpec>().is_err());
    }
}
