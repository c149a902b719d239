//! Test matrices with prescribed singular values, in particular the
//! harmonic class `σ_i = λ / i`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::matrix::DenseMatrix;
use crate::rng::RandomStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SingularProfile {
    /// `σ_i = λ / i` for `i = 1..=r`.
    Harmonic { lambda: f64, r: usize },
    /// Positive, nonincreasing values.
    Explicit { values: Vec<f64> },
}

impl SingularProfile {
    pub fn harmonic(lambda: f64, r: usize) -> Result<Self> {
        let p = SingularProfile::Harmonic { lambda, r };
        p.validate()?;
        Ok(p)
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        let p = SingularProfile::Explicit { values };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SingularProfile::Harmonic { lambda, r } => {
                if !(lambda.is_finite() && *lambda > 0.0) {
                    return Err(invalid(format!("harmonic lambda must be positive, got {lambda}")));
                }
                if *r == 0 {
                    return Err(invalid("harmonic rank r must be positive"));
                }
            }
            SingularProfile::Explicit { values } => {
                if values.is_empty() {
                    return Err(invalid("explicit profile needs at least one value"));
                }
                if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(invalid("explicit singular values must be positive and finite"));
                }
                if values.windows(2).any(|w| w[1] > w[0]) {
                    return Err(invalid("explicit singular values must be nonincreasing"));
                }
            }
        }
        Ok(())
    }

    pub fn rank(&self) -> usize {
        match self {
            SingularProfile::Harmonic { r, .. } => *r,
            SingularProfile::Explicit { values } => values.len(),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            SingularProfile::Harmonic { lambda, r } => (1..=*r).map(|i| lambda / i as f64).collect(),
            SingularProfile::Explicit { values } => values.clone(),
        }
    }
}

/// Haar-distributed orthogonal matrix: QR of an i.i.d. Gaussian matrix with
/// the diagonal of `R` forced positive. In one dimension the group reduces to
/// `±1` and the sign is fixed to `+1`.
pub fn random_orthogonal(dim: usize, rng: &mut RandomStream) -> Result<DenseMatrix> {
    if dim == 0 {
        return Err(invalid("orthogonal dimension must be positive"));
    }
    if dim == 1 {
        return Ok(DenseMatrix::identity(1));
    }
    let mut g = vec![0.0; dim * dim];
    for x in &mut g {
        *x = rng.standard_normal();
    }
    let qr = nalgebra::DMatrix::from_row_slice(dim, dim, &g).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(DenseMatrix::from_nalgebra(&q))
}

/// `U_r diag(values) V_rᵀ` with `U_r`, `V_r` leading columns of independent
/// Haar orthogonal matrices.
fn with_singulars(m: usize, n: usize, values: &[f64], rng: &mut RandomStream) -> Result<DenseMatrix> {
    let r = values.len();
    if r > m.min(n) {
        return Err(invalid(format!("rank {r} exceeds min(m, n) = {}", m.min(n))));
    }
    let u = random_orthogonal(m, rng)?.leading_columns(r)?;
    let v = random_orthogonal(n, rng)?.leading_columns(r)?;
    let mut us = Vec::with_capacity(m * r);
    for i in 0..m {
        us.extend(u.row(i).iter().zip(values).map(|(x, s)| x * s));
    }
    DenseMatrix::from_vec_unchecked(m, r, us).matmul(&v.transpose())
}

/// Member of the harmonic class: rank `r`, `σ_i = λ / i`.
pub fn harmonic_matrix(m: usize, n: usize, r: usize, lambda: f64, rng: &mut RandomStream) -> Result<DenseMatrix> {
    let profile = SingularProfile::harmonic(lambda, r)?;
    prescribed_matrix(m, n, &profile, rng)
}

pub fn prescribed_matrix(m: usize, n: usize, profile: &SingularProfile, rng: &mut RandomStream) -> Result<DenseMatrix> {
    profile.validate()?;
    if m == 0 || n == 0 {
        return Err(invalid("matrix dimensions must be positive"));
    }
    with_singulars(m, n, &profile.values(), rng)
}
