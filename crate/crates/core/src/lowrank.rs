//! Singular value decomposition, best rank-`k` truncation and the `L R`
//! factorization executed by the two-step scheme.
//!
//! The decomposition is a one-sided Jacobi iteration, which keeps small
//! singular values accurate to working precision relative to `σ₁` and
//! handles exactly rank-deficient targets without special casing.

use crate::error::{invalid, Error, Result};
use crate::matrix::DenseMatrix;

/// Singular values below `RANK_RTOL · σ₁` count as zero.
pub const RANK_RTOL: f64 = 1e-10;

/// `A = U diag(σ) Vᵀ` with thin factors (`p = min(m, n)` columns each).
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    u: DenseMatrix,
    singulars: Vec<f64>,
    v: DenseMatrix,
    rank: usize,
}

impl SvdResult {
    /// Assembles a decomposition from explicit factors. Singular values must
    /// be nonnegative and nonincreasing; the rank is derived from them.
    pub fn from_parts(u: DenseMatrix, singulars: Vec<f64>, v: DenseMatrix) -> Result<Self> {
        let p = singulars.len();
        if u.cols() != p || v.cols() != p {
            return Err(Error::DimensionMismatch {
                op: "SvdResult::from_parts",
                expected: format!("{p} columns in U and V"),
                found: format!("U {}x{}, V {}x{}", u.rows(), u.cols(), v.rows(), v.cols()),
            });
        }
        if singulars.iter().any(|&s| s.is_nan() || s < 0.0) {
            return Err(invalid("singular values must be nonnegative"));
        }
        if singulars.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("singular values must be nonincreasing"));
        }
        let rank = numerical_rank(&singulars);
        Ok(Self { u, singulars, v, rank })
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn singulars(&self) -> &[f64] {
        &self.singulars
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Shape `(m, n)` of the decomposed matrix.
    pub fn shape(&self) -> (usize, usize) {
        (self.u.rows(), self.v.rows())
    }

    /// `U_k diag(w) V_kᵀ` for weights `w` of length `k ≥ 1`.
    fn weighted_outer(&self, left_w: &[f64], right_w: &[f64]) -> (DenseMatrix, DenseMatrix) {
        let k = left_w.len();
        let (m, n) = self.shape();
        let mut l = Vec::with_capacity(m * k);
        for i in 0..m {
            l.extend(self.u.row(i)[..k].iter().zip(left_w).map(|(x, w)| x * w));
        }
        let mut r = vec![0.0; k * n];
        for j in 0..n {
            for (i, (x, w)) in self.v.row(j)[..k].iter().zip(right_w).enumerate() {
                r[i * n + j] = x * w;
            }
        }
        (DenseMatrix::from_vec_unchecked(m, k, l), DenseMatrix::from_vec_unchecked(k, n, r))
    }
}

fn numerical_rank(singulars: &[f64]) -> usize {
    let Some(&top) = singulars.first() else { return 0 };
    if top == 0.0 {
        return 0;
    }
    let tol = RANK_RTOL * top;
    singulars.iter().take_while(|&&s| s > tol).count()
}

/// Column vectors of a matrix.
type Columns = Vec<Vec<f64>>;

/// Sweep limit for the Jacobi iteration; typical inputs converge in under 15.
const MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi on the columns of a tall matrix given as
/// column vectors. Returns the rotated columns and the accumulated rotation
/// `V` (also as columns), so that `B V = [rotated columns]`.
fn hestenes(mut cols: Columns) -> Result<(Columns, Columns)> {
    let p = cols.len();
    let mut v: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let mut e = vec![0.0; p];
            e[j] = 1.0;
            e
        })
        .collect();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..p {
            for j in i + 1..p {
                let alpha = dot(&cols[i], &cols[i]);
                let beta = dot(&cols[j], &cols[j]);
                let gamma = dot(&cols[i], &cols[j]);
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = cols.split_at_mut(j);
                rotate(&mut lo[i], &mut hi[0], c, s);
                let (lo, hi) = v.split_at_mut(j);
                rotate(&mut lo[i], &mut hi[0], c, s);
            }
        }
        if !rotated {
            return Ok((cols, v));
        }
    }
    Err(Error::NumericalFailure(format!("Jacobi SVD did not converge in {MAX_SWEEPS} sweeps")))
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Fills the `None` slots with unit vectors orthogonal to every other column.
fn complete_orthonormal(dim: usize, cols: &mut [Option<Vec<f64>>]) {
    let mut basis = 0;
    for idx in 0..cols.len() {
        if cols[idx].is_some() {
            continue;
        }
        while basis < dim {
            let mut cand = vec![0.0; dim];
            cand[basis] = 1.0;
            basis += 1;
            // two passes of Gram-Schmidt
            for _ in 0..2 {
                for q in cols.iter().flatten() {
                    let d: f64 = q.iter().zip(&cand).map(|(a, b)| a * b).sum();
                    cand.iter_mut().zip(q).for_each(|(c, qv)| *c -= d * qv);
                }
            }
            let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.5 {
                cand.iter_mut().for_each(|x| *x /= norm);
                cols[idx] = Some(cand);
                break;
            }
        }
    }
}

fn columns_to_matrix(cols: &[Vec<f64>], rows: usize) -> DenseMatrix {
    let p = cols.len();
    let mut data = vec![0.0; rows * p];
    for (j, c) in cols.iter().enumerate() {
        for (i, x) in c.iter().enumerate() {
            data[i * p + j] = *x;
        }
    }
    DenseMatrix::from_vec_unchecked(rows, p, data)
}

/// Thin SVD with descending singular values, by one-sided Jacobi rotations.
///
/// Each column of `U` is signed so that its largest-magnitude entry is
/// positive (the matching column of `V` is flipped with it), which makes the
/// factors reproducible.
pub fn svd(a: &DenseMatrix) -> Result<SvdResult> {
    let (m, n) = a.shape();
    // Work on the tall orientation B (A itself, or Aᵀ when wide); its columns
    // are the rows of Bᵀ.
    let wide = m < n;
    let (tall_rows, bt) = if wide { (n, a.clone()) } else { (m, a.transpose()) };
    let p = bt.rows();
    let cols: Vec<Vec<f64>> = (0..p).map(|j| bt.row(j).to_vec()).collect();
    let (cols, rot) = hestenes(cols)?;

    let norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    if norms.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure("non-finite singular value".into()));
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let singulars: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let mut left: Vec<Option<Vec<f64>>> =
        order.iter().map(|&j| (norms[j] > 0.0).then(|| cols[j].iter().map(|x| x / norms[j]).collect())).collect();
    complete_orthonormal(tall_rows, &mut left);
    let mut left: Vec<Vec<f64>> = left.into_iter().map(|c| c.expect("completed")).collect();
    let mut right: Vec<Vec<f64>> = order.iter().map(|&j| rot[j].clone()).collect();

    // B = left diag(σ) rightᵀ; for a wide A the roles swap.
    let (u_cols, v_cols) = if wide { (&mut right, &mut left) } else { (&mut left, &mut right) };
    for (uc, vc) in u_cols.iter_mut().zip(v_cols.iter_mut()) {
        let pivot = uc.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            uc.iter_mut().for_each(|x| *x = -*x);
            vc.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let u = columns_to_matrix(u_cols, m);
    let v = columns_to_matrix(v_cols, n);
    let rank = numerical_rank(&singulars);
    Ok(SvdResult { u, singulars, v, rank })
}

/// Best Frobenius rank-`k` approximation `A_k`. `k` above the rank is
/// clamped to it; `k = 0` yields the zero matrix.
pub fn truncate(s: &SvdResult, k: usize) -> DenseMatrix {
    let (m, n) = s.shape();
    let k = k.min(s.rank);
    if k == 0 {
        return DenseMatrix::zeros(m, n);
    }
    let ones = vec![1.0; k];
    let (l, r) = s.weighted_outer(&s.singulars[..k], &ones);
    l.matmul(&r).expect("inner dimensions agree")
}

/// Factors `L = U_k Σ_k^{1/2}` and `R = Σ_k^{1/2} V_kᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LrFactors {
    l: DenseMatrix,
    r: DenseMatrix,
}

impl LrFactors {
    pub fn new(l: DenseMatrix, r: DenseMatrix) -> Result<Self> {
        if l.cols() != r.rows() {
            return Err(Error::DimensionMismatch {
                op: "LrFactors::new",
                expected: format!("R with {} rows", l.cols()),
                found: format!("{}x{}", r.rows(), r.cols()),
            });
        }
        Ok(Self { l, r })
    }

    pub fn l(&self) -> &DenseMatrix {
        &self.l
    }

    pub fn r(&self) -> &DenseMatrix {
        &self.r
    }

    pub fn k(&self) -> usize {
        self.l.cols()
    }

    pub fn m(&self) -> usize {
        self.l.rows()
    }

    pub fn n(&self) -> usize {
        self.r.cols()
    }

    pub fn product(&self) -> DenseMatrix {
        self.l.matmul(&self.r).expect("inner dimensions agree")
    }
}

/// Splits `A_k` symmetrically into `L` (`m × k`) and `R` (`k × n`).
/// Requires `1 ≤ k ≤ rank`.
pub fn factor_lr(s: &SvdResult, k: usize) -> Result<LrFactors> {
    if k == 0 {
        return Err(invalid("factor rank k must be at least 1"));
    }
    if k > s.rank {
        return Err(invalid(format!("factor rank k = {k} exceeds numerical rank {}", s.rank)));
    }
    let roots: Vec<f64> = s.singulars[..k].iter().map(|x| x.sqrt()).collect();
    let (l, r) = s.weighted_outer(&roots, &roots);
    Ok(LrFactors { l, r })
}

/// `Σ_{i=k+1}^{r} σ_i²`, zero once `k ≥ r`.
pub fn truncation_error_sq(s: &SvdResult, k: usize) -> f64 {
    s.singulars[..s.rank].iter().skip(k).map(|x| x * x).sum()
}
