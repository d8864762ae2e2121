//! Dense linear algebra backed by LAPACK.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use ndarray_linalg::{Diag, EigVals, FactorizeC, JobSvd, SolveC, SolveTriangular, QR, SVDDC, UPLO};
use num_complex::Complex64;

use crate::{Error, Result};

pub type DenseMatrix = Array2<f64>;

fn check_finite(m: &ArrayView2<f64>, what: &str) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::Shape(format!("{what}: empty matrix")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("{what}: non-finite entry")));
    }
    Ok(())
}

/// Relative rank threshold `max(rows, cols) · ε`.
pub fn rank_tolerance(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

/// Diagonal entries of `R` that are numerically zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RankReport {
    /// Columns whose `|R_jj| ≤ tol · max |R_ii|`.
    pub deficient: Vec<usize>,
    pub max_diag: f64,
    pub min_diag: f64,
}

impl RankReport {
    pub fn full_rank(&self) -> bool {
        self.deficient.is_empty()
    }
}

/// Reduced QR factorization `M = Q R` with `diag(R) ≥ 0`.
#[derive(Clone, Debug)]
pub struct ReducedQr {
    pub q: DenseMatrix,
    pub r: DenseMatrix,
    pub rank: RankReport,
}

pub fn reduced_qr(m: &ArrayView2<f64>) -> Result<ReducedQr> {
    let (rows, cols) = m.dim();
    if rows < cols {
        return Err(Error::Shape(format!("reduced QR needs rows ≥ cols, got {rows}×{cols}")));
    }
    check_finite(m, "reduced_qr")?;
    let (mut q, mut r) = m.qr()?;
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            r.row_mut(j).mapv_inplace(|v| -v);
            q.column_mut(j).mapv_inplace(|v| -v);
        }
    }
    let diag = r.diag();
    let max_diag = diag.fold(0.0f64, |a, &b| a.max(b.abs()));
    let min_diag = diag.fold(f64::INFINITY, |a, &b| a.min(b.abs()));
    let tol = rank_tolerance(rows, cols) * max_diag;
    let deficient = (0..cols).filter(|&j| r[(j, j)].abs() <= tol).collect();
    Ok(ReducedQr {
        q,
        r,
        rank: RankReport {
            deficient,
            max_diag,
            min_diag,
        },
    })
}

/// All eigenvalues of a general real square matrix, with multiplicity.
pub fn eigenvalues_general(m: &ArrayView2<f64>) -> Result<Vec<Complex64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!(
            "eigenvalues need a square matrix, got {:?}",
            m.dim()
        )));
    }
    check_finite(m, "eigenvalues_general")?;
    m.eigvals()
        .map(|v| v.to_vec())
        .map_err(|e| Error::Eigensolver(e.to_string()))
}

/// Singular values in descending order.
pub fn singular_values(m: &ArrayView2<f64>) -> Result<Vec<f64>> {
    check_finite(m, "singular_values")?;
    let (_, s, _) = m.svddc(JobSvd::None)?;
    Ok(s.to_vec())
}

/// `σ_max / σ_min` of the full SVD; `+∞` when `σ_min` is zero.
pub fn condition_number(m: &ArrayView2<f64>) -> Result<f64> {
    Ok(condition_from_singular_values(&singular_values(m)?))
}

pub fn condition_from_singular_values(s: &[f64]) -> f64 {
    let max = s.first().copied().unwrap_or(0.0);
    let min = s.last().copied().unwrap_or(0.0);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Number of singular values above `rank_tolerance(rows, cols) · σ_max`.
pub fn numerical_rank(s: &[f64], rows: usize, cols: usize) -> usize {
    let max = s.first().copied().unwrap_or(0.0);
    let tol = rank_tolerance(rows, cols) * max;
    s.iter().filter(|&&v| v > tol).count()
}

/// Truncated-SVD pseudoinverse with the numerical rank threshold.
pub fn pseudo_inverse(m: &ArrayView2<f64>) -> Result<DenseMatrix> {
    truncated_pseudo_inverse(m).map(|(p, _)| p)
}

/// Truncated-SVD pseudoinverse together with the numerical rank it kept.
pub fn truncated_pseudo_inverse(m: &ArrayView2<f64>) -> Result<(DenseMatrix, usize)> {
    check_finite(m, "pseudo_inverse")?;
    let (rows, cols) = m.dim();
    let (u, s, vt) = m.svddc(JobSvd::Some)?;
    let (u, vt) = match (u, vt) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Lapack("SVD did not return singular vectors".into())),
    };
    let k = numerical_rank(&s.to_vec(), rows, cols);
    let mut v = vt.slice(s![..k, ..]).reversed_axes().to_owned();
    for (j, mut col) in v.axis_iter_mut(Axis(1)).enumerate() {
        col /= s[j];
    }
    Ok((v.dot(&u.slice(s![.., ..k]).t()), k))
}

fn check_symmetric(m: &ArrayView2<f64>) -> Result<()> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Shape(format!(
            "SPD solve needs a square matrix, got {:?}",
            m.dim()
        )));
    }
    let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::NotSpd(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Cholesky factorization of a symmetric positive definite matrix, reusable
/// across right-hand sides.
pub struct SpdFactor {
    factor: ndarray_linalg::cholesky::CholeskyFactorized<ndarray::OwnedRepr<f64>>,
}

impl SpdFactor {
    pub fn new(m: &ArrayView2<f64>) -> Result<Self> {
        check_finite(m, "solve_spd")?;
        check_symmetric(m)?;
        let factor = m
            .factorizec(UPLO::Lower)
            .map_err(|e| Error::NotSpd(format!("Cholesky factorization failed: {e}")))?;
        Ok(Self { factor })
    }

    pub fn solve(&self, rhs: &ArrayView1<f64>) -> Result<Array1<f64>> {
        Ok(self.factor.solvec(&rhs.to_owned())?)
    }
}

/// `M x = rhs` for symmetric positive definite `M`.
pub fn solve_spd(m: &ArrayView2<f64>, rhs: &ArrayView1<f64>) -> Result<Array1<f64>> {
    if rhs.len() != m.nrows() {
        return Err(Error::Shape(format!("rhs length {} ≠ {}", rhs.len(), m.nrows())));
    }
    SpdFactor::new(m)?.solve(rhs)
}

/// Back substitution `R x = rhs`; a zero diagonal entry is an error.
pub fn solve_upper_triangular(r: &ArrayView2<f64>, rhs: &ArrayView1<f64>) -> Result<Array1<f64>> {
    let n = r.nrows();
    if r.ncols() != n || rhs.len() != n {
        return Err(Error::Shape(format!(
            "triangular solve: R is {:?}, rhs has {}",
            r.dim(),
            rhs.len()
        )));
    }
    if let Some(index) = (0..n).find(|&i| r[(i, i)] == 0.0) {
        return Err(Error::SingularMass { index });
    }
    Ok(r.solve_triangular(UPLO::Upper, Diag::NonUnit, &rhs.to_owned())?)
}

/// Upper-triangular mass matrix whose diagonal entries below `ε · max |R_ii|`
/// are raised to that floor so solves never divide by zero.
#[derive(Clone, Debug)]
pub struct RegularizedUpper {
    r: DenseMatrix,
    /// Indices whose diagonal entry was replaced.
    pub floored: Vec<usize>,
    pub floor: f64,
}

impl RegularizedUpper {
    /// `ε_mach²`: only entries that are zero to working precision are touched.
    pub const EPS: f64 = f64::EPSILON * f64::EPSILON;

    pub fn new(r: &ArrayView2<f64>) -> Result<Self> {
        Self::with_relative_floor(r, Self::EPS)
    }

    pub fn with_relative_floor(r: &ArrayView2<f64>, eps: f64) -> Result<Self> {
        let n = r.nrows();
        if r.ncols() != n {
            return Err(Error::Shape(format!("mass matrix must be square, got {:?}", r.dim())));
        }
        let max = r.diag().fold(0.0f64, |a, v| a.max(v.abs()));
        if max == 0.0 {
            return Err(Error::SingularMass { index: 0 });
        }
        let floor = eps * max;
        let mut r = r.to_owned();
        let mut floored = Vec::new();
        for i in 0..n {
            let d = r[(i, i)];
            if d.abs() < floor {
                r[(i, i)] = if d < 0.0 { -floor } else { floor };
                floored.push(i);
            }
        }
        Ok(Self { r, floored, floor })
    }

    pub fn is_degenerate(&self) -> bool {
        !self.floored.is_empty()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.r
    }

    pub fn solve(&self, rhs: &ArrayView1<f64>) -> Result<Array1<f64>> {
        Ok(self.r.solve_triangular(UPLO::Upper, Diag::NonUnit, &rhs.to_owned())?)
    }

    pub fn solve_matrix(&self, rhs: &ArrayView2<f64>) -> Result<DenseMatrix> {
        Ok(self.r.solve_triangular(UPLO::Upper, Diag::NonUnit, &rhs.to_owned())?)
    }
}
