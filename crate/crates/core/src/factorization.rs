//! Volatility matrices from covariance matrices.
//!
//! Every factor `V` produced here satisfies `V V' = C` for the covariance `C`
//! it was built from. Two factors of the same `C` always differ by an
//! orthogonal matrix on the right, so the lower-triangular Cholesky factor is
//! the canonical representative of the whole family.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Relative tolerance on `|C_ij - C_ji|` accepted by [`CovMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Frobenius tolerance on `Q Q' - I` accepted by [`RotationMatrix::new`].
pub const ORTHOGONALITY_TOL: f64 = 1e-10;
/// Relative pivot floor for Cholesky elimination, scaled by `dim * max|C|`.
const PIVOT_TOL: f64 = 1e-14;
/// Relative eigenvalue floor for the symmetric square root, scaled by `dim * max eigenvalue`.
const EIGEN_CLAMP_TOL: f64 = 1e-12;

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

fn check_square_finite(m: &DMatrix<f64>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidParameter(
            "matrix dimension must be at least 1".into(),
        ));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(m.nrows())
}

/// `||a - b||_F / ||b||_F`, or the absolute error when `b` is zero.
pub fn relative_frobenius_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let diff = (a - b).norm();
    let scale = b.norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Symmetric positive-definite covariance of per-period asset returns.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    m: DMatrix<f64>,
}

impl CovMatrix {
    /// Validates symmetry and positive-definiteness. The stored matrix is the
    /// exact symmetrization `(C + C') / 2` of the input.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let m = symmetrized(m)?;
        cholesky_lower(&m)?;
        Ok(Self { m })
    }

    /// Like [`CovMatrix::new`], but first applies the diagonal repair
    /// `C + delta * mean(diag C) * I`. An all-zero diagonal is repaired with
    /// `delta * I` so that degenerate (constant) return windows still factor.
    pub fn with_shrinkage(m: DMatrix<f64>, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "shrinkage delta must be positive, got {delta}"
            )));
        }
        let mut m = symmetrized(m)?;
        let n = m.nrows();
        let mean_diag = m.diagonal().sum() / n as f64;
        let bump = if mean_diag > 0.0 {
            delta * mean_diag
        } else {
            delta
        };
        for i in 0..n {
            m[(i, i)] += bump;
        }
        Self::new(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.m
    }

    /// Multiplies every entry by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.m * c)
    }
}

fn symmetrized(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = check_square_finite(&m)?;
    let scale = max_abs(&m);
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if worst > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(worst));
    }
    let t = m.transpose();
    Ok((m + t) * 0.5)
}

/// Builds a dense matrix from equally long rows.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch {
            expected: ncols,
            found: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// How a [`VolMatrix`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Cholesky,
    SymSqrt,
    Rotated,
    User,
}

/// Non-singular square factor `sigma` of a covariance matrix; rows are
/// assets, columns are Brownian drivers.
#[derive(Debug, Clone, PartialEq)]
pub struct VolMatrix {
    m: DMatrix<f64>,
    provenance: Provenance,
}

impl VolMatrix {
    /// Wraps a user-supplied volatility matrix after a non-singularity check.
    pub fn user(m: DMatrix<f64>) -> Result<Self> {
        check_square_finite(&m)?;
        check_nonsingular(&m)?;
        Ok(Self {
            m,
            provenance: Provenance::User,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::user(matrix_from_rows(rows)?)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// `sigma sigma'`.
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.m * self.m.transpose()
    }

    /// Per-asset row sums `sum_j sigma_ij`; these fix the expected returns.
    pub fn row_sums(&self) -> Vec<f64> {
        self.m.row_iter().map(|r| r.iter().sum()).collect()
    }

    pub fn is_lower_triangular(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| ((i + 1)..n).all(|j| self.m[(i, j)] == 0.0))
    }

    /// Right-multiplies by an orthogonal matrix. The covariance is unchanged.
    pub fn rotate(&self, q: &RotationMatrix) -> Result<Self> {
        if q.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: q.dim(),
            });
        }
        Ok(Self {
            m: &self.m * q.matrix(),
            provenance: Provenance::Rotated,
        })
    }
}

fn check_nonsingular(m: &DMatrix<f64>) -> Result<()> {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    let floor = m.nrows() as f64 * f64::EPSILON * max;
    if !(min > floor) {
        return Err(Error::SingularMatrix(format!(
            "smallest singular value {min:e} below {floor:e}"
        )));
    }
    Ok(())
}

/// Unconstrained square matrix an investor wants the volatility matrix to resemble.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMatrix {
    m: DMatrix<f64>,
}

impl TargetMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square_finite(&m)?;
        Ok(Self { m })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }
}

impl From<&VolMatrix> for TargetMatrix {
    fn from(v: &VolMatrix) -> Self {
        Self { m: v.m.clone() }
    }
}

/// Orthogonal matrix (rotation or reflection).
#[derive(Debug, Clone, PartialEq)]
pub struct RotationMatrix {
    m: DMatrix<f64>,
}

impl RotationMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let n = check_square_finite(&m)?;
        let dev = (&m * m.transpose() - DMatrix::<f64>::identity(n, n)).norm();
        if dev > ORTHOGONALITY_TOL {
            return Err(Error::NotOrthogonal(dev));
        }
        let det_dev = (m.determinant().abs() - 1.0).abs();
        if det_dev > ORTHOGONALITY_TOL {
            return Err(Error::NotOrthogonal(det_dev));
        }
        Ok(Self { m })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: DMatrix::identity(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn transpose(&self) -> Self {
        Self {
            m: self.m.transpose(),
        }
    }
}

fn cholesky_lower(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = c.nrows();
    let tol = n as f64 * PIVOT_TOL * max_abs(c);
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = c[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > tol) {
            return Err(Error::NotPositiveDefinite(format!(
                "pivot {j} is {d:e} (floor {tol:e})"
            )));
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = c[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Lower-triangular factor with strictly positive diagonal.
pub fn cholesky(c: &CovMatrix) -> Result<VolMatrix> {
    Ok(VolMatrix {
        m: cholesky_lower(c.matrix())?,
        provenance: Provenance::Cholesky,
    })
}

/// Symmetric square root `S = U sqrt(Lambda) U'` from the eigendecomposition of `C`.
pub fn sym_sqrt(c: &CovMatrix) -> Result<VolMatrix> {
    let n = c.dim();
    let eig = c.matrix().clone().symmetric_eigen();
    let lambda_max = eig.eigenvalues.max();
    let tol = n as f64 * EIGEN_CLAMP_TOL * lambda_max;
    let mut roots = Vec::with_capacity(n);
    for &lambda in eig.eigenvalues.iter() {
        if lambda < -tol {
            return Err(Error::NotPositiveDefinite(format!("eigenvalue {lambda:e}")));
        }
        let clamped = lambda.max(0.0);
        if clamped == 0.0 {
            return Err(Error::SingularMatrix(format!(
                "eigenvalue {lambda:e} is numerically zero"
            )));
        }
        roots.push(clamped.sqrt());
    }
    let u = &eig.eigenvectors;
    let mut scaled = u.clone();
    for (j, root) in roots.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*root);
    }
    let s = &scaled * u.transpose();
    let s = (&s + s.transpose()) * 0.5;
    Ok(VolMatrix {
        m: s,
        provenance: Provenance::SymSqrt,
    })
}

/// Orthogonal Procrustes fit: the orthogonal `Q` minimizing `||L Q - T||_F`,
/// taken over the full orthogonal group. Returns `(L Q, Q)`.
pub fn procrustes_rotate(
    l: &VolMatrix,
    target: &TargetMatrix,
) -> Result<(VolMatrix, RotationMatrix)> {
    if l.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: l.dim(),
            found: target.dim(),
        });
    }
    let cross = l.matrix().transpose() * target.matrix();
    let svd = cross.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::SingularMatrix("SVD did not converge".into())),
    };
    let q = RotationMatrix::new(u * v_t)?;
    let v = VolMatrix {
        m: l.matrix() * q.matrix(),
        provenance: Provenance::Rotated,
    };
    Ok((v, q))
}

/// `V = L Q` with `L` lower triangular with positive diagonal and `Q` orthogonal.
pub fn lq_decompose(v: &VolMatrix) -> Result<(VolMatrix, RotationMatrix)> {
    let n = v.dim();
    // V' = Q1 R  =>  V = R' Q1'
    let qr = v.matrix().transpose().qr();
    let mut r = qr.r();
    let mut q1 = qr.q();
    let tol = n as f64 * f64::EPSILON * max_abs(&r);
    for i in 0..n {
        let d = r[(i, i)];
        if !(d.abs() > tol) {
            return Err(Error::SingularMatrix(format!("diagonal {i} of L is {d:e}")));
        }
        if d < 0.0 {
            r.row_mut(i).neg_mut();
            q1.column_mut(i).neg_mut();
        }
    }
    let mut l = r.transpose();
    for i in 0..n {
        for j in (i + 1)..n {
            l[(i, j)] = 0.0;
        }
    }
    Ok((
        VolMatrix {
            m: l,
            provenance: Provenance::Cholesky,
        },
        RotationMatrix { m: q1.transpose() },
    ))
}

/// The Cholesky factor of `V V'`, obtained without forming `V V'`.
pub fn recover_cholesky(v: &VolMatrix) -> Result<VolMatrix> {
    lq_decompose(v).map(|(l, _)| l)
}

/// Haar-distributed orthogonal matrix, deterministic in `seed`.
///
/// # Panics
/// If `n == 0`.
pub fn random_rotation(n: usize, seed: u64) -> RotationMatrix {
    assert!(n >= 1, "rotation dimension must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    RotationMatrix { m: q }
}
