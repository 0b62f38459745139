//! Dense linear algebra kernel.
//!
//! Matrices are `nalgebra` dense matrices; singular value decompositions are
//! computed by `faer` (see [`Svd`] for the variant used), with `nalgebra`'s
//! SVD as a last resort if `faer` does not converge. Every rank decision in the crate goes through
//! [`numerical_rank`] or [`Svd::rank`], so the tolerance rule lives here.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::svd::{self, ComputeSvdVectors, SvdParams};
use faer::{Auto, Par};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Outcome of a numerical rank computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    pub rank: usize,
    /// Singular values in descending order.
    pub singular_values: Vec<f64>,
    pub tolerance_used: f64,
}

/// The standard `max(rows, cols) * eps * sigma_max` threshold.
pub fn default_rank_tolerance(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

/// Returns an error naming the first non-finite entry of `m`.
pub fn ensure_finite(m: &Matrix, what: &'static str) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite { what, row: i, col: j });
            }
        }
    }
    Ok(())
}

fn to_faer(m: &Matrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD through `faer`, returning `(s, U, V)` with vectors if requested.
///
/// The bidiagonal stage always uses implicit-shift QR iteration: `faer`'s
/// divide-and-conquer path can return spurious singular values of order
/// `1e-4` on large rank-deficient inputs. Divide and conquer is only tried
/// if QR iteration fails to converge.
fn faer_svd(m: &Matrix, vectors: bool) -> Option<(Vec<f64>, Option<Matrix>, Option<Matrix>)> {
    let a = to_faer(m);
    let recursion = [usize::MAX, <SvdParams as Auto<f64>>::auto().recursion_threshold];
    recursion.into_iter().find_map(|threshold| faer_svd_with(&a, vectors, threshold))
}

fn faer_svd_with(a: &faer::Mat<f64>, vectors: bool, threshold: usize) -> Option<(Vec<f64>, Option<Matrix>, Option<Matrix>)> {
    let (rows, cols) = a.shape();
    let p = rows.min(cols);
    let mut params = <SvdParams as Auto<f64>>::auto();
    params.recursion_threshold = threshold;
    let want = if vectors { ComputeSvdVectors::Thin } else { ComputeSvdVectors::No };
    let mut s = faer::diag::Diag::<f64>::zeros(p);
    let mut u = vectors.then(|| faer::Mat::<f64>::zeros(rows, p));
    let mut v = vectors.then(|| faer::Mat::<f64>::zeros(cols, p));
    let mut buf = MemBuffer::new(svd::svd_scratch::<f64>(rows, cols, want, want, Par::Seq, params.into()));
    svd::svd(
        a.as_ref(),
        s.as_mut(),
        u.as_mut().map(|u| u.as_mut()),
        v.as_mut().map(|v| v.as_mut()),
        Par::Seq,
        MemStack::new(&mut buf),
        params.into(),
    )
    .ok()?;
    let sv: Vec<f64> = (0..p).map(|i| s[i]).collect();
    let back = |x: faer::Mat<f64>| Matrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)]);
    Some((sv, u.map(back), v.map(back)))
}

/// Thin singular value decomposition `M = U diag(s) V^T`.
#[derive(Debug, Clone)]
pub struct Svd {
    rows: usize,
    cols: usize,
    u: Matrix,
    s: Vec<f64>,
    v: Matrix,
}

impl Svd {
    pub fn new(m: &Matrix) -> Self {
        let (rows, cols) = m.shape();
        if rows.min(cols) == 0 {
            return Svd {
                rows,
                cols,
                u: Matrix::zeros(rows, 0),
                s: Vec::new(),
                v: Matrix::zeros(cols, 0),
            };
        }
        match faer_svd(m, true) {
            Some((s, Some(u), Some(v))) => Self::sorted(rows, cols, &u, &s, &v),
            _ => Self::from_nalgebra(m),
        }
    }

    fn sorted(rows: usize, cols: usize, u: &Matrix, s: &[f64], v: &Matrix) -> Self {
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&a, &b| s[b].abs().total_cmp(&s[a].abs()));
        Svd {
            rows,
            cols,
            u: Matrix::from_fn(rows, s.len(), |i, k| u[(i, order[k])]),
            s: order.iter().map(|&k| s[k].abs()).collect(),
            v: Matrix::from_fn(cols, s.len(), |i, k| v[(i, order[k])]),
        }
    }

    fn from_nalgebra(m: &Matrix) -> Self {
        let (rows, cols) = m.shape();
        let svd = m.clone().svd(true, true);
        let u = svd.u.expect("requested U");
        let v = svd.v_t.expect("requested V^T").transpose();
        Self::sorted(rows, cols, &u, svd.singular_values.as_slice(), &v)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.s
    }

    pub fn default_tolerance(&self) -> f64 {
        default_rank_tolerance(self.rows, self.cols, self.s.first().copied().unwrap_or(0.0))
    }

    fn tol(&self, tol: Option<f64>) -> f64 {
        tol.unwrap_or_else(|| self.default_tolerance())
    }

    pub fn rank(&self, tol: Option<f64>) -> RankResult {
        let tolerance_used = self.tol(tol);
        RankResult {
            rank: self.s.iter().filter(|&&s| s > tolerance_used).count(),
            singular_values: self.s.clone(),
            tolerance_used,
        }
    }

    fn kept(&self, tol: Option<f64>) -> usize {
        self.rank(tol).rank
    }

    /// Moore-Penrose pseudoinverse, discarding singular values at or below `tol`.
    pub fn pseudo_inverse(&self, tol: Option<f64>) -> Matrix {
        let r = self.kept(tol);
        let mut vs = self.v.columns(0, r).into_owned();
        for (k, mut col) in vs.column_iter_mut().enumerate() {
            col /= self.s[k];
        }
        vs * self.u.columns(0, r).transpose()
    }

    /// Minimum-norm least-squares solution of `M x = b`.
    pub fn solve_min_norm(&self, b: &Vector, tol: Option<f64>) -> Vector {
        let r = self.kept(tol);
        let mut coeff = self.u.columns(0, r).tr_mul(b);
        for k in 0..r {
            coeff[k] /= self.s[k];
        }
        self.v.columns(0, r) * coeff
    }

    /// Orthonormal basis of the column space.
    pub fn range_basis(&self, tol: Option<f64>) -> Matrix {
        self.u.columns(0, self.kept(tol)).into_owned()
    }

    /// Orthonormal basis of the row space (`V_r`).
    pub fn row_space_basis(&self, tol: Option<f64>) -> Matrix {
        self.v.columns(0, self.kept(tol)).into_owned()
    }

    /// `I - M^+ M`, the orthogonal projector onto the nullspace of `M`.
    pub fn null_projector(&self, tol: Option<f64>) -> Matrix {
        let vr = self.row_space_basis(tol);
        let mut p = -(&vr * vr.transpose());
        for i in 0..self.cols {
            p[(i, i)] += 1.0;
        }
        p
    }

    /// Orthonormal nullspace basis.
    pub fn null_basis(&self, tol: Option<f64>) -> Matrix {
        let r = self.kept(tol);
        let n = self.cols;
        if r == 0 {
            return Matrix::identity(n, n);
        }
        if r == n {
            return Matrix::zeros(n, 0);
        }
        if self.v.ncols() == n {
            // Tall or square input: the thin right factor is already complete.
            return self.v.columns(r, n - r).into_owned();
        }
        // Wide input: the projector's range is the nullspace and its leading
        // left singular vectors span it.
        let p = self.null_projector(tol);
        let psvd = Svd::new(&p);
        psvd.u.columns(0, n - r).into_owned()
    }
}

/// Orthonormal nullspace basis of `m`; `tol` as in [`Svd::rank`].
///
/// Wide inputs are padded with zero rows so the thin right factor is
/// complete, which leaves the singular values and default tolerance unchanged.
pub fn null_space_basis(m: &Matrix, tol: Option<f64>) -> Matrix {
    if m.nrows() >= m.ncols() {
        return Svd::new(m).null_basis(tol);
    }
    let mut padded = Matrix::zeros(m.ncols(), m.ncols());
    padded.rows_mut(0, m.nrows()).copy_from(m);
    Svd::new(&padded).null_basis(tol)
}

/// Moore-Penrose pseudoinverse via SVD. Zero-dimension inputs give the
/// (transposed-shape) empty matrix.
pub fn pseudo_inverse(m: &Matrix) -> Matrix {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Matrix::zeros(m.ncols(), m.nrows());
    }
    Svd::new(m).pseudo_inverse(None)
}

/// `rank = #{sigma_i > tol}`; default `tol = max(rows, cols) * eps * sigma_max`.
pub fn numerical_rank(m: &Matrix, tol: Option<f64>) -> RankResult {
    let (rows, cols) = m.shape();
    let mut s: Vec<f64> = if rows == 0 || cols == 0 {
        Vec::new()
    } else {
        match faer_svd(m, false) {
            Some((s, _, _)) => s,
            None => m.clone().svd(false, false).singular_values.iter().copied().collect(),
        }
    };
    s.iter_mut().for_each(|v| *v = v.abs());
    s.sort_by(|a, b| b.total_cmp(a));
    let tolerance_used =
        tol.unwrap_or_else(|| default_rank_tolerance(rows, cols, s.first().copied().unwrap_or(0.0)));
    RankResult {
        rank: s.iter().filter(|&&v| v > tolerance_used).count(),
        singular_values: s,
        tolerance_used,
    }
}

/// Least-squares solution of minimum Euclidean norm, `M^+ b`.
pub fn min_norm_solve(m: &Matrix, b: &Vector) -> Vector {
    assert_eq!(m.nrows(), b.len(), "min_norm_solve: incompatible dimensions");
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vector::zeros(m.ncols());
    }
    Svd::new(m).solve_min_norm(b, None)
}

/// Block-diagonal assembly; the empty sequence gives a 0x0 matrix.
pub fn block_diag(blocks: &[Matrix]) -> Matrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Max-norm of a vector (0 for the empty vector).
pub fn inf_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
