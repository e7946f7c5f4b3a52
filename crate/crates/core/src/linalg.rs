//! Dense numerical rank, nullspaces and least squares on small matrices.

use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<f64>;

/// Build a matrix from row vectors; `cols` is used when there are no rows.
pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Mat {
    let r = rows.len();
    let c = rows.first().map_or(cols, |row| row.len());
    Mat::from_fn(r, c, |i, j| rows[i][j])
}

/// Singular values in descending order.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Count of singular values above `tol_rel * sigma_max`.
pub fn rank_from_singular_values(s: &[f64], tol_rel: f64) -> usize {
    let max = s.first().copied().unwrap_or(0.0);
    if max == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > tol_rel * max).count()
}

pub fn numerical_rank(m: &Mat, tol_rel: f64) -> usize {
    rank_from_singular_values(&singular_values(m), tol_rel)
}

/// Orthonormal basis of the right nullspace, as columns. Singular values at
/// or below `tol_abs` count as zero.
pub fn nullspace(m: &Mat, tol_abs: f64) -> Mat {
    let (r, c) = m.shape();
    if c == 0 {
        return Mat::zeros(0, 0);
    }
    // Pad with zero rows so the SVD returns a full right factor.
    let mut sq = Mat::zeros(r.max(c), c);
    sq.view_mut((0, 0), (r, c)).copy_from(m);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= tol_abs)
        .map(|(i, _)| vt.row(i).transpose())
        .collect();
    if cols.is_empty() {
        Mat::zeros(c, 0)
    } else {
        Mat::from_columns(&cols)
    }
}

/// Nullspace using a threshold relative to the largest singular value, with
/// an absolute floor so that a zero matrix has a full nullspace.
pub fn nullspace_rel(m: &Mat, tol_rel: f64) -> Mat {
    let smax = singular_values(m).first().copied().unwrap_or(0.0);
    nullspace(m, (tol_rel * smax).max(f64::MIN_POSITIVE))
}

/// Orthonormal basis of the left nullspace (vectors y with yᵀm = 0).
pub fn left_nullspace_rel(m: &Mat, tol_rel: f64) -> Mat {
    nullspace_rel(&m.transpose(), tol_rel)
}

/// Minimum-norm least-squares solution of `a x = b` and its residual norm.
pub fn lstsq(a: &Mat, b: &DVector<f64>, tol_rel: f64) -> (DVector<f64>, f64) {
    if a.ncols() == 0 {
        return (DVector::zeros(0), b.norm());
    }
    if a.nrows() == 0 {
        return (DVector::zeros(a.ncols()), 0.0);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = (tol_rel * smax).max(f64::MIN_POSITIVE);
    let x = svd.solve(b, eps).unwrap_or_else(|_| DVector::zeros(a.ncols()));
    let res = (a * &x - b).norm();
    (x, res)
}
