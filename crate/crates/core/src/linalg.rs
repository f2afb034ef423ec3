//! Dense linear-algebra helpers shared by the structure and verification code.
//!
//! Numerical rank follows the usual convention: singular values at or below
//! `max(rows, cols) * EPSILON * sigma_max` count as zero.

use nalgebra::{DMatrix, DVector};

/// Outcome of a numerical rank computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankInfo {
    pub rank: usize,
    pub sigma_max: f64,
    /// Threshold below which singular values were treated as zero.
    pub threshold: f64,
    /// Smallest singular value counted in the rank (0 when the rank is 0).
    pub smallest_kept: f64,
    /// Largest singular value treated as zero (0 when there is none).
    pub largest_dropped: f64,
}

pub fn rank_threshold(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

pub fn numerical_rank(m: &DMatrix<f64>) -> RankInfo {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return RankInfo {
            rank: 0,
            sigma_max: 0.0,
            threshold: 0.0,
            smallest_kept: 0.0,
            largest_dropped: 0.0,
        };
    }
    let sv = m.singular_values();
    let sigma_max = sv.max();
    let threshold = rank_threshold(rows, cols, sigma_max);
    let mut info = RankInfo {
        rank: 0,
        sigma_max,
        threshold,
        smallest_kept: f64::INFINITY,
        largest_dropped: 0.0,
    };
    for &s in sv.iter() {
        if s > threshold {
            info.rank += 1;
            info.smallest_kept = info.smallest_kept.min(s);
        } else {
            info.largest_dropped = info.largest_dropped.max(s);
        }
    }
    if info.rank == 0 {
        info.smallest_kept = 0.0;
    }
    info
}

/// Orthonormal basis (as columns) of the null space of `m`.
///
/// Wide matrices are padded with zero rows so that the SVD returns a full
/// set of right singular vectors.
pub fn null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if rows == 0 {
        return DMatrix::identity(cols, cols);
    }
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma_max = svd.singular_values.max();
    let threshold = rank_threshold(rows, cols, sigma_max);
    let null_rows: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= threshold)
        .map(|(i, _)| i)
        .collect();
    let mut basis = DMatrix::zeros(cols, null_rows.len());
    for (j, &i) in null_rows.iter().enumerate() {
        basis.set_column(j, &v_t.row(i).transpose());
    }
    basis
}

/// Orthonormal basis (as columns) of the column space of `m`.
pub fn column_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sigma_max = svd.singular_values.max();
    let threshold = rank_threshold(rows, cols, sigma_max);
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > threshold)
        .map(|(i, _)| i)
        .collect();
    let mut basis = DMatrix::zeros(rows, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        basis.set_column(j, &u.column(i));
    }
    basis
}

/// Orthogonal projector `Q Qᵀ` onto the span of orthonormal columns `q`.
pub fn projector(q: &DMatrix<f64>) -> DMatrix<f64> {
    q * q.transpose()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Sine of the largest principal angle between two subspaces given by
/// orthonormal bases. Returns 1 when the dimensions differ.
pub fn subspace_gap(q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> f64 {
    if q1.ncols() != q2.ncols() || q1.nrows() != q2.nrows() {
        return 1.0;
    }
    if q1.ncols() == 0 {
        return 0.0;
    }
    let residual = q2 - q1 * (q1.transpose() * q2);
    let s = residual.singular_values().max();
    s.min(1.0)
}

pub fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

pub fn vstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.ncols());
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

pub fn concat(parts: &[&DVector<f64>]) -> DVector<f64> {
    let len = parts.iter().map(|p| p.len()).sum();
    let mut out = DVector::zeros(len);
    let mut offset = 0;
    for p in parts {
        out.rows_mut(offset, p.len()).copy_from(p);
        offset += p.len();
    }
    out
}

/// Extreme eigenvalues of the symmetric part `(M + Mᵀ)/2`.
pub fn symmetric_part_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    (eig.min(), eig.max())
}
