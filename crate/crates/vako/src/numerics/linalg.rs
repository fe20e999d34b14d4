//! Dense vectors and matrices with the few factorizations the rest of the
//! library needs: LU with partial pivoting, Cholesky, and a one-sided Jacobi
//! SVD for rank/nullspace/condition estimation.
//!
//! Everything here is desk-scale (dimensions from 1 to a few hundred rows),
//! so the implementations favor robustness and simplicity over speed.

use std::ops::{Index, IndexMut};

/// Dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Max-abs norm; 0 for the empty vector.
pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `a - b` componentwise.
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `a + s * b` componentwise.
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// `s * a` componentwise.
pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| s * x).collect()
}

/// True when every entry is finite.
pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == ncols), "ragged rows");
        Mat { rows: nrows, cols: ncols, data: rows.concat() }
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Self {
        let ncols = cols.len();
        let nrows = cols.first().map_or(0, Vec::len);
        assert!(cols.iter().all(|c| c.len() == nrows), "ragged columns");
        Mat::from_fn(nrows, ncols, |r, c| cols[c][r])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        norm_inf(&self.data)
    }

    /// Matrix-vector product `A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// Transposed product `Aᵀ x`.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "matvec_t dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let row = self.row(r);
            for c in 0..self.cols {
                out[c] += row[c] * x[r];
            }
        }
        out
    }

    /// Matrix product `A B`.
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    out[(r, c)] += a * other[(k, c)];
                }
            }
        }
        out
    }

    /// `A + s B`.
    pub fn add_scaled(&self, s: f64, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (o, b) in out.data.iter_mut().zip(&other.data) {
            *o += s * b;
        }
        out
    }

    /// Solve `A x = b` by LU with partial pivoting; `None` when singular.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        Lu::factor(self).map(|lu| lu.solve(b))
    }

    /// Inverse via LU; `None` when singular.
    pub fn inverse(&self) -> Option<Mat> {
        assert_eq!(self.rows, self.cols, "inverse of non-square matrix");
        let lu = Lu::factor(self)?;
        let n = self.rows;
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            cols.push(lu.solve(&e));
        }
        Some(Mat::from_columns(&cols))
    }

    /// Lower-triangular Cholesky factor of a symmetric matrix; `None` when
    /// the matrix is not (numerically) positive definite.
    pub fn cholesky(&self) -> Option<Mat> {
        assert_eq!(self.rows, self.cols, "cholesky of non-square matrix");
        let n = self.rows;
        let mut l = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    l[(i, i)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        Some(l)
    }

    /// Singular value decomposition; see [`svd`].
    pub fn svd(&self) -> Svd {
        svd(self)
    }

    /// Two-norm condition estimate σ_max/σ_min, with σ_min taken over
    /// min(rows, cols) values; infinite for rank-deficient matrices.
    pub fn cond(&self) -> f64 {
        let sv = self.svd();
        let smax = sv.sigma.first().copied().unwrap_or(0.0);
        let smin = sv.sigma[..self.rows.min(self.cols)].last().copied().unwrap_or(0.0);
        if smin == 0.0 {
            f64::INFINITY
        } else {
            smax / smin
        }
    }

    /// Numerical rank: number of singular values above `rel_tol * σ_max`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let sv = self.svd();
        let smax = sv.sigma.first().copied().unwrap_or(0.0);
        if smax == 0.0 {
            return 0;
        }
        sv.sigma.iter().take_while(|&&s| s > rel_tol * smax).count()
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// LU factorization with partial pivoting.
pub struct Lu {
    lu: Mat,
    perm: Vec<usize>,
}

impl Lu {
    /// Factor a square matrix; `None` when a pivot falls below the
    /// roundoff-scaled singularity threshold.
    pub fn factor(a: &Mat) -> Option<Lu> {
        assert_eq!(a.rows, a.cols, "LU of non-square matrix");
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let tiny = f64::EPSILON * a.max_abs().max(f64::MIN_POSITIVE) * n as f64;
        for col in 0..n {
            let (pivot_row, pivot_abs) = (col..n)
                .map(|r| (r, lu[(r, col)].abs()))
                .max_by(|a, b| a.1.total_cmp(&b.1))?;
            if !(pivot_abs > tiny) {
                return None;
            }
            if pivot_row != col {
                for c in 0..n {
                    let tmp = lu[(col, c)];
                    lu[(col, c)] = lu[(pivot_row, c)];
                    lu[(pivot_row, c)] = tmp;
                }
                perm.swap(col, pivot_row);
            }
            let pivot = lu[(col, col)];
            for r in col + 1..n {
                let f = lu[(r, col)] / pivot;
                lu[(r, col)] = f;
                for c in col + 1..n {
                    let sub = f * lu[(col, c)];
                    lu[(r, c)] -= sub;
                }
            }
        }
        Some(Lu { lu, perm })
    }

    /// Solve for one right-hand side.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for r in 1..n {
            for c in 0..r {
                x[r] -= self.lu[(r, c)] * x[c];
            }
        }
        for r in (0..n).rev() {
            for c in r + 1..n {
                x[r] -= self.lu[(r, c)] * x[c];
            }
            x[r] /= self.lu[(r, r)];
        }
        x
    }
}

/// Thin singular value decomposition `A ≈ U diag(σ) Vᵀ`.
///
/// `sigma` is sorted descending and has `cols(A)` entries (zeros beyond the
/// rank for wide matrices). `v` is `cols × cols` orthogonal; `u` is
/// `rows × cols` with orthonormal columns wherever the matching singular
/// value is nonzero (columns past the rank are zero). The contractual parts
/// for callers are `sigma` and `v`.
pub struct Svd {
    pub u: Mat,
    pub sigma: Vec<f64>,
    pub v: Mat,
}

/// One-sided Jacobi SVD.
///
/// Wide matrices are padded with zero rows to square so that the rotation
/// sweep still produces the full set of right singular vectors; the extra
/// singular values are genuine zeros of the padded problem.
pub fn svd(a: &Mat) -> Svd {
    let (m, n) = (a.rows, a.cols);
    let work_rows = m.max(n);
    let mut b = Mat::zeros(work_rows, n);
    for r in 0..m {
        for c in 0..n {
            b[(r, c)] = a[(r, c)];
        }
    }
    let mut v = Mat::identity(n);

    // Cyclic sweeps of pairwise column rotations until all columns are
    // numerically orthogonal. Convergence is quadratic; 60 sweeps is far
    // beyond what desk-scale matrices need.
    const MAX_SWEEPS: usize = 60;
    const ORTH_TOL: f64 = 1e-15;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n.saturating_sub(1) {
            for j in i + 1..n {
                let mut aii = 0.0;
                let mut ajj = 0.0;
                let mut aij = 0.0;
                for r in 0..work_rows {
                    let bi = b[(r, i)];
                    let bj = b[(r, j)];
                    aii += bi * bi;
                    ajj += bj * bj;
                    aij += bi * bj;
                }
                if aij.abs() <= ORTH_TOL * (aii * ajj).sqrt() || aii * ajj == 0.0 {
                    continue;
                }
                rotated = true;
                let tau = (ajj - aii) / (2.0 * aij);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..work_rows {
                    let bi = b[(r, i)];
                    let bj = b[(r, j)];
                    b[(r, i)] = c * bi - s * bj;
                    b[(r, j)] = s * bi + c * bj;
                }
                for r in 0..n {
                    let vi = v[(r, i)];
                    let vj = v[(r, j)];
                    v[(r, i)] = c * vi - s * vj;
                    v[(r, j)] = s * vi + c * vj;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| norm2(&b.column(j))).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let v_sorted = Mat::from_columns(&order.iter().map(|&j| v.column(j)).collect::<Vec<_>>());
    let mut u = Mat::zeros(m, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        if norms[old_j] > 0.0 {
            for r in 0..m {
                u[(r, new_j)] = b[(r, old_j)] / norms[old_j];
            }
        }
    }
    Svd { u, sigma, v: v_sorted }
}

/// Orthonormal basis of the approximate kernel of `A`: right singular
/// directions whose singular value is below `tol * σ_max`, ordered from most
/// null outward. When `A` is exactly zero every direction qualifies.
pub fn nullspace(a: &Mat, tol: f64) -> Vec<Vec<f64>> {
    assert!(tol > 0.0, "nullspace tolerance must be positive");
    let sv = a.svd();
    let smax = sv.sigma.first().copied().unwrap_or(0.0);
    let mut basis: Vec<Vec<f64>> = sv
        .sigma
        .iter()
        .enumerate()
        .filter(|&(_, &s)| smax == 0.0 || s < tol * smax)
        .map(|(j, _)| sv.v.column(j))
        .collect();
    basis.reverse();
    basis
}

/// Orthonormalize a spanning set by modified Gram-Schmidt with
/// re-orthogonalization, dropping directions that fall below `drop_tol`
/// relative to their original length.
pub fn orthonormalize(vectors: &[Vec<f64>], drop_tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let original = norm2(v);
        if original == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w = axpy(&w, -c, b);
            }
        }
        let len = norm2(&w);
        if len > drop_tol * original {
            basis.push(scale(&w, 1.0 / len));
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn lu_solves_known_system() {
        let a = Mat::from_rows(&[vec![2.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 4.0]]);
        let x_true = vec![1.0, -2.0, 0.5];
        let b = a.matvec(&x_true);
        let x = a.solve(&b).unwrap();
        for (xi, ti) in x.iter().zip(&x_true) {
            assert_abs_diff_eq!(xi, ti, epsilon = 1e-12);
        }
    }

    #[test]
    fn lu_rejects_singular() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(a.solve(&[1.0, 1.0]).is_none());
    }

    #[test]
    fn inverse_roundtrip() {
        let a = Mat::from_rows(&[vec![4.0, 1.0], vec![2.0, 3.0]]);
        let inv = a.inverse().unwrap();
        let prod = a.matmul(&inv);
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(prod[(i, j)], expect, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn cholesky_accepts_spd_rejects_indefinite() {
        let spd = Mat::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        let l = spd.cholesky().unwrap();
        let back = l.matmul(&l.transpose());
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(back[(i, j)], spd[(i, j)], epsilon = 1e-12);
            }
        }
        let indefinite = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(indefinite.cholesky().is_none());
    }

    #[test]
    fn nullspace_of_identity_is_empty() {
        assert!(nullspace(&Mat::identity(3), 1e-9).is_empty());
    }

    #[test]
    fn nullspace_of_zero_matrix_is_everything() {
        let basis = nullspace(&Mat::zeros(2, 3), 1e-9);
        assert_eq!(basis.len(), 3);
        for (i, bi) in basis.iter().enumerate() {
            for (j, bj) in basis.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(dot(bi, bj), expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn nullspace_of_rank_one_matrix() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        let basis = nullspace(&a, 1e-9);
        assert_eq!(basis.len(), 1);
        // Forced by orthogonality to the row space: ±(2,−1)/√5.
        let v = &basis[0];
        let expect = [2.0 / 5.0_f64.sqrt(), -1.0 / 5.0_f64.sqrt()];
        let sign = v[0].signum() * expect[0].signum();
        assert_abs_diff_eq!(v[0], sign * expect[0], epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], sign * expect[1], epsilon = 1e-12);
    }

    #[test]
    fn condition_of_near_singular_matrix_is_large() {
        let a = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1e-13]]);
        assert!(a.cond() > 1e12);
    }

    #[test]
    fn svd_of_wide_matrix_recovers_full_kernel() {
        // 1×3 row: kernel is the orthogonal plane; requires the zero-row
        // padding path.
        let a = Mat::from_rows(&[vec![1.0, 1.0, 1.0]]);
        let basis = nullspace(&a, 1e-9);
        assert_eq!(basis.len(), 2);
        for v in &basis {
            assert!(norm2(&a.matvec(v)) < 1e-12);
        }
    }

    fn mat_strategy(max_dim: usize) -> impl Strategy<Value = Mat> {
        (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-2.0..2.0f64, r * c)
                .prop_map(move |data| Mat { rows: r, cols: c, data })
        })
    }

    proptest! {
        #[test]
        fn svd_reconstructs_and_is_orthogonal(a in mat_strategy(6)) {
            let sv = a.svd();
            let n = a.cols();
            // V orthogonal.
            for i in 0..n {
                for j in 0..n {
                    let d = dot(&sv.v.column(i), &sv.v.column(j));
                    let expect = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((d - expect).abs() < 1e-10);
                }
            }
            // A v_j = σ_j u_j.
            let smax = sv.sigma[0].max(1e-300);
            for j in 0..n {
                let av = a.matvec(&sv.v.column(j));
                let su = scale(&sv.u.column(j), sv.sigma[j]);
                prop_assert!(norm2(&sub(&av, &su)) <= 1e-10 * smax.max(1.0));
            }
            // Descending order.
            for w in sv.sigma.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
        }

        #[test]
        fn nullspace_vectors_are_orthonormal_and_null(
            cols in proptest::collection::vec(
                proptest::collection::vec(-2.0..2.0f64, 4),
                1..=2,
            )
        ) {
            // Build a rank-deficient 4×4 from 1–2 spanning columns repeated.
            let spread: Vec<Vec<f64>> = (0..4).map(|j| cols[j % cols.len()].clone()).collect();
            let a = Mat::from_columns(&spread);
            let tol = 1e-9;
            let basis = nullspace(&a, tol);
            let smax = a.svd().sigma[0];
            prop_assert!(basis.len() >= 4 - cols.len());
            for (i, v) in basis.iter().enumerate() {
                prop_assert!(norm2(&a.matvec(v)) <= 2.0 * tol * smax.max(1e-300));
                for (j, w) in basis.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot(v, w) - expect).abs() < 1e-12);
                }
            }
        }
    }
}
