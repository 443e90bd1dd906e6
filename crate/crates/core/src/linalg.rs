//! Dense linear-algebra kernels: Cholesky with pivot diagnostics, pivoted QR
//! (column-space projection, column compression), and random orthogonal
//! matrices.
//!
//! Storage and the heavy factorizations (SVD, symmetric eigen) come from
//! nalgebra; this module adds the toolkit-specific behaviors on top — pinned
//! tolerances, typed errors, and deterministic column selection.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A Cholesky pivot counts as positive when it exceeds this fraction of the
/// largest input diagonal entry.
pub const CHOLESKY_PIVOT_REL: f64 = 1e-10;

/// A diagonal entry of R counts toward the rank iff it exceeds this fraction
/// of |R₁₁| (the first, largest pivot).
pub const RANK_REL: f64 = 1e-10;

/// Column-pivoted thin QR factors of a `p×m` matrix: `Q R = A P` with
/// orthonormal `Q` columns, upper-triangular `R` (in pivot order), and `P`
/// recorded as the pivot sequence followed by the unselected columns.
#[derive(Debug, Clone)]
pub struct QrFactors {
    /// `p × rank`, orthonormal columns spanning col(A).
    pub q: DMatrix<f64>,
    /// `rank × m`, upper triangular under the permutation ordering.
    pub r: DMatrix<f64>,
    /// Numerical rank at the pinned [`RANK_REL`] tolerance.
    pub rank: usize,
    /// Column order: the first `rank` entries are the pivot columns.
    pub permutation: Vec<usize>,
}

/// Column-pivoted modified Gram–Schmidt with one reorthogonalization pass.
/// Deterministic: pivots by largest residual norm, ties broken by lowest
/// column index.
pub fn col_piv_qr(a: &DMatrix<f64>) -> QrFactors {
    let (p, m) = a.shape();
    let mut work = a.clone();
    let mut selected = vec![false; m];
    let mut perm = Vec::with_capacity(m);
    let mut q = DMatrix::zeros(p, m.min(p));
    let mut r = DMatrix::zeros(m.min(p), m);
    let mut rank = 0usize;
    let mut first_pivot = 0.0f64;

    for _ in 0..m.min(p) {
        let mut best = usize::MAX;
        let mut best_norm = -1.0;
        for j in 0..m {
            if !selected[j] {
                let norm = work.column(j).norm();
                if norm > best_norm + 1e-300 && norm > best_norm {
                    best_norm = norm;
                    best = j;
                }
            }
        }
        if best == usize::MAX || best_norm <= RANK_REL * first_pivot || best_norm == 0.0 {
            break;
        }
        if rank == 0 {
            first_pivot = best_norm;
        }
        selected[best] = true;
        perm.push(best);
        let qcol = work.column(best) / best_norm;
        q.set_column(rank, &qcol);
        r[(rank, best)] = best_norm;
        for j in 0..m {
            if !selected[j] {
                let proj = qcol.dot(&work.column(j));
                r[(rank, j)] += proj;
                let updated = work.column(j) - &qcol * proj;
                work.set_column(j, &updated);
                // second pass keeps orthogonality near machine precision
                let proj2 = qcol.dot(&work.column(j));
                r[(rank, j)] += proj2;
                let updated = work.column(j) - &qcol * proj2;
                work.set_column(j, &updated);
            }
        }
        rank += 1;
    }

    for j in 0..m {
        if !selected[j] {
            perm.push(j);
        }
    }
    // reorder R columns into permutation order so that Q R = A P
    let mut r_perm = DMatrix::zeros(rank, m);
    for (pos, &j) in perm.iter().enumerate() {
        for i in 0..rank {
            r_perm[(i, pos)] = r[(i, j)];
        }
    }
    QrFactors {
        q: q.columns(0, rank).into_owned(),
        r: r_perm,
        rank,
        permutation: perm,
    }
}

/// Lower-triangular `L` with `L Lᵀ = M`. Fails with the offending pivot index
/// and value when `M` is not positive definite at the pinned tolerance.
pub fn cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = m.nrows();
    if m.ncols() != k {
        return Err(Error::invalid(format!(
            "cholesky needs a square matrix, got {}×{}",
            k,
            m.ncols()
        )));
    }
    let max_diag = (0..k).map(|i| m[(i, i)]).fold(0.0f64, f64::max);
    let pivot_floor = CHOLESKY_PIVOT_REL * max_diag;
    let mut l = DMatrix::zeros(k, k);
    for j in 0..k {
        let mut s = m[(j, j)];
        for t in 0..j {
            s -= l[(j, t)] * l[(j, t)];
        }
        if s <= pivot_floor {
            return Err(Error::NotPositiveDefinite { index: j, value: s });
        }
        let ljj = s.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..k {
            let mut v = m[(i, j)];
            for t in 0..j {
                v -= l[(i, t)] * l[(j, t)];
            }
            l[(i, j)] = v / ljj;
        }
    }
    Ok(l)
}

/// Orthogonal projection of each column of `v` onto col(`b`).
/// Returns `(v̄, v⊥)` with `v̄ + v⊥ = v`, `v̄ ∈ col(b)`, `bᵀ v⊥ = 0`.
pub fn project_onto_colspace(b: &DMatrix<f64>, v: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    assert_eq!(
        b.nrows(),
        v.nrows(),
        "projection target and source must share row count"
    );
    let qr = col_piv_qr(b);
    if qr.rank == 0 {
        return (DMatrix::zeros(v.nrows(), v.ncols()), v.clone());
    }
    let vbar = &qr.q * (qr.q.transpose() * v);
    let vperp = v - &vbar;
    (vbar, vperp)
}

/// Full-column-rank compression: returns the subset of columns of `b` (in
/// ascending original order) that spans col(`b`), together with their indices.
pub fn column_compress(b: &DMatrix<f64>) -> (DMatrix<f64>, Vec<usize>) {
    let qr = col_piv_qr(b);
    let mut basis: Vec<usize> = qr.permutation[..qr.rank].to_vec();
    basis.sort_unstable();
    let mut bhat = DMatrix::zeros(b.nrows(), basis.len());
    for (pos, &j) in basis.iter().enumerate() {
        bhat.set_column(pos, &b.column(j));
    }
    (bhat, basis)
}

/// Random orthogonal matrix: the eigenvector basis of `G + Gᵀ + k·I` for a
/// standard Gaussian `G` — i.e. the decomposition of a randomly generated
/// positive definite matrix. Deterministic given the RNG state.
pub fn random_orthogonal<R: Rng>(k: usize, rng: &mut R) -> DMatrix<f64> {
    assert!(k >= 1, "orthogonal matrix needs positive dimension");
    let g = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let sym = &g + g.transpose() + DMatrix::identity(k, k) * (k as f64);
    nalgebra::SymmetricEigen::new(sym).eigenvectors
}

/// Least-squares solution of `a·x ≈ rhs` through the pivoted QR factors:
/// the basic solution (non-pivot coordinates zero) for square and tall
/// systems, the minimum-norm solution for wide full-row-rank systems. Wide
/// systems whose dependent rows are inconsistent keep their residual there —
/// every caller either guarantees consistency or checks the residual itself.
///
/// Triangular solves on the pivoted factors stay at machine precision even
/// with heavily repeated columns, where an SVD's clustered singular values
/// cost several digits.
pub fn least_squares(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if rhs.len() != a.nrows() {
        return Err(Error::invalid(format!(
            "least-squares shape mismatch: {}×{} matrix, rhs of length {}",
            a.nrows(),
            a.ncols(),
            rhs.len()
        )));
    }
    if a.ncols() == 0 || a.nrows() == 0 {
        return Ok(DVector::zeros(a.ncols()));
    }
    if a.nrows() >= a.ncols() {
        let qr = col_piv_qr(a);
        let qtb = qr.q.transpose() * rhs;
        let mut z = DVector::zeros(qr.rank);
        for i in (0..qr.rank).rev() {
            let mut s = qtb[i];
            for j in (i + 1)..qr.rank {
                s -= qr.r[(i, j)] * z[j];
            }
            z[i] = s / qr.r[(i, i)];
        }
        let mut x = DVector::zeros(a.ncols());
        for (pos, &col) in qr.permutation[..qr.rank].iter().enumerate() {
            x[col] = z[pos];
        }
        Ok(x)
    } else {
        // aᵀP = QR on the pivot rows gives a·(Qu) = R₁ᵀu row by row, so a
        // forward substitution and one orthonormal product solve the system.
        let qr = col_piv_qr(&a.transpose());
        let mut u = DVector::zeros(qr.rank);
        for i in 0..qr.rank {
            let mut s = rhs[qr.permutation[i]];
            for j in 0..i {
                s -= qr.r[(j, i)] * u[j];
            }
            u[i] = s / qr.r[(i, i)];
        }
        Ok(&qr.q * u)
    }
}

/// Largest singular value.
pub fn operator_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0f64, |acc, &s| acc.max(s))
}

/// Symmetric square root of a positive semidefinite matrix via eigenvalue
/// decomposition. Eigenvalues below zero (floating-point noise on a PSD
/// input) are clamped, so the result always satisfies `S·S ⪰ 0`.
pub fn psd_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    if a.nrows() == 0 {
        return a.clone();
    }
    let eig = nalgebra::SymmetricEigen::new(a.clone());
    let roots = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&v| v.max(0.0).sqrt()),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Smallest singular value (0 for an empty matrix).
pub fn sigma_min(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(f64::INFINITY, |acc, &s| acc.min(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cholesky_scalar() {
        let l = cholesky(&dmatrix![4.0]).unwrap();
        assert_abs_diff_eq!(l[(0, 0)], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn cholesky_identity() {
        let l = cholesky(&DMatrix::identity(3, 3)).unwrap();
        assert_abs_diff_eq!(l, DMatrix::identity(3, 3), epsilon = 1e-14);
    }

    #[test]
    fn cholesky_two_by_two() {
        let m = dmatrix![4.0, 2.0; 2.0, 2.0];
        let l = cholesky(&m).unwrap();
        let expected = dmatrix![2.0, 0.0; 1.0, 1.0];
        assert_abs_diff_eq!(l, expected, epsilon = 1e-14);
        assert_abs_diff_eq!(&l * l.transpose(), m, epsilon = 1e-14);
    }

    #[test]
    fn cholesky_rejects_semidefinite() {
        // rank-1: second pivot is exactly zero
        let m = dmatrix![1.0, 1.0; 1.0, 1.0];
        match cholesky(&m) {
            Err(Error::NotPositiveDefinite { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
        match cholesky(&dmatrix![0.0]) {
            Err(Error::NotPositiveDefinite { index, .. }) => assert_eq!(index, 0),
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn projection_splits_off_column_space() {
        let b = dmatrix![0.0; 1.0];
        let v = dmatrix![1.0; 0.0];
        let (vbar, vperp) = project_onto_colspace(&b, &v);
        assert_abs_diff_eq!(vbar, DMatrix::zeros(2, 1), epsilon = 1e-12);
        assert_abs_diff_eq!(vperp, v, epsilon = 1e-12);
    }

    #[test]
    fn projection_is_identity_inside_colspace() {
        let b = dmatrix![1.0, 0.0; 0.0, 1.0; 1.0, 1.0];
        let v = &b * dmatrix![2.0; -3.0];
        let (vbar, vperp) = project_onto_colspace(&b, &v);
        assert_abs_diff_eq!(vbar, v, epsilon = 1e-10);
        assert_abs_diff_eq!(vperp.norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn projection_full_row_rank_absorbs_everything() {
        let b = dmatrix![2.0, 1.0; 0.0, 3.0];
        let v = dmatrix![5.0; -7.0];
        let (_, vperp) = project_onto_colspace(&b, &v);
        assert_abs_diff_eq!(vperp.norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn projection_pythagoras_and_idempotence() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let p = rng.gen_range(1..6);
            let m = rng.gen_range(1..6);
            let b = DMatrix::from_fn(p, m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let v = DMatrix::from_fn(p, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
            let (vbar, vperp) = project_onto_colspace(&b, &v);
            let lhs = v.norm_squared();
            let rhs = vbar.norm_squared() + vperp.norm_squared();
            assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs));
            let (vbar2, res2) = project_onto_colspace(&b, &vbar);
            assert_abs_diff_eq!(vbar2, vbar, epsilon = 1e-12);
            assert!(res2.norm() <= 1e-12 * (1.0 + vbar.norm()));
            // orthogonality of the residual against col(B)
            assert!((b.transpose() * &vperp).norm() <= 1e-9 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn compress_rank_one() {
        let b = dmatrix![1.0, 2.0; 2.0, 4.0];
        let (bhat, basis) = column_compress(&b);
        assert_eq!(bhat.ncols(), 1);
        assert_eq!(basis.len(), 1);
        // the kept column must span (1,2)ᵀ
        let c = bhat.column(0);
        assert_abs_diff_eq!(c[0] * 2.0, c[1], epsilon = 1e-12);
    }

    #[test]
    fn compress_identity_and_zero() {
        let (bhat, basis) = column_compress(&DMatrix::identity(3, 3));
        assert_eq!(basis, vec![0, 1, 2]);
        assert_abs_diff_eq!(bhat, DMatrix::identity(3, 3), epsilon = 1e-14);
        let (bhat, basis) = column_compress(&DMatrix::zeros(2, 3));
        assert_eq!(basis.len(), 0);
        assert_eq!(bhat.ncols(), 0);
    }

    #[test]
    fn compress_preserves_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let p = rng.gen_range(1..6);
            let m = rng.gen_range(1..6);
            let mut b = DMatrix::from_fn(p, m, |_, _| rng.sample::<f64, _>(StandardNormal));
            if m >= 2 && rng.gen_bool(0.5) {
                // force rank deficiency
                let dup = b.column(0) * 0.5;
                b.set_column(m - 1, &dup);
            }
            let y = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let target = &b * &y;
            let (bhat, _) = column_compress(&b);
            if bhat.ncols() == 0 {
                assert!(target.norm() <= 1e-9);
                continue;
            }
            let yhat = least_squares(&bhat, &target).unwrap();
            assert!((bhat * yhat - target).norm() <= 1e-9 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn qr_reconstructs_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let p = rng.gen_range(1..7);
            let m = rng.gen_range(1..7);
            let a = DMatrix::from_fn(p, m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let qr = col_piv_qr(&a);
            let mut ap = DMatrix::zeros(p, m);
            for (pos, &j) in qr.permutation.iter().enumerate() {
                ap.set_column(pos, &a.column(j));
            }
            assert!((&qr.q * &qr.r - ap).norm() <= 1e-10 * (1.0 + a.norm()));
            let qtq = qr.q.transpose() * &qr.q;
            assert_abs_diff_eq!(qtq, DMatrix::identity(qr.rank, qr.rank), epsilon = 1e-10);
        }
    }

    #[test]
    fn least_squares_wide_with_repeated_columns() {
        // block structure of a typical equality system: many identical
        // columns → singular values with high multiplicity. The solve must
        // still hit machine precision on every row.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..30 {
            let k = rng.gen_range(2..8);
            let blocks = rng.gen_range(1..5);
            let mut cols: Vec<DVector<f64>> = Vec::new();
            for _ in 0..blocks {
                let c = DVector::from_fn(k, |_, _| {
                    if rng.gen_bool(0.5) { 1.0 } else { 0.0 }
                });
                for _ in 0..rng.gen_range(2..9) {
                    cols.push(c.clone());
                }
            }
            let n = cols.len();
            let mut a = DMatrix::zeros(k, n);
            for (j, c) in cols.iter().enumerate() {
                a.set_column(j, c);
            }
            let rhs = &a * DVector::from_fn(n, |_, _| rng.gen_range(-20.0..20.0f64));
            let x = least_squares(&a, &rhs).unwrap();
            // consistent by construction: rhs ∈ range(a)
            assert!(
                (&a * &x - &rhs).amax() <= 1e-10 * (1.0 + rhs.amax()),
                "residual {:.3e}",
                (&a * &x - &rhs).amax()
            );
        }
    }

    #[test]
    fn orthogonal_unit_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let u = random_orthogonal(1, &mut rng);
        assert_abs_diff_eq!(u[(0, 0)].abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn orthogonal_is_orthogonal_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let u = random_orthogonal(5, &mut rng);
        let id = u.transpose() * &u;
        assert!((id - DMatrix::identity(5, 5)).norm() <= 1e-10);
        let mut rng2 = ChaCha8Rng::seed_from_u64(42);
        let u2 = random_orthogonal(5, &mut rng2);
        assert_eq!(u, u2);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for k in 1..6 {
            let g = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal));
            let a = &g * g.transpose();
            let s = psd_sqrt(&a);
            assert!((&s - s.transpose()).norm() <= 1e-10 * (1.0 + s.norm()));
            assert!((&s * &s - &a).norm() <= 1e-9 * (1.0 + a.norm()));
        }
        // a slightly indefinite input still factors (eigenvalue clamped)
        let near = dmatrix![1.0, 0.0; 0.0, -1e-14];
        let s = psd_sqrt(&near);
        assert!((&s * &s - dmatrix![1.0, 0.0; 0.0, 0.0]).norm() <= 1e-12);
    }
}
