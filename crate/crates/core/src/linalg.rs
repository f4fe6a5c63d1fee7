//! Dense linear-algebra substrate shared by the solvers.
//!
//! Everything here works on `nalgebra::DMatrix<f64>`. Singular vectors follow a
//! fixed sign convention so that factors are reproducible: in every column of
//! `W` the entry of largest magnitude is positive (lowest row index wins ties),
//! and the matching column of `V` is flipped along with it.

use faer::Mat;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Default relative threshold for numerical rank decisions.
pub const DEFAULT_SVD_TOL: f64 = 1e-12;

/// Thin SVD `M = W·diag(sigma)·Vᵀ` of a `p×q` matrix with `p ≥ q`.
///
/// After [`truncate_rank`] the factors keep only the leading `ρ` triplets, so
/// `w` is `p×ρ`, `sigma` has length `ρ` and `v` is `q×ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    pub w: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl SvdFactors {
    /// Number of singular triplets held.
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn nrows(&self) -> usize {
        self.w.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma.iter().copied().fold(0.0, f64::max)
    }

    /// Count of singular values strictly above `tol·σ_max`.
    pub fn numerical_rank(&self, tol: f64) -> usize {
        numerical_rank(self.sigma.as_slice(), tol)
    }

    /// `W·diag(sigma)·Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut ws = self.w.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            ws.column_mut(j).scale_mut(*s);
        }
        ws * self.v.transpose()
    }
}

/// Count of entries of a nonincreasing singular-value list above `tol·σ_max`.
pub fn numerical_rank(sigma: &[f64], tol: f64) -> usize {
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > tol * smax).count()
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Flips the sign of column `j` of `w` (and of `v`, when given) so that the
/// largest-magnitude entry of the `w` column is positive.
pub(crate) fn fix_column_signs(w: &mut DMatrix<f64>, mut v: Option<&mut DMatrix<f64>>) {
    for j in 0..w.ncols() {
        let mut best = 0.0_f64;
        let mut sign = 1.0;
        for x in w.column(j).iter() {
            if x.abs() > best {
                best = x.abs();
                sign = x.signum();
            }
        }
        if sign < 0.0 {
            w.column_mut(j).neg_mut();
            if let Some(v) = v.as_deref_mut() {
                v.column_mut(j).neg_mut();
            }
        }
    }
}

/// Thin SVD of a `p×q` matrix, `p ≥ q`, sorted by nonincreasing singular
/// value with the deterministic sign convention of this module.
pub fn thin_svd(m: &DMatrix<f64>) -> Result<SvdFactors> {
    let (p, q) = m.shape();
    if p < q {
        return Err(Error::InvalidInput(format!(
            "thin_svd expects a tall matrix, got {p}x{q}; transpose first"
        )));
    }
    check_finite(m)?;
    if q == 0 {
        return Ok(SvdFactors {
            w: DMatrix::zeros(p, 0),
            sigma: DVector::zeros(0),
            v: DMatrix::zeros(0, 0),
        });
    }

    let svd = Mat::<f64>::from_fn(p, q, |i, j| m[(i, j)])
        .thin_svd()
        .map_err(|_| Error::NoConvergence("singular value decomposition"))?;
    let (fu, fs, fv) = (svd.U(), svd.S().column_vector(), svd.V());
    let u = DMatrix::from_fn(p, q, |i, j| fu[(i, j)]);
    let singular_values = DVector::from_fn(q, |i, _| fs[i]);
    let vt = DMatrix::from_fn(q, q, |i, j| fv[(j, i)]);
    // Guard against a silently wrong factorization.
    let err = (&u * DMatrix::from_diagonal(&singular_values) * &vt - m).norm();
    if err.is_nan() || err > 1e-10 * m.norm() {
        return Err(Error::NoConvergence("singular value decomposition"));
    }

    // Stable sort keeps the solver's order on exact ties.
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| singular_values[b].total_cmp(&singular_values[a]));

    let mut w = DMatrix::zeros(p, q);
    let mut v = DMatrix::zeros(q, q);
    let mut sigma = DVector::zeros(q);
    for (dst, &src) in order.iter().enumerate() {
        w.set_column(dst, &u.column(src));
        v.set_column(dst, &vt.row(src).transpose());
        sigma[dst] = singular_values[src].max(0.0);
    }
    fix_column_signs(&mut w, Some(&mut v));
    Ok(SvdFactors { w, sigma, v })
}

/// Moore–Penrose pseudo-inverse `V·diag(σ⁺)·Wᵀ`; singular values at or below
/// `tol·σ_max` are treated as zero.
pub fn pseudo_inverse(f: &SvdFactors, tol: f64) -> DMatrix<f64> {
    let smax = f.sigma_max();
    let mut vs = f.v.clone();
    for (j, &s) in f.sigma.iter().enumerate() {
        let inv = if smax > 0.0 && s > tol * smax { 1.0 / s } else { 0.0 };
        vs.column_mut(j).scale_mut(inv);
    }
    vs * f.w.transpose()
}

/// Keeps the `k` leading singular triplets (Eckart–Young truncation).
pub fn truncate_rank(f: &SvdFactors, k: usize) -> SvdFactors {
    let k = k.min(f.len());
    SvdFactors {
        w: f.w.columns(0, k).into_owned(),
        sigma: f.sigma.rows(0, k).into_owned(),
        v: f.v.columns(0, k).into_owned(),
    }
}

/// Orthonormal basis of the dominant `k`-dimensional left singular subspace
/// of `y` (`n×m`), obtained without forming the `n×n` matrix `Y·Yᵀ`.
///
/// The `m×m` Gram matrix `Yᵀ·Y = V·Σ²·Vᵀ` is eigendecomposed and the basis is
/// read off as the first `k` columns of `Y·V·Σ⁻¹`. Singular values below about
/// `sqrt(eps)·σ_max` are lost when squared, so the Gram basis is polished with
/// one orthogonal-iteration step `orth(Y·(Yᵀ·P₀))` followed by a Rayleigh–Ritz
/// rotation from the SVD of the small `k×m` matrix `Pᵀ·Y`. Columns come out in
/// order of decreasing singular value under the module's sign convention.
///
/// Fails when `k` is zero, exceeds `m`, or when the `k`-th singular value is
/// not above `tol·σ_max`.
pub fn top_left_singular_basis(y: &DMatrix<f64>, k: usize, tol: f64) -> Result<DMatrix<f64>> {
    let (n, m) = y.shape();
    if k == 0 {
        return Err(Error::InvalidInput("rank must be ≥ 1".into()));
    }
    check_finite(y)?;
    let full = m.min(n);
    if k > full {
        return Err(Error::RankExceeded {
            what: "Y",
            requested: k,
            available: full,
        });
    }

    let gram = y.transpose() * y;
    let eig = SymmetricEigen::try_new(gram, f64::EPSILON, 100_000)
        .ok_or(Error::NoConvergence("symmetric eigendecomposition"))?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let lambda_max = eig.eigenvalues[order[0]];
    let lambda_k = eig.eigenvalues[order[k - 1]];
    if lambda_max <= 0.0 || lambda_k <= 0.0 {
        return Err(Error::RankExceeded {
            what: "Y",
            requested: k,
            available: order.iter().take_while(|&&i| eig.eigenvalues[i] > 0.0).count(),
        });
    }

    let mut p0 = DMatrix::zeros(n, k);
    for (dst, &src) in order.iter().take(k).enumerate() {
        let col = y * eig.eigenvectors.column(src) / eig.eigenvalues[src].sqrt();
        p0.set_column(dst, &col);
    }

    // One orthogonal-iteration step, then Rayleigh–Ritz on the refined subspace.
    let q0 = p0.qr().q();
    let q1 = (y * (y.transpose() * &q0)).qr().q();
    let ritz = thin_svd(&(y.transpose() * &q1))?;
    let smax = ritz.sigma_max();
    let sk = ritz.sigma[k - 1];
    if !(smax > 0.0 && sk > tol * smax) {
        return Err(Error::RankExceeded {
            what: "Y",
            requested: k,
            available: ritz.numerical_rank(tol),
        });
    }
    // Yᵀ·Q₁ = V_r·S·U_rᵀ, so Q₁ᵀ·Y = U_r·S·V_rᵀ and the rotated basis is Q₁·U_r.
    let mut p = q1 * ritz.v;
    fix_column_signs(&mut p, None);
    Ok(p)
}

/// Frobenius norm of `a − b`.
pub fn frobenius_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn diagonal_svd() {
        let f = thin_svd(&dmatrix![3.0, 0.0; 0.0, 2.0]).unwrap();
        assert_eq!(f.sigma.as_slice(), &[3.0, 2.0]);
        assert!((f.w.abs() - DMatrix::identity(2, 2)).norm() < 1e-15);
        assert!((f.v.abs() - DMatrix::identity(2, 2)).norm() < 1e-15);
        // sign convention: largest entry of each W column is positive
        assert!(f.w[(0, 0)] > 0.0 && f.w[(1, 1)] > 0.0);
    }

    #[test]
    fn zero_matrix_svd() {
        let f = thin_svd(&DMatrix::zeros(4, 3)).unwrap();
        assert!(f.sigma.iter().all(|&s| s == 0.0));
        assert_eq!(f.numerical_rank(DEFAULT_SVD_TOL), 0);
    }

    #[test]
    fn random_svd_reconstructs() {
        let m = gaussian(8, 5, 1);
        let f = thin_svd(&m).unwrap();
        assert!(frobenius_distance(&f.reconstruct(), &m) / m.norm() < 1e-12);
        assert!((f.w.transpose() * &f.w - DMatrix::identity(5, 5)).norm() < 1e-10);
        assert!((f.v.transpose() * &f.v - DMatrix::identity(5, 5)).norm() < 1e-10);
        assert!(f.sigma.as_slice().windows(2).all(|p| p[0] >= p[1]));
    }

    #[test]
    fn rank_deficient_svd_reconstructs() {
        // products of thin random factors have singular values at round-off,
        // where nalgebra's iteration is sensitive to its convergence threshold
        for seed in 0..200 {
            let a = gaussian(3, 1, seed) * gaussian(1, 2, seed + 1000);
            let f = thin_svd(&a).unwrap();
            assert!((f.reconstruct() - &a).norm() <= 1e-12 * a.norm(), "seed {seed}");
            assert!((f.sigma[0] - a.norm()).abs() <= 1e-12 * a.norm());
        }
    }

    #[test]
    fn svd_rejects_wide_and_non_finite() {
        assert!(matches!(thin_svd(&DMatrix::zeros(2, 3)), Err(Error::InvalidInput(_))));
        let mut m = DMatrix::<f64>::zeros(3, 2);
        m[(1, 1)] = f64::NAN;
        assert!(matches!(thin_svd(&m), Err(Error::NonFinite)));
    }

    #[test]
    fn svd_is_deterministic() {
        let m = gaussian(7, 4, 9);
        assert_eq!(thin_svd(&m).unwrap(), thin_svd(&m).unwrap());
    }

    #[test]
    fn pinv_examples() {
        let f = thin_svd(&dmatrix![2.0, 0.0; 0.0, 4.0]).unwrap();
        let p = pseudo_inverse(&f, DEFAULT_SVD_TOL);
        assert!((p - dmatrix![0.5, 0.0; 0.0, 0.25]).norm() < 1e-15);

        let f = thin_svd(&DMatrix::identity(3, 3)).unwrap();
        assert!((pseudo_inverse(&f, DEFAULT_SVD_TOL) - DMatrix::identity(3, 3)).norm() < 1e-15);

        let f = thin_svd(&dmatrix![3.0; 4.0]).unwrap();
        let p = pseudo_inverse(&f, DEFAULT_SVD_TOL);
        assert_eq!(p.shape(), (1, 2));
        assert!((p - dmatrix![3.0 / 25.0, 4.0 / 25.0]).norm() < 1e-15);
    }

    #[test]
    fn pinv_thresholds_rank_deficiency() {
        // duplicated column: rank 1
        let m = dmatrix![1.0, 1.0; 2.0, 2.0; 3.0, 3.0];
        let f = thin_svd(&m).unwrap();
        assert_eq!(f.numerical_rank(DEFAULT_SVD_TOL), 1);
        let p = pseudo_inverse(&f, DEFAULT_SVD_TOL);
        assert!((&m * &p * &m - &m).norm() < 1e-12);
        assert!((&p * &m * &p - &p).norm() < 1e-12);
    }

    #[test]
    fn truncation_examples() {
        let f = thin_svd(&DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 3.0, 1.0]))).unwrap();
        let t = truncate_rank(&f, 2);
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 3.0, 0.0]));
        assert!((t.reconstruct() - expect).norm() < 1e-14);
        assert_eq!(truncate_rank(&f, 3), f);
    }

    #[test]
    fn truncation_error_is_tail_norm() {
        let m = gaussian(7, 4, 3);
        // oracle: nalgebra's own singular values, independent of our sorting
        let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        let tail = (sv[2] * sv[2] + sv[3] * sv[3]).sqrt();
        let f = thin_svd(&m).unwrap();
        let err = (&m - truncate_rank(&f, 2).reconstruct()).norm();
        assert!((err - tail).abs() < 1e-10);
    }

    #[test]
    fn basis_diagonal_case() {
        let y = dmatrix![3.0, 0.0; 0.0, 2.0; 0.0, 0.0];
        let p = top_left_singular_basis(&y, 1, DEFAULT_SVD_TOL).unwrap();
        assert!((p - dmatrix![1.0; 0.0; 0.0]).norm() < 1e-12);
        let p = top_left_singular_basis(&y, 2, DEFAULT_SVD_TOL).unwrap();
        // projector onto span(e1, e2)
        let proj = &p * p.transpose();
        let mut expect = DMatrix::zeros(3, 3);
        expect[(0, 0)] = 1.0;
        expect[(1, 1)] = 1.0;
        assert!((proj - expect).norm() < 1e-12);
    }

    #[test]
    fn basis_matches_dense_eigenvectors() {
        let y = gaussian(6, 4, 11);
        let p = top_left_singular_basis(&y, 2, DEFAULT_SVD_TOL).unwrap();
        // oracle: dense eigendecomposition of the 6x6 matrix Y·Yᵀ
        let eig = SymmetricEigen::new(&y * y.transpose());
        let mut order: Vec<usize> = (0..6).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        for (j, &col) in order.iter().take(2).enumerate() {
            let e = eig.eigenvectors.column(col);
            let d = (p.column(j) - e).norm().min((p.column(j) + e).norm());
            assert!(d < 1e-9, "column {j} off by {d}");
        }
        assert!((p.transpose() * &p - DMatrix::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn basis_rejects_rank_excess() {
        let y = dmatrix![1.0, 2.0; 2.0, 4.0; 3.0, 6.0];
        assert!(matches!(
            top_left_singular_basis(&y, 2, DEFAULT_SVD_TOL),
            Err(Error::RankExceeded { requested: 2, .. })
        ));
        assert!(top_left_singular_basis(&y, 3, DEFAULT_SVD_TOL).is_err());
        assert!(top_left_singular_basis(&y, 0, DEFAULT_SVD_TOL).is_err());
    }
}
