//! Eigendecomposition of small dense real nonsymmetric matrices.
//!
//! Eigenvalues come from the real Schur form, so complex eigenvalues appear
//! in exact conjugate pairs. Eigenvectors are null vectors of `A − λI` taken
//! from an SVD: real arithmetic for real eigenvalues, complex arithmetic for
//! eigenvalues in the upper half plane, and the conjugate vector for the
//! lower half plane. Clusters of (numerically) repeated eigenvalues receive
//! as many trailing singular vectors as the cluster has members.

use faer::{c64, Mat};
use nalgebra::{Complex, DMatrix, Schur};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Relative distance under which eigenvalues are treated as one cluster.
const CLUSTER_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// Sorted by decreasing modulus, then decreasing real part, then
    /// decreasing imaginary part.
    pub values: Vec<C64>,
    /// Column `i` belongs to `values[i]`; not normalized.
    pub vectors: DMatrix<C64>,
}

fn order(a: &C64, b: &C64) -> std::cmp::Ordering {
    b.norm()
        .total_cmp(&a.norm())
        .then(b.re.total_cmp(&a.re))
        .then(b.im.total_cmp(&a.im))
}

fn real_null_vectors(a: &DMatrix<f64>, shift: f64, count: usize) -> Result<Vec<Vec<C64>>> {
    let k = a.nrows();
    let shifted = a - DMatrix::identity(k, k) * shift;
    let svd = Mat::<f64>::from_fn(k, k, |i, j| shifted[(i, j)])
        .thin_svd()
        .map_err(|_| Error::NoConvergence("eigenvector SVD"))?;
    let (s, v) = (svd.S().column_vector(), svd.V());
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&x, &y| s[x].total_cmp(&s[y]));
    Ok(idx
        .into_iter()
        .take(count)
        .map(|c| (0..k).map(|i| C64::new(v[(i, c)], 0.0)).collect())
        .collect())
}

fn complex_null_vectors(a: &DMatrix<f64>, shift: C64, count: usize) -> Result<Vec<Vec<C64>>> {
    let k = a.nrows();
    let shifted = Mat::<c64>::from_fn(k, k, |i, j| {
        let v = c64::new(a[(i, j)], 0.0);
        if i == j {
            v - shift
        } else {
            v
        }
    });
    let svd = shifted
        .thin_svd()
        .map_err(|_| Error::NoConvergence("eigenvector SVD"))?;
    let (s, v) = (svd.S().column_vector(), svd.V());
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&x, &y| s[x].re.total_cmp(&s[y].re));
    Ok(idx
        .into_iter()
        .take(count)
        .map(|c| (0..k).map(|i| v[(i, c)]).collect())
        .collect())
}

/// Eigenvalues and eigenvectors of a square real matrix.
pub fn eigen_decompose(a: &DMatrix<f64>) -> Result<EigenPairs> {
    let k = a.nrows();
    if a.ncols() != k {
        return Err(Error::InvalidInput("eigendecomposition needs a square matrix".into()));
    }
    if !a.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if k == 0 {
        return Ok(EigenPairs {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let schur =
        Schur::try_new(a.clone(), f64::EPSILON, 100_000).ok_or(Error::NoConvergence("real Schur decomposition"))?;
    let mut values: Vec<C64> = schur.complex_eigenvalues().iter().copied().collect();
    values.sort_by(order);

    let scale = values
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let tol = CLUSTER_TOL * scale;

    let mut vectors = DMatrix::<C64>::zeros(k, k);
    let mut done = vec![false; k];
    for i in 0..k {
        if done[i] || values[i].im < 0.0 {
            continue;
        }
        let is_real = values[i].im == 0.0;
        let members: Vec<usize> = (i..k)
            .filter(|&j| {
                !done[j]
                    && (values[j].im == 0.0) == is_real
                    && values[j].im >= 0.0
                    && (values[j] - values[i]).norm() <= tol
            })
            .collect();
        let center = members.iter().map(|&j| values[j]).sum::<C64>() / members.len() as f64;
        let vecs = if is_real {
            real_null_vectors(a, center.re, members.len())?
        } else {
            complex_null_vectors(a, center, members.len())?
        };
        for (&j, v) in members.iter().zip(vecs) {
            done[j] = true;
            for (r, x) in v.into_iter().enumerate() {
                vectors[(r, j)] = x;
            }
            if !is_real {
                // the conjugate partner: same modulus and real part, so it is
                // adjacent in sorted order
                let partner = (0..k)
                    .find(|&p| !done[p] && values[p] == values[j].conj())
                    .ok_or(Error::NoConvergence("conjugate eigenvalue pairing"))?;
                done[partner] = true;
                for r in 0..k {
                    vectors[(r, partner)] = vectors[(r, j)].conj();
                }
            }
        }
    }
    Ok(EigenPairs { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn max_residual(a: &DMatrix<f64>, e: &EigenPairs) -> f64 {
        let ac = a.map(|v| C64::new(v, 0.0));
        (0..a.nrows())
            .map(|i| {
                let v = e.vectors.column(i);
                (&ac * v - v * e.values[i]).norm() / v.norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn rotation_has_conjugate_pair() {
        let a = dmatrix![0.0, -2.0; 2.0, 0.0];
        let e = eigen_decompose(&a).unwrap();
        assert_eq!(e.values[0], C64::new(0.0, 2.0));
        assert_eq!(e.values[1], C64::new(0.0, -2.0));
        assert!(max_residual(&a, &e) < 1e-14);
        for r in 0..2 {
            assert_eq!(e.vectors[(r, 1)], e.vectors[(r, 0)].conj());
        }
    }

    #[test]
    fn repeated_eigenvalue_gets_independent_vectors() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 2.0, 1.0]));
        let e = eigen_decompose(&a).unwrap();
        assert!(max_residual(&a, &e) < 1e-14);
        let first_two = e.vectors.columns(0, 2).map(|v| v.re);
        assert!((first_two.transpose() * &first_two - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn general_matrix() {
        let a = dmatrix![
            1.0, 2.0, 0.5, -1.0;
            -3.0, 0.2, 1.0, 0.0;
            0.0, 1.5, -0.7, 2.0;
            0.3, 0.0, 1.0, 0.9
        ];
        let e = eigen_decompose(&a).unwrap();
        assert!(max_residual(&a, &e) < 1e-12);
        let trace: C64 = e.values.iter().sum();
        assert!((trace.re - a.trace()).abs() < 1e-12 && trace.im.abs() < 1e-12);
    }
}
