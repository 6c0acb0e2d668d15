use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn check(h: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<(usize, usize)> {
    let (m, n) = a.shape();
    if h.nrows() != n || h.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: h.nrows(),
        });
    }
    Ok((m, n))
}

/// `K = [H Aᵀ; A 0]`.
pub fn build_kkt(h: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, n) = check(h, a)?;
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(h);
    k.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    k.view_mut((n, 0), (m, n)).copy_from(a);
    Ok(k)
}

/// `B = [0 A; Aᵀ H]`.
pub fn build_bordered(h: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, n) = check(h, a)?;
    let mut b = DMatrix::zeros(n + m, n + m);
    b.view_mut((0, m), (m, n)).copy_from(a);
    b.view_mut((m, 0), (n, m)).copy_from(&a.transpose());
    b.view_mut((m, m), (n, n)).copy_from(h);
    Ok(b)
}

/// KKT matrix whose last constraint row is nearly a combination of the others.
#[derive(Debug, Clone)]
pub struct NearSingularKkt {
    pub k: DMatrix<f64>,
    /// `[A′; a_M]` with `‖a_M‖₂ = 1`.
    pub a: DMatrix<f64>,
    /// `β` and `ε` after the joint rescaling.
    pub beta: DVector<f64>,
    pub epsilon: DVector<f64>,
    /// `‖ε‖₂`: some eigenvalue of `K` is at most this in magnitude.
    pub bound: f64,
}

/// `a_M = Σ βₘ aₘ + ε` appended to `A′`, with `β` and `ε` rescaled together
/// so that `‖a_M‖₂ = 1`.
///
/// With `F` holding `−ε` in the last column of the top block, `K + F` is
/// singular (it maps `(0, −β, 1)` to zero), so `K` has an eigenvalue within
/// `‖F‖₂ = ‖ε‖₂` of zero.
pub fn near_rank_deficient_kkt(
    h: &DMatrix<f64>,
    a_prime: &DMatrix<f64>,
    beta: &[f64],
    epsilon: &DVector<f64>,
) -> Result<NearSingularKkt> {
    let (m1, n) = check(h, a_prime)?;
    if beta.len() != m1 {
        return Err(Error::DimensionMismatch {
            expected: m1,
            found: beta.len(),
        });
    }
    if epsilon.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: epsilon.len(),
        });
    }
    if beta.iter().all(|&b| b == 0.0) {
        return Err(Error::InvalidProblem("β must not vanish".into()));
    }
    let beta = DVector::from_row_slice(beta);
    let combo = a_prime.transpose() * &beta + epsilon;
    let norm = combo.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::CannotNormalize);
    }
    let a_m = combo / norm;
    let beta = beta / norm;
    let epsilon = epsilon / norm;
    let mut a = a_prime.clone().insert_row(m1, 0.0);
    a.row_mut(m1).copy_from(&a_m.transpose());
    let k = build_kkt(h, &a)?;
    Ok(NearSingularKkt {
        k,
        a,
        bound: epsilon.norm(),
        beta,
        epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{min_abs_eigenvalue, symmetric_eigenvalues};

    #[test]
    fn block_placement() {
        let h = DMatrix::identity(2, 2);
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let k = build_kkt(&h, &a).unwrap();
        assert_eq!(k, DMatrix::from_row_slice(3, 3, &[1., 0., 1., 0., 1., 0., 1., 0., 0.]));
        let b = build_bordered(&h, &a).unwrap();
        assert_eq!(b, DMatrix::from_row_slice(3, 3, &[0., 1., 0., 1., 1., 0., 0., 0., 1.]));
        let mut ek = symmetric_eigenvalues(&k);
        let mut eb = symmetric_eigenvalues(&b);
        ek.sort_by(f64::total_cmp);
        eb.sort_by(f64::total_cmp);
        for (x, y) in ek.iter().zip(&eb) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn two_by_two_case() {
        let h = DMatrix::identity(2, 2);
        let a1 = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let eps = DVector::from_row_slice(&[0.0, 1e-8]);
        let c = near_rank_deficient_kkt(&h, &a1, &[1.0], &eps).unwrap();
        assert!(min_abs_eigenvalue(&c.k) <= 1e-8);
        assert!((c.a.row(1).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_dependence_has_null_vector() {
        let h = DMatrix::from_row_slice(3, 3, &[2., 1., 0., 1., 3., 1., 0., 1., 1.]);
        let a1 = DMatrix::from_row_slice(2, 3, &[1., 2., 0., 0., 1., -1.]);
        let c = near_rank_deficient_kkt(&h, &a1, &[0.5, 2.0], &DVector::zeros(3)).unwrap();
        assert_eq!(c.bound, 0.0);
        let mut v = DVector::zeros(6);
        v[3] = -c.beta[0];
        v[4] = -c.beta[1];
        v[5] = 1.0;
        assert!((&c.k * v).amax() < 1e-15);
    }

    #[test]
    fn zero_row_rejected() {
        let h = DMatrix::identity(2, 2);
        let a1 = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let eps = DVector::from_row_slice(&[-1.0, 0.0]);
        assert!(matches!(
            near_rank_deficient_kkt(&h, &a1, &[1.0], &eps),
            Err(Error::CannotNormalize)
        ));
    }
}
