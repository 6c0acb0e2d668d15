use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `diag(R)` moved into `Q`.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `U diag(eigs) Uᵀ` for a random orthogonal `U`.
pub fn random_symmetric_with_eigs<R: Rng + ?Sized>(eigs: &[f64], rng: &mut R) -> DMatrix<f64> {
    let u = random_orthogonal(eigs.len(), rng);
    let h = &u * DMatrix::from_diagonal(&DVector::from_row_slice(eigs)) * u.transpose();
    (&h + h.transpose()) * 0.5
}
