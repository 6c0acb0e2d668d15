//! Dense kernels shared by the verifiers. Storage is column-major
//! (`nalgebra::DMatrix`).

mod basis;
mod householder;
mod ldl;
mod lu;
mod operator;

pub use basis::{null_space_basis, pivoted_qr, BasisMethod, ConstraintJacobian, NullSpaceBasis};
pub use householder::{default_tol_rank, HouseholderQr, Projector};
pub use ldl::{bunch_kaufman_alpha, ldl_factor, DiagonalBlock, Inertia, LdlFactorization};
pub use lu::BorderedLu;
pub use operator::{
    HessianOperator, LagrangianGradientFn, ProductFn, DEFAULT_FD_SIGMA,
};

use nalgebra::DMatrix;

/// Ascending eigenvalues of a symmetric matrix (reference eigensolver,
/// used for ground-truth comparisons only).
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_abs_eigenvalue(a: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(a)
        .into_iter()
        .map(f64::abs)
        .fold(f64::INFINITY, f64::min)
}
