use std::time::Instant;

use super::{
    bordered_hessian_test, continued_pcg, diagonalization, implicit_cholesky, inertia_test, Inconclusive, Method,
    Outcome, SoscOptions, SoscVerdict,
};
use crate::error::Result;
use crate::linalg::{null_space_basis, BasisMethod, NullSpaceBasis, Projector};
use crate::problems::Problem;

/// Runs `method` on `problem`. Fails with [`crate::Error::RankDeficient`]
/// when the constraint gradients are numerically dependent.
pub fn verify(problem: &Problem, method: Method, opts: &SoscOptions) -> Result<SoscVerdict> {
    verify_with_basis(problem, method, None, opts)
}

/// As [`verify`], with a caller-supplied basis of `null(A)` for the
/// Cholesky and diagonalization tests. The other methods ignore it.
pub fn verify_with_basis(
    problem: &Problem,
    method: Method,
    basis: Option<&NullSpaceBasis>,
    opts: &SoscOptions,
) -> Result<SoscVerdict> {
    let clock = Instant::now();
    let op = &problem.hessian;
    let a = &problem.jacobian;
    let products = op.products();
    let projector = Projector::from_jacobian(a.matrix(), opts.tol_rank)?;

    let mut verdict = match method {
        Method::Cholesky | Method::Diagonalization => {
            let owned;
            let w = match basis {
                Some(b) => b,
                None if opts.basis == BasisMethod::QrOfAT => {
                    owned = NullSpaceBasis::from_matrix(projector.basis(), true);
                    &owned
                }
                None => {
                    owned = null_space_basis(a, opts.basis, opts.tol_rank)?;
                    &owned
                }
            };
            if method == Method::Cholesky {
                implicit_cholesky(op, w, opts)?
            } else {
                diagonalization(op, w, opts)?
            }
        }
        Method::Pcg => continued_pcg(op, projector, opts)?,
        Method::Bordered => bordered_hessian_test(&op.materialize()?, a, opts)?,
        Method::Inertia => inertia_test(&op.materialize()?, a, opts)?,
    };

    if let Some(d) = verdict.direction() {
        let scale = d.norm() * a.frobenius();
        let residual = (a.matrix() * d).amax();
        if residual > opts.tol_feas * scale {
            verdict.outcome = Outcome::Inconclusive(Inconclusive::Infeasible {
                residual: residual / scale,
            });
        }
    }
    verdict.diagnostics.operator_products = op.products() - products;
    verdict.diagnostics.wall_time = clock.elapsed();
    Ok(verdict)
}

/// Verdict recorded when verification could not start (e.g. LICQ fails).
pub(crate) fn inconclusive(method: Method, why: Inconclusive) -> SoscVerdict {
    SoscVerdict::new(method, Outcome::Inconclusive(why))
}
