//! The two tests that need `H` explicitly: signs of the bordered Hessian's
//! trailing leading minors, and the inertia of the KKT matrix.

use nalgebra::DMatrix;

use super::{Inconclusive, Method, NegativeCurvature, Outcome, SoscOptions, SoscVerdict};
use crate::error::{Error, Result};
use crate::linalg::{ldl_factor, pivoted_qr, BorderedLu, ConstraintJacobian, Inertia, Projector};
use crate::problems::{build_bordered, build_kkt};

/// Variable order putting `M` well-conditioned pivot columns of `A` first.
///
/// The leading `2M × 2M` block of `B` has determinant `(−1)^M det(A₁)²`
/// for the leading `M × M` block `A₁` of `A`; it must be nonsingular for
/// the minor sequence to start.
pub fn variable_order(a: &ConstraintJacobian, tol_rank: f64) -> Result<Vec<usize>> {
    pivoted_qr(a, tol_rank).map(|(_, perm)| perm)
}

fn check_hessian(h: &DMatrix<f64>, a: &ConstraintJacobian) -> Result<()> {
    if h.nrows() != a.cols() || h.ncols() != a.cols() {
        return Err(Error::DimensionMismatch {
            expected: a.cols(),
            found: h.nrows(),
        });
    }
    Ok(())
}

/// Walks `sign det B_i`, `i = 1..L`, through bordered LU updates, stopping
/// early when `visit` returns `false`. `B_i` is the leading `(2M+i)` block
/// of `B` after permuting the variables by `order`.
fn walk_minors(
    h: &DMatrix<f64>,
    a: &ConstraintJacobian,
    order: &[usize],
    tol_pivot: f64,
    mut visit: impl FnMut(usize, i8) -> bool,
) -> Result<()> {
    check_hessian(h, a)?;
    let (m, n) = (a.rows(), a.cols());
    if order.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: order.len(),
        });
    }
    let ap = DMatrix::from_fn(m, n, |i, j| a.matrix()[(i, order[j])]);
    let hp = DMatrix::from_fn(n, n, |i, j| h[(order[i], order[j])]);
    let b = build_bordered(&hp, &ap)?;
    let seed = b.view((0, 0), (2 * m, 2 * m)).into_owned();
    let mut lu = BorderedLu::factor(&seed, m + n, tol_pivot).map_err(|e| match e {
        Error::SingularMinor { .. } => Error::SingularMinor { minor: 0 },
        e => e,
    })?;
    for k in 2 * m..m + n {
        let col: Vec<f64> = (0..k).map(|i| b[(i, k)]).collect();
        let sign = lu.update(&col, b[(k, k)]).map_err(|e| match e {
            Error::SingularMinor { .. } => Error::SingularMinor { minor: k + 1 - 2 * m },
            e => e,
        })?;
        if !visit(k + 1 - 2 * m, sign) {
            break;
        }
    }
    Ok(())
}

/// `sign det B_i` for every `i = 1..L` (no early exit).
pub fn bordered_minor_signs(
    h: &DMatrix<f64>,
    a: &ConstraintJacobian,
    order: &[usize],
    tol_pivot: f64,
) -> Result<Vec<i8>> {
    let mut signs = Vec::with_capacity(a.null_dim());
    walk_minors(h, a, order, tol_pivot, |_, s| {
        signs.push(s);
        true
    })?;
    Ok(signs)
}

pub fn bordered_hessian_test(
    h: &DMatrix<f64>,
    a: &ConstraintJacobian,
    opts: &SoscOptions,
) -> Result<SoscVerdict> {
    // same LICQ guard as the other tests; the pivoted QR only orders columns
    Projector::from_jacobian(a.matrix(), opts.tol_rank)?;
    let order = variable_order(a, 0.0)?;
    let expected: i8 = if a.rows() % 2 == 0 { 1 } else { -1 };
    let mut minors = 0;
    let mut violation = None;
    let walked = walk_minors(h, a, &order, opts.tol_pivot, |i, sign| {
        minors = i;
        if sign != expected {
            violation = Some(i);
        }
        violation.is_none()
    });
    let outcome = match walked {
        Ok(()) => match violation {
            None => Outcome::Holds,
            Some(i) => Outcome::Fails(NegativeCurvature {
                step: Some(i),
                ..Default::default()
            }),
        },
        Err(Error::SingularMinor { minor }) => {
            minors = minor;
            Outcome::Inconclusive(Inconclusive::SingularMinor { minor })
        }
        Err(e) => return Err(e),
    };
    let mut verdict = SoscVerdict::new(Method::Bordered, outcome);
    verdict.diagnostics.minors = minors;
    Ok(verdict)
}

pub fn inertia_test(h: &DMatrix<f64>, a: &ConstraintJacobian, _opts: &SoscOptions) -> Result<SoscVerdict> {
    check_hessian(h, a)?;
    let k = build_kkt(h, a.matrix())?;
    let inertia = ldl_factor(&k).inertia;
    let outcome = if inertia == Inertia::new(a.cols(), a.rows(), 0) {
        Outcome::Holds
    } else {
        Outcome::Fails(NegativeCurvature::default())
    };
    let mut verdict = SoscVerdict::new(Method::Inertia, outcome);
    verdict.diagnostics.inertia = Some(inertia);
    Ok(verdict)
}
