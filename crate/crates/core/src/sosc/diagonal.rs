//! Oblique (H-conjugate) Gram–Schmidt diagonalization of `WᵀHW`.
//!
//! Builds `V = W S` with `VᵀHV` diagonal, one product `H vₙ` per step. A
//! nonpositive `αₙ = vₙᵀHvₙ` rejects, and `vₙ` itself is the direction.

use nalgebra::DMatrix;

use super::cholesky::column_pair;
use super::{classify, Curvature, Inconclusive, Method, NegativeCurvature, Outcome, SoscOptions, SoscVerdict, Variant};
use crate::error::{Error, Result};
use crate::linalg::{HessianOperator, NullSpaceBasis};

pub fn diagonalization(
    op: &HessianOperator,
    basis: &NullSpaceBasis,
    opts: &SoscOptions,
) -> Result<SoscVerdict> {
    let w = basis.matrix();
    if w.nrows() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: w.nrows(),
        });
    }
    let start = op.products();
    let l = w.ncols();
    let mut v = w.clone();
    let mut z_store = match opts.variant {
        Variant::Classical => DMatrix::zeros(w.nrows(), l),
        Variant::Modified => DMatrix::zeros(0, 0),
    };
    let mut alphas = Vec::with_capacity(l);
    let mut outcome = Outcome::Holds;

    for n in 0..l {
        if opts.variant == Variant::Classical {
            for m in 0..n {
                let beta: f64 = z_store.column(m).dot(&v.column(n)) / alphas[m];
                let (vm, mut vn) = column_pair(&mut v, m, n);
                vn.axpy(-beta, &vm, 1.0);
            }
        }
        let vn = v.column(n).into_owned();
        let z = op.apply(&vn)?;
        let alpha = vn.dot(&z);
        match classify(alpha, vn.norm() * z.norm(), opts.tol_alpha) {
            Curvature::Positive => {}
            Curvature::Negative => {
                outcome = Outcome::Fails(NegativeCurvature {
                    direction: Some(vn),
                    curvature: Some(alpha),
                    step: Some(n + 1),
                });
                break;
            }
            Curvature::Boundary => {
                outcome = Outcome::Inconclusive(Inconclusive::SemiDefiniteBoundary {
                    step: n + 1,
                    value: alpha,
                });
                break;
            }
        }
        alphas.push(alpha);
        match opts.variant {
            Variant::Classical => z_store.set_column(n, &z),
            Variant::Modified => {
                for m in n + 1..l {
                    let beta = w.column(m).dot(&z) / alpha;
                    v.column_mut(m).axpy(-beta, &vn, 1.0);
                }
            }
        }
    }
    let mut verdict = SoscVerdict::new(Method::Diagonalization, outcome);
    verdict.diagnostics.operator_products = op.products() - start;
    Ok(verdict)
}
