//! Implicit Cholesky factorization of the reduced Hessian `WᵀHW`.
//!
//! With `V = HW`, the recurrence
//! `vₙ ← vₙ − (v_mᵀwₙ / α_m) v_m`, `αₙ = wₙᵀvₙ`
//! produces the pivots of the Cholesky factorization of `WᵀHW` without
//! forming it. The condition holds iff every `αₙ > 0`.

use nalgebra::{DMatrix, DVector};

use super::{classify, Curvature, Inconclusive, Method, NegativeCurvature, Outcome, SoscOptions, SoscVerdict, Variant};
use crate::error::{Error, Result};
use crate::linalg::{HessianOperator, NullSpaceBasis};

/// Pivots and the triangular array of inner products `v_mᵀw_k` (`m < k`),
/// stored as the factorization computes them.
#[derive(Debug, Clone, Default)]
pub struct CholeskyTrace {
    pub alphas: Vec<f64>,
    /// `inner[m][k − m − 1] = v_mᵀ w_k`.
    pub inner: Vec<Vec<f64>>,
}

impl CholeskyTrace {
    fn with_len(l: usize) -> Self {
        Self {
            alphas: Vec::with_capacity(l),
            inner: vec![Vec::new(); l],
        }
    }
}

/// Runs the implicit Cholesky test on basis `W`.
pub fn implicit_cholesky(
    op: &HessianOperator,
    basis: &NullSpaceBasis,
    opts: &SoscOptions,
) -> Result<SoscVerdict> {
    implicit_cholesky_traced(op, basis, opts).map(|(v, _)| v)
}

pub fn implicit_cholesky_traced(
    op: &HessianOperator,
    basis: &NullSpaceBasis,
    opts: &SoscOptions,
) -> Result<(SoscVerdict, CholeskyTrace)> {
    let w = basis.matrix();
    if w.nrows() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: w.nrows(),
        });
    }
    let start = op.products();
    let l = w.ncols();
    let mut v = op.apply_block(w)?;
    let mut trace = CholeskyTrace::with_len(l);
    let mut failed: Option<(usize, Curvature, f64)> = None;

    for n in 0..l {
        if opts.variant == Variant::Classical {
            for m in 0..n {
                let ip = v.column(m).dot(&w.column(n));
                trace.inner[m].push(ip);
                let beta = ip / trace.alphas[m];
                let (vm, mut vn) = column_pair(&mut v, m, n);
                vn.axpy(-beta, &vm, 1.0);
            }
        }
        let alpha = w.column(n).dot(&v.column(n));
        let scale = w.column(n).norm() * v.column(n).norm();
        trace.alphas.push(alpha);
        match classify(alpha, scale, opts.tol_alpha) {
            Curvature::Positive => {}
            c => {
                failed = Some((n, c, alpha));
                break;
            }
        }
        if opts.variant == Variant::Modified {
            for m in n + 1..l {
                let ip = v.column(n).dot(&w.column(m));
                trace.inner[n].push(ip);
                let beta = ip / alpha;
                let (vn, mut vm) = column_pair(&mut v, n, m);
                vm.axpy(-beta, &vn, 1.0);
            }
        }
    }

    let outcome = match failed {
        None => Outcome::Holds,
        Some((n, Curvature::Boundary, alpha)) => Outcome::Inconclusive(Inconclusive::SemiDefiniteBoundary {
            step: n + 1,
            value: alpha,
        }),
        Some((n, _, _)) => {
            let d = cholesky_negative_direction(&trace, w, n);
            let hd = op.apply(&d)?;
            let curvature = d.dot(&hd);
            if curvature < 0.0 {
                Outcome::Fails(NegativeCurvature {
                    direction: Some(d),
                    curvature: Some(curvature),
                    step: Some(n + 1),
                })
            } else {
                Outcome::Inconclusive(Inconclusive::VerificationFailed { curvature })
            }
        }
    };
    let mut verdict = SoscVerdict::new(Method::Cholesky, outcome);
    verdict.diagnostics.operator_products = op.products() - start;
    Ok((verdict, trace))
}

/// `d = Σ s_m w_m` with `s_n = 1` and
/// `s_m = −(Σ_{k=m+1..n} s_k v_mᵀw_k) / α_m`, so that `dᵀHd = αₙ`.
/// `n` is 0-based.
pub fn cholesky_negative_direction(trace: &CholeskyTrace, w: &DMatrix<f64>, n: usize) -> DVector<f64> {
    let mut s = vec![0.0; n + 1];
    s[n] = 1.0;
    for m in (0..n).rev() {
        let acc: f64 = (m + 1..=n).map(|k| s[k] * trace.inner[m][k - m - 1]).sum();
        s[m] = -acc / trace.alphas[m];
    }
    w.columns(0, n + 1) * DVector::from_vec(s)
}

/// Mutable view of column `b` alongside an owned copy of column `a`.
pub(super) fn column_pair(
    v: &mut DMatrix<f64>,
    a: usize,
    b: usize,
) -> (DVector<f64>, nalgebra::DVectorViewMut<'_, f64>) {
    let va = v.column(a).into_owned();
    (va, v.column_mut(b))
}
