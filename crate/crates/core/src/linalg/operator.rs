//! Hessian-of-the-Lagrangian operators.
//!
//! Every verifier consumes the Hessian only through [`HessianOperator::apply`]
//! (or the block form). The operator counts its applications so the
//! Hessian-free methods can be held to their product budget.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default relative finite-difference step.
pub const DEFAULT_FD_SIGMA: f64 = 1e-6;

/// `s ↦ H s`.
pub type ProductFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;

/// `(x, λ) ↦ ∇ₓL(x, λ)`. Must be reentrant.
pub type LagrangianGradientFn = dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync;

enum Kind {
    Dense(DMatrix<f64>),
    Callback(Arc<ProductFn>),
    FiniteDifference {
        gradient: Arc<LagrangianGradientFn>,
        x: DVector<f64>,
        lambda: DVector<f64>,
        step: f64,
        base: DVector<f64>,
    },
}

pub struct HessianOperator {
    kind: Kind,
    dim: usize,
    products: AtomicUsize,
}

impl fmt::Debug for HessianOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            Kind::Dense(_) => "dense",
            Kind::Callback(_) => "callback",
            Kind::FiniteDifference { .. } => "finite-difference",
        };
        f.debug_struct("HessianOperator")
            .field("kind", &kind)
            .field("dim", &self.dim)
            .field("products", &self.products())
            .finish()
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidProblem(format!(
            "operator dimension must be at least 2, got {dim}"
        )));
    }
    Ok(())
}

impl HessianOperator {
    /// Wraps an explicit matrix, storing its symmetric part `(H + Hᵀ)/2`.
    pub fn dense(h: DMatrix<f64>) -> Result<Self> {
        if h.nrows() != h.ncols() {
            return Err(Error::DimensionMismatch {
                expected: h.nrows(),
                found: h.ncols(),
            });
        }
        let dim = h.nrows();
        check_dim(dim)?;
        let sym = (&h + h.transpose()) * 0.5;
        Ok(Self {
            kind: Kind::Dense(sym),
            dim,
            products: AtomicUsize::new(0),
        })
    }

    pub fn callback<F>(dim: usize, f: F) -> Result<Self>
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        check_dim(dim)?;
        Ok(Self {
            kind: Kind::Callback(Arc::new(f)),
            dim,
            products: AtomicUsize::new(0),
        })
    }

    /// Directional finite differences of the Lagrangian gradient at `(x, λ)`.
    ///
    /// Each product evaluates the gradient once at `x + h·s/‖s‖` with
    /// `h = sigma·(1 + ‖x‖∞)`; the gradient at `x` itself is evaluated once
    /// here and cached.
    pub fn finite_difference(
        gradient: Arc<LagrangianGradientFn>,
        x: DVector<f64>,
        lambda: DVector<f64>,
        sigma: f64,
    ) -> Result<Self> {
        let dim = x.len();
        check_dim(dim)?;
        if !(sigma > 0.0) {
            return Err(Error::InvalidProblem(format!(
                "finite-difference step must be positive, got {sigma}"
            )));
        }
        let base = gradient(&x, &lambda);
        if base.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: base.len(),
            });
        }
        let step = sigma * (1.0 + x.amax());
        Ok(Self {
            kind: Kind::FiniteDifference {
                gradient,
                x,
                lambda,
                step,
                base,
            },
            dim,
            products: AtomicUsize::new(0),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of operator applications so far (a block apply of `k` columns counts `k`).
    pub fn products(&self) -> usize {
        self.products.load(Ordering::Relaxed)
    }

    pub fn reset_products(&self) {
        self.products.store(0, Ordering::Relaxed);
    }

    /// The stored matrix when the operator is explicit.
    pub fn explicit(&self) -> Option<&DMatrix<f64>> {
        match &self.kind {
            Kind::Dense(h) => Some(h),
            _ => None,
        }
    }

    pub fn is_finite_difference(&self) -> bool {
        matches!(self.kind, Kind::FiniteDifference { .. })
    }

    pub fn apply(&self, s: &DVector<f64>) -> Result<DVector<f64>> {
        if s.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: s.len(),
            });
        }
        let out = match &self.kind {
            Kind::Dense(h) => h * s,
            Kind::Callback(f) => {
                let out = f(s);
                if out.len() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        found: out.len(),
                    });
                }
                out
            }
            Kind::FiniteDifference {
                gradient,
                x,
                lambda,
                step,
                base,
            } => {
                let norm = s.norm();
                if norm == 0.0 {
                    return Err(Error::ZeroDirection);
                }
                let shifted = x + s * (*step / norm);
                let g = gradient(&shifted, lambda);
                (g - base) * (norm / *step)
            }
        };
        self.products.fetch_add(1, Ordering::Relaxed);
        Ok(out)
    }

    /// `H W` for an `N × k` block, counting `k` products.
    pub fn apply_block(&self, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if w.nrows() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: w.nrows(),
            });
        }
        match &self.kind {
            Kind::Dense(h) => {
                self.products.fetch_add(w.ncols(), Ordering::Relaxed);
                Ok(h * w)
            }
            _ => {
                let mut out = DMatrix::zeros(self.dim, w.ncols());
                for (j, col) in w.column_iter().enumerate() {
                    let v = self.apply(&col.into_owned())?;
                    out.set_column(j, &v);
                }
                Ok(out)
            }
        }
    }

    /// An explicit symmetric matrix for the tests that need one.
    ///
    /// Dense operators are cloned without counting products; the others are
    /// applied to each unit vector (`N` products) and symmetrized.
    pub fn materialize(&self) -> Result<DMatrix<f64>> {
        if let Kind::Dense(h) = &self.kind {
            return Ok(h.clone());
        }
        let h = self.apply_block(&DMatrix::identity(self.dim, self.dim))?;
        Ok((&h + h.transpose()) * 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quadratic_gradient() -> Arc<LagrangianGradientFn> {
        Arc::new(|x: &DVector<f64>, _l: &DVector<f64>| x.clone())
    }

    #[test]
    fn identity_product() {
        let op = HessianOperator::dense(DMatrix::identity(3, 3)).unwrap();
        let s = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(op.apply(&s).unwrap(), s);
        assert_eq!(op.products(), 1);
    }

    #[test]
    fn dense_is_symmetrized() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let op = HessianOperator::dense(h).unwrap();
        let stored = op.explicit().unwrap();
        assert_eq!(stored[(0, 1)], 1.0);
        assert_eq!(stored[(1, 0)], 1.0);
    }

    #[test]
    fn fd_exact_on_linear_gradient() {
        let x = DVector::from_vec(vec![0.3, -1.2, 2.0]);
        let op = HessianOperator::finite_difference(
            quadratic_gradient(),
            x,
            DVector::zeros(0),
            1e-6,
        )
        .unwrap();
        let s = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        let hs = op.apply(&s).unwrap();
        assert!((hs - &s).amax() < 1e-9);
    }

    #[test]
    fn fd_rejects_zero_direction() {
        let op = HessianOperator::finite_difference(
            quadratic_gradient(),
            DVector::zeros(3),
            DVector::zeros(0),
            1e-6,
        )
        .unwrap();
        assert!(matches!(
            op.apply(&DVector::zeros(3)),
            Err(Error::ZeroDirection)
        ));
        assert_eq!(op.products(), 0);
    }

    #[test]
    fn dimension_checks() {
        let op = HessianOperator::dense(DMatrix::identity(3, 3)).unwrap();
        assert!(matches!(
            op.apply(&DVector::zeros(2)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(HessianOperator::dense(DMatrix::identity(1, 1)).is_err());
    }

    #[test]
    fn block_apply_counts_columns() {
        let op = HessianOperator::callback(4, |s| s * 2.0).unwrap();
        let w = DMatrix::from_fn(4, 3, |i, j| (i + j) as f64);
        let hw = op.apply_block(&w).unwrap();
        assert_eq!(hw, &w * 2.0);
        assert_eq!(op.products(), 3);
    }

    #[test]
    fn materialize_fd_matches_quadratic() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, -1.0, 0.0, -1.0, 4.0]);
        let a2 = a.clone();
        let grad: Arc<LagrangianGradientFn> = Arc::new(move |x, _| &a2 * x);
        let op = HessianOperator::finite_difference(
            grad,
            DVector::from_vec(vec![1.0, 1.0, 1.0]),
            DVector::zeros(0),
            1e-6,
        )
        .unwrap();
        let h = op.materialize().unwrap();
        assert!((h - a).amax() < 1e-7);
        assert_eq!(op.products(), 3);
    }

    proptest! {
        #[test]
        fn dense_is_homogeneous(
            entries in proptest::collection::vec(-10.0..10.0f64, 16),
            s in proptest::collection::vec(-5.0..5.0f64, 4),
            alpha in -3.0..3.0f64,
        ) {
            let op = HessianOperator::dense(DMatrix::from_vec(4, 4, entries)).unwrap();
            let s = DVector::from_vec(s);
            let lhs = op.apply(&(&s * alpha)).unwrap();
            let rhs = op.apply(&s).unwrap() * alpha;
            prop_assert!((lhs - &rhs).amax() <= 1e-12 * (1.0 + rhs.amax()));
        }

        #[test]
        fn fd_is_homogeneous_on_quadratics(
            entries in proptest::collection::vec(-2.0..2.0f64, 9),
            x in proptest::collection::vec(-2.0..2.0f64, 3),
            s in proptest::collection::vec(-1.0..1.0f64, 3),
            alpha in 0.1..4.0f64,
        ) {
            let m = DMatrix::from_vec(3, 3, entries);
            let sym = &m + m.transpose();
            let grad: Arc<LagrangianGradientFn> = Arc::new(move |x, _| &sym * x);
            let sigma = 1e-6;
            let op = HessianOperator::finite_difference(
                grad, DVector::from_vec(x), DVector::zeros(0), sigma).unwrap();
            let s = DVector::from_vec(s);
            prop_assume!(s.norm() > 1e-3);
            let lhs = op.apply(&(&s * alpha)).unwrap();
            let rhs = op.apply(&s).unwrap() * alpha;
            let scale = rhs.norm().max(s.norm() * alpha);
            prop_assert!((lhs - &rhs).norm() <= 10.0 * sigma * scale);
        }
    }
}
