//! `K` points on the unit sphere minimizing `Σ_{k<m} 1/‖x_k − x_m‖₂`.
//!
//! Variables are stacked as `x = (x₁, …, x_K) ∈ ℝ³ᴷ`. The plain variant
//! constrains `‖x_k‖² = 1`; the orthogonally invariant one writes the sphere
//! constraints as `‖x_k‖²/2 = 1/2` and pins the frame with
//! `x_{1,2} = x_{1,3} = x_{2,3} = 0`, leaving `M = K + 3` constraints.
//! Multipliers enter through `L = f − λᵀc`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{Problem, Provenance};
use crate::error::{Error, Result};
use crate::linalg::{ConstraintJacobian, HessianOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThomsonVariant {
    Plain,
    OrthogonallyInvariant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThomsonInstance {
    pub k: usize,
    pub variant: ThomsonVariant,
}

/// Frame constraints as indices into the stacked vector.
const FRAME: [usize; 3] = [1, 2, 5];

fn point(x: &DVector<f64>, k: usize) -> Vector3<f64> {
    Vector3::new(x[3 * k], x[3 * k + 1], x[3 * k + 2])
}

impl ThomsonInstance {
    pub fn new(k: usize, variant: ThomsonVariant) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidProblem(format!("Thomson problem needs K >= 2, got {k}")));
        }
        Ok(Self { k, variant })
    }

    pub fn invariant(k: usize) -> Result<Self> {
        Self::new(k, ThomsonVariant::OrthogonallyInvariant)
    }

    pub fn n(&self) -> usize {
        3 * self.k
    }

    pub fn m(&self) -> usize {
        match self.variant {
            ThomsonVariant::Plain => self.k,
            ThomsonVariant::OrthogonallyInvariant => self.k + 3,
        }
    }

    pub fn null_dim(&self) -> usize {
        self.n() - self.m()
    }

    fn check(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: x.len(),
            });
        }
        for i in 0..self.k {
            for j in i + 1..self.k {
                if (point(x, i) - point(x, j)).norm() == 0.0 {
                    return Err(Error::CoincidentPoints(i, j));
                }
            }
        }
        Ok(())
    }

    pub fn energy(&self, x: &DVector<f64>) -> Result<f64> {
        self.check(x)?;
        Ok(self.energy_unchecked(x))
    }

    fn energy_unchecked(&self, x: &DVector<f64>) -> f64 {
        let mut f = 0.0;
        for i in 0..self.k {
            for j in i + 1..self.k {
                f += 1.0 / (point(x, i) - point(x, j)).norm();
            }
        }
        f
    }

    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(x)?;
        Ok(self.gradient_unchecked(x))
    }

    fn gradient_unchecked(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.n());
        for i in 0..self.k {
            for j in i + 1..self.k {
                let d = point(x, i) - point(x, j);
                let r = d.norm();
                let gi = -d / (r * r * r);
                for c in 0..3 {
                    g[3 * i + c] += gi[c];
                    g[3 * j + c] -= gi[c];
                }
            }
        }
        g
    }

    /// `∇²f`, assembled from the pairwise blocks `−I/r³ + 3ddᵀ/r⁵`.
    pub fn energy_hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check(x)?;
        let mut h = DMatrix::zeros(self.n(), self.n());
        for i in 0..self.k {
            for j in i + 1..self.k {
                let d = point(x, i) - point(x, j);
                let r = d.norm();
                let b: Matrix3<f64> = -Matrix3::identity() / r.powi(3) + d * d.transpose() * (3.0 / r.powi(5));
                for (p, q, s) in [(i, i, 1.0), (j, j, 1.0), (i, j, -1.0), (j, i, -1.0)] {
                    let mut view = h.view_mut((3 * p, 3 * q), (3, 3));
                    view += b * s;
                }
            }
        }
        Ok(h)
    }

    pub fn constraints(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut c = DVector::zeros(self.m());
        for k in 0..self.k {
            let sq = point(x, k).norm_squared();
            c[k] = match self.variant {
                ThomsonVariant::Plain => sq - 1.0,
                ThomsonVariant::OrthogonallyInvariant => 0.5 * sq - 0.5,
            };
        }
        if self.variant == ThomsonVariant::OrthogonallyInvariant {
            for (r, &idx) in FRAME.iter().enumerate() {
                c[self.k + r] = x[idx];
            }
        }
        c
    }

    fn sphere_curvature(&self) -> f64 {
        match self.variant {
            ThomsonVariant::Plain => 2.0,
            ThomsonVariant::OrthogonallyInvariant => 1.0,
        }
    }

    /// Rows are constraint gradients.
    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.m(), self.n());
        let s = self.sphere_curvature();
        for k in 0..self.k {
            for c in 0..3 {
                a[(k, 3 * k + c)] = s * x[3 * k + c];
            }
        }
        if self.variant == ThomsonVariant::OrthogonallyInvariant {
            for (r, &idx) in FRAME.iter().enumerate() {
                a[(self.k + r, idx)] = 1.0;
            }
        }
        a
    }

    /// `∇ₓL = ∇f − Aᵀλ`.
    pub fn lagrangian_gradient(&self, x: &DVector<f64>, lambda: &DVector<f64>) -> DVector<f64> {
        self.gradient_unchecked(x) - self.jacobian(x).transpose() * lambda
    }

    /// `∇²ₓL = ∇²f − Σ_k λ_k ∇²c_k`; only the sphere constraints are curved.
    pub fn lagrangian_hessian(&self, x: &DVector<f64>, lambda: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mut h = self.energy_hessian(x)?;
        let s = self.sphere_curvature();
        for k in 0..self.k {
            for c in 0..3 {
                h[(3 * k + c, 3 * k + c)] -= s * lambda[k];
            }
        }
        Ok(h)
    }

    fn base_problem(&self, hessian: HessianOperator, x: &DVector<f64>, lambda: &DVector<f64>) -> Result<Problem> {
        let mut p = Problem::new(hessian, ConstraintJacobian::new(self.jacobian(x))?);
        p.x = Some(x.clone());
        p.lambda = Some(lambda.clone());
        p.provenance = Provenance::Thomson {
            k: self.k,
            variant: self.variant,
        };
        Ok(p)
    }

    fn check_lambda(&self, lambda: &DVector<f64>) -> Result<()> {
        if lambda.len() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                found: lambda.len(),
            });
        }
        Ok(())
    }

    /// Problem at `(x, λ)` whose Hessian products are directional finite
    /// differences of [`Self::lagrangian_gradient`].
    pub fn finite_difference_problem(&self, x: &DVector<f64>, lambda: &DVector<f64>, sigma: f64) -> Result<Problem> {
        self.check(x)?;
        self.check_lambda(lambda)?;
        let inst = *self;
        let op = HessianOperator::finite_difference(
            Arc::new(move |x: &DVector<f64>, l: &DVector<f64>| inst.lagrangian_gradient(x, l)),
            x.clone(),
            lambda.clone(),
            sigma,
        )?;
        self.base_problem(op, x, lambda)
    }

    /// Problem at `(x, λ)` with the analytic Hessian.
    pub fn analytic_problem(&self, x: &DVector<f64>, lambda: &DVector<f64>) -> Result<Problem> {
        self.check_lambda(lambda)?;
        let h = self.lagrangian_hessian(x, lambda)?;
        self.base_problem(HessianOperator::dense(h)?, x, lambda)
    }
}
