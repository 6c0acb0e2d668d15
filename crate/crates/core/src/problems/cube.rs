//! `f(x) = x³` minimized over ℝ: `0` satisfies the first- and second-order
//! necessary conditions but is not a minimizer.
//!
//! The verifiers need `N ≥ 2` and `M ≥ 1`, so the scalar problem is embedded
//! as `f(x, y) = x³ + y²` subject to `y = 0`; the feasible direction is the
//! `x` axis and the reduced Hessian is `f″(x) = 6x`.

use nalgebra::DMatrix;

use super::{Problem, Provenance};
use crate::error::Result;
use crate::linalg::{ConstraintJacobian, HessianOperator};

/// Newton (unconstrained SQP) iterates `x − f′/f″ = x/2`: `x₀/2ⁱ`, `i = 0..=n`.
pub fn cube_sqp_iterates(x0: f64, n: usize) -> Vec<f64> {
    std::iter::successors(Some(x0), |x| Some(x - 3.0 * x * x / (6.0 * x)))
        .take(n + 1)
        .collect()
}

/// The embedded problem at `(x, 0)`, with multiplier `0`.
pub fn cube_problem(x: f64) -> Result<Problem> {
    let h = DMatrix::from_row_slice(2, 2, &[6.0 * x, 0.0, 0.0, 2.0]);
    let a = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
    let mut p = Problem::new(HessianOperator::dense(h)?, ConstraintJacobian::new(a)?);
    p.x = Some(nalgebra::DVector::from_row_slice(&[x, 0.0]));
    p.lambda = Some(nalgebra::DVector::zeros(1));
    p.truth = Some(x > 0.0);
    p.provenance = Provenance::Named {
        name: "cube".into(),
    };
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halving_sequence() {
        assert_eq!(cube_sqp_iterates(1.0, 3), vec![1.0, 0.5, 0.25, 0.125]);
        let doubled: Vec<f64> = cube_sqp_iterates(1.0, 5).iter().map(|x| 2.0 * x).collect();
        assert_eq!(cube_sqp_iterates(2.0, 5), doubled);
    }
}
