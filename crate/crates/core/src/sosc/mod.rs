//! The five SOSC verifiers.
//!
//! All of them decide whether `H` is positive definite on `C = null(A)`.
//! The Hessian-free ones ([`implicit_cholesky`], [`diagonalization`],
//! [`continued_pcg`]) touch `H` only through products and return a
//! feasible direction of negative curvature when they reject. The classical
//! ones ([`bordered_hessian_test`], [`inertia_test`]) need `H` explicitly and
//! return no direction.

mod cholesky;
mod classical;
mod diagonal;
mod pcg;
mod verify;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::linalg::{default_tol_rank, BasisMethod, Inertia};

pub use cholesky::{cholesky_negative_direction, implicit_cholesky, implicit_cholesky_traced, CholeskyTrace};
pub use classical::{bordered_hessian_test, bordered_minor_signs, inertia_test, variable_order};
pub use diagonal::diagonalization;
pub use pcg::{continued_pcg, continued_pcg_from, continued_pcg_traced, PcgSweep, PcgTrace};
pub use verify::{verify, verify_with_basis};
pub(crate) use verify::inconclusive;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    Cholesky,
    Diagonalization,
    Pcg,
    Bordered,
    Inertia,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Cholesky,
        Method::Diagonalization,
        Method::Pcg,
        Method::Bordered,
        Method::Inertia,
    ];

    pub fn is_hessian_free(self) -> bool {
        matches!(self, Method::Cholesky | Method::Diagonalization | Method::Pcg)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Cholesky => "cholesky",
            Method::Diagonalization => "diagonalization",
            Method::Pcg => "pcg",
            Method::Bordered => "bht",
            Method::Inertia => "inertia",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "chol" | "cholesky" => Ok(Method::Cholesky),
            "diag" | "diagonalization" | "diagonalisation" => Ok(Method::Diagonalization),
            "pcg" | "cg" => Ok(Method::Pcg),
            "bht" | "bordered" => Ok(Method::Bordered),
            "inertia" | "ldl" | "kkt" => Ok(Method::Inertia),
            other => Err(format!(
                "unknown method '{other}' (expected chol, diag, pcg, bht or inertia)"
            )),
        }
    }
}

/// Gram–Schmidt ordering for the Cholesky and diagonalization loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Variant {
    Classical,
    #[default]
    Modified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Holds,
    Fails,
    Error,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Holds => "holds",
            Status::Fails => "fails",
            Status::Error => "error",
        })
    }
}

/// Why a run neither verified nor refuted the condition.
#[derive(Debug, Clone, PartialEq)]
pub enum Inconclusive {
    /// A pivot/curvature value landed within `tol_alpha·scale` of zero.
    SemiDefiniteBoundary { step: usize, value: f64 },
    /// A bordered minor had a zero pivot.
    SingularMinor { minor: usize },
    /// The candidate direction did not have negative curvature when re-evaluated.
    VerificationFailed { curvature: f64 },
    /// The direction left the feasible subspace beyond `tol_feas`.
    Infeasible { residual: f64 },
    /// PCG could not draw a new start vector before conjugating `required` directions.
    SubspaceExhausted { conjugated: usize, required: usize },
    /// The constraint gradients are numerically dependent.
    RankDeficient,
    /// Verification stopped on an error before reaching a verdict.
    Aborted { reason: String },
}

impl fmt::Display for Inconclusive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Inconclusive::SemiDefiniteBoundary { step, value } => {
                write!(f, "semi-definite boundary at step {step} (value {value:.3e})")
            }
            Inconclusive::SingularMinor { minor } => write!(f, "singular minor {minor}"),
            Inconclusive::VerificationFailed { curvature } => {
                write!(f, "certificate re-evaluated to curvature {curvature:.3e}")
            }
            Inconclusive::Infeasible { residual } => {
                write!(f, "certificate infeasible (residual {residual:.3e})")
            }
            Inconclusive::SubspaceExhausted {
                conjugated,
                required,
            } => write!(f, "subspace exhausted after {conjugated} of {required} directions"),
            Inconclusive::RankDeficient => f.write_str("constraint gradients are dependent"),
            Inconclusive::Aborted { reason } => write!(f, "aborted: {reason}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NegativeCurvature {
    /// Feasible direction `d` (Hessian-free methods only).
    pub direction: Option<DVector<f64>>,
    /// `dᵀHd`, evaluated through the operator.
    pub curvature: Option<f64>,
    /// 1-based step (or bordered minor) at which the test failed.
    pub step: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Holds,
    Fails(NegativeCurvature),
    Inconclusive(Inconclusive),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub operator_products: usize,
    pub continuations: usize,
    pub minors: usize,
    pub inertia: Option<Inertia>,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoscVerdict {
    pub method: Method,
    pub outcome: Outcome,
    pub diagnostics: Diagnostics,
}

impl SoscVerdict {
    pub(crate) fn new(method: Method, outcome: Outcome) -> Self {
        Self {
            method,
            outcome,
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn status(&self) -> Status {
        match self.outcome {
            Outcome::Holds => Status::Holds,
            Outcome::Fails(_) => Status::Fails,
            Outcome::Inconclusive(_) => Status::Error,
        }
    }

    pub fn holds(&self) -> bool {
        self.status() == Status::Holds
    }

    pub fn certificate(&self) -> Option<&NegativeCurvature> {
        match &self.outcome {
            Outcome::Fails(nc) => Some(nc),
            _ => None,
        }
    }

    pub fn direction(&self) -> Option<&DVector<f64>> {
        self.certificate().and_then(|c| c.direction.as_ref())
    }

    pub fn fail_step(&self) -> Option<usize> {
        match &self.outcome {
            Outcome::Fails(nc) => nc.step,
            Outcome::Inconclusive(Inconclusive::SemiDefiniteBoundary { step, .. }) => Some(*step),
            Outcome::Inconclusive(Inconclusive::SingularMinor { minor }) => Some(*minor),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoscOptions {
    /// Curvature values within `tol_alpha·scale` of zero are inconclusive.
    pub tol_alpha: f64,
    /// Relative rank threshold for the constraint gradients and PCG appends.
    pub tol_rank: f64,
    /// PCG convergence threshold on `rᵀ proj(r)` (start residual normalized).
    pub tol_pcg: f64,
    /// Relative zero-pivot threshold in the bordered LU.
    pub tol_pivot: f64,
    /// Feasibility threshold for certificates: `‖Ad‖∞ ≤ tol_feas·‖d‖·‖A‖_F`.
    pub tol_feas: f64,
    pub variant: Variant,
    pub basis: BasisMethod,
    /// Seed for PCG start vectors.
    pub seed: u64,
    /// Draws per PCG (re)start before giving up on the subspace.
    pub max_draws: usize,
}

impl Default for SoscOptions {
    fn default() -> Self {
        Self {
            tol_alpha: 0.0,
            tol_rank: default_tol_rank(),
            tol_pcg: 1e-10,
            tol_pivot: 0.0,
            tol_feas: 1e-8,
            variant: Variant::Modified,
            basis: BasisMethod::QrOfAT,
            seed: 0,
            max_draws: 3,
        }
    }
}

pub(crate) enum Curvature {
    Positive,
    Negative,
    Boundary,
}

pub(crate) fn classify(value: f64, scale: f64, tol_alpha: f64) -> Curvature {
    let band = tol_alpha * scale;
    if value > band {
        Curvature::Positive
    } else if value < -band {
        Curvature::Negative
    } else {
        Curvature::Boundary
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("diag".parse::<Method>().unwrap(), Method::Diagonalization);
        assert!("newton".parse::<Method>().is_err());
    }

    #[test]
    fn strict_classification_by_default() {
        assert!(matches!(classify(1e-300, 1.0, 0.0), Curvature::Positive));
        assert!(matches!(classify(-1e-300, 1.0, 0.0), Curvature::Negative));
        assert!(matches!(classify(0.0, 1.0, 0.0), Curvature::Boundary));
        assert!(matches!(classify(1e-9, 1.0, 1e-8), Curvature::Boundary));
    }
}
