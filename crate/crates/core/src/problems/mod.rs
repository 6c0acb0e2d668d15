//! Problems to verify: the random generator with known answer, KKT and
//! bordered matrix builders, the near-singular KKT construction, the Thomson
//! problems and the `x³` saddle.

mod cube;
mod generator;
mod io;
mod kkt;
mod random;
mod thomson;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::linalg::{ConstraintJacobian, HessianOperator};

pub use cube::{cube_problem, cube_sqp_iterates};
pub use generator::{expected_truth_rate, generate, sample_truth_rate, Conditioning, GeneratorSpec, TestProblem};
pub use io::{read_problem, write_problem, ProblemDocument, SCHEMA};
pub use kkt::{build_bordered, build_kkt, near_rank_deficient_kkt, NearSingularKkt};
pub use random::{random_orthogonal, random_symmetric_with_eigs};
pub use thomson::{ThomsonInstance, ThomsonVariant};

/// Where a problem came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Generated(GeneratorSpec),
    Thomson { k: usize, variant: ThomsonVariant },
    Named { name: String },
}

impl Default for Provenance {
    fn default() -> Self {
        Provenance::Named {
            name: "user".into(),
        }
    }
}

/// A first-order point to be checked: the Hessian of the Lagrangian and the
/// constraint Jacobian there, plus optional context.
#[derive(Debug)]
pub struct Problem {
    pub hessian: HessianOperator,
    pub jacobian: ConstraintJacobian,
    pub x: Option<DVector<f64>>,
    pub lambda: Option<DVector<f64>>,
    /// Known answer, if any.
    pub truth: Option<bool>,
    pub provenance: Provenance,
}

impl Problem {
    pub fn new(hessian: HessianOperator, jacobian: ConstraintJacobian) -> Self {
        Self {
            hessian,
            jacobian,
            x: None,
            lambda: None,
            truth: None,
            provenance: Provenance::default(),
        }
    }

    pub fn n(&self) -> usize {
        self.jacobian.cols()
    }

    pub fn m(&self) -> usize {
        self.jacobian.rows()
    }

    pub fn null_dim(&self) -> usize {
        self.jacobian.null_dim()
    }
}
