//! Tests of the second-order sufficient condition (SOSC) at first-order
//! points of equality-constrained problems.
//!
//! Five verifiers share one interface ([`sosc::verify`]):
//!
//! | method | Hessian-free | needs a basis | negative-curvature direction |
//! |--------|--------------|---------------|------------------------------|
//! | implicit Cholesky | yes | yes | yes (back-substitution) |
//! | oblique diagonalization | yes | yes | yes (the failing vector) |
//! | continued projected CG | yes | no | yes (the failing search direction) |
//! | bordered Hessian minors | no | no | no |
//! | KKT inertia | no | no | no |
//!
//! The [`problems`] module builds random instances whose answer is known in
//! closed form, the Thomson point-energy problem, and the near-singular KKT
//! construction used to study round-off. [`harness`] runs randomized
//! campaigns over those instances, in parallel when the `parallel` feature
//! is enabled.

pub mod error;
pub mod harness;
pub mod linalg;
pub mod problems;
pub mod sosc;
pub mod stationary;

pub use error::{Error, Result};
pub use linalg::{
    BasisMethod, ConstraintJacobian, HessianOperator, Inertia, NullSpaceBasis, Projector,
};
pub use problems::{Conditioning, GeneratorSpec, Problem, TestProblem};
pub use sosc::{Method, Outcome, SoscOptions, SoscVerdict, Status, Variant};
