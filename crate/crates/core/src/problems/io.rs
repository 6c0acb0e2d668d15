//! JSON problem documents. Matrices are flat row-major arrays.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Problem, Provenance, ThomsonInstance};
use crate::error::{Error, Result};
use crate::linalg::{ConstraintJacobian, HessianOperator, DEFAULT_FD_SIGMA};

pub const SCHEMA: &str = "dense-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDocument {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub schema: String,
    #[serde(rename = "H", default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<bool>,
    #[serde(default)]
    pub provenance: Provenance,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().iter().copied().collect()
}

fn invalid(msg: String) -> Error {
    Error::InvalidProblem(msg)
}

impl ProblemDocument {
    /// Document with an explicit Hessian.
    pub fn dense(h: &DMatrix<f64>, a: &DMatrix<f64>) -> Self {
        Self {
            n: a.ncols(),
            m: a.nrows(),
            schema: SCHEMA.into(),
            h: Some(row_major(h)),
            a: row_major(a),
            x: None,
            lambda: None,
            truth: None,
            provenance: Provenance::default(),
        }
    }

    /// Document for `problem`. The Hessian is written only when the operator
    /// holds it explicitly.
    pub fn from_problem(problem: &Problem) -> Self {
        Self {
            n: problem.n(),
            m: problem.m(),
            schema: SCHEMA.into(),
            h: problem.hessian.explicit().map(row_major),
            a: row_major(problem.jacobian.matrix()),
            x: problem.x.as_ref().map(|v| v.iter().copied().collect()),
            lambda: problem.lambda.as_ref().map(|v| v.iter().copied().collect()),
            truth: problem.truth,
            provenance: problem.provenance.clone(),
        }
    }

    fn matrix(&self, name: &str, data: &[f64], rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        if data.len() != rows * cols {
            return Err(invalid(format!(
                "{name} has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(rows, cols, data))
    }

    fn vector(&self, name: &str, data: &Option<Vec<f64>>, len: usize) -> Result<Option<DVector<f64>>> {
        match data {
            None => Ok(None),
            Some(v) if v.len() == len => Ok(Some(DVector::from_row_slice(v))),
            Some(v) => Err(invalid(format!("{name} has {} entries, expected {len}", v.len()))),
        }
    }

    /// Builds the problem. Without `H`, a Thomson provenance with `x` and
    /// `lambda` yields a finite-difference operator with step `fd_sigma`.
    pub fn into_problem(self, fd_sigma: Option<f64>) -> Result<Problem> {
        if self.schema != SCHEMA {
            return Err(invalid(format!("unsupported schema '{}'", self.schema)));
        }
        let a = ConstraintJacobian::new(self.matrix("A", &self.a, self.m, self.n)?)?;
        let x = self.vector("x", &self.x, self.n)?;
        let lambda = self.vector("lambda", &self.lambda, self.m)?;
        let hessian = match (&self.h, &self.provenance, &x, &lambda) {
            (Some(h), ..) => HessianOperator::dense(self.matrix("H", h, self.n, self.n)?)?,
            (None, Provenance::Thomson { k, variant }, Some(x), Some(lambda)) => {
                let inst = ThomsonInstance::new(*k, *variant)?;
                if inst.n() != self.n || inst.m() != self.m {
                    return Err(invalid(format!(
                        "Thomson K={k} has N={} M={}, document says N={} M={}",
                        inst.n(),
                        inst.m(),
                        self.n,
                        self.m
                    )));
                }
                return inst.finite_difference_problem(x, lambda, fd_sigma.unwrap_or(DEFAULT_FD_SIGMA)).map(|mut p| {
                    p.truth = self.truth;
                    p
                });
            }
            (None, ..) => {
                return Err(invalid(
                    "H is missing and the provenance does not name a Thomson instance with x and lambda".into(),
                ))
            }
        };
        let mut p = Problem::new(hessian, a);
        p.x = x;
        p.lambda = lambda;
        p.truth = self.truth;
        p.provenance = self.provenance;
        Ok(p)
    }
}

pub fn read_problem(path: impl AsRef<Path>, fd_sigma: Option<f64>) -> Result<Problem> {
    let text = fs::read_to_string(path)?;
    let doc: ProblemDocument = serde_json::from_str(&text)?;
    doc.into_problem(fd_sigma)
}

pub fn write_problem(path: impl AsRef<Path>, doc: &ProblemDocument) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(doc)?)?;
    Ok(())
}
