use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::householder::{HouseholderQr, Projector};
use crate::error::{Error, Result};

/// Constraint gradients as rows, `M × N` with `1 ≤ M < N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintJacobian {
    a: DMatrix<f64>,
}

impl ConstraintJacobian {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        let (m, n) = a.shape();
        if m == 0 || m >= n {
            return Err(Error::InvalidProblem(format!(
                "constraint Jacobian must have 1 <= M < N, got {m}x{n}"
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("non-finite Jacobian entry".into()));
        }
        Ok(Self { a })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    /// `L = N − M`, the dimension of the feasible subspace.
    pub fn null_dim(&self) -> usize {
        self.a.ncols() - self.a.nrows()
    }

    pub fn frobenius(&self) -> f64 {
        self.a.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum BasisMethod {
    SvdOfA,
    #[default]
    QrOfAT,
    QrOfA,
    LuOfA,
}

impl fmt::Display for BasisMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisMethod::SvdOfA => "svd",
            BasisMethod::QrOfAT => "qr-at",
            BasisMethod::QrOfA => "qr-a",
            BasisMethod::LuOfA => "lu-a",
        })
    }
}

impl FromStr for BasisMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "svd" => Ok(BasisMethod::SvdOfA),
            "qr-at" | "qrat" | "qr" => Ok(BasisMethod::QrOfAT),
            "qr-a" | "qra" => Ok(BasisMethod::QrOfA),
            "lu-a" | "lua" | "lu" => Ok(BasisMethod::LuOfA),
            other => Err(format!("unknown basis method '{other}'")),
        }
    }
}

/// `N × L` matrix whose columns span `null(A)`.
#[derive(Debug, Clone)]
pub struct NullSpaceBasis {
    w: DMatrix<f64>,
    method: BasisMethod,
    orthonormal: bool,
}

impl NullSpaceBasis {
    /// Wraps a caller-supplied basis (e.g. an exact one known by construction).
    pub fn from_matrix(w: DMatrix<f64>, orthonormal: bool) -> Self {
        Self {
            w,
            method: BasisMethod::QrOfAT,
            orthonormal,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.w
    }

    pub fn method(&self) -> BasisMethod {
        self.method
    }

    pub fn is_orthonormal(&self) -> bool {
        self.orthonormal
    }

    pub fn dim(&self) -> usize {
        self.w.ncols()
    }

    /// `‖A W‖_max / (‖A‖_F ‖W‖_F)`.
    pub fn residual(&self, a: &ConstraintJacobian) -> f64 {
        (a.matrix() * &self.w).amax() / (a.frobenius() * self.w.norm())
    }
}

/// Builds a basis of `null(A)`; fails with [`Error::RankDeficient`] when the
/// rows of `A` are dependent to within `tol_rank·‖A‖_F`.
pub fn null_space_basis(
    a: &ConstraintJacobian,
    method: BasisMethod,
    tol_rank: f64,
) -> Result<NullSpaceBasis> {
    let w = match method {
        BasisMethod::QrOfAT => Projector::from_jacobian(a.matrix(), tol_rank)?.basis(),
        BasisMethod::SvdOfA => svd_basis(a, tol_rank)?,
        BasisMethod::QrOfA => qr_of_a_basis(a, tol_rank)?,
        BasisMethod::LuOfA => lu_of_a_basis(a, tol_rank)?,
    };
    Ok(NullSpaceBasis {
        w,
        method,
        orthonormal: matches!(method, BasisMethod::SvdOfA | BasisMethod::QrOfAT),
    })
}

fn svd_basis(a: &ConstraintJacobian, tol_rank: f64) -> Result<DMatrix<f64>> {
    let (m, n) = a.matrix().shape();
    let threshold = tol_rank * a.frobenius();
    let svd = a.matrix().clone().svd(false, true);
    let (idx, smin) = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, s)| if s < acc.1 { (i, s) } else { acc });
    if !(smin > threshold) {
        return Err(Error::RankDeficient {
            column: idx,
            pivot: smin,
            threshold,
        });
    }
    let vt = svd.v_t.expect("right singular vectors requested");
    // complete the row space to an orthonormal basis of ℝᴺ
    let mut qr = HouseholderQr::new(n);
    for i in 0..m {
        let row: Vec<f64> = vt.row(i).iter().copied().collect();
        qr.push_column(&row, 0.0)?;
    }
    Ok(qr.complement_basis())
}

/// Solves `T x = b` in place for upper-triangular `T` (leading `m × m` block of `t`).
fn back_substitute(t: &DMatrix<f64>, m: usize, rhs: &mut DMatrix<f64>) {
    for col in 0..rhs.ncols() {
        for i in (0..m).rev() {
            let mut acc = rhs[(i, col)];
            for j in i + 1..m {
                acc -= t[(i, j)] * rhs[(j, col)];
            }
            rhs[(i, col)] = acc / t[(i, i)];
        }
    }
}

/// `W = Π [−T⁻¹S; I]` from `A Π ∼ [T S]` with `T` upper triangular.
fn assemble_triangular_basis(t: &DMatrix<f64>, perm: &[usize], m: usize) -> DMatrix<f64> {
    let n = t.ncols();
    let l = n - m;
    let mut top = -t.view((0, m), (m, l)).into_owned();
    back_substitute(t, m, &mut top);
    let mut w = DMatrix::zeros(n, l);
    for (row, &var) in perm.iter().enumerate() {
        for j in 0..l {
            w[(var, j)] = if row < m {
                top[(row, j)]
            } else if row - m == j {
                1.0
            } else {
                0.0
            };
        }
    }
    w
}

fn qr_of_a_basis(a: &ConstraintJacobian, tol_rank: f64) -> Result<DMatrix<f64>> {
    let (t, perm) = pivoted_qr(a, tol_rank)?;
    Ok(assemble_triangular_basis(&t, &perm, a.rows()))
}

/// Householder QR of `A Π` with column pivoting; returns the triangularized
/// matrix and `Π` as a list (column `k` of `A Π` is column `perm[k]` of `A`).
/// The first `M` entries of `perm` select a well-conditioned square block.
pub fn pivoted_qr(a: &ConstraintJacobian, tol_rank: f64) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let (m, n) = a.matrix().shape();
    let threshold = tol_rank * a.frobenius();
    let mut t = a.matrix().clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..m {
        // column pivoting on the remaining column norms
        let (p, best) = (k..n)
            .map(|j| (j, t.view((k, j), (m - k, 1)).norm()))
            .fold((k, -1.0), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
        if !(best > threshold) {
            return Err(Error::RankDeficient {
                column: k,
                pivot: best,
                threshold,
            });
        }
        t.swap_columns(k, p);
        perm.swap(k, p);
        // Householder reflector zeroing t[k+1.., k]
        let x: Vec<f64> = (k..m).map(|i| t[(i, k)]).collect();
        let alpha = if x[0] >= 0.0 { -best } else { best };
        let mut v = x;
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|e| e * e).sum();
        if vnorm2 > 0.0 {
            for j in k..n {
                let dot: f64 = (k..m).map(|i| v[i - k] * t[(i, j)]).sum();
                let s = 2.0 * dot / vnorm2;
                for i in k..m {
                    t[(i, j)] -= s * v[i - k];
                }
            }
        }
        for i in k + 1..m {
            t[(i, k)] = 0.0;
        }
    }
    Ok((t, perm))
}

fn lu_of_a_basis(a: &ConstraintJacobian, tol_rank: f64) -> Result<DMatrix<f64>> {
    let (m, n) = a.matrix().shape();
    let threshold = tol_rank * a.frobenius();
    let mut t = a.matrix().clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..m {
        let mut best = (k, k, -1.0);
        for j in k..n {
            for i in k..m {
                let v = t[(i, j)].abs();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        let (pr, pc, pivot) = best;
        if !(pivot > threshold) {
            return Err(Error::RankDeficient {
                column: k,
                pivot,
                threshold,
            });
        }
        t.swap_rows(k, pr);
        t.swap_columns(k, pc);
        perm.swap(k, pc);
        let d = t[(k, k)];
        for i in k + 1..m {
            let f = t[(i, k)] / d;
            if f != 0.0 {
                for j in k..n {
                    t[(i, j)] -= f * t[(k, j)];
                }
            }
            t[(i, k)] = 0.0;
        }
    }
    Ok(assemble_triangular_basis(&t, &perm, m))
}
