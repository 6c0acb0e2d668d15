//! Householder QR of a tall matrix that grows one column at a time.
//!
//! [`Projector`] keeps the QR factorization of `[Aᵀ q₁ … q_k]` and projects
//! onto the orthogonal complement of its range, i.e. onto
//! `null(A) ∩ span{q₁,…,q_k}⊥`. Appending a column costs one new reflector,
//! `O(N·(M+k))`, never a refactorization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative rank tolerance `√ε`.
pub fn default_tol_rank() -> f64 {
    f64::EPSILON.sqrt()
}

#[derive(Debug, Clone)]
struct Reflector {
    /// Essential part: entries `j+1..n` (entry `j` is an implicit 1).
    tail: Vec<f64>,
    tau: f64,
}

/// Compact Householder QR, `X = Q R`, of an `n × k` matrix built column by column.
#[derive(Debug, Clone)]
pub struct HouseholderQr {
    n: usize,
    reflectors: Vec<Reflector>,
    /// Column `j` of `R` has `j + 1` entries.
    r_columns: Vec<Vec<f64>>,
}

impl HouseholderQr {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            reflectors: Vec::new(),
            r_columns: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.reflectors.len()
    }

    /// `x ← Qᵀ x`.
    pub fn apply_qt(&self, x: &mut [f64]) {
        for (j, h) in self.reflectors.iter().enumerate() {
            reflect(j, h, x);
        }
    }

    /// `x ← Q x`.
    pub fn apply_q(&self, x: &mut [f64]) {
        for (j, h) in self.reflectors.iter().enumerate().rev() {
            reflect(j, h, x);
        }
    }

    /// Appends column `a`. Fails with [`Error::DependentColumn`] when the part
    /// of `a` outside the current span has norm `≤ threshold`.
    pub fn push_column(&mut self, a: &[f64], threshold: f64) -> Result<()> {
        assert_eq!(a.len(), self.n, "column length");
        let k = self.ncols();
        if k >= self.n {
            return Err(Error::DependentColumn { residual: 0.0 });
        }
        let mut y = a.to_vec();
        self.apply_qt(&mut y);
        let alpha = norm(&y[k..]);
        if !(alpha > threshold) {
            return Err(Error::DependentColumn { residual: alpha });
        }
        let head = y[k];
        let beta = if head >= 0.0 { -alpha } else { alpha };
        let denom = head - beta;
        let tail: Vec<f64> = y[k + 1..].iter().map(|v| v / denom).collect();
        let tau = (beta - head) / beta;
        let mut rcol = y[..k].to_vec();
        rcol.push(beta);
        self.reflectors.push(Reflector { tail, tau });
        self.r_columns.push(rcol);
        Ok(())
    }

    /// Diagonal entry `R[j][j]`.
    pub fn r_diag(&self, j: usize) -> f64 {
        self.r_columns[j][j]
    }

    /// Minimizes `‖X c − b‖₂` over `c`.
    pub fn least_squares(&self, b: &[f64]) -> Vec<f64> {
        let k = self.ncols();
        let mut y = b.to_vec();
        self.apply_qt(&mut y);
        let mut c = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = y[i];
            for j in i + 1..k {
                acc -= self.r_columns[j][i] * c[j];
            }
            c[i] = acc / self.r_columns[i][i];
        }
        c
    }

    /// Columns `k..n` of `Q`: an orthonormal basis of the complement of the range.
    pub fn complement_basis(&self) -> DMatrix<f64> {
        let k = self.ncols();
        let mut w = DMatrix::zeros(self.n, self.n - k);
        let mut e = vec![0.0; self.n];
        for (col, idx) in (k..self.n).enumerate() {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[idx] = 1.0;
            self.apply_q(&mut e);
            w.column_mut(col).copy_from_slice(&e);
        }
        w
    }

    /// The full `n × n` orthogonal factor.
    pub fn q_full(&self) -> DMatrix<f64> {
        let mut q = DMatrix::identity(self.n, self.n);
        for mut col in q.column_iter_mut() {
            self.apply_q(col.as_mut_slice());
        }
        q
    }
}

fn reflect(j: usize, h: &Reflector, x: &mut [f64]) {
    if h.tau == 0.0 {
        return;
    }
    let mut dot = x[j];
    for (v, xi) in h.tail.iter().zip(&x[j + 1..]) {
        dot += v * xi;
    }
    let s = h.tau * dot;
    x[j] -= s;
    for (v, xi) in h.tail.iter().zip(&mut x[j + 1..]) {
        *xi -= s * v;
    }
}

fn norm(x: &[f64]) -> f64 {
    // scaled to avoid overflow on large entries
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * x.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt()
}

/// Orthogonal projector onto `null(A) ∩ span{appended}⊥`.
#[derive(Debug, Clone)]
pub struct Projector {
    qr: HouseholderQr,
    constraints: usize,
    tol_rank: f64,
}

impl Projector {
    /// No constraints: projects onto `span{appended}⊥` only.
    pub fn unconstrained(n: usize) -> Self {
        Self {
            qr: HouseholderQr::new(n),
            constraints: 0,
            tol_rank: default_tol_rank(),
        }
    }

    /// Factors `Aᵀ`. A column whose residual falls to `tol_rank·‖A‖_F` or
    /// below means the constraint gradients are (numerically) dependent.
    pub fn from_jacobian(a: &DMatrix<f64>, tol_rank: f64) -> Result<Self> {
        let (m, n) = a.shape();
        let threshold = tol_rank * a.norm();
        let mut qr = HouseholderQr::new(n);
        for i in 0..m {
            let row: Vec<f64> = a.row(i).iter().copied().collect();
            qr.push_column(&row, threshold).map_err(|e| match e {
                Error::DependentColumn { residual } => Error::RankDeficient {
                    column: i,
                    pivot: residual,
                    threshold,
                },
                other => other,
            })?;
        }
        Ok(Self {
            qr,
            constraints: m,
            tol_rank,
        })
    }

    pub fn dim(&self) -> usize {
        self.qr.nrows()
    }

    pub fn constraint_count(&self) -> usize {
        self.constraints
    }

    /// Number of appended columns.
    pub fn appended(&self) -> usize {
        self.qr.ncols() - self.constraints
    }

    /// Dimension of the subspace projected onto.
    pub fn range_dim(&self) -> usize {
        self.qr.nrows() - self.qr.ncols()
    }

    pub fn tol_rank(&self) -> f64 {
        self.tol_rank
    }

    pub fn factorization(&self) -> &HouseholderQr {
        &self.qr
    }

    pub fn project(&self, r: &DVector<f64>) -> DVector<f64> {
        assert_eq!(r.len(), self.dim(), "projector dimension");
        let mut y: Vec<f64> = r.iter().copied().collect();
        self.qr.apply_qt(&mut y);
        y[..self.qr.ncols()].iter_mut().for_each(|v| *v = 0.0);
        self.qr.apply_q(&mut y);
        DVector::from_vec(y)
    }

    /// Restricts the range to vectors orthogonal to `q` as well.
    pub fn append_column(&mut self, q: &DVector<f64>) -> Result<()> {
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: q.len(),
            });
        }
        let threshold = self.tol_rank * q.norm();
        self.qr.push_column(q.as_slice(), threshold)
    }

    /// Orthonormal basis of the current range.
    pub fn basis(&self) -> DMatrix<f64> {
        self.qr.complement_basis()
    }
}
