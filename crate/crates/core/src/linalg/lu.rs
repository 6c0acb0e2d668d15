//! LU factorization that can be bordered by one symmetric row/column at a time.
//!
//! Given `P B = L U` for the current leading block `B`, appending
//! `[B b; bᵀ γ]` needs one forward solve with `L` for the new column of `U`,
//! one with `Uᵀ` for the new row of `L`, and the new pivot
//! `δ = γ − lᵀu`. The appended row is eliminated last and is never pivoted,
//! so the row permutation of the seed factorization stays valid and
//! `sign det` changes by `sign δ` only.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BorderedLu {
    /// Unit-lower `L` strictly below the diagonal, `U` on and above it.
    lu: DMatrix<f64>,
    size: usize,
    /// Row `i` of `P B` is row `perm[i]` of `B`.
    perm: Vec<usize>,
    sign: i8,
    tol_pivot: f64,
}

impl BorderedLu {
    /// Partial-pivoting LU of `seed`, with room to grow to `capacity`.
    ///
    /// A pivot is treated as zero when `|p| ≤ tol_pivot·(column max before elimination)`;
    /// with `tol_pivot = 0` only an exactly zero column triggers
    /// [`Error::SingularMinor`] with `minor = 0`.
    pub fn factor(seed: &DMatrix<f64>, capacity: usize, tol_pivot: f64) -> Result<Self> {
        let n = seed.nrows();
        if seed.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: seed.ncols(),
            });
        }
        let cap = capacity.max(n);
        let mut lu = DMatrix::zeros(cap, cap);
        lu.view_mut((0, 0), (n, n)).copy_from(seed);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1i8;
        let scale = seed.amax();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
            if pivot == 0.0 || pivot <= tol_pivot * scale {
                return Err(Error::SingularMinor { minor: 0 });
            }
            if p != k {
                lu.swap_rows(k, p);
                perm.swap(k, p);
                sign = -sign;
            }
            let d = lu[(k, k)];
            if d < 0.0 {
                sign = -sign;
            }
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        let ukj = lu[(k, j)];
                        lu[(i, j)] -= f * ukj;
                    }
                }
            }
        }
        Ok(Self {
            lu,
            size: n,
            perm,
            sign,
            tol_pivot,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// `sign(det B)` of the current block, from pivot signs and permutation parity.
    pub fn det_sign(&self) -> i8 {
        self.sign
    }

    /// The last pivot `U[k][k]`.
    pub fn last_pivot(&self) -> f64 {
        self.lu[(self.size - 1, self.size - 1)]
    }

    /// Borders the factored block with column `b` (length `size`), its
    /// transpose as the new row, and corner `gamma`; returns the new sign.
    pub fn update(&mut self, b: &[f64], gamma: f64) -> Result<i8> {
        let k = self.size;
        if b.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: b.len(),
            });
        }
        if k == self.lu.nrows() {
            let cap = (2 * k).max(k + 1);
            self.lu = self.lu.clone().resize(cap, cap, 0.0);
        }
        // new column of U: L u = P b
        for i in 0..k {
            let mut acc = b[self.perm[i]];
            for j in 0..i {
                acc -= self.lu[(i, j)] * self.lu[(j, k)];
            }
            self.lu[(i, k)] = acc;
        }
        // new row of L: Uᵀ l = b
        for j in 0..k {
            let mut acc = b[j];
            for i in 0..j {
                acc -= self.lu[(k, i)] * self.lu[(i, j)];
            }
            self.lu[(k, j)] = acc / self.lu[(j, j)];
        }
        let mut delta = gamma;
        let mut magnitude = gamma.abs();
        for j in 0..k {
            let t = self.lu[(k, j)] * self.lu[(j, k)];
            delta -= t;
            magnitude += t.abs();
        }
        if delta == 0.0 || delta.abs() <= self.tol_pivot * magnitude {
            return Err(Error::SingularMinor { minor: k + 1 });
        }
        self.lu[(k, k)] = delta;
        self.perm.push(k);
        self.size = k + 1;
        if delta < 0.0 {
            self.sign = -self.sign;
        }
        Ok(self.sign)
    }

    /// `(P, L, U)` of the current block, for checking.
    pub fn factors(&self) -> (Vec<usize>, DMatrix<f64>, DMatrix<f64>) {
        let n = self.size;
        let block = self.lu.view((0, 0), (n, n));
        let mut l = DMatrix::identity(n, n);
        let mut u = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if j < i {
                    l[(i, j)] = block[(i, j)];
                } else {
                    u[(i, j)] = block[(i, j)];
                }
            }
        }
        (self.perm.clone(), l, u)
    }
}
