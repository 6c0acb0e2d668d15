//! Symmetric-indefinite `P K Pᵀ = L D Lᵀ` with Bunch–Kaufman partial pivoting.
//!
//! `D` has 1×1 and 2×2 diagonal blocks. The inertia of `K` is read off `D`
//! (Sylvester's law), which is exact for the computed `D`.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Bunch–Kaufman growth constant `(1 + √17)/8`.
pub fn bunch_kaufman_alpha() -> f64 {
    (1.0 + 17f64.sqrt()) / 8.0
}

/// Counts of positive, negative and zero eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl Inertia {
    pub fn new(positive: usize, negative: usize, zero: usize) -> Self {
        Self {
            positive,
            negative,
            zero,
        }
    }

    pub fn total(&self) -> usize {
        self.positive + self.negative + self.zero
    }

    /// Sign counts of a list of eigenvalues (exact zeros only).
    pub fn from_values<I: IntoIterator<Item = f64>>(values: I) -> Self {
        values.into_iter().fold(Self::default(), |mut acc, v| {
            if v > 0.0 {
                acc.positive += 1;
            } else if v < 0.0 {
                acc.negative += 1;
            } else {
                acc.zero += 1;
            }
            acc
        })
    }
}

impl std::ops::Add for Inertia {
    type Output = Inertia;
    fn add(self, o: Inertia) -> Inertia {
        Inertia::new(
            self.positive + o.positive,
            self.negative + o.negative,
            self.zero + o.zero,
        )
    }
}

impl fmt::Display for Inertia {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.positive, self.negative, self.zero)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiagonalBlock {
    One(f64),
    /// `[[a, b], [b, c]]`.
    Two { a: f64, b: f64, c: f64 },
}

impl DiagonalBlock {
    pub fn inertia(&self) -> Inertia {
        match *self {
            DiagonalBlock::One(d) => Inertia::from_values([d]),
            DiagonalBlock::Two { a, b, c } => {
                let det = a * c - b * b;
                if det < 0.0 {
                    Inertia::new(1, 1, 0)
                } else if det > 0.0 {
                    // both eigenvalues share the sign of the trace
                    if a + c > 0.0 {
                        Inertia::new(2, 0, 0)
                    } else {
                        Inertia::new(0, 2, 0)
                    }
                } else {
                    Inertia::from_values([0.0, a + c])
                }
            }
        }
    }

    pub fn size(&self) -> usize {
        match self {
            DiagonalBlock::One(_) => 1,
            DiagonalBlock::Two { .. } => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LdlFactorization {
    /// Row `i` of `P K Pᵀ` is row `perm[i]` of `K` (columns likewise).
    pub perm: Vec<usize>,
    pub l: DMatrix<f64>,
    pub blocks: Vec<DiagonalBlock>,
    pub inertia: Inertia,
}

impl LdlFactorization {
    pub fn d_matrix(&self) -> DMatrix<f64> {
        let n = self.l.nrows();
        let mut d = DMatrix::zeros(n, n);
        let mut k = 0;
        for block in &self.blocks {
            match *block {
                DiagonalBlock::One(v) => d[(k, k)] = v,
                DiagonalBlock::Two { a, b, c } => {
                    d[(k, k)] = a;
                    d[(k + 1, k)] = b;
                    d[(k, k + 1)] = b;
                    d[(k + 1, k + 1)] = c;
                }
            }
            k += block.size();
        }
        d
    }

    /// `‖P K Pᵀ − L D Lᵀ‖_max`.
    pub fn reconstruction_error(&self, k: &DMatrix<f64>) -> f64 {
        let n = k.nrows();
        let pkp = DMatrix::from_fn(n, n, |i, j| k[(self.perm[i], self.perm[j])]);
        (pkp - &self.l * self.d_matrix() * self.l.transpose()).amax()
    }
}

fn symmetric_swap(a: &mut DMatrix<f64>, l: &mut DMatrix<f64>, perm: &mut [usize], k: usize, p: usize) {
    if k == p {
        return;
    }
    a.swap_rows(k, p);
    a.swap_columns(k, p);
    perm.swap(k, p);
    for j in 0..k {
        l.swap((k, j), (p, j));
    }
}

/// Factors the symmetric matrix `k`. Never fails: exactly zero pivots become
/// zero 1×1 blocks and show up in `inertia.zero`.
pub fn ldl_factor(k: &DMatrix<f64>) -> LdlFactorization {
    let n = k.nrows();
    assert_eq!(n, k.ncols(), "ldl_factor needs a square matrix");
    let alpha = bunch_kaufman_alpha();
    let mut a = (k + k.transpose()) * 0.5;
    let mut l = DMatrix::identity(n, n);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut blocks = Vec::new();
    let mut col = 0;
    while col < n {
        let absakk = a[(col, col)].abs();
        let (imax, colmax) = (col + 1..n)
            .map(|i| (i, a[(i, col)].abs()))
            .fold((col, 0.0), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });

        if absakk.max(colmax) == 0.0 {
            blocks.push(DiagonalBlock::One(0.0));
            col += 1;
            continue;
        }

        let mut two = false;
        if absakk < alpha * colmax {
            let rowmax = (col..n)
                .filter(|&j| j != imax)
                .map(|j| a[(imax, j)].abs())
                .fold(0.0, f64::max);
            if absakk * rowmax >= alpha * colmax * colmax {
                // keep the diagonal pivot
            } else if a[(imax, imax)].abs() >= alpha * rowmax {
                symmetric_swap(&mut a, &mut l, &mut perm, col, imax);
            } else {
                two = true;
                symmetric_swap(&mut a, &mut l, &mut perm, col + 1, imax);
            }
        }

        if !two {
            let d = a[(col, col)];
            for i in col + 1..n {
                l[(i, col)] = a[(i, col)] / d;
            }
            for j in col + 1..n {
                let ajk = a[(j, col)];
                if ajk == 0.0 {
                    continue;
                }
                for i in col + 1..n {
                    a[(i, j)] -= l[(i, col)] * ajk;
                }
            }
            blocks.push(DiagonalBlock::One(d));
            col += 1;
        } else {
            let (d11, d21, d22) = (a[(col, col)], a[(col + 1, col)], a[(col + 1, col + 1)]);
            let det = d11 * d22 - d21 * d21;
            for i in col + 2..n {
                let (x, y) = (a[(i, col)], a[(i, col + 1)]);
                l[(i, col)] = (x * d22 - y * d21) / det;
                l[(i, col + 1)] = (y * d11 - x * d21) / det;
            }
            for j in col + 2..n {
                let (x, y) = (a[(j, col)], a[(j, col + 1)]);
                for i in col + 2..n {
                    a[(i, j)] -= l[(i, col)] * x + l[(i, col + 1)] * y;
                }
            }
            blocks.push(DiagonalBlock::Two {
                a: d11,
                b: d21,
                c: d22,
            });
            col += 2;
        }
    }
    let inertia = blocks
        .iter()
        .fold(Inertia::default(), |acc, b| acc + b.inertia());
    LdlFactorization {
        perm,
        l,
        blocks,
        inertia,
    }
}
