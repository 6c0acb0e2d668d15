//! Random dense instances whose answer is known in closed form.
//!
//! With `Q` orthogonal, `H = Q diag(Λ₊, Λ₋) Qᵀ` and `Aᵀ = Q [0; R]` for an
//! upper-triangular `M × M` block `R`, the first `L = N − M` columns of `Q`
//! span `null(A)`, and `Q₁:ᴸᵀ H Q₁:ᴸ` is the leading `L × L` block of
//! `diag(Λ₊, Λ₋)`. `H` is therefore positive definite on `null(A)` exactly
//! when that block lies inside `Λ₊`, i.e. when `L ≤ P`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::random::{random_orthogonal, random_symmetric_with_eigs};
use super::{Problem, Provenance};
use crate::error::{Error, Result};
use crate::linalg::{ConstraintJacobian, HessianOperator, NullSpaceBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    /// `R` with off-diagonals `N(0, 1)` and diagonal `r_ii ~ N(0, (M − i)²)`.
    Well,
    /// Every upper-triangular entry of `R` is `N(0, 1)`.
    Ill,
}

impl fmt::Display for Conditioning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Conditioning::Well => "well",
            Conditioning::Ill => "ill",
        })
    }
}

impl FromStr for Conditioning {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "well" | "well-conditioned" => Ok(Conditioning::Well),
            "ill" | "ill-conditioned" => Ok(Conditioning::Ill),
            other => Err(format!("unknown conditioning '{other}' (expected well or ill)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n: usize,
    pub m: usize,
    /// Number of positive eigenvalues of `H`.
    pub p: usize,
    pub conditioning: Conditioning,
    /// Range of eigenvalue magnitudes.
    pub eig_range: (f64, f64),
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(n: usize, m: usize, p: usize, conditioning: Conditioning, seed: u64) -> Result<Self> {
        let spec = Self {
            n,
            m,
            p,
            conditioning,
            eig_range: (0.1, 100.0),
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.m == 0 || self.m >= self.n || self.p > self.n {
            return Err(Error::InvalidProblem(format!(
                "generator needs 1 <= M < N and 0 <= P <= N, got N={} M={} P={}",
                self.n, self.m, self.p
            )));
        }
        let (lo, hi) = self.eig_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidProblem(format!("bad eigenvalue range ({lo}, {hi})")));
        }
        Ok(())
    }

    pub fn null_dim(&self) -> usize {
        self.n - self.m
    }

    /// `L ≤ P`.
    pub fn truth(&self) -> bool {
        self.null_dim() <= self.p
    }
}

#[derive(Debug, Clone)]
pub struct TestProblem {
    pub spec: GeneratorSpec,
    pub h: DMatrix<f64>,
    pub a: ConstraintJacobian,
    /// `Q₁:ᴸ`, an orthonormal basis of `null(A)` known by construction.
    pub exact_basis: DMatrix<f64>,
    pub truth: bool,
    /// The drawn eigenvalues of `H`, `P` positive then `N − P` negative.
    pub eigenvalues: Vec<f64>,
    pub r: DMatrix<f64>,
}

impl TestProblem {
    /// A fresh problem backed by a dense operator.
    pub fn problem(&self) -> Problem {
        let mut p = Problem::new(
            HessianOperator::dense(self.h.clone()).expect("N >= 2 by construction"),
            self.a.clone(),
        );
        p.truth = Some(self.truth);
        p.provenance = Provenance::Generated(self.spec);
        p
    }

    pub fn exact_null_basis(&self) -> NullSpaceBasis {
        NullSpaceBasis::from_matrix(self.exact_basis.clone(), true)
    }

    /// Smallest eigenvalue of `Q₁:ᴸᵀ H Q₁:ᴸ` from a dense eigensolver.
    pub fn reduced_min_eigenvalue(&self) -> f64 {
        let reduced = self.exact_basis.transpose() * &self.h * &self.exact_basis;
        crate::linalg::symmetric_eigenvalues(&reduced)[0]
    }
}

fn draw_r(m: usize, conditioning: Conditioning, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    loop {
        let mut r = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let g: f64 = rng.sample(StandardNormal);
                r[(i, j)] = match conditioning {
                    Conditioning::Well if i == j => (m - i) as f64 * g,
                    _ => g,
                };
            }
        }
        if (0..m).all(|i| r[(i, i)].abs() >= 1e-300) {
            return r;
        }
    }
}

pub fn generate(spec: &GeneratorSpec) -> Result<TestProblem> {
    spec.validate()?;
    let GeneratorSpec { n, m, p, .. } = *spec;
    let l = n - m;
    let (lo, hi) = spec.eig_range;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let magnitude = |rng: &mut ChaCha8Rng| -> f64 {
        if lo == hi {
            lo
        } else {
            (rng.random_range(lo.ln()..hi.ln())).exp()
        }
    };
    let positive: Vec<f64> = (0..p).map(|_| magnitude(&mut rng)).collect();
    let negative: Vec<f64> = (0..n - p).map(|_| -magnitude(&mut rng)).collect();
    let mut lambda = DMatrix::zeros(n, n);
    lambda
        .view_mut((0, 0), (p, p))
        .copy_from(&random_symmetric_with_eigs(&positive, &mut rng));
    lambda
        .view_mut((p, p), (n - p, n - p))
        .copy_from(&random_symmetric_with_eigs(&negative, &mut rng));

    let q = random_orthogonal(n, &mut rng);
    let h = &q * lambda * q.transpose();
    let h = (&h + h.transpose()) * 0.5;

    let r = draw_r(m, spec.conditioning, &mut rng);
    // A = [0 Rᵀ] Qᵀ = Rᵀ Q_{L+1:N}ᵀ
    let a = r.transpose() * q.columns(l, m).transpose();

    let mut eigenvalues = positive;
    eigenvalues.extend(negative);
    Ok(TestProblem {
        spec: *spec,
        h,
        a: ConstraintJacobian::new(a)?,
        exact_basis: q.columns(0, l).into_owned(),
        truth: spec.truth(),
        eigenvalues,
        r,
    })
}

/// Fraction of `trials` draws `M ~ U{1..N−1}`, `P ~ U{0..N}` with `N − M ≤ P`.
pub fn sample_truth_rate<R: Rng + ?Sized>(n: usize, trials: usize, rng: &mut R) -> f64 {
    assert!(n >= 2 && trials >= 1);
    let hits = (0..trials)
        .filter(|_| {
            let m = rng.random_range(1..n);
            let p = rng.random_range(0..=n);
            n - m <= p
        })
        .count();
    hits as f64 / trials as f64
}

/// `(N + 2) / (2(N + 1))`.
pub fn expected_truth_rate(n: usize) -> f64 {
    (n + 2) as f64 / (2 * (n + 1)) as f64
}
