//! First-order points to feed the verifiers.
//!
//! [`solve_thomson`] finds a local minimizer of the Thomson energy by
//! Riemannian gradient descent on the product of spheres, rotates it into the
//! frame of the orthogonally invariant formulation, and recovers multipliers
//! by linear least squares on `Aᵀλ = ∇f`.

use nalgebra::{DVector, Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::HouseholderQr;
use crate::problems::ThomsonInstance;

/// An equality-constrained problem `min f(x)` s.t. `c(x) = 0`, evaluated
/// through first derivatives.
pub trait SmoothProblem {
    fn n(&self) -> usize;
    fn m(&self) -> usize;
    fn objective_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
    fn constraint_values(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
    /// `M × N`, rows are constraint gradients.
    fn constraint_jacobian(&self, x: &DVector<f64>) -> Result<nalgebra::DMatrix<f64>>;
}

impl SmoothProblem for ThomsonInstance {
    fn n(&self) -> usize {
        ThomsonInstance::n(self)
    }

    fn m(&self) -> usize {
        ThomsonInstance::m(self)
    }

    fn objective_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.gradient(x)
    }

    fn constraint_values(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.constraints(x))
    }

    fn constraint_jacobian(&self, x: &DVector<f64>) -> Result<nalgebra::DMatrix<f64>> {
        Ok(self.jacobian(x))
    }
}

/// `(‖∇f(x) − A(x)ᵀλ‖∞, ‖c(x)‖∞)`.
pub fn fonc_residual<P: SmoothProblem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
) -> Result<(f64, f64)> {
    if x.len() != problem.n() || lambda.len() != problem.m() {
        return Err(Error::DimensionMismatch {
            expected: problem.n() + problem.m(),
            found: x.len() + lambda.len(),
        });
    }
    let g = problem.objective_gradient(x)? - problem.constraint_jacobian(x)?.transpose() * lambda;
    Ok((g.amax(), problem.constraint_values(x)?.amax()))
}

/// Least-squares multipliers: `argmin ‖Aᵀλ − ∇f‖₂`.
pub fn least_squares_multipliers<P: SmoothProblem + ?Sized>(problem: &P, x: &DVector<f64>) -> Result<DVector<f64>> {
    let a = problem.constraint_jacobian(x)?;
    let g = problem.objective_gradient(x)?;
    let mut qr = HouseholderQr::new(problem.n());
    for row in a.row_iter() {
        let col: Vec<f64> = row.iter().copied().collect();
        qr.push_column(&col, 0.0)?;
    }
    Ok(DVector::from_vec(qr.least_squares(g.as_slice())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoncPoint {
    pub x: DVector<f64>,
    pub lambda: DVector<f64>,
    /// `‖∇ₓL‖∞`.
    pub fonc_residual: f64,
    /// `‖c‖∞`.
    pub feas_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThomsonSolution {
    pub instance: ThomsonInstance,
    pub point: FoncPoint,
    pub energy: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThomsonSolverOptions {
    pub seed: u64,
    pub tol_fonc: f64,
    pub tol_feas: f64,
    pub max_iterations: usize,
}

impl Default for ThomsonSolverOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            tol_fonc: 1e-8,
            tol_feas: 1e-12,
            max_iterations: 200_000,
        }
    }
}

fn point(x: &DVector<f64>, k: usize) -> Vector3<f64> {
    Vector3::new(x[3 * k], x[3 * k + 1], x[3 * k + 2])
}

fn set_point(x: &mut DVector<f64>, k: usize, p: &Vector3<f64>) {
    x.rows_mut(3 * k, 3).copy_from(p);
}

/// Gradient projected onto the tangent spaces of the spheres.
fn tangent(x: &DVector<f64>, g: &DVector<f64>, k: usize) -> DVector<f64> {
    let mut t = g.clone();
    for i in 0..k {
        let p = point(x, i);
        let gi = point(g, i);
        set_point(&mut t, i, &(gi - p * gi.dot(&p)));
    }
    t
}

fn retract(x: &DVector<f64>, step: &DVector<f64>, k: usize) -> DVector<f64> {
    let mut y = x - step;
    for i in 0..k {
        let p = point(&y, i);
        set_point(&mut y, i, &(p / p.norm()));
    }
    y
}

/// Rotates so that `x₁` lies on the positive first axis and `x₂` in the
/// plane of the first two axes, then zeroes the pinned coordinates.
fn fix_frame(x: &DVector<f64>, k: usize) -> Result<DVector<f64>> {
    let u1 = point(x, 0).normalize();
    let x2 = point(x, 1);
    let w = x2 - u1 * x2.dot(&u1);
    // second pass: for near-antipodal pairs w is a tiny difference
    let w = w - u1 * w.dot(&u1);
    let wn = w.norm();
    let u2 = if wn > 1e-12 {
        w / wn
    } else if x2.dot(&u1) > 0.0 {
        return Err(Error::CoincidentPoints(0, 1));
    } else {
        // antipodal: any completion works
        let trial = if u1.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        (trial - u1 * trial.dot(&u1)).normalize()
    };
    let u3 = u1.cross(&u2);
    let q = Matrix3::from_rows(&[u1.transpose(), u2.transpose(), u3.transpose()]);
    let mut y = x.clone();
    for i in 0..k {
        let p = q * point(x, i);
        set_point(&mut y, i, &(p / p.norm()));
    }
    y[1] = 0.0;
    y[2] = 0.0;
    y[5] = 0.0;
    for i in [0, 1] {
        let p = point(&y, i);
        set_point(&mut y, i, &(p / p.norm()));
    }
    Ok(y)
}

pub fn solve_thomson(k: usize, seed: u64, tol_fonc: f64) -> Result<ThomsonSolution> {
    solve_thomson_with(
        k,
        &ThomsonSolverOptions {
            seed,
            tol_fonc,
            ..Default::default()
        },
    )
}

pub fn solve_thomson_with(k: usize, opts: &ThomsonSolverOptions) -> Result<ThomsonSolution> {
    let inst = ThomsonInstance::invariant(k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = DVector::from_fn(3 * k, |_, _| StandardNormal.sample(&mut rng));
    x = retract(&x, &DVector::zeros(3 * k), k);

    let mut f = inst.energy(&x)?;
    let mut rg = tangent(&x, &inst.gradient(&x)?, k);
    let mut step = 0.1;
    let target = 0.25 * opts.tol_fonc;
    let resolution = 1e-15 * (k * k) as f64;
    let mut iterations = 0;
    while rg.amax() > target {
        if iterations == opts.max_iterations {
            return Err(Error::MaxIterations {
                iterations,
                residual: rg.amax(),
            });
        }
        iterations += 1;
        let slope = rg.norm_squared();
        let mut t = step;
        let (x_new, f_new, rg_new) = loop {
            let y = retract(&x, &(&rg * t), k);
            // rejected on insufficient decrease or coincident points
            if let Ok(fy) = inst.energy(&y) {
                let decrease = 1e-4 * t * slope;
                if fy <= f - decrease {
                    let g = tangent(&y, &inst.gradient(&y)?, k);
                    break (y, fy, g);
                }
                // below the energy's resolution only the gradient can judge progress
                if decrease < resolution * f.abs() && fy <= f + resolution * f.abs() {
                    let g = tangent(&y, &inst.gradient(&y)?, k);
                    if g.norm() < rg.norm() {
                        break (y, fy, g);
                    }
                }
            }
            t *= 0.5;
            if t < 1e-20 {
                return finish(inst, x, f, iterations, opts);
            }
        };
        // Barzilai–Borwein guess for the next trial step
        let s = &x_new - &x;
        let y = &rg_new - &rg;
        let sy = s.dot(&y);
        step = if sy > 0.0 { (s.norm_squared() / sy).clamp(1e-8, 1e3) } else { 2.0 * t };
        x = x_new;
        f = f_new;
        rg = rg_new;
    }
    finish(inst, x, f, iterations, opts)
}

fn finish(
    inst: ThomsonInstance,
    x: DVector<f64>,
    f: f64,
    iterations: usize,
    opts: &ThomsonSolverOptions,
) -> Result<ThomsonSolution> {
    let x = fix_frame(&x, inst.k)?;
    let lambda = least_squares_multipliers(&inst, &x)?;
    let (fonc, feas) = fonc_residual(&inst, &x, &lambda)?;
    if fonc > opts.tol_fonc || feas > opts.tol_feas {
        return Err(Error::MaxIterations {
            iterations,
            residual: fonc.max(feas),
        });
    }
    let energy = inst.energy(&x).unwrap_or(f);
    Ok(ThomsonSolution {
        instance: inst,
        point: FoncPoint {
            x,
            lambda,
            fonc_residual: fonc,
            feas_residual: feas,
        },
        energy,
        iterations,
    })
}
