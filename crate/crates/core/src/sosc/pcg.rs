//! Continued projected conjugate gradients.
//!
//! CG on `H` restricted to `C` builds H-conjugate directions `p_j` and checks
//! `η_j = p_jᵀHp_j > 0`. CG may converge before `L = dim C` directions exist
//! (the start vector sat near an invariant subspace), which proves nothing.
//! The search is then continued: every `q_j = H p_j` of the finished sweep is
//! appended to the projector, so `C ← C ∩ span{q_j}⊥`, and a fresh start
//! vector is drawn from what is left. Directions of later sweeps are
//! therefore H-conjugate to all earlier ones. The condition holds once `L`
//! positive-curvature directions have been conjugated, or once the appended
//! products leave nothing of `C` to search.
//!
//! Only definiteness is sought: no solution iterate is carried.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{classify, Curvature, Inconclusive, Method, NegativeCurvature, Outcome, SoscOptions, SoscVerdict};
use crate::error::{Error, Result};
use crate::linalg::{HessianOperator, Projector};

/// Search directions `p_j` and products `q_j = H p_j` of one sweep.
#[derive(Debug, Clone, Default)]
pub struct PcgSweep {
    pub directions: Vec<DVector<f64>>,
    pub products: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, Default)]
pub struct PcgTrace {
    pub sweeps: Vec<PcgSweep>,
}

pub fn continued_pcg(op: &HessianOperator, projector: Projector, opts: &SoscOptions) -> Result<SoscVerdict> {
    run(op, projector, None, opts, None)
}

/// As [`continued_pcg`], but the first sweep starts from `proj(b)`;
/// continuations still draw from the seeded generator.
pub fn continued_pcg_from(
    op: &HessianOperator,
    projector: Projector,
    b: &DVector<f64>,
    opts: &SoscOptions,
) -> Result<SoscVerdict> {
    run(op, projector, Some(b), opts, None)
}

pub fn continued_pcg_traced(
    op: &HessianOperator,
    projector: Projector,
    opts: &SoscOptions,
) -> Result<(SoscVerdict, PcgTrace)> {
    let mut trace = PcgTrace::default();
    let verdict = run(op, projector, None, opts, Some(&mut trace))?;
    Ok((verdict, trace))
}

/// Projects Gaussian draws until one keeps more than `tol_rank` of its norm.
fn draw_start(
    projector: &Projector,
    rng: &mut ChaCha8Rng,
    opts: &SoscOptions,
) -> Option<DVector<f64>> {
    for _ in 0..opts.max_draws.max(1) {
        let g = DVector::from_fn(projector.dim(), |_, _| StandardNormal.sample(rng));
        let b = projector.project(&g);
        if b.norm() > opts.tol_rank * g.norm() {
            return Some(b);
        }
    }
    None
}

fn run(
    op: &HessianOperator,
    mut projector: Projector,
    initial: Option<&DVector<f64>>,
    opts: &SoscOptions,
    mut trace: Option<&mut PcgTrace>,
) -> Result<SoscVerdict> {
    if projector.dim() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: projector.dim(),
        });
    }
    let start = op.products();
    let required = projector.range_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut conjugated = 0;
    let mut continuations = 0;

    let finish = |outcome, continuations| {
        let mut v = SoscVerdict::new(Method::Pcg, outcome);
        v.diagnostics.operator_products = op.products() - start;
        v.diagnostics.continuations = continuations;
        v
    };
    let exhausted = |conjugated| {
        Outcome::Inconclusive(Inconclusive::SubspaceExhausted {
            conjugated,
            required,
        })
    };

    let first = match initial {
        Some(b) if b.len() != op.dim() => {
            return Err(Error::DimensionMismatch {
                expected: op.dim(),
                found: b.len(),
            })
        }
        Some(b) => Some(projector.project(b)).filter(|p| p.norm() > opts.tol_rank * b.norm()),
        None => draw_start(&projector, &mut rng, opts),
    };
    let Some(mut b) = first else {
        return Ok(finish(exhausted(0), 0));
    };

    loop {
        let mut r = &b / b.norm();
        let mut omega = 1.0;
        let mut p = r.clone();
        let mut sweep = PcgSweep::default();
        let mut converged = false;

        while conjugated < required {
            let tau = omega;
            let q = op.apply(&p)?;
            let eta = p.dot(&q);
            conjugated += 1;
            match classify(eta, p.norm() * q.norm(), opts.tol_alpha) {
                Curvature::Positive => {}
                Curvature::Negative => {
                    let outcome = Outcome::Fails(NegativeCurvature {
                        direction: Some(p),
                        curvature: Some(eta),
                        step: Some(conjugated),
                    });
                    return Ok(finish(outcome, continuations));
                }
                Curvature::Boundary => {
                    let outcome = Outcome::Inconclusive(Inconclusive::SemiDefiniteBoundary {
                        step: conjugated,
                        value: eta,
                    });
                    return Ok(finish(outcome, continuations));
                }
            }
            r.axpy(-tau / eta, &q, 1.0);
            let s = projector.project(&r);
            omega = r.dot(&s);
            sweep.directions.push(p.clone());
            sweep.products.push(q);
            if omega.abs() <= opts.tol_pcg {
                converged = true;
                break;
            }
            p = s + p * (omega / tau);
        }

        let products = std::mem::take(&mut sweep.products);
        if let Some(t) = trace.as_deref_mut() {
            t.sweeps.push(PcgSweep {
                directions: std::mem::take(&mut sweep.directions),
                products: products.clone(),
            });
        }
        if conjugated >= required {
            return Ok(finish(Outcome::Holds, continuations));
        }
        debug_assert!(converged);
        // A dependent q already lies in the searched span: it adds no
        // constraint, so it is skipped rather than ending the search.
        for q in &products {
            match projector.append_column(q) {
                Ok(()) | Err(Error::DependentColumn { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        if projector.range_dim() == 0 {
            return Ok(finish(Outcome::Holds, continuations));
        }
        match draw_start(&projector, &mut rng, opts) {
            Some(next) => b = next,
            None => return Ok(finish(exhausted(conjugated), continuations)),
        }
        continuations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn diag(d: &[f64]) -> HessianOperator {
        HessianOperator::dense(DMatrix::from_diagonal(&DVector::from_row_slice(d))).unwrap()
    }

    #[test]
    fn identity_holds_without_continuation_count_beyond_sweeps() {
        let op = diag(&[1.0; 6]);
        let v = continued_pcg(&op, Projector::unconstrained(6), &SoscOptions::default()).unwrap();
        assert_eq!(v.outcome, Outcome::Holds);
        // CG on the identity converges after one step, every sweep finds one direction
        assert_eq!(v.diagnostics.operator_products, 6);
        assert_eq!(v.diagnostics.continuations, 5);
    }

    #[test]
    fn constrained_identity_counts_l_products() {
        let a = DMatrix::from_row_slice(2, 5, &[1., 2., 0., 1., 0., 0., 1., 1., 0., 3.]);
        let proj = Projector::from_jacobian(&a, 1e-8).unwrap();
        let op = diag(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let v = continued_pcg(&op, proj, &SoscOptions::default()).unwrap();
        assert_eq!(v.outcome, Outcome::Holds);
        assert_eq!(v.diagnostics.operator_products, 3);
    }

    #[test]
    fn second_step_detects_indefiniteness() {
        let op = diag(&[1.0, -1.0]);
        let b = DVector::from_row_slice(&[1.0, 2.0]);
        // first η = (1 − 4)/5 < 0 already; start from (2, 1) for a positive first step
        let v = continued_pcg_from(&op, Projector::unconstrained(2), &b, &SoscOptions::default()).unwrap();
        assert_eq!(v.fail_step(), Some(1));
        let b = DVector::from_row_slice(&[2.0, 1.0]);
        let v = continued_pcg_from(&op, Projector::unconstrained(2), &b, &SoscOptions::default()).unwrap();
        assert_eq!(v.fail_step(), Some(2));
        assert_eq!(v.diagnostics.continuations, 0);
    }

    #[test]
    fn early_convergence_continues_then_fails() {
        let op = diag(&[1.0, -1.0]);
        let b = DVector::from_row_slice(&[1.0, 0.0]);
        let (v, t) = {
            let mut trace = PcgTrace::default();
            let v = run(&op, Projector::unconstrained(2), Some(&b), &SoscOptions::default(), Some(&mut trace)).unwrap();
            (v, trace)
        };
        assert_eq!(v.diagnostics.continuations, 1);
        assert_eq!(t.sweeps.len(), 1);
        let nc = v.certificate().unwrap();
        assert_eq!(nc.step, Some(2));
        let d = nc.direction.as_ref().unwrap();
        assert!(d[0].abs() < 1e-15 && d[1] != 0.0);
    }

    #[test]
    fn indefinite_found_by_some_sweep() {
        let op = diag(&[1.0, -1.0]);
        for seed in 0..20 {
            let opts = SoscOptions { seed, ..Default::default() };
            let v = continued_pcg(&op, Projector::unconstrained(2), &opts).unwrap();
            let nc = v.certificate().expect("diag(1,-1) is indefinite");
            let d = nc.direction.as_ref().unwrap();
            assert!(d[1].abs() > d[0].abs());
            assert!(nc.curvature.unwrap() < 0.0);
        }
    }
}
