use curvcheck::linalg::{min_abs_eigenvalue, symmetric_eigenvalues, HessianOperator, DEFAULT_FD_SIGMA};
use curvcheck::problems::{
    cube_problem, cube_sqp_iterates, expected_truth_rate, generate, near_rank_deficient_kkt, random_orthogonal,
    random_symmetric_with_eigs, read_problem, sample_truth_rate, write_problem, ProblemDocument, ThomsonInstance,
};
use curvcheck::sosc::verify;
use curvcheck::stationary::{fonc_residual, solve_thomson};
use curvcheck::{Conditioning, GeneratorSpec, Method, SoscOptions, Status};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_spectrum_and_null_space(n in 2usize..30, seed in any::<u64>(), ill in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.random_range(1..n);
        let p = rng.random_range(0..=n);
        let cond = if ill { Conditioning::Ill } else { Conditioning::Well };
        let tp = generate(&GeneratorSpec::new(n, m, p, cond, seed).unwrap()).unwrap();
        let mut drawn = tp.eigenvalues.clone();
        drawn.sort_by(f64::total_cmp);
        let computed = symmetric_eigenvalues(&tp.h);
        for (x, y) in drawn.iter().zip(&computed) {
            prop_assert!((x - y).abs() < 1e-10 * 100.0);
        }
        prop_assert_eq!(drawn.iter().filter(|&&e| e > 0.0).count(), p);
        prop_assert!(drawn.iter().all(|e| (0.1..=100.0).contains(&e.abs())));
        let w = &tp.exact_basis;
        prop_assert!((tp.a.matrix() * w).amax() < 1e-12 * tp.a.frobenius());
        prop_assert!((w.transpose() * w - DMatrix::identity(n - m, n - m)).amax() < 1e-12);
        prop_assert_eq!(tp.truth, n - m <= p);
    }

    #[test]
    fn truth_depends_only_on_l_and_p(n in 2usize..40, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.random_range(1..n);
        let l = n - m;
        prop_assert!(GeneratorSpec::new(n, m, l, Conditioning::Well, seed).unwrap().truth());
        prop_assert!(!GeneratorSpec::new(n, m, l - 1, Conditioning::Well, seed).unwrap().truth());
    }
}

#[test]
fn haar_first_entry_moment() {
    // for Haar-distributed Q in O(4), E|q₁₁| = 4/(3π)
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 20_000;
    let mean = (0..draws).map(|_| random_orthogonal(4, &mut rng)[(0, 0)].abs()).sum::<f64>() / draws as f64;
    let expected = 4.0 / (3.0 * std::f64::consts::PI);
    // sd of |q₁₁| is about 0.23
    assert!((mean - expected).abs() < 4.0 * 0.23 / (draws as f64).sqrt(), "{mean} vs {expected}");
}

#[test]
fn symmetric_with_eigs_reproduces_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let eigs = [-3.0, -0.5, 0.25, 2.0, 7.0];
    let s = random_symmetric_with_eigs(&eigs, &mut rng);
    assert!((&s - s.transpose()).amax() < 1e-14);
    let got = symmetric_eigenvalues(&s);
    for (x, y) in eigs.iter().zip(&got) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn truth_rates_for_several_n() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [2, 5, 10, 50] {
        let p = expected_truth_rate(n);
        let rate = sample_truth_rate(n, 40_000, &mut rng);
        let sd = (p * (1.0 - p) / 40_000.0).sqrt();
        assert!((rate - p).abs() < 4.0 * sd, "N={n}: {rate} vs {p}");
    }
    assert!((expected_truth_rate(10) - 12.0 / 22.0).abs() < 1e-15);
}

#[test]
fn near_singular_kkt_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (n, m) = (20, 5);
    for e in [1e-4, 1e-8, 1e-12] {
        let h = random_symmetric_with_eigs(&(0..n).map(|i| i as f64 - 9.5).collect::<Vec<_>>(), &mut rng);
        let a_prime = DMatrix::from_fn(m - 1, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let beta: Vec<f64> = (0..m - 1).map(|_| rng.sample(StandardNormal)).collect();
        let eps = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let kkt = near_rank_deficient_kkt(&h, &a_prime, &beta, &(&eps * (e / eps.norm()))).unwrap();
        assert!((kkt.a.row(m - 1).norm() - 1.0).abs() < 1e-14);
        assert!(min_abs_eigenvalue(&kkt.k) <= kkt.bound);
    }
}

#[test]
fn cube_iterates_approach_a_non_minimizer() {
    let opts = SoscOptions::default();
    for x in cube_sqp_iterates(1.0, 30) {
        let p = cube_problem(x).unwrap();
        for method in Method::ALL {
            assert_eq!(verify(&p, method, &opts).unwrap().status(), Status::Holds, "x={x} {method}");
        }
    }
    // the limit point satisfies the second-order necessary but not the sufficient condition
    let limit = cube_problem(0.0).unwrap();
    for method in Method::ALL {
        assert_ne!(verify(&limit, method, &opts).unwrap().status(), Status::Holds, "{method}");
    }
    let below = cube_problem(-0.5).unwrap();
    assert_eq!(verify(&below, Method::Cholesky, &opts).unwrap().status(), Status::Fails);
}

#[test]
fn thomson_gradient_matches_central_differences() {
    let inst = ThomsonInstance::invariant(5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = DVector::from_fn(15, |_, _| rng.sample::<f64, _>(StandardNormal));
    let g = inst.gradient(&x).unwrap();
    let h = 1e-6;
    for i in 0..15 {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let fd = (inst.energy(&xp).unwrap() - inst.energy(&xm).unwrap()) / (2.0 * h);
        assert!((fd - g[i]).abs() < 1e-6 * (1.0 + g[i].abs()), "coordinate {i}");
    }
    let hess = inst.energy_hessian(&x).unwrap();
    let e = DVector::from_fn(15, |i, _| if i == 3 { 1.0 } else { 0.0 });
    let fd = (inst.gradient(&(&x + &e * h)).unwrap() - inst.gradient(&(&x - &e * h)).unwrap()) / (2.0 * h);
    assert!((fd - hess.column(3)).amax() < 1e-5);
}

#[test]
fn thomson_minimizers_verify_with_every_method() {
    let opts = SoscOptions::default();
    for (k, energy) in [(2, 0.5), (3, 3f64.sqrt()), (4, 6.0 * (3.0f64 / 8.0).sqrt())] {
        let sol = solve_thomson(k, 17, 1e-9).unwrap();
        assert!((sol.energy - energy).abs() < 1e-9 * energy);
        let (fonc, feas) = fonc_residual(&sol.instance, &sol.point.x, &sol.point.lambda).unwrap();
        assert!(fonc <= 1e-9 && feas <= 1e-12);
        let analytic = sol.instance.analytic_problem(&sol.point.x, &sol.point.lambda).unwrap();
        let fd = sol
            .instance
            .finite_difference_problem(&sol.point.x, &sol.point.lambda, DEFAULT_FD_SIGMA)
            .unwrap();
        let reference = analytic.hessian.explicit().unwrap().clone();
        assert!((fd.hessian.materialize().unwrap() - &reference).amax() < 1e-5);
        for method in Method::ALL {
            assert_eq!(verify(&analytic, method, &opts).unwrap().status(), Status::Holds, "K={k} {method}");
        }
        for method in [Method::Cholesky, Method::Diagonalization, Method::Pcg] {
            let v = verify(&fd, method, &opts).unwrap();
            assert_eq!(v.status(), Status::Holds, "K={k} {method}");
            assert!(v.diagnostics.operator_products <= 2 * k - 3);
        }
    }
}

#[test]
fn thomson_document_round_trip_uses_finite_differences() {
    let sol = solve_thomson(3, 2, 1e-9).unwrap();
    let p = sol.instance.finite_difference_problem(&sol.point.x, &sol.point.lambda, 1e-6).unwrap();
    let dir = tempfile_dir();
    let path = dir.join("thomson.json");
    write_problem(&path, &ProblemDocument::from_problem(&p)).unwrap();
    let back = read_problem(&path, None).unwrap();
    assert!(back.hessian.is_finite_difference());
    assert_eq!(verify(&back, Method::Cholesky, &SoscOptions::default()).unwrap().status(), Status::Holds);
    std::fs::remove_dir_all(dir).unwrap();
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("curvcheck-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn callback_operator_is_hessian_free() {
    let h = DMatrix::from_diagonal(&DVector::from_row_slice(&[2.0, 1.0, -1.0]));
    let a = curvcheck::ConstraintJacobian::new(DMatrix::from_row_slice(1, 3, &[0.0, 0.0, 1.0])).unwrap();
    let hc = h.clone();
    let op = HessianOperator::callback(3, move |v: &DVector<f64>| &hc * v).unwrap();
    let p = curvcheck::Problem::new(op, a);
    for method in [Method::Cholesky, Method::Diagonalization, Method::Pcg] {
        let v = verify(&p, method, &SoscOptions::default()).unwrap();
        assert_eq!(v.status(), Status::Holds);
        assert!(v.diagnostics.operator_products <= 2);
    }
}
