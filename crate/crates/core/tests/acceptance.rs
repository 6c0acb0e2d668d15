//! Acceptance suite: one PASS/FAIL line per criterion. Runs as a plain
//! binary (`harness = false`). A failing criterion is reported, not hidden;
//! set `CURVCHECK_STRICT_ACCEPTANCE=1` to turn any FAIL into a non-zero exit.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use curvcheck::harness::{
    records, run_campaign, run_thomson, CampaignConfig, Execution, Summary, ThomsonConfig, TrialResult,
    TruthSampling,
};
use curvcheck::linalg::min_abs_eigenvalue;
use curvcheck::problems::{generate, near_rank_deficient_kkt, random_symmetric_with_eigs, GeneratorSpec};
use curvcheck::sosc::{bordered_minor_signs, variable_order};
use curvcheck::{problems, Conditioning, Method, SoscOptions, Status};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Line {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
    budget: Option<Duration>,
}

impl Line {
    fn print(&self) {
        let over = self.budget.is_some_and(|b| self.elapsed > b);
        let verdict = if self.pass && !over { "PASS" } else { "FAIL" };
        let budget = self
            .budget
            .map(|b| format!(" / budget {:.0}s", b.as_secs_f64()))
            .unwrap_or_default();
        println!(
            "{verdict} criterion {} ({}): {} [{:.1}s{budget}]",
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        );
    }

    fn ok(&self) -> bool {
        self.pass && !self.budget.is_some_and(|b| self.elapsed > b)
    }
}

fn minutes(m: u64) -> Option<Duration> {
    Some(Duration::from_secs(60 * m))
}

fn well_campaign() -> CampaignConfig {
    CampaignConfig {
        n_list: (1..=20).map(|i| 10 * i).collect(),
        trials_per_n: 50,
        conditioning: Conditioning::Well,
        seed: 1,
        eigen_oracle_max_n: 200,
        ..Default::default()
    }
}

fn ill_campaign(sampling: TruthSampling, trials: usize, seed: u64) -> CampaignConfig {
    CampaignConfig {
        n_list: vec![100],
        trials_per_n: trials,
        conditioning: Conditioning::Ill,
        seed,
        sampling,
        ..Default::default()
    }
}

fn oracle_equivalence(results: &[TrialResult], elapsed: Duration) -> Line {
    let summary = Summary::from_records(records(results));
    let mut oracle_mismatch = 0;
    let mut verdict_mismatch = Vec::new();
    for r in results {
        let oracle = r.reduced_min_eigenvalue.expect("oracle enabled") > 0.0;
        if oracle != r.spec.truth() {
            oracle_mismatch += 1;
        }
        for rec in &r.records {
            let allowed_fn = rec.method == Method::Inertia && rec.false_negative();
            if (rec.verdict == Status::Holds) != oracle && !allowed_fn {
                verdict_mismatch.push(format!("{}@seed{}:{}", rec.method, rec.seed, rec.verdict));
            }
        }
    }
    let fp = summary.false_positives();
    let inertia_fn = summary.by_method.get(&Method::Inertia).map_or(0, |s| s.false_negatives);
    Line {
        id: 1,
        name: "oracle equivalence",
        pass: oracle_mismatch == 0 && verdict_mismatch.is_empty() && fp == 0,
        detail: format!(
            "{} trials, FP={fp}, truth/oracle mismatches={oracle_mismatch}, verdict mismatches={} {:?}, inertia FN={inertia_fn}",
            results.len(),
            verdict_mismatch.len(),
            &verdict_mismatch[..verdict_mismatch.len().min(5)]
        ),
        elapsed,
        budget: minutes(10),
    }
}

fn truth_rate() -> Line {
    let clock = Instant::now();
    let n = 10;
    let draws = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rate = problems::sample_truth_rate(n, draws, &mut rng);
    let p = problems::expected_truth_rate(n);
    let sd = (p * (1.0 - p) / draws as f64).sqrt();
    let z = (rate - p) / sd;
    Line {
        id: 2,
        name: "truth rate",
        pass: z.abs() <= 3.0,
        detail: format!("empirical {rate:.5} vs {p:.5}, z = {z:.2}"),
        elapsed: clock.elapsed(),
        budget: minutes(1),
    }
}

fn ill_conditioned(holds: &[TrialResult], mixed: &[TrialResult], elapsed: Duration) -> Line {
    let s = Summary::from_records(records(holds));
    let pooled = s.pooled_false_negative_rate();
    let holding = holds.iter().filter(|r| r.spec.truth()).count();
    let fp = s.false_positives() + Summary::from_records(records(mixed)).false_positives();
    let per_method: Vec<String> = s
        .by_method
        .iter()
        .map(|(m, st)| format!("{m}={:.2}", st.false_negative_rate()))
        .collect();
    Line {
        id: 3,
        name: "ill-conditioned fragility",
        pass: holding >= 200 && pooled > 0.0 && (0.30..=0.95).contains(&pooled) && fp == 0,
        detail: format!(
            "{holding} holding trials, pooled FN rate {pooled:.3} (per method {}), FP={fp} over {} mixed trials",
            per_method.join(" "),
            mixed.len()
        ),
        elapsed,
        budget: minutes(5),
    }
}

fn continuation(results: &[TrialResult]) -> Line {
    let big = records(results).filter(|r| r.n >= 100);
    let s = Summary::from_records(big);
    let frac = s.pcg_continuation_fraction().unwrap_or(0.0);
    Line {
        id: 4,
        name: "PCG continuation",
        pass: s.pcg_holds_runs > 0 && frac >= 0.80,
        detail: format!(
            "{}/{} holding trials with N >= 100 continued ({:.1}%)",
            s.pcg_continued,
            s.pcg_holds_runs,
            100.0 * frac
        ),
        elapsed: Duration::ZERO,
        budget: None,
    }
}

fn certificates(sets: &[&[TrialResult]], tol_feas: f64) -> Line {
    let mut checked = 0;
    let mut bad = Vec::new();
    let mut missing = 0;
    for r in sets.iter().flat_map(|s| s.iter()) {
        for rec in r.records.iter().filter(|x| x.method.is_hessian_free() && x.verdict == Status::Fails) {
            match r.audits.iter().find(|a| a.method == rec.method) {
                Some(a) => {
                    checked += 1;
                    if !(a.feasibility <= tol_feas && a.curvature < 0.0) {
                        bad.push(format!("{}@{}: feas {:.2e} curv {:.2e}", rec.method, rec.seed, a.feasibility, a.curvature));
                    }
                }
                None => missing += 1,
            }
        }
    }
    Line {
        id: 5,
        name: "negative-curvature certificates",
        pass: bad.is_empty() && missing == 0 && checked > 0,
        detail: format!("{checked} certificates checked, {} violations, {missing} missing {:?}", bad.len(), &bad[..bad.len().min(3)]),
        elapsed: Duration::ZERO,
        budget: None,
    }
}

/// Sign of every leading minor from a fresh dense LU.
fn naive_signs(h: &DMatrix<f64>, a: &DMatrix<f64>, order: &[usize]) -> Vec<i8> {
    let (m, n) = a.shape();
    let ap = DMatrix::from_fn(m, n, |i, j| a[(i, order[j])]);
    let hp = DMatrix::from_fn(n, n, |i, j| h[(order[i], order[j])]);
    let b = problems::build_bordered(&hp, &ap).unwrap();
    (2 * m + 1..=m + n)
        .map(|k| {
            let det = b.view((0, 0), (k, k)).into_owned().lu().determinant();
            if det > 0.0 {
                1
            } else if det < 0.0 {
                -1
            } else {
                0
            }
        })
        .collect()
}

fn bht_updates() -> Line {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    let mut minors = 0;
    for t in 0..200 {
        let n = rng.random_range(2..=100);
        let m = rng.random_range(1..n);
        let p = rng.random_range(0..=n);
        let tp = generate(&GeneratorSpec::new(n, m, p, Conditioning::Well, 600 + t).unwrap()).unwrap();
        let order = variable_order(&tp.a, curvcheck::linalg::default_tol_rank()).unwrap();
        let fast = bordered_minor_signs(&tp.h, &tp.a, &order, 0.0).unwrap();
        let slow = naive_signs(&tp.h, tp.a.matrix(), &order);
        minors += slow.len();
        mismatches += fast.iter().zip(&slow).filter(|(x, y)| x != y).count() + fast.len().abs_diff(slow.len());
    }
    Line {
        id: 6,
        name: "BHT update correctness",
        pass: mismatches == 0,
        detail: format!("200 instances, {minors} minors, {mismatches} sign mismatches"),
        elapsed: clock.elapsed(),
        budget: None,
    }
}

fn weyl_bound() -> Line {
    let clock = Instant::now();
    let (n, m) = (20, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut violations = 0;
    let mut count = 0;
    for &norm in &[1e-4, 1e-6, 1e-8, 1e-10, 1e-12] {
        for _ in 0..20 {
            let eigs: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let h = random_symmetric_with_eigs(&eigs, &mut rng);
            let a_prime = DMatrix::from_fn(m - 1, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let beta: Vec<f64> = (0..m - 1).map(|_| rng.sample(StandardNormal)).collect();
            let e = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let eps = &e * (norm / e.norm());
            let kkt = near_rank_deficient_kkt(&h, &a_prime, &beta, &eps).unwrap();
            let smallest = min_abs_eigenvalue(&kkt.k);
            count += 1;
            worst = worst.max(smallest / kkt.bound);
            if smallest > kkt.bound {
                violations += 1;
            }
        }
    }
    Line {
        id: 7,
        name: "near-singular KKT bound",
        pass: violations == 0,
        detail: format!("{count} instances, {violations} violations, max min|λ|/‖ε‖ = {worst:.3}"),
        elapsed: clock.elapsed(),
        budget: None,
    }
}

fn thomson() -> Line {
    let clock = Instant::now();
    let cfg = ThomsonConfig {
        k_list: vec![2, 3, 4],
        methods: vec![Method::Cholesky, Method::Diagonalization],
        ..Default::default()
    };
    let expected = |k: usize| match k {
        2 => 0.5,
        3 => 3f64.sqrt(),
        _ => 6.0 * (3.0f64 / 8.0).sqrt(),
    };
    let (pass, detail) = match run_thomson(&cfg) {
        Err(e) => (false, format!("pipeline failed: {e}")),
        Ok(rows) => {
            let mut ok = rows.len() == 6;
            let mut parts = Vec::new();
            for r in &rows {
                let rel = (r.energy - expected(r.k)).abs() / expected(r.k);
                let l = 2 * r.k - 3;
                ok &= rel <= 1e-5 && r.verdict == Status::Holds && r.operator_products <= l;
                parts.push(format!(
                    "K={} {} {} E_rel={rel:.1e} products={}/{l}",
                    r.k, r.method, r.verdict, r.operator_products
                ));
            }
            (ok, parts.join("; "))
        }
    };
    Line {
        id: 8,
        name: "Thomson pipeline",
        pass,
        detail,
        elapsed: clock.elapsed(),
        budget: minutes(2),
    }
}

fn budget(results: &[TrialResult]) -> Line {
    let mut bad = Vec::new();
    let mut checked = 0;
    for r in results {
        let l = r.spec.null_dim();
        for rec in r.records.iter().filter(|x| matches!(x.method, Method::Cholesky | Method::Diagonalization)) {
            checked += 1;
            let ok = match rec.verdict {
                Status::Holds => rec.operator_products == l,
                // an early rejection may stop short of L
                Status::Fails => rec.operator_products <= l + 1,
                Status::Error => false,
            };
            if !ok {
                bad.push(format!("{}@{}: {} products, L={l}", rec.method, rec.seed, rec.operator_products));
            }
        }
    }
    Line {
        id: 9,
        name: "Hessian-free budget",
        pass: bad.is_empty(),
        detail: format!("{checked} runs, {} over budget {:?}", bad.len(), &bad[..bad.len().min(3)]),
        elapsed: Duration::ZERO,
        budget: None,
    }
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters probe test binaries; answer politely.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let tol_feas = SoscOptions::default().tol_feas;

    let clock = Instant::now();
    let well = run_campaign(&well_campaign(), Execution::Parallel).expect("well-conditioned campaign");
    let well_time = clock.elapsed();

    let clock = Instant::now();
    let ill_holds = run_campaign(&ill_campaign(TruthSampling::HoldsOnly, 200, 3), Execution::Parallel)
        .expect("ill-conditioned campaign");
    let ill_mixed = run_campaign(&ill_campaign(TruthSampling::Uniform, 100, 4), Execution::Parallel)
        .expect("ill-conditioned campaign");
    let ill_time = clock.elapsed();

    let lines = [
        oracle_equivalence(&well, well_time),
        truth_rate(),
        ill_conditioned(&ill_holds, &ill_mixed, ill_time),
        continuation(&well),
        certificates(&[&well, &ill_holds, &ill_mixed], tol_feas),
        bht_updates(),
        weyl_bound(),
        thomson(),
        budget(&well),
    ];
    for l in &lines {
        l.print();
    }
    let failed = lines.iter().filter(|l| !l.ok()).count();
    println!("{} of {} criteria passed", lines.len() - failed, lines.len());
    let strict = std::env::var("CURVCHECK_STRICT_ACCEPTANCE").is_ok_and(|v| v == "1");
    if failed == 0 || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
