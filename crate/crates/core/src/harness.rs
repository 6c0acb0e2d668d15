//! Randomized accuracy and timing campaigns over generated problems, and the
//! Thomson pipeline.
//!
//! Trials are independent: each one draws `(M, P)`, generates its problem
//! from its own seed and runs every requested method on it. With the
//! `parallel` feature, trials run on the rayon pool; results come back in
//! trial order either way, so output is identical for a given seed.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::problems::{generate, Conditioning, GeneratorSpec, TestProblem};
use crate::sosc::{inconclusive, verify, verify_with_basis, Inconclusive, Method, SoscOptions, SoscVerdict, Status};
use crate::stationary::{solve_thomson_with, ThomsonSolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// Which `(M, P)` pairs a campaign draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TruthSampling {
    /// `M ~ U{1..N−1}`, `P ~ U{0..N}`.
    #[default]
    Uniform,
    /// `P ~ U{L..N}`, so every trial has the condition holding.
    HoldsOnly,
}

/// Null-space basis handed to the Cholesky and diagonalization tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BasisSource {
    /// Computed from `A` per the options.
    #[default]
    Computed,
    /// The generator's `Q₁:ᴸ`.
    Exact,
}

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub n_list: Vec<usize>,
    pub trials_per_n: usize,
    pub conditioning: Conditioning,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub options: SoscOptions,
    pub sampling: TruthSampling,
    pub basis: BasisSource,
    /// Smallest eigenvalue of `Q₁:ᴸᵀ H Q₁:ᴸ` per trial, for `N` up to this size.
    pub eigen_oracle_max_n: usize,
    /// Repeat count for the timing median, applied from `N ≥ timing_min_n`.
    pub timing_repeats: usize,
    pub timing_min_n: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            n_list: vec![10],
            trials_per_n: 50,
            conditioning: Conditioning::Well,
            methods: Method::ALL.to_vec(),
            seed: 0,
            options: SoscOptions::default(),
            sampling: TruthSampling::Uniform,
            basis: BasisSource::Computed,
            eigen_oracle_max_n: 0,
            timing_repeats: 3,
            timing_min_n: 500,
        }
    }
}

/// One CSV row: a (trial, method) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub conditioning: Conditioning,
    pub method: Method,
    pub verdict: Status,
    pub truth: Option<bool>,
    pub agree: Option<bool>,
    pub wall_time_s: f64,
    pub operator_products: usize,
    pub continuations: usize,
    pub fail_step: Option<usize>,
}

pub const CSV_HEADER: [&str; 13] = [
    "seed",
    "N",
    "M",
    "P",
    "conditioning",
    "method",
    "verdict",
    "truth",
    "agree",
    "wall_time_s",
    "operator_products",
    "continuations",
    "fail_step",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl TrialRecord {
    pub fn csv_fields(&self) -> [String; 13] {
        [
            self.seed.to_string(),
            self.n.to_string(),
            self.m.to_string(),
            self.p.to_string(),
            self.conditioning.to_string(),
            self.method.to_string(),
            self.verdict.to_string(),
            opt(self.truth),
            opt(self.agree),
            format!("{:.16e}", self.wall_time_s),
            self.operator_products.to_string(),
            self.continuations.to_string(),
            opt(self.fail_step),
        ]
    }

    pub fn false_positive(&self) -> bool {
        self.truth == Some(false) && self.verdict == Status::Holds
    }

    pub fn false_negative(&self) -> bool {
        self.truth == Some(true) && self.verdict != Status::Holds
    }
}

/// Recheck of a negative-curvature direction against the problem data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateAudit {
    pub method: Method,
    /// `‖Ad‖∞ / (‖d‖ ‖A‖_F)`.
    pub feasibility: f64,
    /// `dᵀHd`, recomputed through the operator.
    pub curvature: f64,
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub spec: GeneratorSpec,
    pub records: Vec<TrialRecord>,
    pub verdicts: Vec<SoscVerdict>,
    pub audits: Vec<CertificateAudit>,
    pub reduced_min_eigenvalue: Option<f64>,
}

/// `(N, M, P)` draws and seeds for every trial of the campaign, in order.
pub fn trial_specs(cfg: &CampaignConfig) -> Result<Vec<GeneratorSpec>> {
    let mut specs = Vec::with_capacity(cfg.n_list.len() * cfg.trials_per_n);
    for &n in &cfg.n_list {
        if n < 2 {
            return Err(Error::InvalidProblem(format!("campaign N must be at least 2, got {n}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(n as u64);
        for _ in 0..cfg.trials_per_n {
            let seed = rng.next_u64();
            let mut draw = ChaCha8Rng::seed_from_u64(seed);
            let m = draw.random_range(1..n);
            let p = match cfg.sampling {
                TruthSampling::Uniform => draw.random_range(0..=n),
                TruthSampling::HoldsOnly => draw.random_range(n - m..=n),
            };
            specs.push(GeneratorSpec::new(n, m, p, cfg.conditioning, seed)?);
        }
    }
    Ok(specs)
}

fn run_method(tp: &TestProblem, method: Method, cfg: &CampaignConfig) -> SoscVerdict {
    let problem = tp.problem();
    let exact = tp.exact_null_basis();
    let basis = match cfg.basis {
        BasisSource::Exact => Some(&exact),
        BasisSource::Computed => None,
    };
    match verify_with_basis(&problem, method, basis, &cfg.options) {
        Ok(v) => v,
        Err(Error::RankDeficient { .. }) => inconclusive(method, Inconclusive::RankDeficient),
        Err(e) => inconclusive(method, Inconclusive::Aborted { reason: e.to_string() }),
    }
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

/// Generates the problem for `spec` and runs every configured method on it.
pub fn run_trial(spec: &GeneratorSpec, cfg: &CampaignConfig) -> Result<TrialResult> {
    let tp = generate(spec)?;
    let mut records = Vec::with_capacity(cfg.methods.len());
    let mut verdicts = Vec::with_capacity(cfg.methods.len());
    let mut audits = Vec::new();
    for &method in &cfg.methods {
        let mut verdict = run_method(&tp, method, cfg);
        if spec.n >= cfg.timing_min_n && cfg.timing_repeats > 1 {
            let mut times = vec![verdict.diagnostics.wall_time];
            for _ in 1..cfg.timing_repeats {
                times.push(run_method(&tp, method, cfg).diagnostics.wall_time);
            }
            verdict.diagnostics.wall_time = median(times);
        }
        if let Some(d) = verdict.direction() {
            audits.push(audit(&tp, method, d)?);
        }
        let status = verdict.status();
        records.push(TrialRecord {
            seed: spec.seed,
            n: spec.n,
            m: spec.m,
            p: spec.p,
            conditioning: spec.conditioning,
            method,
            verdict: status,
            truth: Some(tp.truth),
            agree: Some((status == Status::Holds) == tp.truth),
            wall_time_s: verdict.diagnostics.wall_time.as_secs_f64(),
            operator_products: verdict.diagnostics.operator_products,
            continuations: verdict.diagnostics.continuations,
            fail_step: verdict.fail_step(),
        });
        verdicts.push(verdict);
    }
    let reduced_min_eigenvalue = (spec.n <= cfg.eigen_oracle_max_n).then(|| tp.reduced_min_eigenvalue());
    Ok(TrialResult {
        spec: *spec,
        records,
        verdicts,
        audits,
        reduced_min_eigenvalue,
    })
}

fn audit(tp: &TestProblem, method: Method, d: &DVector<f64>) -> Result<CertificateAudit> {
    let problem = tp.problem();
    let hd = problem.hessian.apply(d)?;
    let a = tp.a.matrix();
    Ok(CertificateAudit {
        method,
        feasibility: (a * d).amax() / (d.norm() * tp.a.frobenius()),
        curvature: d.dot(&hd),
    })
}

/// Runs every trial of the campaign; results are in trial order.
pub fn run_campaign(cfg: &CampaignConfig, execution: Execution) -> Result<Vec<TrialResult>> {
    let specs = trial_specs(cfg)?;
    match execution {
        Execution::Sequential => specs.iter().map(|s| run_trial(s, cfg)).collect(),
        Execution::Parallel => parallel_map(&specs, cfg),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map(specs: &[GeneratorSpec], cfg: &CampaignConfig) -> Result<Vec<TrialResult>> {
    use rayon::prelude::*;
    specs.par_iter().map(|s| run_trial(s, cfg)).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map(specs: &[GeneratorSpec], cfg: &CampaignConfig) -> Result<Vec<TrialResult>> {
    specs.iter().map(|s| run_trial(s, cfg)).collect()
}

pub fn records(results: &[TrialResult]) -> impl Iterator<Item = &TrialRecord> {
    results.iter().flat_map(|r| r.records.iter())
}

pub fn write_csv<'a, W: Write>(out: W, records: impl IntoIterator<Item = &'a TrialRecord>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record(r.csv_fields())?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MethodStats {
    pub trials: usize,
    pub truth_holds: usize,
    pub truth_fails: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub errors: usize,
    pub total_time_s: f64,
}

impl MethodStats {
    fn add(&mut self, r: &TrialRecord) {
        self.trials += 1;
        match r.truth {
            Some(true) => self.truth_holds += 1,
            Some(false) => self.truth_fails += 1,
            None => {}
        }
        self.false_positives += r.false_positive() as usize;
        self.false_negatives += r.false_negative() as usize;
        self.errors += (r.verdict == Status::Error) as usize;
        self.total_time_s += r.wall_time_s;
    }

    pub fn false_positive_rate(&self) -> f64 {
        ratio(self.false_positives, self.truth_fails)
    }

    pub fn false_negative_rate(&self) -> f64 {
        ratio(self.false_negatives, self.truth_holds)
    }

    pub fn mean_time_s(&self) -> f64 {
        self.total_time_s / self.trials.max(1) as f64
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Per-`(N, method)` accuracy and timing, plus PCG continuation frequency.
#[derive(Debug, Clone, Default)]
pub struct Summary {
    pub by_n: BTreeMap<(usize, Method), MethodStats>,
    pub by_method: BTreeMap<Method, MethodStats>,
    /// PCG runs on trials where the condition holds, and how many continued.
    pub pcg_holds_runs: usize,
    pub pcg_continued: usize,
}

impl Summary {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a TrialRecord>) -> Self {
        let mut s = Summary::default();
        for r in records {
            s.by_n.entry((r.n, r.method)).or_default().add(r);
            s.by_method.entry(r.method).or_default().add(r);
            if r.method == Method::Pcg && r.truth == Some(true) {
                s.pcg_holds_runs += 1;
                s.pcg_continued += (r.continuations > 0) as usize;
            }
        }
        s
    }

    pub fn pcg_continuation_fraction(&self) -> Option<f64> {
        (self.pcg_holds_runs > 0).then(|| ratio(self.pcg_continued, self.pcg_holds_runs))
    }

    /// False negatives pooled over every (trial, method) pair.
    pub fn pooled_false_negative_rate(&self) -> f64 {
        let (fns, holds) = self
            .by_method
            .values()
            .fold((0, 0), |(a, b), s| (a + s.false_negatives, b + s.truth_holds));
        ratio(fns, holds)
    }

    pub fn false_positives(&self) -> usize {
        self.by_method.values().map(|s| s.false_positives).sum()
    }

    /// Mean wall time relative to the inertia test at the same `N`.
    pub fn time_ratio(&self, n: usize, method: Method) -> Option<f64> {
        let base = self.by_n.get(&(n, Method::Inertia))?.mean_time_s();
        let t = self.by_n.get(&(n, method))?.mean_time_s();
        (base > 0.0).then(|| t / base)
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>6} {:<16} {:>7} {:>6} {:>6} {:>8} {:>8} {:>6} {:>12} {:>9}",
            "N", "method", "trials", "FP", "FN", "FP rate", "FN rate", "errors", "mean time s", "vs LDL"
        )?;
        for (&(n, method), s) in &self.by_n {
            let rel = self
                .time_ratio(n, method)
                .map(|r| format!("{r:.2}"))
                .unwrap_or_else(|| "-".into());
            writeln!(
                f,
                "{:>6} {:<16} {:>7} {:>6} {:>6} {:>8.4} {:>8.4} {:>6} {:>12.3e} {:>9}",
                n,
                method.name(),
                s.trials,
                s.false_positives,
                s.false_negatives,
                s.false_positive_rate(),
                s.false_negative_rate(),
                s.errors,
                s.mean_time_s(),
                rel
            )?;
        }
        if let Some(frac) = self.pcg_continuation_fraction() {
            writeln!(
                f,
                "pcg continued at least once in {}/{} holding trials ({:.1}%)",
                self.pcg_continued,
                self.pcg_holds_runs,
                100.0 * frac
            )?;
        }
        Ok(())
    }
}

/// One row of the Thomson pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ThomsonRecord {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub method: Method,
    pub verdict: Status,
    pub energy: f64,
    pub fonc_residual: f64,
    pub solve_time_s: f64,
    pub wall_time_s: f64,
    pub operator_products: usize,
}

pub const THOMSON_CSV_HEADER: [&str; 10] = [
    "K",
    "N",
    "M",
    "method",
    "verdict",
    "energy",
    "fonc_residual",
    "solve_time_s",
    "wall_time_s",
    "operator_products",
];

impl ThomsonRecord {
    pub fn csv_fields(&self) -> [String; 10] {
        [
            self.k.to_string(),
            self.n.to_string(),
            self.m.to_string(),
            self.method.to_string(),
            self.verdict.to_string(),
            format!("{:.16e}", self.energy),
            format!("{:.16e}", self.fonc_residual),
            format!("{:.16e}", self.solve_time_s),
            format!("{:.16e}", self.wall_time_s),
            self.operator_products.to_string(),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct ThomsonConfig {
    pub k_list: Vec<usize>,
    pub methods: Vec<Method>,
    pub fd_sigma: f64,
    pub solver: ThomsonSolverOptions,
    pub options: SoscOptions,
}

impl Default for ThomsonConfig {
    fn default() -> Self {
        Self {
            k_list: vec![2, 3, 4],
            methods: vec![Method::Cholesky, Method::Diagonalization, Method::Inertia],
            fd_sigma: crate::linalg::DEFAULT_FD_SIGMA,
            solver: ThomsonSolverOptions::default(),
            options: SoscOptions::default(),
        }
    }
}

/// Solves each Thomson instance, then verifies it with each method through
/// a finite-difference operator. A failed solve aborts the run.
pub fn run_thomson(cfg: &ThomsonConfig) -> Result<Vec<ThomsonRecord>> {
    let mut out = Vec::new();
    for &k in &cfg.k_list {
        let clock = Instant::now();
        let sol = solve_thomson_with(k, &cfg.solver)?;
        let solve_time_s = clock.elapsed().as_secs_f64();
        let problem = sol
            .instance
            .finite_difference_problem(&sol.point.x, &sol.point.lambda, cfg.fd_sigma)?;
        for &method in &cfg.methods {
            let verdict = match verify(&problem, method, &cfg.options) {
                Ok(v) => v,
                Err(Error::RankDeficient { .. }) => inconclusive(method, Inconclusive::RankDeficient),
                Err(e) => inconclusive(method, Inconclusive::Aborted { reason: e.to_string() }),
            };
            out.push(ThomsonRecord {
                k,
                n: sol.instance.n(),
                m: sol.instance.m(),
                method,
                verdict: verdict.status(),
                energy: sol.energy,
                fonc_residual: sol.point.fonc_residual,
                solve_time_s,
                wall_time_s: verdict.diagnostics.wall_time.as_secs_f64(),
                operator_products: verdict.diagnostics.operator_products,
            });
        }
    }
    Ok(out)
}

pub fn write_thomson_csv<W: Write>(out: W, records: &[ThomsonRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(THOMSON_CSV_HEADER)?;
    for r in records {
        w.write_record(r.csv_fields())?;
    }
    w.flush()?;
    Ok(())
}
