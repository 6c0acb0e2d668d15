use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use curvcheck::harness::{
    records, run_campaign, run_thomson, write_csv, write_thomson_csv, CampaignConfig, Execution, Summary,
    ThomsonConfig,
};
use curvcheck::linalg::{min_abs_eigenvalue, null_space_basis, symmetric_eigenvalues, BasisMethod, DEFAULT_FD_SIGMA};
use curvcheck::problems::{build_kkt, generate, read_problem, write_problem, ProblemDocument};
use curvcheck::sosc::{verify, Outcome};
use curvcheck::stationary::ThomsonSolverOptions;
use curvcheck::{Conditioning, Error, GeneratorSpec, Method, Problem, SoscOptions, SoscVerdict, Status, Variant};

const EXIT_HOLDS: u8 = 0;
const EXIT_FAILS: u8 = 1;
const EXIT_ERROR: u8 = 2;
const EXIT_IO: u8 = 3;

/// Verify or reject second-order sufficiency at constrained first-order points.
#[derive(Parser)]
#[command(name = "curvcheck", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method on a problem file.
    Check(CheckArgs),
    /// Randomized accuracy and timing campaign over generated problems.
    Bench(BenchArgs),
    /// Solve Thomson problems and verify the minimizers.
    Thomson(ThomsonArgs),
    /// Run every method on a problem file and tabulate the verdicts.
    Compare(CompareArgs),
    /// Write a generated test problem as JSON.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GramSchmidt {
    Classical,
    Modified,
}

#[derive(Args, Clone)]
struct TolArgs {
    #[arg(long)]
    tol_alpha: Option<f64>,
    #[arg(long)]
    tol_rank: Option<f64>,
    #[arg(long)]
    tol_pcg: Option<f64>,
    #[arg(long)]
    tol_pivot: Option<f64>,
    #[arg(long)]
    tol_feas: Option<f64>,
    /// Null-space basis for Cholesky and diagonalization: svd, qr-at, qr-a, lu-a.
    #[arg(long)]
    basis: Option<BasisMethod>,
    #[arg(long, value_enum)]
    variant: Option<GramSchmidt>,
}

impl TolArgs {
    fn options(&self) -> SoscOptions {
        let mut o = SoscOptions::default();
        o.tol_alpha = self.tol_alpha.unwrap_or(o.tol_alpha);
        o.tol_rank = self.tol_rank.unwrap_or(o.tol_rank);
        o.tol_pcg = self.tol_pcg.unwrap_or(o.tol_pcg);
        o.tol_pivot = self.tol_pivot.unwrap_or(o.tol_pivot);
        o.tol_feas = self.tol_feas.unwrap_or(o.tol_feas);
        o.basis = self.basis.unwrap_or(o.basis);
        if let Some(v) = self.variant {
            o.variant = match v {
                GramSchmidt::Classical => Variant::Classical,
                GramSchmidt::Modified => Variant::Modified,
            };
        }
        o
    }
}

#[derive(Args)]
struct CheckArgs {
    problem: PathBuf,
    #[arg(long, default_value = "chol")]
    method: Method,
    #[command(flatten)]
    tol: TolArgs,
    /// Seed for PCG start vectors.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Step for finite-difference Hessian products when the file has no H.
    #[arg(long)]
    fd_sigma: Option<f64>,
    /// Where to write the negative-curvature direction
    /// (default: `<problem>.direction.json`).
    #[arg(long)]
    direction_out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "10")]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    trials_per_n: usize,
    #[arg(long, default_value = "well")]
    conditioning: Conditioning,
    #[arg(long, value_delimiter = ',', default_value = "chol,diag,pcg,bht,inertia")]
    methods: Vec<Method>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run trials on the calling thread only.
    #[arg(long)]
    sequential: bool,
    #[command(flatten)]
    tol: TolArgs,
}

#[derive(Args)]
struct ThomsonArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    k_list: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "chol,diag,inertia")]
    methods: Vec<Method>,
    #[arg(long, default_value_t = DEFAULT_FD_SIGMA)]
    fd_sigma: f64,
    /// Seed for the random starting configuration.
    #[arg(long, default_value_t = 0)]
    solver_seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    tol_fonc: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    problem: PathBuf,
    #[command(flatten)]
    tol: TolArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    fd_sigma: Option<f64>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value = "well")]
    conditioning: Conditioning,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("CURVCHECK_THREADS") {
        let n: usize = v.parse().with_context(|| format!("CURVCHECK_THREADS={v} is not a count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn load(path: &Path, fd_sigma: Option<f64>) -> Result<Problem, ExitCode> {
    read_problem(path, fd_sigma).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(EXIT_IO)
    })
}

fn exit_for(status: Status) -> ExitCode {
    ExitCode::from(match status {
        Status::Holds => EXIT_HOLDS,
        Status::Fails => EXIT_FAILS,
        Status::Error => EXIT_ERROR,
    })
}

fn describe(v: &SoscVerdict) -> String {
    match &v.outcome {
        Outcome::Holds => "holds".into(),
        Outcome::Fails(nc) => {
            let mut s = "fails".to_string();
            if let Some(k) = nc.step {
                s += &format!(" at step {k}");
            }
            if let Some(c) = nc.curvature {
                s += &format!(", curvature {c:.6e}");
            }
            s
        }
        Outcome::Inconclusive(why) => format!("error ({why})"),
    }
}

fn print_diagnostics(v: &SoscVerdict) {
    let d = &v.diagnostics;
    println!("operator products: {}", d.operator_products);
    if v.method == Method::Pcg {
        println!("continuations:     {}", d.continuations);
    }
    if v.method == Method::Bordered {
        println!("minors:            {}", d.minors);
    }
    if let Some(i) = d.inertia {
        println!("inertia:           {i}");
    }
    println!("wall time:         {:.6e} s", d.wall_time.as_secs_f64());
}

fn sidecar_path(problem: &Path) -> PathBuf {
    let mut s = problem.as_os_str().to_owned();
    s.push(".direction.json");
    PathBuf::from(s)
}

fn check(args: CheckArgs) -> ExitCode {
    let problem = match load(&args.problem, args.fd_sigma) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let opts = SoscOptions {
        seed: args.seed,
        ..args.tol.options()
    };
    let verdict = match verify(&problem, args.method, &opts) {
        Ok(v) => v,
        Err(e) => {
            println!("method:  {}", args.method);
            println!("verdict: error ({e})");
            return ExitCode::from(EXIT_ERROR);
        }
    };
    println!("problem: {} (N={}, M={}, L={})", args.problem.display(), problem.n(), problem.m(), problem.null_dim());
    println!("method:  {}", verdict.method);
    println!("verdict: {}", describe(&verdict));
    print_diagnostics(&verdict);

    if let (Some(d), Some(nc)) = (verdict.direction(), verdict.certificate()) {
        let path = args.direction_out.unwrap_or_else(|| sidecar_path(&args.problem));
        let body = json!({
            "direction": d.as_slice(),
            "curvature": nc.curvature,
            "step": nc.step,
        });
        let written = serde_json::to_string_pretty(&body)
            .map_err(io::Error::other)
            .and_then(|text| std::fs::write(&path, text));
        if let Err(e) = written {
            eprintln!("error: writing {}: {e}", path.display());
            return ExitCode::from(EXIT_IO);
        }
        println!("direction: {}", path.display());
    }
    exit_for(verdict.status())
}

fn output(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn bench(args: BenchArgs) -> anyhow::Result<ExitCode> {
    if let Some(&n) = args.n_list.iter().find(|&&n| n < 4) {
        anyhow::bail!("--n-list values must be at least 4, got {n}");
    }
    let cfg = CampaignConfig {
        n_list: args.n_list,
        trials_per_n: args.trials_per_n,
        conditioning: args.conditioning,
        methods: args.methods,
        seed: args.seed,
        options: args.tol.options(),
        ..Default::default()
    };
    let execution = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let results = run_campaign(&cfg, execution)?;
    write_csv(output(&args.out)?, records(&results))?;
    // keep stdout clean for the CSV when no file was given
    let summary = Summary::from_records(records(&results));
    if args.out.is_some() {
        print!("{summary}");
    } else {
        eprint!("{summary}");
    }
    Ok(ExitCode::SUCCESS)
}

fn thomson(args: ThomsonArgs) -> anyhow::Result<ExitCode> {
    if let Some(&k) = args.k_list.iter().find(|&&k| k < 2) {
        anyhow::bail!("--k-list values must be at least 2, got {k}");
    }
    let mut rows = Vec::new();
    let mut failures = 0;
    for &k in &args.k_list {
        let cfg = ThomsonConfig {
            k_list: vec![k],
            methods: args.methods.clone(),
            fd_sigma: args.fd_sigma,
            solver: ThomsonSolverOptions {
                seed: args.solver_seed,
                tol_fonc: args.tol_fonc,
                ..Default::default()
            },
            ..Default::default()
        };
        match run_thomson(&cfg) {
            Ok(r) => rows.extend(r),
            Err(e) => {
                failures += 1;
                eprintln!("K={k}: solver failed: {e}");
            }
        }
    }
    write_thomson_csv(output(&args.out)?, &rows)?;
    let mut report = String::new();
    for r in &rows {
        let base = rows
            .iter()
            .find(|b| b.k == r.k && b.method == Method::Inertia)
            .map(|b| b.wall_time_s);
        let rel = match base {
            Some(b) if b > 0.0 => format!("{:.2}", r.wall_time_s / b),
            _ => "-".into(),
        };
        report += &format!(
            "K={:<4} {:<16} {:<6} E={:.12} products={:<5} time={:.3e}s vs inertia {rel}\n",
            r.k,
            r.method.name(),
            r.verdict,
            r.energy,
            r.operator_products,
            r.wall_time_s
        );
    }
    if args.out.is_some() {
        print!("{report}");
    } else {
        eprint!("{report}");
    }
    Ok(ExitCode::from(if failures == 0 { 0 } else { EXIT_ERROR }))
}

/// Smallest eigenvalue of `WᵀHW` for an orthonormal `W`.
fn eigen_oracle(h: &nalgebra::DMatrix<f64>, problem: &Problem, opts: &SoscOptions) -> curvcheck::Result<f64> {
    let w = null_space_basis(&problem.jacobian, BasisMethod::SvdOfA, opts.tol_rank)?;
    let reduced = w.matrix().transpose() * h * w.matrix();
    Ok(symmetric_eigenvalues(&reduced).first().copied().unwrap_or(f64::INFINITY))
}

fn compare(args: CompareArgs) -> ExitCode {
    let problem = match load(&args.problem, args.fd_sigma) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let opts = SoscOptions {
        seed: args.seed,
        ..args.tol.options()
    };
    println!("problem: {} (N={}, M={}, L={})", args.problem.display(), problem.n(), problem.m(), problem.null_dim());
    println!("{:<16} {:<7} {:>9} {:>12}  detail", "method", "verdict", "products", "time s");
    let mut statuses = Vec::new();
    for method in Method::ALL {
        match verify(&problem, method, &opts) {
            Ok(v) => {
                println!(
                    "{:<16} {:<7} {:>9} {:>12.3e}  {}",
                    method.name(),
                    v.status(),
                    v.diagnostics.operator_products,
                    v.diagnostics.wall_time.as_secs_f64(),
                    describe(&v)
                );
                statuses.push(v.status());
            }
            Err(e) => {
                println!("{:<16} {:<7} {:>9} {:>12}  {e}", method.name(), Status::Error, "-", "-");
                statuses.push(Status::Error);
            }
        }
    }
    if let Some(truth) = problem.truth {
        println!("{:<16} {}", "truth", if truth { Status::Holds } else { Status::Fails });
    }
    if let Some(h) = problem.hessian.explicit().filter(|_| problem.n() <= 500) {
        match eigen_oracle(h, &problem, &opts) {
            Ok(min) => println!(
                "{:<16} {:<7} min eig(WᵀHW) = {min:.6e}",
                "eigen-oracle",
                if min > 0.0 { Status::Holds } else { Status::Fails }
            ),
            Err(e) => println!("{:<16} {:<7} {e}", "eigen-oracle", Status::Error),
        }
        if let Ok(k) = build_kkt(h, problem.jacobian.matrix()) {
            let smallest = min_abs_eigenvalue(&k);
            let scale = k.norm();
            if smallest <= f64::EPSILON.sqrt() * scale {
                println!("near-singular KKT: min |eig(K)| = {smallest:.3e} (‖K‖_F = {scale:.3e}); disagreement is expected");
            }
        }
    }
    let agree = statuses.windows(2).all(|w| w[0] == w[1]);
    println!("agreement: {}", if agree { "all methods agree" } else { "methods disagree" });
    exit_for(if agree { statuses[0] } else { Status::Error })
}

fn generate_cmd(args: GenerateArgs) -> anyhow::Result<ExitCode> {
    let spec = GeneratorSpec::new(args.n, args.m, args.p, args.conditioning, args.seed)?;
    let tp = generate(&spec)?;
    let doc = ProblemDocument::from_problem(&tp.problem());
    write_problem(&args.out, &doc)?;
    println!(
        "wrote {} (N={}, M={}, P={}, truth={})",
        args.out.display(),
        spec.n,
        spec.m,
        spec.p,
        tp.truth
    );
    Ok(ExitCode::SUCCESS)
}

fn report(result: anyhow::Result<ExitCode>) -> ExitCode {
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        let io = e
            .chain()
            .any(|c| c.is::<io::Error>() || matches!(c.downcast_ref::<Error>(), Some(Error::Io(_) | Error::Json(_) | Error::Csv(_))));
        ExitCode::from(if io { EXIT_IO } else { EXIT_ERROR })
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_IO);
    }
    match cli.command {
        Command::Check(a) => check(a),
        Command::Compare(a) => compare(a),
        Command::Bench(a) => report(bench(a)),
        Command::Thomson(a) => report(thomson(a)),
        Command::Generate(a) => report(generate_cmd(a)),
    }
}
