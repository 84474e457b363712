//! Command-line front end: generate instances, run the scaling and balancing
//! solvers with a chosen estimator backend, verify results, and benchmark.
//!
//! Exit codes: 0 on success (test passed or random stop), 2 when a solver
//! exhausted its iteration budget or a verification failed, 1 on usage or
//! input errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use scalebal::diagnostics::{self, MetricReport};
use scalebal::estimators::{BackendKind, EstimatorBackend};
use scalebal::fixedpoint::{FixedPoint, Rational};
use scalebal::hp::Real;
use scalebal::instances;
use scalebal::oracle::{LedgerSnapshot, QueryLedger, SparseMatrix, TargetMarginals};
use scalebal::osborne;
use scalebal::sinkhorn::{self, SinkhornParams, StopReason};

#[derive(Parser)]
#[command(name = "scalebal", version, about = "Matrix scaling and balancing over sparse oracles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scale a matrix to target marginals.
    Scale(ScaleArgs),
    /// Balance a matrix (equal row and column sums per index).
    Balance(BalanceArgs),
    /// Generate test instances.
    Gen(GenArgs),
    /// Recompute the metrics of a stored scaling or balancing.
    Verify(VerifyArgs),
    /// Run one instance under every backend and emit a CSV comparison.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Exact,
    Classical,
    QuantumSim,
}

impl From<BackendArg> for BackendKind {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Exact => BackendKind::Exact,
            BackendArg::Classical => BackendKind::Classical,
            BackendArg::QuantumSim => BackendKind::QuantumSim,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Full,
    Random,
    Positive,
}

#[derive(Args)]
struct ScaleArgs {
    /// Matrix file ("n m" header, then "i j num/den" lines).
    #[arg(long)]
    input: PathBuf,
    /// Marginals file (2n lines "i num/den": rows then columns).
    #[arg(long)]
    targets: PathBuf,
    /// Target accuracy in relative entropy, e.g. "0.1" or "1/10".
    #[arg(long)]
    epsilon: String,
    #[arg(long, value_enum, default_value = "classical")]
    backend: BackendArg,
    #[arg(long, value_enum, default_value = "full")]
    variant: VariantArg,
    /// Failure probability for the randomized variant.
    #[arg(long, default_value = "1/3")]
    p: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write a per-iteration CSV trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Output JSON path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Boost the randomized variant by repetition plus certification.
    #[arg(long)]
    boost: bool,
}

#[derive(Args)]
struct BalanceArgs {
    #[arg(long)]
    input: PathBuf,
    /// Target normalized l1 imbalance.
    #[arg(long)]
    epsilon: String,
    #[arg(long, default_value = "1/3")]
    p: String,
    #[arg(long, value_enum, default_value = "classical")]
    backend: BackendArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Boost by repetition plus an estimated balance test.
    #[arg(long)]
    boost: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Gadget,
    Scalable,
    Balanceable,
    Positive,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    #[arg(long)]
    n: usize,
    /// Sparsity per row/column (gadget instances).
    #[arg(long)]
    s: Option<usize>,
    /// Approximate number of potentially non-zero entries.
    #[arg(long)]
    m: Option<usize>,
    /// Lower bound on non-zero entries, e.g. "1/256".
    #[arg(long, default_value = "1/4096")]
    mu: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write uniform target marginals here.
    #[arg(long)]
    targets_out: Option<PathBuf>,
    /// Write the hidden descriptor bits here (gadget instances).
    #[arg(long)]
    descriptor_out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    input: PathBuf,
    /// Marginals file; required for scaling results.
    #[arg(long)]
    targets: Option<PathBuf>,
    /// JSON produced by `scale` or `balance`.
    #[arg(long)]
    scaling: PathBuf,
    #[arg(long)]
    epsilon: String,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    targets: PathBuf,
    #[arg(long)]
    epsilon: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct ScaleOutput {
    command: String,
    backend: String,
    variant: String,
    seed: u64,
    epsilon: String,
    format: [u32; 2],
    stopped_reason: String,
    iterations: u64,
    x: Vec<f64>,
    y: Vec<f64>,
    x_fixed: Vec<String>,
    y_fixed: Vec<String>,
    metrics: serde_json::Value,
    ledger: LedgerSnapshot,
}

#[derive(Serialize, Deserialize)]
struct BalanceOutput {
    command: String,
    backend: String,
    seed: u64,
    epsilon: String,
    format: [u32; 2],
    iterations: u64,
    balanced: bool,
    residual: f64,
    x: Vec<f64>,
    x_fixed: Vec<String>,
    ledger: LedgerSnapshot,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Scale(args) => cmd_scale(args),
        Command::Balance(args) => cmd_balance(args),
        Command::Gen(args) => cmd_gen(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn parse_rational(s: &str, what: &str) -> Result<Rational, String> {
    let q = Rational::from_str(s).map_err(|e| format!("bad {what} '{s}': {e}"))?;
    if q.is_zero() || q > Rational::one() {
        return Err(format!("{what} must lie in (0, 1]"));
    }
    Ok(q)
}

fn read_matrix(path: &Path) -> Result<SparseMatrix, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    SparseMatrix::from_text(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn read_targets(path: &Path) -> Result<TargetMarginals, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    TargetMarginals::from_text(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_out(path: &Option<PathBuf>, content: &str) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, content).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn fixed_strings(v: &[FixedPoint]) -> (Vec<f64>, Vec<String>) {
    (v.iter().map(|f| f.to_f64()).collect(), v.iter().map(|f| f.to_string()).collect())
}

fn scale_trace_csv(trace: &sinkhorn::ConvergenceTrace) -> String {
    let mut out =
        String::from("t,potential,d_row,d_col,l1_row,l1_col,classical_queries,quantum_queries\n");
    for row in &trace.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.t,
            row.potential,
            row.d_row,
            row.d_col,
            row.l1_row,
            row.l1_col,
            row.classical_queries,
            row.quantum_queries
        ));
    }
    out
}

fn cmd_scale(args: ScaleArgs) -> Result<ExitCode, String> {
    let a = read_matrix(&args.input)?;
    let targets = read_targets(&args.targets)?;
    if targets.len() != a.dim() {
        return Err("targets length does not match the matrix dimension".into());
    }
    let epsilon = parse_rational(&args.epsilon, "epsilon")?;
    let p = parse_rational(&args.p, "p")?;
    let variant_name = match args.variant {
        VariantArg::Full => "full",
        VariantArg::Random => "random",
        VariantArg::Positive => "positive",
    };

    let params: SinkhornParams = match args.variant {
        VariantArg::Full => {
            sinkhorn::derive_params_full(a.dim(), &a.mu(), &targets.sigma(), &epsilon)
                .map_err(|e| e.to_string())?
        }
        VariantArg::Random => {
            sinkhorn::derive_params_randomized(a.dim(), &a.mu(), &targets.sigma(), &epsilon, &p)
                .map_err(|e| e.to_string())?
        }
        VariantArg::Positive => {
            sinkhorn::derive_params_positive(&a, &targets, &epsilon).map_err(|e| e.to_string())?
        }
    };
    let backend = EstimatorBackend::new(args.backend.into(), params.delta, params.eta, args.seed)
        .map_err(|e| e.to_string())?;
    let ledger = QueryLedger::new();
    let want_trace = args.trace.is_some();

    let (state, trace) = match (args.variant, args.boost) {
        (VariantArg::Random, false) => {
            sinkhorn::run_randomized_sinkhorn(&a, &targets, &backend, &params, &ledger, want_trace)
        }
        (VariantArg::Random, true) => {
            sinkhorn::run_randomized_boosted(&a, &targets, &backend, &epsilon, &p, &ledger)
        }
        _ => sinkhorn::run_full_sinkhorn(&a, &targets, &backend, &params, &ledger, want_trace),
    }
    .map_err(|e| e.to_string())?;

    if let Some(path) = &args.trace {
        std::fs::write(path, scale_trace_csv(&trace)).map_err(|e| format!("{}: {e}", path.display()))?;
    }

    let xs: Vec<Real> = state.x.iter().map(|v| v.to_real()).collect();
    let ys: Vec<Real> = state.y.iter().map(|v| v.to_real()).collect();
    let metrics = diagnostics::metric_report(&a, &targets, &xs, &ys);
    let (x, x_fixed) = fixed_strings(&state.x);
    let (y, y_fixed) = fixed_strings(&state.y);
    let output = ScaleOutput {
        command: "scale".into(),
        backend: format!("{}", BackendKind::from(args.backend)),
        variant: variant_name.into(),
        seed: args.seed,
        epsilon: epsilon.to_string(),
        format: [params.b1, params.b2],
        stopped_reason: stop_name(state.stopped).into(),
        iterations: state.iteration,
        x,
        y,
        x_fixed,
        y_fixed,
        metrics: serde_json::to_value(&metrics).unwrap(),
        ledger: ledger.snapshot(),
    };
    write_out(&args.out, &serde_json::to_string_pretty(&output).unwrap())?;
    Ok(match state.stopped {
        StopReason::Exhausted => ExitCode::from(2),
        _ => ExitCode::SUCCESS,
    })
}

fn stop_name(s: StopReason) -> &'static str {
    match s {
        StopReason::TestPassed => "test-passed",
        StopReason::Exhausted => "exhausted",
        StopReason::RandomStop => "random-stop",
    }
}

fn cmd_balance(args: BalanceArgs) -> Result<ExitCode, String> {
    let a = read_matrix(&args.input)?;
    let epsilon = parse_rational(&args.epsilon, "epsilon")?;
    let p = parse_rational(&args.p, "p")?;
    let params = osborne::derive_params_osborne(&a, &epsilon, &p).map_err(|e| e.to_string())?;
    let backend = EstimatorBackend::new(args.backend.into(), params.delta, params.eta, args.seed)
        .map_err(|e| e.to_string())?;
    let ledger = QueryLedger::new();

    let (state, certified, trace) = if args.boost {
        let (state, ok) = osborne::run_osborne_boosted(&a, &backend, &epsilon, &p, &ledger)
            .map_err(|e| e.to_string())?;
        (state, Some(ok), Vec::new())
    } else {
        let (state, trace) =
            osborne::run_random_osborne(&a, &backend, &params, &ledger, args.trace.is_some())
                .map_err(|e| e.to_string())?;
        (state, None, trace)
    };

    if let Some(path) = &args.trace {
        let mut csv = String::from("t,potential,residual,classical_queries,quantum_queries\n");
        for row in &trace {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                row.t, row.potential, row.residual, row.classical_queries, row.quantum_queries
            ));
        }
        std::fs::write(path, csv).map_err(|e| format!("{}: {e}", path.display()))?;
    }

    let xs: Vec<Real> = state.x.iter().map(|v| v.to_real()).collect();
    let (balanced, residual) = osborne::check_balanced(&a, &xs, &epsilon);
    let (x, x_fixed) = fixed_strings(&state.x);
    let output = BalanceOutput {
        command: "balance".into(),
        backend: format!("{}", BackendKind::from(args.backend)),
        seed: args.seed,
        epsilon: epsilon.to_string(),
        format: [params.b1, params.b2],
        iterations: state.iteration,
        balanced,
        residual: residual.to_f64(),
        x,
        x_fixed,
        ledger: ledger.snapshot(),
    };
    write_out(&args.out, &serde_json::to_string_pretty(&output).unwrap())?;
    Ok(if certified == Some(false) { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn cmd_gen(args: GenArgs) -> Result<ExitCode, String> {
    let mu = Rational::from_str(&args.mu).map_err(|e| format!("bad mu: {e}"))?;
    let (matrix, descriptor) = match args.kind {
        GenKind::Gadget => {
            let s = args.s.ok_or("gadget instances need --s")?;
            let inst = instances::build_gadget_instance(args.n, s, args.seed)
                .map_err(|e| e.to_string())?;
            (inst.matrix, Some(inst.descriptor))
        }
        GenKind::Scalable => {
            let m = args.m.unwrap_or(3 * args.n);
            (instances::random_scalable(args.n, m, &mu, args.seed).map_err(|e| e.to_string())?, None)
        }
        GenKind::Balanceable => {
            let m = args.m.unwrap_or(3 * args.n);
            (
                instances::random_balanceable(args.n, m, &mu, args.seed)
                    .map_err(|e| e.to_string())?,
                None,
            )
        }
        GenKind::Positive => {
            (instances::random_positive(args.n, args.seed).map_err(|e| e.to_string())?, None)
        }
    };
    std::fs::write(&args.out, matrix.to_text()).map_err(|e| format!("{}: {e}", args.out.display()))?;
    if let Some(path) = &args.targets_out {
        let t = TargetMarginals::uniform(args.n);
        std::fs::write(path, t.to_text()).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if let Some(path) = &args.descriptor_out {
        let z = descriptor.ok_or("descriptor output is only available for gadget instances")?;
        let line: String = z.iter().map(|b| char::from(b'0' + b)).collect();
        std::fs::write(path, format!("{line}\n")).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_fixed_vec(vals: &[String]) -> Result<Vec<FixedPoint>, String> {
    vals.iter().map(|s| FixedPoint::from_str(s).map_err(|e| format!("bad fixed-point '{s}': {e}"))).collect()
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, String> {
    let a = read_matrix(&args.input)?;
    let epsilon = parse_rational(&args.epsilon, "epsilon")?;
    let text = std::fs::read_to_string(&args.scaling)
        .map_err(|e| format!("{}: {e}", args.scaling.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", args.scaling.display()))?;
    let command = value.get("command").and_then(|v| v.as_str()).unwrap_or("scale");

    if command == "balance" {
        let parsed: BalanceOutput = serde_json::from_value(value).map_err(|e| e.to_string())?;
        let x = parse_fixed_vec(&parsed.x_fixed)?;
        let xs: Vec<Real> = x.iter().map(|v| v.to_real()).collect();
        let (ok, residual) = osborne::check_balanced(&a, &xs, &epsilon);
        println!("{{\"residual\": {}, \"verdict\": \"{}\"}}", residual.to_f64(), if ok { "PASS" } else { "FAIL" });
        return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(2) });
    }

    let targets_path = args.targets.as_ref().ok_or("scaling verification needs --targets")?;
    let targets = read_targets(targets_path)?;
    let parsed: ScaleOutput = serde_json::from_value(value).map_err(|e| e.to_string())?;
    let x = parse_fixed_vec(&parsed.x_fixed)?;
    let y = parse_fixed_vec(&parsed.y_fixed)?;
    if x.len() != a.dim() || y.len() != a.dim() {
        return Err("scaling vector length does not match the matrix".into());
    }
    let xs: Vec<Real> = x.iter().map(|v| v.to_real()).collect();
    let ys: Vec<Real> = y.iter().map(|v| v.to_real()).collect();
    let report: MetricReport = diagnostics::metric_report(&a, &targets, &xs, &ys);
    let eps = epsilon.to_f64();
    let ok = report.d_row <= eps && report.d_col <= eps;
    let mut doc = serde_json::to_value(&report).unwrap();
    doc["verdict"] = serde_json::Value::String(if ok { "PASS" } else { "FAIL" }.into());
    println!("{}", serde_json::to_string_pretty(&doc).unwrap());
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode, String> {
    let a = read_matrix(&args.input)?;
    let targets = read_targets(&args.targets)?;
    let epsilon = parse_rational(&args.epsilon, "epsilon")?;
    let params = sinkhorn::derive_params_full(a.dim(), &a.mu(), &targets.sigma(), &epsilon)
        .map_err(|e| e.to_string())?;
    let mut csv = String::from(
        "n,m,epsilon,backend,iterations,classical_queries,quantum_charged_queries,wall_time_ms\n",
    );
    for kind in [BackendKind::Exact, BackendKind::Classical, BackendKind::QuantumSim] {
        let backend = EstimatorBackend::new(kind, params.delta, params.eta, args.seed)
            .map_err(|e| e.to_string())?;
        let ledger = QueryLedger::new();
        let started = Instant::now();
        let (state, _) = sinkhorn::run_full_sinkhorn(&a, &targets, &backend, &params, &ledger, false)
            .map_err(|e| e.to_string())?;
        let elapsed = started.elapsed().as_millis();
        let snap = ledger.snapshot();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            a.dim(),
            a.nnz(),
            epsilon,
            kind,
            state.iteration,
            snap.entry_queries,
            snap.quantum_charged_queries,
            elapsed
        ));
    }
    write_out(&args.out, &csv)?;
    Ok(ExitCode::SUCCESS)
}
