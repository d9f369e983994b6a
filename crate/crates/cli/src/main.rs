use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use futurerand::audit::{
    all_sign_vectors, all_streams, audit_randomizer, client_output_distribution, compare_client_distributions,
    AuditReport,
};
use futurerand::baselines::baseline_config;
use futurerand::dyadic::{DerivativeStream, Horizon};
use futurerand::harness::{
    hoeffding_bound, regime_ok, run_experiment, scaling_study, simulate_rep_reports, write_outputs, ChangeModel,
    ExperimentSpec,
};
use futurerand::protocol::{estimate_from_records, read_records, write_records, Algorithm, Mechanism, Perturbation};
use futurerand::precision::real;
use futurerand::randomizer::{gap_lower_bound_expr, RandomizerConfig, SignVector};
use futurerand::Error;

#[derive(Parser)]
#[command(name = "futurerand", version, about = "Longitudinal LDP frequency estimation: simulate, audit, inspect")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run repeated end-to-end simulations and report errors against the Hoeffding bound.
    Simulate(SimulateArgs),
    /// Exact privacy audits by enumeration.
    #[command(subcommand)]
    Audit(AuditCommand),
    /// Print randomizer parameters and ⟨gap⟩.
    Gap(GapArgs),
    /// Error scaling in k for several algorithms, with log-log slopes.
    Scaling(ScalingArgs),
    /// Replay an NDJSON report log through the server and print f̂ as CSV.
    Estimate(EstimateArgs),
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long, default_value_t = 1)]
    reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "uniform")]
    change_model: ChangeModel,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "futurerand")]
    algo: Algorithm,
    /// Directory for summary.json and per_t.csv; the summary goes to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the rep-0 report records as NDJSON to this file.
    #[arg(long)]
    emit_reports: Option<PathBuf>,
}

#[derive(Subcommand)]
enum AuditCommand {
    /// Audit the composed randomizer over all 2^k inputs (or a listed subset).
    Randomizer {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        /// futurerand or bns19.
        #[arg(long, default_value = "futurerand")]
        algo: Algorithm,
        /// Input bitmasks (bit i set means coordinate i is -1); all inputs if omitted.
        #[arg(long, value_delimiter = ',')]
        inputs: Vec<u64>,
        /// Audit a hand-picked per-bit budget against the claimed --eps instead of the derived one.
        #[arg(long)]
        eps_tilde: Option<f64>,
        /// Annulus lower bound for --eps-tilde (default 0).
        #[arg(long, requires = "eps_tilde")]
        lb: Option<usize>,
        /// Annulus upper bound for --eps-tilde (default k).
        #[arg(long, requires = "eps_tilde")]
        ub: Option<usize>,
    },
    /// Audit the full client transcript on a pair of streams, or on every pair.
    Client {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        #[arg(long, default_value = "futurerand")]
        algo: Algorithm,
        /// Derivative entries, e.g. 0,1,0,-1.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "stream_b")]
        stream_a: Vec<i8>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "stream_a")]
        stream_b: Vec<i8>,
    },
}

#[derive(Args)]
struct GapArgs {
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value = "futurerand")]
    algo: Algorithm,
}

#[derive(Args)]
struct ScalingArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    k_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "futurerand,sample-one")]
    algos: Vec<Algorithm>,
    /// Write the table as JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value = "futurerand")]
    algo: Algorithm,
}

enum Failure {
    Error(Error),
    Audit(Value),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Error(e.into())
    }
}

type CliResult = Result<(), Failure>;

fn print_json(value: &impl serde::Serialize) -> CliResult {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(Error::from)?;
    writeln!(out)?;
    Ok(())
}

fn spec_from(common: &CommonArgs, k: usize, algorithm: Algorithm, out: Option<PathBuf>) -> ExperimentSpec {
    ExperimentSpec {
        n: common.n,
        d: common.d,
        k,
        eps: common.eps,
        beta: common.beta,
        algorithm,
        reps: common.reps,
        seed: common.seed,
        change_model: common.change_model,
        out,
    }
}

fn simulate(args: SimulateArgs) -> CliResult {
    let spec = spec_from(&args.common, args.k, args.algo, args.out.clone());
    let metrics = run_experiment(&spec)?;
    if let Some(path) = &args.emit_reports {
        let mech = spec.mechanism()?;
        let (_, reports) = simulate_rep_reports(&spec, &mech, 0)?;
        let file = BufWriter::new(File::create(path)?);
        write_records(file, reports.iter().flat_map(|r| r.records()))?;
    }
    match &args.out {
        Some(dir) => {
            write_outputs(&metrics, dir)?;
            eprintln!(
                "{} reps: mean max error {:.1}, bound {:.1}, {} exceedances; wrote {}",
                spec.reps,
                metrics.summary.mean,
                metrics.bound,
                metrics.exceedances,
                dir.display()
            );
            Ok(())
        }
        None => print_json(&metrics),
    }
}

fn composed_config(algo: Algorithm, k: usize, eps: f64) -> Result<RandomizerConfig, Error> {
    match Mechanism::new(algo, k, eps)?.perturbation() {
        Perturbation::Precomputed(cfg) => Ok(cfg.clone()),
        _ => Err(Error::Configuration(format!(
            "{algo} does not use a composed randomizer; audit it with `audit client`"
        ))),
    }
}

fn audit_result(report: &AuditReport, extra: Value) -> CliResult {
    let mut value = serde_json::to_value(report).map_err(Error::from)?;
    if let (Value::Object(map), Value::Object(more)) = (&mut value, extra) {
        map.extend(more);
    }
    if report.pass {
        print_json(&value)
    } else {
        Err(Failure::Audit(value))
    }
}

fn audit(cmd: AuditCommand) -> CliResult {
    match cmd {
        AuditCommand::Randomizer {
            k,
            eps,
            algo,
            inputs,
            eps_tilde,
            lb,
            ub,
        } => {
            let cfg = match eps_tilde {
                Some(x) => RandomizerConfig::with_annulus(k, eps, real(x), lb.unwrap_or(0), ub.unwrap_or(k))?,
                None => composed_config(algo, k, eps)?,
            };
            let inputs: Vec<SignVector> = if inputs.is_empty() {
                if k > futurerand::audit::MAX_AUDIT_K {
                    return Err(Error::Capacity {
                        what: "k for randomizer audit",
                        value: k,
                        limit: futurerand::audit::MAX_AUDIT_K,
                    }
                    .into());
                }
                all_sign_vectors(k)
            } else {
                inputs.iter().map(|&m| SignVector::from_mask(k, m)).collect()
            };
            let report = audit_randomizer(&cfg, &inputs)?;
            audit_result(&report, json!({ "algorithm": algo, "k": k, "inputs": inputs.len() }))
        }
        AuditCommand::Client {
            d,
            k,
            eps,
            algo,
            stream_a,
            stream_b,
        } => {
            let mech = Mechanism::new(algo, k, eps)?;
            let horizon = Horizon::new(d)?;
            let streams = if stream_a.is_empty() {
                all_streams(d, k)?
            } else {
                vec![
                    DerivativeStream::from_entries(&stream_a)?,
                    DerivativeStream::from_entries(&stream_b)?,
                ]
            };
            let dists = streams
                .iter()
                .map(|s| client_output_distribution(&mech, horizon, s))
                .collect::<Result<Vec<_>, _>>()?;
            let mut worst: Option<AuditReport> = None;
            let mut pairs = 0u64;
            let mut failures = 0u64;
            for (i, (sa, da)) in streams.iter().zip(&dists).enumerate() {
                for (sb, db) in streams.iter().zip(&dists).skip(i + 1) {
                    let r = compare_client_distributions(eps, (sa, da), (sb, db));
                    pairs += 1;
                    failures += u64::from(!r.pass);
                    if worst.as_ref().is_none_or(|w| r.max_ratio > w.max_ratio) {
                        worst = Some(r);
                    }
                }
            }
            let worst = match worst {
                Some(w) => w,
                None => compare_client_distributions(eps, (&streams[0], &dists[0]), (&streams[0], &dists[0])),
            };
            audit_result(
                &worst,
                json!({ "algorithm": algo, "d": d, "k": k, "pairs": pairs, "failures": failures }),
            )
        }
    }
}

fn gap(args: GapArgs) -> CliResult {
    let value = match args.algo {
        Algorithm::FutureRand => {
            let cfg = composed_config(Algorithm::FutureRand, args.k, args.eps)?;
            let mut v = serde_json::to_value(cfg.summary()).map_err(Error::from)?;
            v["algorithm"] = json!(Algorithm::FutureRand);
            v["effective_gap"] = json!(cfg.gap().to_f64());
            v["lower_bound"] = json!(gap_lower_bound_expr(&cfg).map(|l| l.to_f64()));
            v
        }
        other => serde_json::to_value(baseline_config(other, args.k, args.eps)?.summary()).map_err(Error::from)?,
    };
    print_json(&value)
}

fn scaling(args: ScalingArgs) -> CliResult {
    let base = spec_from(&args.common, args.k_grid[0], args.algos[0], None);
    let table = scaling_study(&base, &args.k_grid, &args.algos)?;
    for row in &table.rows {
        eprintln!(
            "{:>11} k={:<6} rms max error {:>14.1}  effective gap {:.3e}",
            row.algorithm, row.k, row.rms_max_err, row.effective_gap
        );
    }
    for s in &table.slopes {
        eprintln!("{:>11} slope {:.3} (1/gap slope {:.3})", s.algorithm, s.slope, s.gap_slope);
    }
    match args.out {
        Some(path) => {
            serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), &table).map_err(Error::from)?;
            Ok(())
        }
        None => print_json(&table),
    }
}

fn estimate(args: EstimateArgs) -> CliResult {
    let mech = Mechanism::new(args.algo, args.k, args.eps)?;
    let horizon = Horizon::new(args.d)?;
    let records = read_records(BufReader::new(File::open(&args.records)?))?;
    let est = estimate_from_records(&mech, horizon, args.n, &records)?;
    let bound = hoeffding_bound(&mech, horizon, args.n, 0.1).to_f64();
    let stdout = std::io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    writeln!(out, "t,fhat")?;
    for (t, f) in est.iter().enumerate() {
        writeln!(out, "{},{}", t + 1, f)?;
    }
    out.flush()?;
    eprintln!(
        "{} records; bound at beta = 0.1: {bound:.1}; regime ok: {}",
        records.len(),
        regime_ok(args.eps, args.d, args.k, 0.1, args.n)
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Audit(a) => audit(a),
        Command::Gap(a) => gap(a),
        Command::Scaling(a) => scaling(a),
        Command::Estimate(a) => estimate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Audit(report)) => {
            println!("{}", serde_json::to_string_pretty(&report).unwrap_or_default());
            eprintln!("audit failed: privacy ratio exceeds e^eps");
            ExitCode::from(3)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_configuration() { 2 } else { 1 })
        }
    }
}
