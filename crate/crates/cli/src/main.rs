//! `seed`: column selection, sparse self-expressive decompositions and their
//! applications from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error
//! (parse, format, I/O), 3 numerical failure. Every failure prints one line
//! starting with `SEED-ERR:` to stderr.

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use seed_core::applications::{denoise, detect_outliers, error_curve, ThresholdMode};
use seed_core::coclustering::cocluster;
use seed_core::io::{load_matrix, save_decomposition, save_matrix, MatrixFormat};
use seed_core::oasis::{oasis_select, DeltaStop};
use seed_core::pipeline::{relative_error, seed_decompose, SeedConfig, Variant};
use seed_core::samplers::{select_columns, SamplerMethod};
use seed_core::sparse_coding::StoppingRule;
use seed_core::synth::Preset;
use seed_core::{DataMatrix, SeedError};

use report::{histogram, RunReport};

#[derive(Debug, Parser)]
#[command(name = "seed", version, about = "Sparse self-expressive decompositions")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Random seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Write a JSON run report to this path.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Approximation error curves of column samplers.
    Approx(ApproxArgs),
    /// Column selection only: prints the selected indices.
    Select(SelectArgs),
    /// Full decomposition, saved to --out.
    Decompose(DecomposeArgs),
    /// Decomposition followed by co-clustering of the code.
    Cluster(ClusterArgs),
    /// Writes the reconstruction of the decomposition.
    Denoise(DenoiseArgs),
    /// Flags columns with dense zero-diagonal codes.
    Outliers(OutlierArgs),
    /// Generates a synthetic fixture.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    /// csv or seedbin (default: from the file extension).
    #[arg(long)]
    format: Option<String>,
    /// CSV lines are dimensions rather than data points.
    #[arg(long)]
    no_transpose: bool,
}

#[derive(Debug, Args)]
struct SeedArgs {
    /// Number of columns to select.
    #[arg(long = "L")]
    l: usize,
    #[arg(long, default_value = "oasis")]
    method: String,
    /// Absolute oASIS stop threshold on max |Δ| (default: 1e-10 · max ‖x_i‖²).
    #[arg(long)]
    delta: Option<f64>,
    /// Residual tolerance of the sparse coder.
    #[arg(long)]
    eps: Option<f64>,
    /// Maximum atoms per column.
    #[arg(long)]
    kmax: Option<usize>,
    /// diag or zerodiag.
    #[arg(long, default_value = "diag")]
    variant: String,
}

#[derive(Debug, Args)]
struct ApproxArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma-separated sampler names.
    #[arg(long, value_delimiter = ',', default_value = "oasis")]
    method: Vec<String>,
    /// Comma-separated column counts.
    #[arg(long = "L", value_delimiter = ',', required = true)]
    l: Vec<usize>,
    /// Seeds averaged for randomized samplers, starting at --seed.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long = "L")]
    l: usize,
    #[arg(long, default_value = "oasis")]
    method: String,
    #[arg(long)]
    delta: Option<f64>,
    /// Write the indices, one per line.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DecomposeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    seed: SeedArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    seed: SeedArgs,
    /// Number of clusters.
    #[arg(long)]
    k: usize,
}

#[derive(Debug, Args)]
struct DenoiseArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    seed: SeedArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct OutlierArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    seed: SeedArgs,
    /// Fixed sparsity threshold (default: two-cluster k-means).
    #[arg(long)]
    threshold: Option<usize>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// uos-paper, five-subspaces, low-rank or duplicated.
    #[arg(long)]
    preset: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    no_transpose: bool,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<SeedError> for Failure {
    fn from(e: SeedError) -> Self {
        let code = match &e {
            SeedError::InvalidConfig(_) => 1,
            e if e.is_numerical() => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("SEED-ERR: usage: {first}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("SEED-ERR: {}", f.message.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let threads = match cli.threads {
        Some(0) => return Err(usage("--threads must be positive")),
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| usage(format!("cannot start thread pool: {e}")))?;
    let start = Instant::now();
    let mut report = RunReport::new(command_name(&cli.command), cli.seed, threads);
    pool.install(|| execute(&cli.command, cli.seed, &mut report))?;
    report.timings.total_seconds = start.elapsed().as_secs_f64();
    if let Some(path) = &cli.report {
        report.write(path).map_err(Failure::from)?;
    }
    Ok(())
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Approx(_) => "approx",
        Command::Select(_) => "select",
        Command::Decompose(_) => "decompose",
        Command::Cluster(_) => "cluster",
        Command::Denoise(_) => "denoise",
        Command::Outliers(_) => "outliers",
        Command::Synth(_) => "synth",
    }
}

fn parse_format(flag: Option<&str>, path: &Path) -> Result<MatrixFormat, Failure> {
    match flag {
        Some(f) => Ok(f.parse()?),
        None => Ok(MatrixFormat::from_path(path)),
    }
}

fn load(args: &InputArgs) -> Result<DataMatrix, Failure> {
    let format = parse_format(args.format.as_deref(), &args.input)?;
    Ok(load_matrix(&args.input, format, !args.no_transpose)?)
}

fn input_echo(args: &InputArgs, x: &DataMatrix) -> Value {
    json!({
        "input": args.input.display().to_string(),
        "rows": x.nrows(),
        "columns": x.ncols(),
    })
}

fn seed_config(args: &SeedArgs, seed: u64) -> Result<SeedConfig, Failure> {
    let stop = StoppingRule::new(args.kmax, args.eps)?;
    let variant: Variant = args.variant.parse()?;
    let mut cfg = SeedConfig::new(args.l, stop, variant, seed);
    cfg.sampler.method = args.method.parse()?;
    if let Some(d) = args.delta {
        cfg.oasis.delta_stop = DeltaStop::Absolute(d);
    }
    Ok(cfg)
}

fn seed_echo(args: &SeedArgs) -> Value {
    json!({
        "L": args.l,
        "method": args.method,
        "delta": args.delta,
        "eps": args.eps,
        "kmax": args.kmax,
        "variant": args.variant,
    })
}

fn execute(command: &Command, seed: u64, report: &mut RunReport) -> Result<(), Failure> {
    match command {
        Command::Approx(a) => {
            let x = load(&a.input)?;
            let methods = a
                .method
                .iter()
                .map(|m| m.parse::<SamplerMethod>())
                .collect::<Result<Vec<_>, _>>()?;
            if a.seeds == 0 {
                return Err(usage("--seeds must be positive"));
            }
            let seeds: Vec<u64> = (seed..seed + a.seeds).collect();
            let curves = error_curve(&x, &methods, &a.l, &seeds)?;
            report.config = json!({ "data": input_echo(&a.input, &x), "methods": a.method, "L": a.l, "seeds": seeds });
            let mut out = Vec::new();
            for c in &curves {
                for p in &c.points {
                    println!("{}\tL={}\terror={:.6e}\tstderr={:.3e}", c.method.name(), p.columns, p.mean, p.stderr);
                    report.timings.push(format!("{}/L={}", c.method.name(), p.columns), p.seconds);
                }
                if c.method == SamplerMethod::Oasis {
                    report.delta_trace = c.delta_trace.clone();
                }
                out.push(json!({
                    "method": c.method.name(),
                    "points": c.points.iter().map(|p| json!({
                        "L": p.columns,
                        "mean_error": p.mean,
                        "stderr": p.stderr,
                        "errors": p.errors,
                    })).collect::<Vec<_>>(),
                }));
            }
            report.metrics = json!({ "curves": out });
        }
        Command::Select(a) => {
            let x = load(&a.input)?;
            let method: SamplerMethod = a.method.parse()?;
            let selected = if method == SamplerMethod::Oasis {
                let mut cfg = seed_core::oasis::OasisConfig::new(a.l, seed);
                if let Some(d) = a.delta {
                    cfg.delta_stop = DeltaStop::Absolute(d);
                }
                let sel = oasis_select(&x, &cfg)?;
                report.delta_trace = sel.delta_trace;
                sel.selected
            } else {
                select_columns(&x, &seed_core::samplers::SamplerSpec::new(method, a.l, seed))?
            };
            let indices = selected.as_slice();
            let text: Vec<String> = indices.iter().map(usize::to_string).collect();
            println!("{}", text.join(" "));
            if let Some(out) = &a.out {
                std::fs::write(out, text.join("\n") + "\n").map_err(SeedError::from)?;
            }
            report.config = json!({ "data": input_echo(&a.input, &x), "L": a.l, "method": a.method, "delta": a.delta });
            report.metrics = json!({ "selected": indices });
        }
        Command::Decompose(a) => {
            let x = load(&a.input)?;
            let cfg = seed_config(&a.seed, seed)?;
            let dec = seed_decompose(&x, &cfg)?;
            let err = relative_error(&x, &dec);
            println!("atoms={} nnz={} relative_error={err:.6e}", dec.natoms(), dec.nnz());
            if let Some(out) = &a.out {
                save_decomposition(out, &dec)?;
            }
            report.config = json!({ "data": input_echo(&a.input, &x), "seed_config": seed_echo(&a.seed) });
            report.metrics = json!({
                "atoms": dec.natoms(),
                "selected": dec.selected.as_slice(),
                "nnz": dec.nnz(),
                "relative_error": err,
                "sparsity_histogram": histogram(&dec.sparsity()),
            });
            report.delta_trace = dec.delta_trace.clone();
        }
        Command::Cluster(a) => {
            let x = load(&a.input)?;
            let cfg = seed_config(&a.seed, seed)?;
            let dec = seed_decompose(&x, &cfg)?;
            let result = cocluster(&dec.code, a.k, seed)?;
            println!(
                "k={} ncut_printed={:.6} ncut_conventional={:.6}{}",
                a.k,
                result.ncut_printed.mean(),
                result.ncut_conventional.mean(),
                if result.degenerate { " (degenerate spectrum)" } else { "" }
            );
            report.config = json!({ "data": input_echo(&a.input, &x), "seed_config": seed_echo(&a.seed), "k": a.k });
            report.metrics = json!({
                "column_labels": result.col_labels,
                "atom_labels": result.row_labels,
                "ncut_printed": { "mean": result.ncut_printed.mean(), "per_class": result.ncut_printed.per_class, "empty_terms": result.ncut_printed.empty_terms },
                "ncut_conventional": { "mean": result.ncut_conventional.mean(), "per_class": result.ncut_conventional.per_class, "empty_terms": result.ncut_conventional.empty_terms },
                "singular_values": result.singular_values,
                "degenerate": result.degenerate,
                "zero_degree_atoms": result.zero_degree_rows,
                "zero_degree_columns": result.zero_degree_cols,
                "sparsity_histogram": histogram(&dec.sparsity()),
            });
            report.delta_trace = dec.delta_trace.clone();
        }
        Command::Denoise(a) => {
            let x = load(&a.input)?;
            let cfg = seed_config(&a.seed, seed)?;
            let clean = denoise(&x, &cfg)?;
            let format = parse_format(a.input.format.as_deref(), &a.out)?;
            save_matrix(&a.out, &clean, format, !a.input.no_transpose)?;
            let diff: f64 = x
                .as_slice()
                .iter()
                .zip(clean.as_slice())
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt();
            let change = diff / x.frobenius_norm();
            println!("relative change {change:.6e}");
            report.config = json!({ "data": input_echo(&a.input, &x), "seed_config": seed_echo(&a.seed), "out": a.out.display().to_string() });
            report.metrics = json!({ "relative_change": change });
        }
        Command::Outliers(a) => {
            let x = load(&a.input)?;
            let cfg = seed_config(&a.seed, seed)?;
            let r = detect_outliers(&x, &cfg, a.threshold)?;
            let outliers = r.outliers();
            println!(
                "threshold={} outliers={}{}",
                r.threshold,
                outliers.len(),
                if r.low_confidence { " (low confidence)" } else { "" }
            );
            report.config = json!({ "data": input_echo(&a.input, &x), "seed_config": seed_echo(&a.seed), "threshold": a.threshold });
            report.metrics = json!({
                "sparsity": r.sparsity,
                "sparsity_histogram": r.histogram(),
                "threshold": r.threshold,
                "threshold_mode": match r.mode { ThresholdMode::Fixed => "fixed", ThresholdMode::KMeans => "kmeans" },
                "cluster_means": r.cluster_means.map(|(a, b)| [a, b]),
                "low_confidence": r.low_confidence,
                "outliers": outliers,
            });
            report.delta_trace = r.decomposition.delta_trace.clone();
        }
        Command::Synth(a) => {
            let preset: Preset = a.preset.parse()?;
            let data = preset.generate(seed)?;
            let format = parse_format(a.format.as_deref(), &a.out)?;
            save_matrix(&a.out, &data.data, format, !a.no_transpose)?;
            println!("{} {}x{} rank {}", preset.name(), data.data.nrows(), data.data.ncols(), data.rank);
            report.config = json!({ "preset": preset.name(), "out": a.out.display().to_string() });
            report.metrics = json!({
                "rows": data.data.nrows(),
                "columns": data.data.ncols(),
                "rank": data.rank,
                "labels": data.labels,
            });
        }
    }
    Ok(())
}
