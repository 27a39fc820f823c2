use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fracdiff::config::{parse_triple, RunConfig};
use fracdiff::format::fmt_num;
use fracdiff::io::{read_observations, write_csv, write_observations, write_reconstruction, write_sweep, write_trace, write_truncation, RunReport};
use fracdiff::mittag_leffler::{ml, ml_deriv, MlQuery};
use fracdiff::objective::{make_observations, uniform_times, ResidualModel};
use fracdiff::presets::{run_example1_with, run_example2, run_truncation, write_example2_artifacts, example1_config, EXAMPLE2_LEVELS};
use fracdiff::spectral::{solution, FractionalTriple};
use fracdiff::sweep::{dyadic_grid, sweep, sweep_cold};
use fracdiff::trust_region::{estimate_multistart, random_starts};
use fracdiff::Error;

/// Forward solver and exponent estimation for double-scale space-time
/// fractional diffusion.
#[derive(Parser)]
#[command(name = "fracdiff", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate E_{β,ν}(z) (or its z-derivative) at a list of points.
    Ml(MlArgs),
    /// Solution u(t, x) at the observation times.
    Forward(ForwardArgs),
    /// Synthetic (optionally noisy) center observations.
    Observe(ObserveArgs),
    /// Fit (β, α, γ) to an observation file.
    Estimate(EstimateArgs),
    /// Estimates over a λ grid with Morozov selection.
    Sweep(SweepArgs),
    /// Estimates at several truncation levels against a fine reference.
    Truncation(TruncationArgs),
    /// Example 1 reproduction run.
    Example1(Example1Args),
    /// Example 2 truncation study.
    Example2(Example2Args),
}

#[derive(Args)]
struct ConfigArg {
    /// Run configuration (flat key = value); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<RunConfig, Error> {
        match &self.config {
            Some(p) => RunConfig::from_path(p),
            None => Ok(RunConfig::default()),
        }
    }
}

fn triple_arg(s: &str) -> Result<FractionalTriple, String> {
    parse_triple(s)
}

fn list_arg<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| format!("`{p}` is not a valid list element")))
        .collect()
}

#[derive(Args)]
struct MlArgs {
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    /// Comma-separated real arguments.
    #[arg(long, allow_hyphen_values = true, value_parser = list_arg::<f64>)]
    z: ::std::vec::Vec<f64>,
    /// Evaluate d/dz instead.
    #[arg(long)]
    deriv: bool,
}

#[derive(Args)]
struct ForwardArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Parameters b,a,g (default: a_star from the config).
    #[arg(long, value_parser = triple_arg)]
    a: Option<FractionalTriple>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    x: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ObserveArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    obs: PathBuf,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_parser = triple_arg)]
    a0: Option<FractionalTriple>,
    /// Number of random starts drawn over the box (replaces a0).
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Convergence trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    obs: PathBuf,
    /// `dyadic:HI:LO` for 2^HI..2^LO, or a comma-separated decreasing list.
    #[arg(long, default_value = "dyadic:0:-12", allow_hyphen_values = true)]
    grid: String,
    /// Morozov target (default: realized I(a_star) on the data).
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_parser = triple_arg)]
    a0: Option<FractionalTriple>,
    /// Start every λ from a0 instead of the previous minimizer.
    #[arg(long)]
    cold: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TruncationArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, value_parser = list_arg::<usize>, default_value = "5,10,20,40,80")]
    levels: ::std::vec::Vec<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Per-node reconstruction errors at a_star.
    #[arg(long)]
    recon: Option<PathBuf>,
}

#[derive(Args)]
struct Example1Args {
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct Example2Args {
    #[arg(long, value_parser = list_arg::<usize>)]
    levels: Option<::std::vec::Vec<usize>>,
    #[arg(long)]
    out_dir: PathBuf,
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".config");
    PathBuf::from(s)
}

fn write_echo(out: &Path, cfg: &RunConfig) -> Result<(), Error> {
    std::fs::write(sidecar(out), cfg.echo())?;
    Ok(())
}

fn parse_grid(grid: &str) -> Result<Vec<f64>, Failure> {
    if let Some(rest) = grid.strip_prefix("dyadic:") {
        let (hi, lo) = rest
            .split_once(':')
            .ok_or_else(|| usage(format!("bad grid `{grid}`, expected dyadic:HI:LO")))?;
        let hi: i32 = hi.parse().map_err(|_| usage(format!("bad grid exponent `{hi}`")))?;
        let lo: i32 = lo.parse().map_err(|_| usage(format!("bad grid exponent `{lo}`")))?;
        if lo > hi {
            return Err(usage(format!("grid `{grid}` is empty")));
        }
        Ok(dyadic_grid(hi, lo))
    } else {
        list_arg::<f64>(grid).map_err(usage)
    }
}

fn run_ml(args: MlArgs) -> Result<(), Failure> {
    if args.z.is_empty() {
        return Err(usage("--z needs at least one value"));
    }
    println!("z,value");
    for z in args.z {
        let q = MlQuery::new(args.beta, args.nu, z)?;
        let v = if args.deriv { ml_deriv(q)? } else { ml(q)? };
        println!("{},{}", fmt_num(z), fmt_num(v));
    }
    Ok(())
}

fn run_forward(args: ForwardArgs) -> Result<(), Failure> {
    let mut cfg = args.config.load()?;
    if let Some(a) = args.a {
        cfg.a_star = a;
    }
    cfg.validate()?;
    if !(args.x.abs() <= 1.0) {
        return Err(usage(format!("--x must lie in [-1, 1], got {}", args.x)));
    }
    let exp = cfg.expansion()?;
    let rows = uniform_times(cfg.nodes, cfg.horizon)
        .iter()
        .map(|&t| Ok(vec![fmt_num(t), fmt_num(solution(&exp, &cfg.a_star, t, args.x)?)]))
        .collect::<Result<Vec<_>, Error>>()?;
    match args.out {
        Some(out) => {
            write_csv(&out, &["t", "u"], &rows)?;
            write_echo(&out, &cfg)?;
        }
        None => {
            println!("t,u");
            for r in rows {
                println!("{}", r.join(","));
            }
        }
    }
    Ok(())
}

fn run_observe(args: ObserveArgs) -> Result<(), Failure> {
    let mut cfg = args.config.load()?;
    if let Some(d) = args.delta {
        cfg.delta = d;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let exp = cfg.expansion()?;
    let obs = make_observations(&exp, &cfg.a_star, cfg.nodes, cfg.horizon, cfg.delta, cfg.seed)?;
    write_observations(&args.out, &obs)?;
    write_echo(&args.out, &cfg)?;
    println!("nodes = {}", obs.len());
    println!("signal_norm = {}", fmt_num(obs.signal_norm));
    Ok(())
}

fn run_estimate(args: EstimateArgs) -> Result<(), Failure> {
    let mut cfg = args.config.load()?;
    if let Some(l) = args.lambda {
        cfg.lambda = l;
    }
    if let Some(a) = args.a0 {
        cfg.a0 = a;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = &args.trace {
        cfg.trace_out = Some(t.display().to_string());
    }
    cfg.validate()?;
    let obs = read_observations(&args.obs)?;
    let model = ResidualModel::with_steps(obs, cfg.expansion()?, cfg.bounds, cfg.lambda, cfg.fd_steps)?;
    let starts = match args.starts {
        Some(0) => return Err(usage("--starts must be >= 1")),
        Some(n) => random_starts(&cfg.bounds, n, cfg.seed),
        None => vec![cfg.a0],
    };
    let reports = estimate_multistart(&model, &starts, &cfg.solver)?;
    let best = reports
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.f_final.total_cmp(&b.1.f_final))
        .map(|(i, _)| i)
        .expect("at least one start");
    if args.starts.is_some() {
        let rows: Vec<Vec<String>> = reports
            .iter()
            .zip(&starts)
            .enumerate()
            .map(|(i, (r, s))| {
                vec![
                    i.to_string(),
                    fmt_num(s.beta),
                    fmt_num(s.alpha),
                    fmt_num(s.gamma),
                    fmt_num(r.a_final.beta),
                    fmt_num(r.a_final.alpha),
                    fmt_num(r.a_final.gamma),
                    fmt_num(r.i_final),
                    r.iterations.to_string(),
                    r.termination.to_string(),
                ]
            })
            .collect();
        let mut path = args.out.as_os_str().to_owned();
        path.push(".starts.csv");
        write_csv(
            Path::new(&path),
            &["start", "beta0", "alpha0", "gamma0", "beta", "alpha", "gamma", "I", "iterations", "termination"],
            &rows,
        )?;
        cfg.a0 = starts[best];
    }
    let report = RunReport {
        config: cfg,
        observations: args.obs.display().to_string(),
        estimate: reports[best].clone(),
    };
    report.write(&args.out)?;
    if let Some(t) = &args.trace {
        write_trace(t, &report.estimate)?;
    }
    let e = &report.estimate;
    println!("beta = {}", fmt_num(e.a_final.beta));
    println!("alpha = {}", fmt_num(e.a_final.alpha));
    println!("gamma = {}", fmt_num(e.a_final.gamma));
    println!("i_final = {}", fmt_num(e.i_final));
    println!("termination = {}", e.termination);
    println!("iterations = {} ({} accepted)", e.iterations, e.accepted);
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<(), Failure> {
    let mut cfg = args.config.load()?;
    if let Some(a) = args.a0 {
        cfg.a0 = a;
    }
    if args.epsilon.is_some() {
        cfg.epsilon = args.epsilon;
    }
    cfg.validate()?;
    let grid = parse_grid(&args.grid)?;
    let obs = read_observations(&args.obs)?;
    let model = ResidualModel::with_steps(obs, cfg.expansion()?, cfg.bounds, cfg.lambda, cfg.fd_steps)?;
    let mut result = if args.cold {
        sweep_cold(&model, &grid, cfg.a0, &cfg.solver)?
    } else {
        sweep(&model, &grid, cfg.a0, &cfg.solver)?
    };
    let epsilon = match cfg.epsilon {
        Some(e) => e,
        None => model.discrepancy(&cfg.a_star)?,
    };
    let s = result.select(epsilon);
    write_sweep(&args.out, &result)?;
    write_echo(&args.out, &cfg)?;
    println!("epsilon = {}", fmt_num(epsilon));
    println!("selected_lambda = {}", fmt_num(s.lambda));
    println!("fallback = {}", s.fallback);
    Ok(())
}

fn run_truncation_cmd(args: TruncationArgs) -> Result<(), Failure> {
    let cfg = args.config.load()?;
    let study = run_truncation(&cfg, &args.levels)?;
    write_truncation(&args.out, &study)?;
    write_echo(&args.out, &cfg)?;
    if let Some(r) = &args.recon {
        write_reconstruction(r, &study)?;
    }
    println!("reference_truncation = {}", study.reference_truncation);
    Ok(())
}

fn run_example1_cmd(args: Example1Args) -> Result<(), Failure> {
    let cfg = example1_config(args.delta, args.seed);
    let run = run_example1_with(&cfg)?;
    run.write_artifacts(&args.out_dir)?;
    let e = &run.report.estimate;
    println!("estimate = {}", e.a_final);
    println!("lambda = {}", fmt_num(e.lambda));
    println!("iterations = {} ({} accepted)", e.iterations, e.accepted);
    if let Some((_, s)) = &run.sweep {
        println!("selected_lambda = {} (fallback = {})", fmt_num(s.lambda), s.fallback);
    }
    Ok(())
}

fn run_example2_cmd(args: Example2Args) -> Result<(), Failure> {
    let levels = args.levels.unwrap_or_else(|| EXAMPLE2_LEVELS.to_vec());
    let study = run_example2(&levels)?;
    write_example2_artifacts(&study, &args.out_dir)?;
    for r in &study.rows {
        println!("N = {}: {} I = {}", r.truncation, r.a, fmt_num(r.discrepancy));
    }
    Ok(())
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("FRACDIFF_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| usage(format!("FRACDIFF_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = configure_threads().and_then(|_| match cli.command {
        Command::Ml(a) => run_ml(a),
        Command::Forward(a) => run_forward(a),
        Command::Observe(a) => run_observe(a),
        Command::Estimate(a) => run_estimate(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Truncation(a) => run_truncation_cmd(a),
        Command::Example1(a) => run_example1_cmd(a),
        Command::Example2(a) => run_example2_cmd(a),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
