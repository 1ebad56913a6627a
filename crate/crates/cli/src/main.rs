use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;
use serde_json::{json, Value};

use softplex::constants::{estimate_mu, estimate_nu, estimate_phi, estimate_theta};
use softplex::experiments::{
    clt_report, depoisson_compare, estimate_constants_for, read_results_csv, run_experiment, write_qq_csv,
    write_results_csv,
};
use softplex::{
    build_cech_from_graph, build_graph, build_rips, regime_check, sample_binomial, sample_poisson, soft_thin,
    ConstantKind, Density, Error, ExperimentConfig, Flavor, ProcessKind, RadiusRule, RegimeMode, RegimeThresholds,
    RegionSpec, RhoVector,
};

#[derive(Parser, Debug)]
#[command(name = "softplex", version, about = "Soft random Rips/Čech complex simulator")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "SOFTPLEX_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a point cloud and write it as CSV.
    Sample(SampleArgs),
    /// Build one replication's complex and dump its faces.
    Build(BuildArgs),
    /// Monte Carlo estimate of a limit constant.
    Constants(ConstantsArgs),
    /// Replicated runs, CLT reports and process comparisons.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Finite-size regime diagnostics.
    Regime(RegimeArgs),
}

#[derive(Subcommand, Debug)]
enum ExperimentCommand {
    /// Run all replications and write one CSV row per replication.
    Run(RunArgs),
    /// Summarize a results CSV as a CLT report.
    Report(ReportArgs),
    /// Run the configuration under both point processes.
    Depoisson(DepoissonArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct Overrides {
    #[arg(long, value_parser = parse_number)]
    n: Option<f64>,
    #[arg(long, value_parser = parse_number)]
    r: Option<f64>,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long, value_parser = parse_count)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long, value_parser = parse_number)]
    n: f64,
    #[arg(long, value_enum, default_value_t = ProcessArg::Binomial)]
    process: ProcessArg,
    #[arg(long)]
    d: usize,
    /// `uniform`, `gaussian`, a JSON object, or a path to a JSON file.
    #[arg(long, default_value = "uniform")]
    density: String,
    #[arg(long, value_parser = parse_count, default_value = "0")]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    /// Replication index whose seed is used.
    #[arg(long, default_value_t = 0)]
    rep: usize,
    /// Directory for edges.csv, faces_k.csv and build.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct ConstantsArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    j: Option<usize>,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value = "uniform")]
    density: String,
    /// Region as JSON, e.g. `{"kind":"box","lo":[0],"hi":[0.5]}`.
    #[arg(long)]
    region: Option<String>,
    #[arg(long, value_parser = parse_count, default_value = "1000000")]
    samples: u64,
    #[arg(long, value_parser = parse_count, default_value = "0")]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    out: PathBuf,
    /// Fill the `seconds` column (makes the CSV run-dependent).
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    out: PathBuf,
    /// Quantile table; defaults to `qq.csv` next to the report.
    #[arg(long)]
    qq: Option<PathBuf>,
    /// Monte Carlo samples per predicted constant; 0 skips predictions.
    #[arg(long, value_parser = parse_count, default_value = "1000000")]
    constant_samples: u64,
}

#[derive(Args, Debug)]
struct DepoissonArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RegimeArgs {
    #[arg(long, value_parser = parse_number)]
    n: f64,
    #[arg(long)]
    d: usize,
    /// Radius exponent: `r^d = n^{-a}`.
    #[arg(long, value_parser = parse_number, conflicts_with = "r", required_unless_present = "r")]
    a: Option<f64>,
    #[arg(long, value_parser = parse_number)]
    r: Option<f64>,
    /// Face dimension for the f_k check.
    #[arg(long, conflicts_with = "chi")]
    k: Option<usize>,
    /// Truncation level `l` for the Euler characteristic check.
    #[arg(long)]
    chi: Option<usize>,
    /// Retention exponents `p_i = n^{-b_i}`, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_number, conflicts_with = "rho")]
    b: Vec<f64>,
    /// Retention probabilities, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_number)]
    rho: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ProcessArg {
    Binomial,
    Poisson,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum KindArg {
    Mu,
    Nu,
    Phi,
    Theta,
}

fn parse_number(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|e| format!("{s:?} is not a number: {e}"))
}

fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.trim().parse::<u64>() {
        return Ok(v);
    }
    let x = parse_number(s)?;
    if x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64 {
        Ok(x as u64)
    } else {
        Err(format!("{s:?} is not a non-negative integer"))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    let cli = Cli::parse();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build();
    let outcome = match pool {
        Ok(pool) => pool.install(|| dispatch(cli.command)),
        Err(e) => Err(Error::Config(format!("cannot start worker pool: {e}"))),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Refused(_) => 2,
                _ => 1,
            })
        }
    }
}

fn dispatch(command: Command) -> softplex::Result<()> {
    match command {
        Command::Sample(a) => sample(a),
        Command::Build(a) => build(a),
        Command::Constants(a) => constants(a),
        Command::Experiment(ExperimentCommand::Run(a)) => experiment_run(a),
        Command::Experiment(ExperimentCommand::Report(a)) => experiment_report(a),
        Command::Experiment(ExperimentCommand::Depoisson(a)) => experiment_depoisson(a),
        Command::Regime(a) => regime(a),
    }
}

fn read_file(path: &Path) -> softplex::Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn json_error(what: &str, e: serde_json::Error) -> Error {
    Error::Config(format!("{what}: {e}"))
}

fn load_config(path: &Path, overrides: &Overrides) -> softplex::Result<ExperimentConfig> {
    let text = read_file(path)?;
    let mut cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| json_error(&format!("malformed config {}", path.display()), e))?;
    if let Some(n) = overrides.n {
        cfg.n = n;
    }
    if let Some(r) = overrides.r {
        cfg.r = RadiusRule::Explicit(r);
    }
    if let Some(k) = overrides.kmax {
        cfg.k_max = k;
    }
    if let Some(seed) = overrides.seed {
        cfg.master_seed = seed;
    }
    cfg.resolve()?;
    Ok(cfg)
}

fn parse_density(spec: &str, d: usize) -> softplex::Result<Density> {
    let density = match spec {
        "uniform" => Density::unit_cube(d)?,
        "gaussian" => Density::gaussian(vec![0.0; d], 1.0)?,
        s if s.trim_start().starts_with('{') => serde_json::from_str(s).map_err(|e| json_error("malformed density", e))?,
        path => serde_json::from_str(&read_file(Path::new(path))?)
            .map_err(|e| json_error(&format!("malformed density {path}"), e))?,
    };
    if density.dim() != d {
        return Err(Error::Config(format!("density has dimension {} but d = {d}", density.dim())));
    }
    Ok(density)
}

fn create(path: &Path) -> softplex::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> softplex::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// `results.csv` → `results.csv.json`.
fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

fn sample(a: SampleArgs) -> softplex::Result<()> {
    let density = parse_density(&a.density, a.d)?;
    let cloud = match a.process {
        ProcessArg::Binomial => {
            if a.n.fract() != 0.0 || a.n < 1.0 {
                return Err(Error::Config(format!("binomial process needs an integer n >= 1, got {}", a.n)));
            }
            sample_binomial(a.n as u64, &density, a.seed)?
        }
        ProcessArg::Poisson => sample_poisson(a.n, &density, a.seed)?,
    };
    let mut w = csv::Writer::from_writer(create(&a.out)?);
    w.write_record((0..a.d).map(|i| format!("x{i}")))?;
    for p in cloud.points() {
        w.write_record(p.iter().map(|x| format!("{x:?}")))?;
    }
    w.flush()?;
    let process = match a.process {
        ProcessArg::Binomial => "binomial",
        ProcessArg::Poisson => "poisson",
    };
    write_json(
        &sidecar(&a.out),
        &json!({"n": a.n, "process": process, "d": a.d, "density": density, "seed": a.seed, "points": cloud.len()}),
    )?;
    info!("wrote {} points to {}", cloud.len(), a.out.display());
    Ok(())
}

fn build(a: BuildArgs) -> softplex::Result<()> {
    let cfg = load_config(&a.config, &a.overrides)?;
    let resolved = cfg.resolve()?;
    softplex::experiments::memory_guard(&cfg, &resolved)?;
    let seed = softplex::rng::derive_seed(cfg.master_seed, a.rep as u64);
    let cloud = std::sync::Arc::new(match cfg.process {
        ProcessKind::Binomial => sample_binomial(cfg.n as u64, &resolved.density, softplex::rng::derive_seed(seed, 0))?,
        ProcessKind::Poisson => sample_poisson(cfg.n, &resolved.density, softplex::rng::derive_seed(seed, 0))?,
    });
    let graph = build_graph(cloud, resolved.r, None, 0)?;
    let hard = match cfg.model {
        Flavor::Rips => build_rips(&graph, cfg.k_max),
        Flavor::Cech => build_cech_from_graph(&graph, cfg.k_max),
    };
    let complex =
        if resolved.rho.is_all_ones() { hard } else { soft_thin(&hard, &resolved.rho, softplex::rng::derive_seed(seed, 1))? };
    fs::create_dir_all(&a.out_dir)?;
    graph.write_edges_csv(create(&a.out_dir.join("edges.csv"))?)?;
    for k in 0..=cfg.k_max {
        complex.write_faces_csv(k, create(&a.out_dir.join(format!("faces_{k}.csv")))?)?;
    }
    let f = complex.f_vector();
    write_json(&a.out_dir.join("build.json"), &json!({"config": cfg, "resolved": resolved, "rep": a.rep, "f": f}))?;
    info!("f-vector {f:?} written to {}", a.out_dir.display());
    Ok(())
}

fn constants(a: ConstantsArgs) -> softplex::Result<()> {
    let density = parse_density(&a.density, a.d)?;
    let region: RegionSpec = match &a.region {
        Some(s) => serde_json::from_str(s).map_err(|e| json_error("malformed region", e))?,
        None => RegionSpec::All,
    };
    let pair = || match (a.l, a.j) {
        (Some(l), Some(j)) => Ok((l, j)),
        _ => Err(Error::Config("phi and theta need --l and --j".into())),
    };
    let est = match a.kind {
        KindArg::Mu => estimate_mu(a.k, a.d, &density, &region, a.samples, a.seed)?,
        KindArg::Nu => estimate_nu(a.k, a.d, &density, &region, a.samples, a.seed)?,
        KindArg::Phi => {
            let (l, j) = pair()?;
            estimate_phi(a.k, l, j, a.d, &density, &region, a.samples, a.seed)?
        }
        KindArg::Theta => {
            let (l, j) = pair()?;
            estimate_theta(a.k, l, j, a.d, &density, &region, a.samples, a.seed)?
        }
    };
    let kind = match est.kind {
        ConstantKind::Mu => "mu",
        ConstantKind::Nu => "nu",
        ConstantKind::Phi => "phi",
        ConstantKind::Theta => "theta",
    };
    let out = json!({
        "value": est.value,
        "stderr": est.stderr,
        "samples": est.samples,
        "params": {"kind": kind, "k": a.k, "l": a.l, "j": a.j, "d": a.d, "density": density, "region": region, "seed": a.seed},
    });
    emit(a.out.as_deref(), &out)
}

/// Writes to `path`, or pretty-prints to stdout.
fn emit(path: Option<&Path>, value: &Value) -> softplex::Result<()> {
    match path {
        Some(p) => write_json(p, value),
        None => {
            let mut out = io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, value)?;
            writeln!(out)?;
            Ok(())
        }
    }
}

fn experiment_run(a: RunArgs) -> softplex::Result<()> {
    let cfg = load_config(&a.config, &a.overrides)?;
    info!("running {} replications", cfg.replications);
    let results = run_experiment(&cfg)?;
    write_results_csv(&results, cfg.k_max, a.timing, create(&a.out)?)?;
    write_json(&sidecar(&a.out), &json!({"config": cfg, "resolved": cfg.resolve()?}))?;
    info!("wrote {}", a.out.display());
    Ok(())
}

fn experiment_report(a: ReportArgs) -> softplex::Result<()> {
    let cfg = load_config(&a.config, &a.overrides)?;
    let file = File::open(&a.input).map_err(|e| Error::Config(format!("cannot read {}: {e}", a.input.display())))?;
    let results = read_results_csv(file)?;
    let constants = if a.constant_samples > 0 {
        Some(estimate_constants_for(&cfg, a.constant_samples, cfg.master_seed)?)
    } else {
        None
    };
    let report = clt_report(&cfg, &results, constants)?;
    write_json(&a.out, &report)?;
    let qq = a.qq.unwrap_or_else(|| a.out.with_file_name("qq.csv"));
    write_qq_csv(&report.z_empirical, create(&qq)?)?;
    match report.ks_statistic {
        Some(d) => info!("KS D = {d:.4} (1% critical {:.4}); report at {}", report.ks_critical_1pct, a.out.display()),
        None => info!("statistic is constant across replications; report at {}", a.out.display()),
    }
    Ok(())
}

fn experiment_depoisson(a: DepoissonArgs) -> softplex::Result<()> {
    let cfg = load_config(&a.config, &a.overrides)?;
    let cmp = depoisson_compare(&cfg, None)?;
    info!("mean difference {:.4} with joint stderr {:.4}", cmp.delta_mean, cmp.joint_stderr);
    write_json(&a.out, &cmp)
}

fn regime(a: RegimeArgs) -> softplex::Result<()> {
    let r = match (a.r, a.a) {
        (Some(r), _) => r,
        (None, Some(exp)) => a.n.powf(-exp / a.d as f64),
        (None, None) => return Err(Error::Config("give --a or --r".into())),
    };
    let mode = match (a.k, a.chi) {
        (_, Some(l)) => RegimeMode::Chi(l),
        (Some(k), None) => RegimeMode::Fk(k),
        (None, None) => RegimeMode::Fk(1),
    };
    let needed = match mode {
        RegimeMode::Fk(k) => k,
        RegimeMode::Chi(l) => l + 1,
    };
    let rho = if !a.rho.is_empty() {
        RhoVector::new(a.rho.clone())?
    } else if !a.b.is_empty() {
        RhoVector::new(a.b.iter().map(|b| a.n.powf(-b)).collect())?
    } else {
        RhoVector::ones(needed.max(1))
    };
    let report = regime_check(a.n, r, a.d, &rho, mode, RegimeThresholds::default())?;
    let mut value = serde_json::to_value(&report)?;
    value["config"] = json!({"n": a.n, "d": a.d, "a": a.a, "r": r, "rho": rho});
    emit(a.out.as_deref(), &value)
}
