mod run_config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mpcest::estimators::{clean_extract, rimax_extract, sage_refine, EstimateFile, EstimateSet};
use mpcest::evaluation::{self, associate_empirical, error_report, scatter_svg, ErrorReport, ErrorSummary, Percentiles};
use mpcest::mpc::{save_gt_csv, MpcParam};
use mpcest::synthesis::{content_hash, synthesize_multi_fov, MeasurementSet};

use run_config::{load_gt, RunConfig, ScenarioSpec};

pub const OUTPUT_DIR_ENV: &str = "MPCEST_OUTPUT_DIR";

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation, configuration or missing input (exit 2).
    Usage(String),
    /// Input present but unreadable or inconsistent (exit 3).
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn data_err(what: &Path) -> impl Fn(mpcest::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", what.display()))
}

fn io_err(what: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Usage(format!("{}: {e}", what.display()))
}

#[derive(Debug, Parser)]
#[command(name = "mpcest", version, about = "Synthesize, extract and score multipath estimates from rotated-array sounder data")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Caps the number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (also settable via MPCEST_OUTPUT_DIR).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    Clean,
    Sage,
    Rimax,
}

impl Algorithm {
    fn name(self) -> &'static str {
        match self {
            Algorithm::Clean => "clean",
            Algorithm::Sage => "sage",
            Algorithm::Rimax => "rimax",
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Writes measurement.bin and gt.csv for the configured scenario.
    Synth {
        /// Builtin scenario name, overriding the config.
        #[arg(long, conflicts_with = "gt")]
        scenario: Option<String>,
        /// Ground-truth CSV, overriding the config.
        #[arg(long)]
        gt: Option<PathBuf>,
    },
    /// Runs an estimator on a measurement file.
    Extract {
        measurement: PathBuf,
        #[arg(long, value_enum, default_value = "clean")]
        algorithm: Algorithm,
    },
    /// Scores an estimates file against ground truth and the measurement.
    Evaluate {
        estimates: PathBuf,
        #[arg(long, conflicts_with = "no_gt")]
        gt: Option<PathBuf>,
        /// Measurement for the NMSE; defaults to the one recorded in the estimates file.
        #[arg(long)]
        measurement: Option<PathBuf>,
        /// Reports only the NMSE.
        #[arg(long)]
        no_gt: bool,
    },
    /// Plots and tabulates several estimates files against one ground truth.
    Report {
        #[arg(required = true)]
        estimates: Vec<PathBuf>,
        #[arg(long)]
        gt: Option<PathBuf>,
    },
}

struct Ctx {
    cfg: RunConfig,
    seed: u64,
    out: PathBuf,
}

impl Ctx {
    fn new(cli: &Cli) -> Result<Self> {
        let cfg = RunConfig::load(cli.config.as_deref())?;
        let seed = cli.seed.unwrap_or(cfg.seed);
        let out = cli
            .output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&out).map_err(io_err(&out))?;
        Ok(Ctx { cfg, seed, out })
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let ctx = Ctx::new(&cli)?;
    match cli.command {
        Command::Synth { scenario, gt } => synth(&ctx, scenario, gt),
        Command::Extract { measurement, algorithm } => extract(&ctx, &measurement, algorithm),
        Command::Evaluate { estimates, gt, measurement, no_gt } => evaluate(&ctx, &estimates, gt.as_deref(), measurement.as_deref(), no_gt),
        Command::Report { estimates, gt } => report(&ctx, &estimates, gt.as_deref()),
    }
}

fn synth(ctx: &Ctx, scenario: Option<String>, gt: Option<PathBuf>) -> Result<()> {
    let sounder = ctx.cfg.sounder()?;
    let mut cfg = ctx.cfg.clone();
    if let Some(builtin) = scenario {
        cfg.scenario = Some(ScenarioSpec::Builtin { builtin });
    }
    if let Some(gt_csv) = gt {
        cfg.scenario = Some(ScenarioSpec::GtCsv { gt_csv });
    }
    let Some(gt) = cfg.ground_truth(ctx.seed, sounder.duration_t)? else {
        return Err(CliError::Usage("no scenario: pass --scenario, --gt or set \"scenario\" in the config".into()));
    };
    let pattern = cfg.pattern()?;
    let m = synthesize_multi_fov(&gt, &sounder, &pattern, ctx.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let mpath = ctx.out.join("measurement.bin");
    let gpath = ctx.out.join("gt.csv");
    m.save(&mpath).map_err(|e| CliError::Usage(format!("{}: {e}", mpath.display())))?;
    save_gt_csv(&gpath, &gt).map_err(|e| CliError::Usage(format!("{}: {e}", gpath.display())))?;
    println!("wrote {} ({} rotations x {} samples) and {} ({} paths)", mpath.display(), m.tensors.len(), sounder.samples(), gpath.display(), gt.len());
    Ok(())
}

fn read_measurement(path: &Path) -> Result<(MeasurementSet, String)> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let m = MeasurementSet::read(bytes.as_slice()).map_err(data_err(path))?;
    Ok((m, content_hash(&bytes)))
}

fn extract(ctx: &Ctx, path: &Path, algorithm: Algorithm) -> Result<()> {
    let (m, hash) = read_measurement(path)?;
    let pattern = ctx.cfg.pattern()?;
    let est_cfg = &ctx.cfg.estimator;
    let t0 = std::time::Instant::now();
    let run = || -> mpcest::Result<EstimateSet> {
        match algorithm {
            Algorithm::Clean => clean_extract(&m, &pattern, est_cfg),
            Algorithm::Sage => sage_refine(&m, &pattern, &clean_extract(&m, &pattern, est_cfg)?, est_cfg),
            Algorithm::Rimax => rimax_extract(&m, &pattern, est_cfg),
        }
    };
    let est = run().map_err(data_err(path))?;
    log::info!("{} finished in {:.2?}", algorithm.name(), t0.elapsed());
    let recorded = std::fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
    let file = EstimateFile::new(&est, &m.config, est_cfg, &hash, Some(recorded.display().to_string()));
    let out = ctx.out.join(format!("estimates-{}.json", algorithm.name()));
    file.save(&out).map_err(|e| CliError::Usage(format!("{}: {e}", out.display())))?;
    println!("wrote {} ({} paths, stop: {:?})", out.display(), est.mpcs.len(), est.stop_reason);
    Ok(())
}

fn load_estimates(path: &Path) -> Result<EstimateFile> {
    if !path.exists() {
        return Err(CliError::Usage(format!("estimates file not found: {}", path.display())));
    }
    EstimateFile::load(path).map_err(data_err(path))
}

/// Ground truth from the flag, else from the configured scenario.
fn resolve_gt(ctx: &Ctx, gt: Option<&Path>, max_delay: f64) -> Result<Option<Vec<MpcParam>>> {
    match gt {
        Some(p) => load_gt(p).map(Some),
        None => ctx.cfg.ground_truth(ctx.seed, max_delay),
    }
}

#[derive(Serialize)]
struct NmseRecord {
    algorithm: String,
    paths: usize,
    nmse: f64,
    measurement: String,
    measurement_hash: String,
    hash_matches: bool,
}

#[derive(Serialize)]
struct AssociationRow {
    gt: usize,
    est: usize,
    cost: f64,
    angle_cost: f64,
    delay_cost: f64,
    gain_cost: f64,
}

fn evaluate(ctx: &Ctx, path: &Path, gt: Option<&Path>, measurement: Option<&Path>, no_gt: bool) -> Result<()> {
    let file = load_estimates(path)?;
    let est = file.estimate_set();
    let dir = ctx.out.join(format!("evaluation-{}", file.algorithm));
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;

    let gt = if no_gt {
        None
    } else {
        let g = resolve_gt(ctx, gt, file.sounder.duration_t)?;
        if g.is_none() {
            return Err(CliError::Usage("no ground truth: pass --gt, set \"scenario\" in the config, or use --no-gt".into()));
        }
        g
    };

    let mpath = measurement.map(Path::to_path_buf).or_else(|| file.measurement_path.as_ref().map(PathBuf::from));
    let Some(mpath) = mpath else {
        return Err(CliError::Usage("no measurement: pass --measurement".into()));
    };
    let (m, hash) = read_measurement(&mpath)?;
    let hash_matches = hash == file.measurement_hash;
    if !hash_matches {
        eprintln!("warning: {} was produced from a different measurement than {} (hash {} vs {})", path.display(), mpath.display(), file.measurement_hash, hash);
    }
    let pattern = ctx.cfg.pattern()?;
    let nmse = evaluation::nmse(&m, &est.mpcs, &pattern).map_err(data_err(&mpath))?;
    let record = NmseRecord {
        algorithm: file.algorithm.clone(),
        paths: est.mpcs.len(),
        nmse,
        measurement: mpath.display().to_string(),
        measurement_hash: hash,
        hash_matches,
    };
    write_json(&dir.join("nmse.json"), &record)?;

    println!("{}: {} paths, NMSE {:.4e} ({:.2} dB)", file.algorithm, est.mpcs.len(), nmse, 10.0 * nmse.log10());
    let Some(gt) = gt else { return Ok(()) };

    let est_mpcs = est.to_mpcs();
    let assoc = associate_empirical(&gt, &est_mpcs, &ctx.cfg.association.default_sigmas, ctx.cfg.association.c_um);
    let rows = assoc.pairs.iter().map(|p| AssociationRow { gt: p.gt, est: p.est, cost: p.cost.total, angle_cost: p.cost.angle, delay_cost: p.cost.delay, gain_cost: p.cost.gain });
    write_csv(&dir.join("association.csv"), rows)?;
    let rep = error_report(&assoc, &gt, &est_mpcs);
    rep.save(&dir, true).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
    print!("{}", percentile_table(&[(file.algorithm.as_str(), &rep.summary)]));
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::Data(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

fn write_csv<T: Serialize>(path: &Path, rows: impl Iterator<Item = T>) -> Result<()> {
    let fail = |e: csv::Error| CliError::Usage(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    for r in rows {
        w.serialize(r).map_err(fail)?;
    }
    w.flush().map_err(io_err(path))
}

fn cell(p: Option<Percentiles>, f: fn(&Percentiles) -> f64) -> String {
    p.as_ref().map(|p| format!("{:.3}", f(p))).unwrap_or_else(|| "-".into())
}

/// 50%/90% error table; one block of two rows per estimator.
fn percentile_table(rows: &[(&str, &ErrorSummary)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<10} {:>5} {:>10} {:>10} {:>12} {:>10} {:>7}", "algorithm", "pct", "AZ [deg]", "EL [deg]", "delay [ns]", "PG [dB]", "pairs");
    for (name, sum) in rows {
        for (label, f) in [("50%", (|p: &Percentiles| p.p50) as fn(&Percentiles) -> f64), ("90%", |p: &Percentiles| p.p90)] {
            let _ = writeln!(
                s,
                "{:<10} {:>5} {:>10} {:>10} {:>12} {:>10} {:>7}",
                name,
                label,
                cell(sum.az_deg, f),
                cell(sum.el_deg, f),
                cell(sum.delay_ns, f),
                cell(sum.gain_db, f),
                sum.pairs
            );
        }
    }
    s
}

#[derive(Serialize)]
struct ReportEntry {
    algorithm: String,
    source: String,
    paths: usize,
    summary: Option<ErrorSummary>,
}

fn report(ctx: &Ctx, paths: &[PathBuf], gt: Option<&Path>) -> Result<()> {
    let files = paths.iter().map(|p| load_estimates(p)).collect::<Result<Vec<_>>>()?;
    let dir = ctx.out.join("report");
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let gt = resolve_gt(ctx, gt, files[0].sounder.duration_t)?;
    let sets: Vec<(String, Vec<MpcParam>)> = files.iter().map(|f| (f.algorithm.clone(), f.estimate_set().to_mpcs())).collect();

    let mut series: Vec<(&str, &[MpcParam])> = Vec::new();
    if let Some(g) = &gt {
        series.push(("ground truth", g));
    }
    series.extend(sets.iter().map(|(n, m)| (n.as_str(), m.as_slice())));
    let scatter = dir.join("az-delay.svg");
    std::fs::write(&scatter, scatter_svg(&series)).map_err(io_err(&scatter))?;

    let mut entries = Vec::new();
    let mut reports: Vec<(String, ErrorReport)> = Vec::new();
    for ((name, mpcs), path) in sets.iter().zip(paths) {
        let summary = gt.as_ref().map(|g| {
            let assoc = associate_empirical(g, mpcs, &ctx.cfg.association.default_sigmas, ctx.cfg.association.c_um);
            let rep = error_report(&assoc, g, mpcs);
            let s = rep.summary.clone();
            reports.push((name.clone(), rep));
            s
        });
        entries.push(ReportEntry { algorithm: name.clone(), source: path.display().to_string(), paths: mpcs.len(), summary });
    }
    for (name, rep) in &reports {
        let p = dir.join(format!("cdf-{name}.svg"));
        std::fs::write(&p, rep.cdf_svg()).map_err(io_err(&p))?;
    }
    write_json(&dir.join("percentiles.json"), &entries)?;
    if reports.is_empty() {
        println!("no ground truth; wrote scatter plot only");
    } else {
        let rows: Vec<(&str, &ErrorSummary)> = reports.iter().map(|(n, r)| (n.as_str(), &r.summary)).collect();
        let table = percentile_table(&rows);
        let p = dir.join("percentiles.txt");
        std::fs::write(&p, &table).map_err(io_err(&p))?;
        print!("{table}");
    }
    println!("wrote {}", dir.display());
    Ok(())
}
