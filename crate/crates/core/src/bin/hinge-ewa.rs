use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hinge_ewa::bench::{
    fit_method, parse_methods, run_benchmark, run_split_benchmark, BenchmarkResult, InitRule,
    LassoCache, Method, Summary,
};
use hinge_ewa::config::{ModelFile, RunConfig, MODEL_FORMAT, MODEL_VERSION};
use hinge_ewa::io::{load_csv, load_table, write_csv, StandardizationStats};
use hinge_ewa::lasso::cv_select;
use hinge_ewa::seeds::{stream, streams};
use hinge_ewa::simulation::{
    gen_sample, gen_stand_in, gen_truth, parse_scenario_name, ScenarioSpec, StandInSpec,
};
use hinge_ewa::{Error, LabeledDataset};

/// Environment variable holding the default worker thread count.
const THREADS_ENV: &str = "HINGE_EWA_THREADS";

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "hinge-ewa", version, about = "Sparse classification by exponentially weighted aggregation")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one method on a labelled CSV and write a model file.
    Fit(FitCmd),
    /// Predict labels for a CSV with a saved model.
    Predict(PredictCmd),
    /// Generate a synthetic scenario or the gene-expression stand-in.
    Simulate(SimulateCmd),
    /// Benchmark methods on synthetic scenarios or on repeated splits of a CSV.
    Bench(BenchCmd),
    /// Cross-validate the logistic Lasso path on a CSV.
    Cv(CvCmd),
}

/// Flags mirroring the run configuration. A flag that is given overrides
/// the value from `--config`, which overrides the default.
#[derive(Args, Debug, Default)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    logit_lambda: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    n_iter: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// 0 picks the thinning automatically.
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    max_stored: Option<usize>,
    /// Initial MALA step; 0 means 1/d.
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    adapt: Option<bool>,
    #[arg(long)]
    target_acceptance: Option<f64>,
    /// Fixed LMC step instead of the tuned one.
    #[arg(long)]
    lmc_step: Option<f64>,
    #[arg(long)]
    pilot_iters: Option<usize>,
    #[arg(long, value_parser = parse_init)]
    lmc_init: Option<InitRule>,
    #[arg(long, value_parser = parse_init)]
    mala_init: Option<InitRule>,
    #[arg(long, value_parser = parse_summary)]
    summary: Option<Summary>,
    #[arg(long)]
    lasso_folds: Option<usize>,
    #[arg(long)]
    lasso_max_iter: Option<usize>,
    #[arg(long)]
    lasso_tol: Option<f64>,
    #[arg(long)]
    lasso_grid_size: Option<usize>,
    #[arg(long)]
    lasso_min_ratio: Option<f64>,
    /// Comma-separated descending penalties.
    #[arg(long, value_delimiter = ',')]
    lasso_grid: Option<Vec<f64>>,
    #[arg(long)]
    fit_intercept: Option<bool>,
    #[arg(long)]
    standardize: Option<bool>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default from HINGE_EWA_THREADS, else all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_init(s: &str) -> Result<InitRule, String> {
    match s {
        "zero" => Ok(InitRule::Zero),
        "lasso" => Ok(InitRule::Lasso),
        _ => Err(format!("expected zero or lasso, got {s:?}")),
    }
}

fn parse_summary(s: &str) -> Result<Summary, String> {
    match s.replace('-', "_").as_str() {
        "posterior_mean" | "mean" => Ok(Summary::PosteriorMean),
        "draw" => Ok(Summary::Draw),
        _ => Err(format!("expected posterior-mean or draw, got {s:?}")),
    }
}

macro_rules! overlay {
    ($cfg:ident, $args:ident; $($field:ident),* $(,)?) => {
        $(if let Some(v) = &$args.$field { $cfg.$field = v.clone(); })*
    };
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?,
            None => RunConfig::default(),
        };
        overlay!(cfg, self;
            method, lambda, logit_lambda, tau, c1, n_iter, burn_in, thin, max_stored,
            step_size, adapt, target_acceptance, pilot_iters, lmc_init, mala_init, summary,
            lasso_folds, lasso_max_iter, lasso_tol, lasso_grid_size, lasso_min_ratio,
            fit_intercept, standardize, train_fraction, seed,
        );
        if let Some(h) = self.lmc_step {
            cfg.lmc_step = Some(h);
        }
        if let Some(g) = &self.lasso_grid {
            cfg.lasso_grid = Some(g.clone());
        }
        if let Some(t) = self.threads {
            cfg.threads = Some(t);
        }
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct FitCmd {
    /// Training CSV with a `y` column.
    #[arg(long)]
    data: PathBuf,
    /// Output model file.
    #[arg(long, short)]
    out: PathBuf,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct PredictCmd {
    #[arg(long)]
    model: PathBuf,
    /// CSV with the model's feature columns; a `y` column is optional.
    #[arg(long)]
    data: PathBuf,
    /// Output CSV of predicted labels (stdout when absent).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Write 0/1 labels instead of -1/+1.
    #[arg(long)]
    zero_one: bool,
}

#[derive(Args, Debug)]
struct SimulateCmd {
    /// Scenario name such as I.1 or II.4.
    #[arg(long, default_value = "I.1", conflicts_with = "stand_in")]
    scenario: String,
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    d: usize,
    #[arg(long, default_value_t = 10)]
    s0: usize,
    #[arg(long, default_value_t = 2000)]
    test_size: usize,
    /// Write the 102 x 6033 two-class stand-in dataset instead.
    #[arg(long)]
    stand_in: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for train.csv, test.csv and beta_star.csv (or data.csv).
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct BenchCmd {
    /// Comma-separated scenario names.
    #[arg(long, default_value = "I.1,I.2,I.3,I.4,II.1,II.2,II.3,II.4")]
    scenarios: String,
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    d: usize,
    #[arg(long, default_value_t = 10)]
    s0: usize,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 2000)]
    test_size: usize,
    /// Comma-separated methods.
    #[arg(long, default_value = "logit-lmc,h-lmc,logit-mala,h-mala,lasso")]
    methods: String,
    /// Benchmark on repeated random splits of this CSV instead of scenarios.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Number of random splits in data mode.
    #[arg(long, default_value_t = 100)]
    splits: usize,
    /// Fill the seconds columns with wall-clock time (not reproducible).
    #[arg(long)]
    record_time: bool,
    /// Summary CSV.
    #[arg(long, short)]
    out: PathBuf,
    /// Per-replication CSV.
    #[arg(long)]
    records: Option<PathBuf>,
    /// JSON manifest (default: the summary path with a .json extension).
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct CvCmd {
    #[arg(long)]
    data: PathBuf,
    /// Output JSON report (stdout when absent).
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(e.into())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Lib(Error::InvalidConfig(_)) => EXIT_USAGE,
            CliError::Lib(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Fit(c) => fit(c),
        Command::Predict(c) => predict(c),
        Command::Simulate(c) => simulate(c),
        Command::Bench(c) => bench(c),
        Command::Cv(c) => cv(c),
    }
}

fn init_threads(cfg: &RunConfig) -> Result<(), CliError> {
    let threads = match cfg.threads {
        Some(t) => Some(t),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse::<usize>().ok().filter(|&t| t > 0).ok_or_else(|| {
                CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        // a second initialization only fails when a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(())
}

/// Standardized copy of `data` and the statistics, when enabled.
fn prepare(data: LabeledDataset, cfg: &RunConfig) -> Result<(LabeledDataset, Option<StandardizationStats>), CliError> {
    if !cfg.standardize {
        return Ok((data, None));
    }
    let stats = StandardizationStats::fit(&data);
    Ok((stats.apply(&data)?, Some(stats)))
}

fn fit(c: FitCmd) -> Result<(), CliError> {
    let cfg = c.run.resolve()?;
    init_threads(&cfg)?;
    let raw = load_csv(&c.data)?;
    let names = raw.feature_names().to_vec();
    let (train, stats) = prepare(raw, &cfg)?;
    if let Some(w) = cfg.fit_settings().prior.dimension_warning(train.d()) {
        log::warn!("{w}");
    }
    let fitted = fit_method(cfg.method, &train, &cfg.fit_settings(), cfg.seed, &mut LassoCache::default())?;
    let train_misclassification = fitted.misclassification_rate(&train)?;
    let model = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        method: fitted.method,
        feature_names: names,
        beta: fitted.beta,
        intercept: fitted.intercept,
        standardization: stats,
        chain: fitted.chain,
        lasso_penalty: fitted.lasso_penalty,
        train_misclassification,
        config: cfg,
    };
    model.save(&c.out)?;
    println!(
        "{}: training misclassification {:.2}%, model written to {}",
        model.method,
        100.0 * train_misclassification,
        c.out.display()
    );
    Ok(())
}

fn predict(c: PredictCmd) -> Result<(), CliError> {
    let model = ModelFile::load(&c.model)?;
    let table = load_table(&c.data)?;
    if table.feature_names.len() != model.feature_names.len() {
        return Err(Error::DimensionMismatch {
            expected: model.feature_names.len(),
            actual: table.feature_names.len(),
        }
        .into());
    }
    if table.feature_names != model.feature_names {
        log::warn!("feature names differ from the model's; columns are matched by position");
    }
    let labelled = table.labels.is_some();
    let data = table.into_features()?;
    let predicted = model.predict(&data)?;
    if labelled {
        let wrong = predicted.iter().zip(data.labels()).filter(|(p, y)| p != y).count();
        log::info!("misclassification {:.2}%", 100.0 * wrong as f64 / data.n() as f64);
    }

    let sink: Box<dyn Write> = match &c.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["y"]).map_err(Error::from)?;
    for y in predicted {
        let v = if y > 0.0 {
            "1"
        } else if c.zero_one {
            "0"
        } else {
            "-1"
        };
        w.write_record([v]).map_err(Error::from)?;
    }
    w.flush()?;
    Ok(())
}

fn simulate(c: SimulateCmd) -> Result<(), CliError> {
    std::fs::create_dir_all(&c.out_dir)?;
    if c.stand_in {
        let spec = StandInSpec::prostate_geometry();
        let data = gen_stand_in(&spec, &mut stream(c.seed, &[streams::TRUTH]))?;
        let path = c.out_dir.join("data.csv");
        write_csv(&data, &path)?;
        println!("wrote {} ({} x {})", path.display(), data.n(), data.d());
        return Ok(());
    }
    let (setting, variant) = parse_scenario_name(&c.scenario).map_err(|e| CliError::Usage(e.to_string()))?;
    let spec = ScenarioSpec::new(setting, variant, c.n, c.d, c.s0, c.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if c.test_size == 0 {
        return Err(CliError::Usage("test size must be at least 1".into()));
    }
    let truth = gen_truth(&spec, &mut stream(c.seed, &[streams::TRUTH]))?;
    let train = hinge_ewa::simulation::gen_labels(&truth, &spec, &mut stream(c.seed, &[streams::TRAIN_LABELS]))?;
    let test = gen_sample(&truth.beta_star, &spec, c.test_size, &mut stream(c.seed, &[streams::TEST_DESIGN]))?;
    write_csv(&train, c.out_dir.join("train.csv"))?;
    write_csv(&test, c.out_dir.join("test.csv"))?;

    let mut w = csv::Writer::from_path(c.out_dir.join("beta_star.csv")).map_err(Error::from)?;
    w.write_record(["feature", "beta"]).map_err(Error::from)?;
    for (name, b) in train.feature_names().iter().zip(truth.beta_star.iter()) {
        w.write_record([name.clone(), format!("{b}")]).map_err(Error::from)?;
    }
    w.flush()?;
    println!("wrote scenario {} to {}", spec.name(), c.out_dir.display());
    Ok(())
}

#[derive(Serialize)]
struct BenchManifest<'a> {
    format: &'static str,
    version: u32,
    tool_version: &'static str,
    mode: &'static str,
    scenarios: Vec<String>,
    n: Option<usize>,
    d: Option<usize>,
    s0: Option<usize>,
    replications: usize,
    test_size: Option<usize>,
    data: Option<String>,
    train_fraction: Option<f64>,
    methods: Vec<Method>,
    config: &'a RunConfig,
    summary: String,
    records: Option<String>,
    failed_records: usize,
    record_time: bool,
}

fn bench(c: BenchCmd) -> Result<(), CliError> {
    let cfg = c.run.resolve()?;
    init_threads(&cfg)?;
    let methods = parse_methods(&c.methods).map_err(|e| CliError::Usage(e.to_string()))?;
    let bcfg = cfg.benchmark_config(c.test_size, c.record_time);

    let (result, mut manifest_stub): (BenchmarkResult, BenchManifest) = match &c.data {
        Some(path) => {
            let data = load_csv(path)?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "data".into());
            let result = run_split_benchmark(&name, &data, &methods, c.splits, cfg.train_fraction, cfg.seed, &bcfg)?;
            let m = manifest(&cfg, &methods, "splits", vec![name], c.splits, c.record_time);
            (result, BenchManifest {
                data: Some(path.display().to_string()),
                train_fraction: Some(cfg.train_fraction),
                ..m
            })
        }
        None => {
            let specs = c
                .scenarios
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    let (setting, variant) = parse_scenario_name(s.trim())?;
                    ScenarioSpec::new(setting, variant, c.n, c.d, c.s0, cfg.seed)
                })
                .collect::<hinge_ewa::Result<Vec<_>>>()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            if specs.is_empty() {
                return Err(CliError::Usage("no scenarios given".into()));
            }
            let result = run_benchmark(&specs, &methods, c.reps, &bcfg)?;
            let names = specs.iter().map(|s| s.name()).collect();
            let m = manifest(&cfg, &methods, "scenarios", names, c.reps, c.record_time);
            (result, BenchManifest {
                n: Some(c.n),
                d: Some(c.d),
                s0: Some(c.s0),
                test_size: Some(c.test_size),
                ..m
            })
        }
    };

    result.write_summary_csv(BufWriter::new(File::create(&c.out)?), c.record_time)?;
    if let Some(p) = &c.records {
        result.write_records_csv(BufWriter::new(File::create(p)?), c.record_time)?;
    }
    let failed = result.records.iter().filter(|r| r.error.is_some()).count();
    manifest_stub.summary = c.out.display().to_string();
    manifest_stub.records = c.records.as_ref().map(|p| p.display().to_string());
    manifest_stub.failed_records = failed;
    let manifest_path = c.manifest.clone().unwrap_or_else(|| c.out.with_extension("json"));
    write_json(&manifest_stub, &manifest_path)?;

    for cell in &result.cells {
        println!(
            "{:<8} {:<10} {:>7.2}% ({:.2}) reps={}",
            cell.scenario, cell.method, cell.mean_pct, cell.sd_pct, cell.reps
        );
    }
    if failed > 0 {
        for r in result.records.iter().filter(|r| r.error.is_some()) {
            log::warn!("{} {} #{}: {}", r.scenario, r.method, r.replication, r.error.as_deref().unwrap_or(""));
        }
        if failed == result.records.len() {
            return Err(Error::NonFinite("every fit failed".into()).into());
        }
    }
    Ok(())
}

fn manifest<'a>(
    cfg: &'a RunConfig,
    methods: &[Method],
    mode: &'static str,
    scenarios: Vec<String>,
    replications: usize,
    record_time: bool,
) -> BenchManifest<'a> {
    BenchManifest {
        format: "hinge-ewa-bench",
        version: 1,
        tool_version: env!("CARGO_PKG_VERSION"),
        mode,
        scenarios,
        n: None,
        d: None,
        s0: None,
        replications,
        test_size: None,
        data: None,
        train_fraction: None,
        methods: methods.to_vec(),
        config: cfg,
        summary: String::new(),
        records: None,
        failed_records: 0,
        record_time,
    }
}

#[derive(Serialize)]
struct CvOutput<'a> {
    data: String,
    standardized: bool,
    grid: &'a [f64],
    cv_error: &'a [f64],
    folds_used: usize,
    selected_penalty: f64,
    nonzero: usize,
    intercept: f64,
    beta: &'a [f64],
    feature_names: &'a [String],
}

fn cv(c: CvCmd) -> Result<(), CliError> {
    let cfg = c.run.resolve()?;
    init_threads(&cfg)?;
    let raw = load_csv(&c.data)?;
    let names = raw.feature_names().to_vec();
    let (data, stats) = prepare(raw, &cfg)?;
    let report = cv_select(&data, &cfg.lasso_config(), &mut stream(cfg.seed, &[streams::LASSO_CV]))?;
    let out = CvOutput {
        data: c.data.display().to_string(),
        standardized: stats.is_some(),
        grid: &report.grid,
        cv_error: &report.cv_error,
        folds_used: report.folds_used,
        selected_penalty: report.selected_penalty,
        nonzero: report.fit.beta.iter().filter(|b| **b != 0.0).count(),
        intercept: report.fit.intercept,
        beta: &report.fit.beta,
        feature_names: &names,
    };
    match &c.out {
        Some(p) => write_json(&out, p)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, &out).map_err(Error::from)?;
            writeln!(stdout)?;
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let mut file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut file, value).map_err(Error::from)?;
    file.write_all(b"\n")?;
    file.flush()?;
    Ok(())
}
