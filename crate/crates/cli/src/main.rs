use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use carbon_svr::fixtures::{self, input_path, FACTOR_NAMES, PRICE_NAME};
use carbon_svr::kernels::Gamma;
use carbon_svr::model::{FitOptions, ModelSpec};
use carbon_svr::notation::{
    format_model, parse_c_grid, parse_cv, parse_epsilons, parse_gammas, parse_kernels,
    parse_model_string, CvChoice,
};
use carbon_svr::pipeline::{
    compare_series, forecast_factor, run_pipeline, AnchorWeight, ComparisonTable, PipelineConfig,
};
use carbon_svr::reference::{self, deviation_table, Deviation};
use carbon_svr::report::{price_csv, record_pipeline, InputDigest, Report};
use carbon_svr::selection::{grid_search, make_folds, Execution, FoldPlan, GridSpec};
use carbon_svr::series::{load_scenarios, load_series, TimeSeries};
use carbon_svr::Error;

#[derive(Parser)]
#[command(
    name = "carbon-svr",
    version,
    about = "SVR grid search and scenario-conditioned carbon price forecasts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validated grid search of SVR hyperparameters on one series.
    GridSearch(GridArgs),
    /// Fit one model on a series and extrapolate it.
    ForecastFactor(FactorArgs),
    /// Run the two-stage scenario forecast on a directory of series.
    ForecastPrice(PriceArgs),
    /// Best cross-validated score per model family on one series.
    CompareModels(CompareArgs),
    /// Write the deterministic synthetic fixture files.
    GenFixtures(OutArgs),
    /// Run the reference configuration and tabulate deviations from the
    /// published values.
    Replicate(ReplicateArgs),
}

#[derive(Args)]
struct OutArgs {
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CvArgs {
    /// `loo` or `k:<int>`.
    #[arg(long, default_value = "loo")]
    cv: String,
    /// Fold shuffling seed for k-fold plans.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    input: PathBuf,
    /// `start:end:step` or a comma list; non-positive values are skipped.
    #[arg(long = "grid-C", default_value = "0.1,1,10,100,1000")]
    grid_c: String,
    #[arg(long, default_value = "rbf,linear")]
    kernels: String,
    #[arg(long, default_value = "0.1")]
    epsilons: String,
    #[arg(long, default_value = "scale")]
    gammas: String,
    #[command(flatten)]
    cv: CvArgs,
    #[arg(long)]
    standardize: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct FactorArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = reference::HORIZON.1)]
    to: i32,
    #[arg(long)]
    standardize: bool,
    /// Solver iteration cap per fit (default `100 * m^2`).
    #[arg(long)]
    max_iter: Option<usize>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct PriceArgs {
    /// Directory with `oil`, `dax`, `coal`, `gas`, `emission` and
    /// `carbon_price` series (`<name>.csv` or `<name>_synthetic.csv`).
    #[arg(long)]
    input: PathBuf,
    /// TOML file with one `[[scenario]]` table per scenario.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Carbon price model.
    #[arg(long)]
    model: Option<String>,
    /// Factor model override, `name=SPEC`; repeatable.
    #[arg(long = "factor-model")]
    factor_models: Vec<String>,
    #[arg(long)]
    emission_model: Option<String>,
    /// `observed` (one weight per observed year) or a positive number.
    #[arg(long, default_value = "observed")]
    anchor_weight: String,
    /// Last forecast year for every scenario.
    #[arg(long)]
    to: Option<i32>,
    #[arg(long)]
    standardize: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    cv: CvArgs,
    #[arg(long)]
    standardize: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct ReplicateArgs {
    /// Directory laid out as for `forecast-price`.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    cv: CvArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug)]
enum CliError {
    Core(Error),
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(flag: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{flag}: {e}"))
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())).into())
}

fn prepare_out(out: &OutArgs) -> CliResult<()> {
    std::fs::create_dir_all(&out.out_dir)
        .map_err(|e| Error::Io(format!("{}: {e}", out.out_dir.display())).into())
}

fn fold_plan(cv: &CvArgs, n: usize) -> CliResult<FoldPlan> {
    match parse_cv(&cv.cv).map_err(|e| usage("--cv", e))? {
        CvChoice::LeaveOneOut => Ok(FoldPlan::leave_one_out(n)),
        CvChoice::KFold(k) => Ok(make_folds(n, k, cv.seed)?),
    }
}

fn year_matrix(s: &TimeSeries) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_iterator(s.len(), 1, s.years().iter().map(|&y| f64::from(y)))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("series")
        .to_string()
}

fn model_flag(flag: &str, s: &str) -> CliResult<ModelSpec> {
    parse_model_string(s).map_err(|e| usage(flag, e))
}

fn write_report(out: &OutArgs, report: &Report) -> CliResult<()> {
    write_file(&out.out_dir.join("report.json"), &report.to_json())
}

#[derive(Serialize)]
struct GridConfig<'a> {
    input: String,
    grid_c: &'a str,
    kernels: &'a str,
    epsilons: &'a str,
    gammas: &'a str,
    cv: &'a str,
    seed: u64,
    fit: FitOptions,
}

#[derive(Serialize)]
struct GridBest {
    model: String,
    c: f64,
    epsilon: f64,
    gamma: String,
    kernel: String,
    mean_score: f64,
}

fn grid_cmd(a: &GridArgs) -> CliResult<()> {
    prepare_out(&a.out)?;
    let series = load_series(&a.input)?;
    let c = parse_c_grid(&a.grid_c).map_err(|e| usage("--grid-C", e))?;
    let kernels = parse_kernels(&a.kernels).map_err(|e| usage("--kernels", e))?;
    let eps = parse_epsilons(&a.epsilons).map_err(|e| usage("--epsilons", e))?;
    let gammas = parse_gammas(&a.gammas).map_err(|e| usage("--gammas", e))?;
    let fit = FitOptions {
        standardize: a.standardize,
        ..FitOptions::default()
    };
    let config = GridConfig {
        input: a.input.display().to_string(),
        grid_c: &a.grid_c,
        kernels: &a.kernels,
        epsilons: &a.epsilons,
        gammas: &a.gammas,
        cv: &a.cv.cv,
        seed: a.cv.seed,
        fit,
    };
    let mut report = Report::new("grid-search", &config)?;
    report.add_input(InputDigest::of_file(&a.input)?);
    if !c.skipped.is_empty() {
        let w = format!("skipped non-positive C values {:?}", c.skipped);
        eprintln!("warning: {w}");
        report.warnings.push(w);
    }
    if c.values.is_empty() {
        return Err(usage("--grid-C", "no positive C values"));
    }
    let grid = GridSpec::svr_product(&c.values, &eps, &gammas, &kernels)?;
    let plan = fold_plan(&a.cv, series.len())?;
    let cv = grid_search(
        &grid,
        &year_matrix(&series),
        &series.values(),
        &plan,
        &fit,
        Execution::Parallel,
    )?;

    let best = cv.best().map(|b| {
        let ModelSpec::Svr(hp) = &b.spec else {
            unreachable!("SVR grid")
        };
        GridBest {
            model: b.model.clone(),
            c: hp.c,
            epsilon: hp.epsilon,
            gamma: match hp.kernel.gamma {
                Gamma::Scale => "scale".into(),
                Gamma::Auto => "auto".into(),
                Gamma::Explicit(g) => g.to_string(),
            },
            kernel: hp.kernel.kind.name().to_string(),
            mean_score: b.mean_score,
        }
    });
    match &best {
        Some(b) => println!("best {} score {}", b.model, b.mean_score),
        None => println!("every candidate failed"),
    }
    println!("{} candidates, {} folds", cv.per_candidate.len(), plan.k);

    #[derive(Serialize)]
    struct Out<'a> {
        best: Option<GridBest>,
        cv: &'a carbon_svr::selection::CvReport,
    }
    report.set_results(&Out { best, cv: &cv })?;
    write_report(&a.out, &report)
}

#[derive(Serialize)]
struct FactorConfig {
    input: String,
    model: String,
    to: i32,
    fit: FitOptions,
}

fn factor_cmd(a: &FactorArgs) -> CliResult<()> {
    prepare_out(&a.out)?;
    let series = load_series(&a.input)?;
    let spec = model_flag("--model", &a.model)?;
    let mut fit = FitOptions {
        standardize: a.standardize,
        ..FitOptions::default()
    };
    fit.solver.max_iter = a.max_iter;
    let config = FactorConfig {
        input: a.input.display().to_string(),
        model: format_model(&spec),
        to: a.to,
        fit,
    };
    let mut report = Report::new("forecast-factor", &config)?;
    report.add_input(InputDigest::of_file(&a.input)?);

    let f = forecast_factor(&series, &spec, a.to, &fit)?;
    report.add_model(&format!("factor:{}", series.name), &f.model, &spec);
    report.set_results(&f.forecast)?;

    let mut csv = String::from("year,value\n");
    for p in &f.forecast.points {
        csv.push_str(&format!("{},{}\n", p.year, p.value));
    }
    let path = a
        .out
        .out_dir
        .join(format!("{}_forecast.csv", stem(&a.input)));
    write_file(&path, &csv)?;
    println!("wrote {} ({} rows)", path.display(), f.forecast.len());
    write_report(&a.out, &report)
}

fn input_digests(dir: &Path) -> CliResult<Vec<InputDigest>> {
    FACTOR_NAMES
        .iter()
        .chain(std::iter::once(&PRICE_NAME))
        .map(|n| Ok(InputDigest::of_file(&input_path(dir, n))?))
        .collect()
}

fn parse_anchor_weight(s: &str) -> CliResult<AnchorWeight> {
    if s == "observed" {
        return Ok(AnchorWeight::ObservedCount);
    }
    let w: f64 = s.parse().map_err(|_| {
        usage(
            "--anchor-weight",
            format!("expected 'observed' or a number, got '{s}'"),
        )
    })?;
    AnchorWeight::Fixed(w)
        .resolve(1)
        .map_err(|e| usage("--anchor-weight", e))?;
    Ok(AnchorWeight::Fixed(w))
}

fn price_config(a: &PriceArgs) -> CliResult<PipelineConfig> {
    let mut cfg = reference::reference_config();
    if let Some(path) = &a.scenario {
        cfg.scenarios = load_scenarios(path)?;
    }
    if let Some(to) = a.to {
        for s in &mut cfg.scenarios {
            s.horizon_end = to;
        }
    }
    if let Some(m) = &a.model {
        cfg.price_model = model_flag("--model", m)?;
    }
    if let Some(m) = &a.emission_model {
        cfg.emission_model = model_flag("--emission-model", m)?;
    }
    for fm in &a.factor_models {
        let (name, spec) = fm
            .split_once('=')
            .ok_or_else(|| usage("--factor-model", format!("expected name=SPEC, got '{fm}'")))?;
        let slot = cfg
            .factors
            .iter_mut()
            .find(|f| f.name == name.trim())
            .ok_or_else(|| usage("--factor-model", format!("unknown factor '{name}'")))?;
        slot.model = model_flag("--factor-model", spec)?;
    }
    cfg.anchor_weight = parse_anchor_weight(&a.anchor_weight)?;
    cfg.fit.standardize = a.standardize;
    cfg.validate()?;
    Ok(cfg)
}

fn write_pipeline_outputs(
    out: &OutArgs,
    result: &carbon_svr::pipeline::PipelineResult,
) -> CliResult<()> {
    for s in &result.scenarios {
        let path = out
            .out_dir
            .join(format!("forecast_{}.csv", s.scenario.label));
        write_file(&path, &price_csv(&s.price.price_by_year))?;
        println!("wrote {}", path.display());
        let mut em = String::from("year,value,provenance\n");
        for p in &s.emission.forecast.points {
            em.push_str(&format!("{},{},forecast\n", p.year, p.value));
        }
        em.push_str(&format!(
            "{},{},target_anchor\n",
            s.emission.anchor.year, s.emission.anchor.value
        ));
        write_file(
            &out.out_dir
                .join(format!("emission_{}.csv", s.scenario.label)),
            &em,
        )?;
    }
    let mut grid = String::from("year");
    for s in &result.scenarios {
        grid.push_str(&format!(",{}", s.scenario.label));
    }
    grid.push('\n');
    for (y, row) in result.price_grid() {
        grid.push_str(&y.to_string());
        for p in row {
            grid.push(',');
            if let Some(p) = p {
                grid.push_str(&p.to_string());
            }
        }
        grid.push('\n');
    }
    write_file(&out.out_dir.join("price_grid.csv"), &grid)
}

fn price_cmd(a: &PriceArgs) -> CliResult<()> {
    prepare_out(&a.out)?;
    let cfg = price_config(a)?;
    let inputs = fixtures::load_inputs(&a.input)?;
    let mut report = Report::new("forecast-price", &cfg)?;
    for d in input_digests(&a.input)? {
        report.add_input(d);
    }
    let result = run_pipeline(&cfg, &inputs)?;
    record_pipeline(&mut report, &cfg, &result)?;
    write_pipeline_outputs(&a.out, &result)?;
    print_grid(&result);
    write_report(&a.out, &report)
}

fn print_grid(result: &carbon_svr::pipeline::PipelineResult) {
    let labels: Vec<&str> = result
        .scenarios
        .iter()
        .map(|s| s.scenario.label.as_str())
        .collect();
    println!("year  {}", labels.join("  "));
    for (y, row) in result.price_grid() {
        let cells: Vec<String> = row
            .iter()
            .map(|p| p.map_or("-".into(), |p| format!("{p:.4}")))
            .collect();
        println!("{y}  {}", cells.join("  "));
    }
}

#[derive(Serialize)]
struct CompareConfig<'a> {
    input: String,
    cv: &'a str,
    seed: u64,
    fit: FitOptions,
    families: carbon_svr::pipeline::ComparisonFamilies,
}

fn print_table(name: &str, t: &ComparisonTable) {
    println!("{name}");
    println!("  {:<12} {:>20}  best model", "family", "neg_mse");
    for r in &t.rows {
        println!(
            "  {:<12} {:>20.6}  {}",
            r.family,
            r.best_score,
            r.best_model.as_deref().unwrap_or("-")
        );
    }
}

fn compare_cmd(a: &CompareArgs) -> CliResult<()> {
    prepare_out(&a.out)?;
    let series = load_series(&a.input)?;
    let fit = FitOptions {
        standardize: a.standardize,
        ..FitOptions::default()
    };
    let families = reference::default_families();
    let config = CompareConfig {
        input: a.input.display().to_string(),
        cv: &a.cv.cv,
        seed: a.cv.seed,
        fit,
        families,
    };
    let mut report = Report::new("compare-models", &config)?;
    report.add_input(InputDigest::of_file(&a.input)?);
    let plan = fold_plan(&a.cv, series.observed_points().len())?;
    let table = compare_series(&series, &config.families, &plan, &fit)?;
    print_table(&series.name, &table);
    report.set_results(&table)?;
    write_report(&a.out, &report)
}

fn gen_cmd(a: &OutArgs) -> CliResult<()> {
    let written = fixtures::write_fixtures(&a.out_dir)?;
    #[derive(Serialize)]
    struct Config {
        seed: u64,
    }
    let mut report = Report::new(
        "gen-fixtures",
        &Config {
            seed: fixtures::FIXTURE_SEED,
        },
    )?;
    for p in &written {
        println!("wrote {}", p.display());
        report.add_input(InputDigest::of_file(p)?);
    }
    write_report(a, &report)
}

fn deviations_csv(rows: &[Deviation]) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    let mut out = String::from("group,key,reference,observed,deviation_pct,note\n");
    for d in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            d.group,
            d.key,
            d.reference,
            opt(d.observed),
            opt(d.deviation_pct),
            d.note.as_deref().unwrap_or("")
        ));
    }
    out
}

fn replicate_cmd(a: &ReplicateArgs) -> CliResult<()> {
    prepare_out(&a.out)?;
    let cfg = reference::reference_config();
    let families = reference::default_families();
    let inputs = fixtures::load_inputs(&a.input)?;
    #[derive(Serialize)]
    struct Config<'a> {
        pipeline: &'a PipelineConfig,
        families: &'a carbon_svr::pipeline::ComparisonFamilies,
        cv: &'a str,
        seed: u64,
    }
    let mut report = Report::new(
        "replicate",
        &Config {
            pipeline: &cfg,
            families: &families,
            cv: &a.cv.cv,
            seed: a.cv.seed,
        },
    )?;
    for d in input_digests(&a.input)? {
        report.add_input(d);
    }
    let result = run_pipeline(&cfg, &inputs)?;
    let mut comparisons = Vec::new();
    for name in reference::COMPARISON_FACTORS {
        let series = inputs
            .factors
            .iter()
            .find(|f| f.name == name)
            .expect("factor inputs are named");
        let plan = fold_plan(&a.cv, series.observed_points().len())?;
        let table = compare_series(series, &families, &plan, &cfg.fit)?;
        print_table(name, &table);
        comparisons.push((name.to_string(), table));
    }
    let deviations = deviation_table(&result, &comparisons);
    record_pipeline(&mut report, &cfg, &result)?;
    write_pipeline_outputs(&a.out, &result)?;
    write_file(
        &a.out.out_dir.join("deviations.csv"),
        &deviations_csv(&deviations),
    )?;
    print_grid(&result);

    #[derive(Serialize)]
    struct Out<'a> {
        pipeline: serde_json::Value,
        comparisons: &'a [(String, ComparisonTable)],
        deviations: &'a [Deviation],
    }
    let pipeline = std::mem::take(&mut report.results);
    report.set_results(&Out {
        pipeline,
        comparisons: &comparisons,
        deviations: &deviations,
    })?;
    report
        .warnings
        .push(reference::EMISSION_PAIRING_NOTE.to_string());
    let populated = deviations.iter().filter(|d| d.observed.is_some()).count();
    println!(
        "deviation table: {populated}/{} reference values populated",
        deviations.len()
    );
    write_report(&a.out, &report)
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::GridSearch(a) => grid_cmd(a),
        Command::ForecastFactor(a) => factor_cmd(a),
        Command::ForecastPrice(a) => price_cmd(a),
        Command::CompareModels(a) => compare_cmd(a),
        Command::GenFixtures(a) => gen_cmd(a),
        Command::Replicate(a) => replicate_cmd(a),
    }
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
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_convergence() { 2 } else { 1 })
        }
    }
}
