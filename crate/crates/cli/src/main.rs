#![allow(clippy::neg_cmp_op_on_partial_ord)]

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use nonsparse::artifact::{load_model, save_model};
use nonsparse::dantzig::{LambdaPolicy, DEFAULT_REALIZATIONS};
use nonsparse::data::{load_csv, read_table};
use nonsparse::instrument::{InstrumentChoice, DEFAULT_MAX_EXACT_RANK};
use nonsparse::pipeline::{fit, AlphaPolicy, Centering, FitOptions, FitOutput};
use nonsparse::predict::predict_all;
use nonsparse::report::{format_table, read_csv, write_csv};
use nonsparse::simulate::{
    run_experiment, AlphaSetting, CenteringSetting, ExperimentConfig, InstrumentSetting, LambdaSetting,
};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "nonsparse",
    version,
    about = "Sub-model selection and bias-corrected estimation for non-sparse linear models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a CSV file and write the artifact plus a summary.
    Fit(FitArgs),
    /// Evaluate the three predictors of a saved fit at new rows.
    Predict(PredictArgs),
    /// Run a simulation experiment described by a TOML file.
    Simulate(SimulateArgs),
    /// Render saved report CSV files as an aligned table.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InstrumentArg {
    Auto,
    Exact,
    Approx,
}

#[derive(Clone, Copy, ValueEnum)]
enum CenteringArg {
    None,
    Selection,
    Full,
}

#[derive(Args, Clone)]
struct PipelineArgs {
    /// `auto` or a fixed value of the selector's tuning constant.
    #[arg(long)]
    lambda: Option<String>,
    /// Threshold multiplier on the noise level.
    #[arg(long)]
    kappa: Option<f64>,
    /// Number of unselected columns appended to the instrument basis.
    #[arg(long = "d-pseudo")]
    d_pseudo: Option<usize>,
    /// `zero`, `dantzig`, or a CSV file of `name,value` rows (`truth` is accepted by simulate).
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long, value_enum)]
    instrument: Option<InstrumentArg>,
    #[arg(long = "bandwidth-scale")]
    bandwidth_scale: Option<f64>,
    /// Keep this many columns after marginal screening.
    #[arg(long)]
    sis: Option<usize>,
    #[arg(long, value_enum)]
    centering: Option<CenteringArg>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Directory receiving fit.json, coefficients.csv and summary.txt.
    #[arg(long)]
    output: PathBuf,
    /// Response column; defaults to the last column.
    #[arg(long)]
    response: Option<String>,
    /// Known noise standard deviation; estimated when absent.
    #[arg(long)]
    sigma: Option<f64>,
    /// Halvings of the selector bound allowed when nothing is selected.
    #[arg(long = "max-backoff", default_value_t = 0)]
    max_backoff: usize,
    /// Seed for the noise draws behind the automatic tuning constant.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct PredictArgs {
    /// Fit artifact written by `fit`.
    #[arg(long)]
    fit: PathBuf,
    /// CSV with (at least) the predictor columns used in the fit.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output prefix; writes `<prefix>.csv` and `<prefix>.txt`.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// One or more report CSV files.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

impl From<nonsparse::Error> for Failure {
    fn from(e: nonsparse::Error) -> Self {
        Failure::Run(e.into())
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

fn parse_lambda(s: &str) -> Result<LambdaSetting, Failure> {
    if s == "auto" {
        return Ok(LambdaSetting::Named("auto".into()));
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(LambdaSetting::Fixed(v)),
        _ => usage(format!("--lambda must be `auto` or a positive number, got `{s}`")),
    }
}

fn read_alpha_file(path: &Path, names: &[String]) -> Result<DVector<f64>, Failure> {
    let mut reader = csv_reader(path)?;
    let mut alpha = DVector::zeros(names.len());
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: row {}", path.display(), i + 2))?;
        if rec.len() != 2 {
            return Err(anyhow!("{}: row {} must have `name,value`", path.display(), i + 2).into());
        }
        let j = names
            .iter()
            .position(|n| n == &rec[0])
            .ok_or_else(|| anyhow!("{}: unknown column `{}`", path.display(), &rec[0]))?;
        alpha[j] = rec[1]
            .parse()
            .map_err(|_| anyhow!("{}: `{}` is not a number", path.display(), &rec[1]))?;
    }
    Ok(alpha)
}

fn csv_reader(path: &Path) -> anyhow::Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))
}

fn fit_options(args: &FitArgs, names: &[String]) -> Result<FitOptions<f64>, Failure> {
    let p = &args.pipeline;
    let mut opts = FitOptions::default();
    opts.selection.lambda = match p.lambda.as_deref().map(parse_lambda).transpose()? {
        Some(LambdaSetting::Fixed(v)) => LambdaPolicy::Fixed(v),
        _ => LambdaPolicy::Auto {
            realizations: DEFAULT_REALIZATIONS,
            seed: args.seed,
        },
    };
    if let Some(s) = args.sigma {
        if !(s > 0.0) {
            return usage("--sigma must be positive");
        }
        opts.selection.sigma = Some(s);
    }
    if let Some(k) = p.kappa {
        if !(k > 0.0) {
            return usage("--kappa must be positive");
        }
        opts.selection.kappa = k;
    }
    opts.selection.max_backoff = args.max_backoff;
    if let Some(d) = p.d_pseudo {
        opts.instrument.d_pseudo = d;
    }
    if let Some(i) = p.instrument {
        opts.instrument.choice = match i {
            InstrumentArg::Auto => InstrumentChoice::Auto {
                max_rank: DEFAULT_MAX_EXACT_RANK,
            },
            InstrumentArg::Exact => InstrumentChoice::Exact,
            InstrumentArg::Approx => InstrumentChoice::Approximate,
        };
    }
    if let Some(h) = p.bandwidth_scale {
        if !(h > 0.0) {
            return usage("--bandwidth-scale must be positive");
        }
        opts.bandwidth_scale = h;
    }
    opts.sis = p.sis;
    if let Some(c) = p.centering {
        opts.centering = match c {
            CenteringArg::None => Centering::None,
            CenteringArg::Selection => Centering::SelectionOnly,
            CenteringArg::Full => Centering::Full,
        };
    }
    opts.alpha = match p.alpha.as_deref() {
        None | Some("zero") => AlphaPolicy::Zero,
        Some("dantzig") => AlphaPolicy::Dantzig,
        Some("truth") => return usage("--alpha truth is only meaningful for simulate"),
        Some(file) => {
            let path = Path::new(file);
            if !path.is_file() {
                return usage(format!(
                    "--alpha expects `zero`, `dantzig` or an existing CSV file, got `{file}`"
                ));
            }
            AlphaPolicy::Fixed(read_alpha_file(path, names)?)
        }
    };
    Ok(opts)
}

fn summary_text(out: &FitOutput<f64>, input: &Path) -> String {
    let m = &out.model;
    let d = &out.diagnostics;
    let sel = &out.selection;
    let mut s = String::new();
    let _ = writeln!(s, "input: {}", input.display());
    let _ = writeln!(s, "columns: {}", m.p());
    if let Some(kept) = &out.screened {
        let _ = writeln!(s, "screened to: {} columns", kept.len());
    }
    let names: Vec<&str> = m.selected.iter().map(|&j| m.names[j].as_str()).collect();
    let _ = writeln!(s, "selected ({}): {}", names.len(), names.join(", "));
    let _ = writeln!(s, "selector bound: {:.6e}", sel.lambda);
    let _ = writeln!(s, "noise level used: {:.6e}", sel.sigma_used);
    let _ = writeln!(s, "threshold: {:.6e}", sel.tau_threshold);
    let _ = writeln!(s, "bound halvings: {}", d.backoff_steps);
    let _ = writeln!(
        s,
        "instrument: {:?}, rank {}, d_pseudo {}",
        out.instrument.matrix.mode,
        out.instrument.effective_rank(),
        m.d_pseudo
    );
    let _ = writeln!(s, "bandwidth: {:.6e}", d.bandwidth);
    let _ = writeln!(s, "smallest eigenvalue of S_n: {:.6e}", d.identifiability);
    let _ = writeln!(s, "residual variance: {:.6e}", out.fit_new.sigma_v_sq);
    let _ = writeln!(
        s,
        "boundary fallbacks: {} (Dantzig alpha: {})",
        d.boundary_count, d.boundary_count_dantzig
    );
    let _ = writeln!(s, "mean of g: {:.6e}", m.g_bar);
    s
}

fn write_coefficients(out: &FitOutput<f64>, path: &Path) -> anyhow::Result<()> {
    let m = &out.model;
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record([
        "column",
        "index",
        "theta_hat",
        "std_error",
        "theta_dantzig_alpha",
        "theta_refit",
    ])?;
    let raw = m.theta_raw();
    let refit = m.theta_classic_raw();
    for (k, &j) in m.selected.iter().enumerate() {
        let scale = m.scales[j];
        w.write_record([
            m.names[j].clone(),
            (j + 1).to_string(),
            format!("{}", raw[k]),
            format!("{}", out.fit_new.std_errors[k] / scale),
            format!("{}", out.fit_dantzig_alpha.theta[k] / scale),
            format!("{}", refit[k]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn run_fit(args: FitArgs) -> Result<(), Failure> {
    let data = load_csv::<f64>(&args.input, args.response.as_deref())
        .with_context(|| format!("cannot load {}", args.input.display()))?;
    let opts = fit_options(&args, data.names())?;
    let out = fit(&data, &opts)?;
    fs::create_dir_all(&args.output).with_context(|| format!("cannot create {}", args.output.display()))?;
    save_model(&out.model, args.output.join("fit.json"))?;
    write_coefficients(&out, &args.output.join("coefficients.csv"))?;
    let text = summary_text(&out, &args.input);
    fs::write(args.output.join("summary.txt"), &text).context("cannot write summary")?;
    print!("{text}");
    Ok(())
}

fn run_predict(args: PredictArgs) -> Result<(), Failure> {
    if !args.fit.is_file() {
        return usage(format!(
            "no fit artifact at {}; run `nonsparse fit` first",
            args.fit.display()
        ));
    }
    let model = load_model::<f64>(&args.fit)?;
    let (header, table) = read_table::<f64>(&args.input)?;
    let cols: Vec<usize> = model
        .names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| anyhow!("{} has no column `{n}`", args.input.display()))
        })
        .collect::<anyhow::Result<_>>()?;
    let preds = predict_all(&model, &table.select_columns(&cols))?;
    let mut w =
        csv::Writer::from_path(&args.output).with_context(|| format!("cannot write {}", args.output.display()))?;
    w.write_record(["y_full", "y_sub_new", "y_sub_classic"])
        .map_err(anyhow::Error::from)?;
    for i in 0..preds.y_full.len() {
        w.write_record([
            format!("{}", preds.y_full[i]),
            format!("{}", preds.y_sub_new[i]),
            format!("{}", preds.y_sub_classic[i]),
        ])
        .map_err(anyhow::Error::from)?;
    }
    w.flush().map_err(anyhow::Error::from)?;
    if preds.boundary_count > 0 {
        eprintln!("warning: {} rows fell outside the kernel support", preds.boundary_count);
    }
    Ok(())
}

fn apply_overrides(cfg: &mut ExperimentConfig, p: &PipelineArgs) -> Result<(), Failure> {
    let lambda = p.lambda.as_deref().map(parse_lambda).transpose()?;
    let alpha = match p.alpha.as_deref() {
        None => None,
        Some("zero") => Some(AlphaSetting::Zero),
        Some("dantzig") => Some(AlphaSetting::Dantzig),
        Some("truth") => Some(AlphaSetting::Truth),
        Some(other) => return usage(format!("simulate accepts --alpha zero|dantzig|truth, got `{other}`")),
    };
    for c in &mut cfg.cells {
        if let Some(l) = &lambda {
            c.lambda = l.clone();
        }
        if let Some(a) = alpha {
            c.alpha = a;
        }
        if let Some(k) = p.kappa {
            c.kappa = k;
        }
        if let Some(d) = p.d_pseudo {
            c.d_pseudo = d;
        }
        if let Some(i) = p.instrument {
            c.instrument = match i {
                InstrumentArg::Auto => InstrumentSetting::Auto,
                InstrumentArg::Exact => InstrumentSetting::Exact,
                InstrumentArg::Approx => InstrumentSetting::Approx,
            };
        }
        if let Some(h) = p.bandwidth_scale {
            c.bandwidth_scale = h;
        }
        if let Some(s) = p.sis {
            c.sis = Some(s);
        }
        if let Some(cen) = p.centering {
            c.centering = match cen {
                CenteringArg::None => CenteringSetting::None,
                CenteringArg::Selection => CenteringSetting::Selection,
                CenteringArg::Full => CenteringSetting::Full,
            };
        }
        c.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<(), Failure> {
    if !args.config.is_file() {
        return usage(format!("no config file at {}", args.config.display()));
    }
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(s) = cfg.master_seed {
        if s != args.seed {
            return usage(format!(
                "--seed {} disagrees with master_seed = {s} in the config",
                args.seed
            ));
        }
    }
    if let Some(r) = args.replicates {
        if r == 0 {
            return usage("--replicates must be at least 1");
        }
        cfg.replicates = r;
    }
    if args.workers == Some(0) {
        return usage("--workers must be at least 1");
    }
    apply_overrides(&mut cfg, &args.pipeline)?;
    let reports = run_experiment(&cfg, args.seed, args.workers)?;
    let table = format_table(&reports);
    if let Some(prefix) = &args.output {
        let csv_path = prefix.with_extension("csv");
        let file = fs::File::create(&csv_path).with_context(|| format!("cannot write {}", csv_path.display()))?;
        write_csv(&reports, file)?;
        let txt_path = prefix.with_extension("txt");
        fs::write(&txt_path, &table).with_context(|| format!("cannot write {}", txt_path.display()))?;
    }
    print!("{table}");
    Ok(())
}

fn run_report(args: ReportArgs) -> Result<(), Failure> {
    let mut reports = Vec::new();
    for path in &args.input {
        let file = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        reports.extend(read_csv(file).with_context(|| format!("in {}", path.display()))?);
    }
    let table = format_table(&reports);
    match &args.output {
        Some(path) => fs::write(path, &table).with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{table}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Predict(a) => run_predict(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Report(a) => run_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
