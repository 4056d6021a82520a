//! `pifit` command-line interface.
//!
//! Exit codes: 0 success, 2 data validation failure, 3 convergence failure,
//! 4 internal error. Command-line usage errors also exit with 2.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use pifit::classify::{ClassLabel, Guard};
use pifit::data::{format_check, load_csv, load_csv_path, Dataset};
use pifit::inference::{infer, prediction_band};
use pifit::plot::{render_class_frequency, render_panel_grid, render_single, PlotKind, PlotSpec};
use pifit::report::{results_json, tidy, write_tidy_csv, FitReport};
use pifit::{
    classify, classify_batch, fit_all, fit_model, high_res_grid, Criterion, Error, ErrorCategory,
    FitOptions, FitResult, ModelClass, ModelId,
};

#[derive(Parser, Debug)]
#[command(name = "pifit", version, about = "Fit, compare and classify photosynthesis-irradiance curves")]
struct Cli {
    /// Worker threads for batch work (default: all cores).
    #[arg(long, global = true, env = "PIFIT_THREADS")]
    threads: Option<usize>,

    /// Suppress progress and summary messages on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one model (or `auto`) to every experiment in a CSV file.
    Fit {
        #[command(flatten)]
        common: FitArgs,
        /// Model id (e.g. LS5, Ph10) or `auto`.
        #[arg(long)]
        model: String,
        /// Directory for fit_tidy.csv and fit_results.json (default: table on stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit all 24 models; tidy table plus a panel-grid SVG per experiment.
    Compare {
        #[command(flatten)]
        common: FitArgs,
        /// Directory for SVGs (and the table and JSON when given).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label each experiment light-limited, light-saturated or photoinhibited.
    Classify {
        input: PathBuf,
        /// Also print class frequencies and write class_frequency.svg.
        #[arg(long)]
        summary: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// High-resolution predictions (optionally with a confidence band) as CSV.
    Predict {
        #[command(flatten)]
        common: FitArgs,
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 200)]
        grid_points: usize,
        /// Add lower/upper confidence-band columns.
        #[arg(long)]
        ci: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Single-fit SVG per experiment.
    Plot {
        #[command(flatten)]
        common: FitArgs,
        #[arg(long)]
        model: String,
        /// Draw the dashed confidence band.
        #[arg(long)]
        ci: bool,
        /// Output directory (default: current directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
struct FitArgs {
    /// Input CSV with columns pi_information,I,P (`-` for stdin).
    input: PathBuf,
    #[arg(long, default_value = "mse")]
    criterion: String,
    /// Estimate dark respiration R as an extra parameter.
    #[arg(long)]
    respiration: bool,
    /// Confidence level for intervals and bands.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl FitArgs {
    fn options(&self) -> Result<FitOptions, Failure> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidLevel(self.level).into());
        }
        Ok(FitOptions {
            criterion: self.criterion.parse::<Criterion>()?,
            respiration: self.respiration,
            seed: self.seed,
            ..FitOptions::default()
        })
    }
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Convergence(String),
    Internal(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Convergence(_) => 3,
            Failure::Internal(_) => 4,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e.category() {
            ErrorCategory::Validation => Failure::Validation(e.to_string()),
            ErrorCategory::Convergence => Failure::Convergence(e.to_string()),
            ErrorCategory::Internal => Failure::Internal(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Internal(e)
    }
}

struct Ctx {
    quiet: bool,
}

impl Ctx {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

/// Reads and validates the input; with `lenient`, invalid experiments are
/// reported and dropped instead of failing the run.
fn read_input(path: &Path, ctx: &Ctx, lenient: bool) -> Result<(Vec<Dataset>, usize), Failure> {
    let raw = if path == Path::new("-") {
        load_csv(io::stdin().lock())
    } else {
        load_csv_path(path)
    }
    .map_err(|e| Failure::Validation(e.to_string()))?;
    let report = format_check(&raw);
    for v in &report.violations {
        eprintln!("{}: {v}", path.display());
    }
    let mut bad: Vec<&str> = report.violations.iter().map(|v| v.experiment.as_str()).collect();
    bad.sort();
    bad.dedup();
    if !report.is_clean() && !lenient {
        return Err(Failure::Validation(format!(
            "{} experiment(s) failed validation",
            bad.len()
        )));
    }
    if report.datasets.is_empty() && bad.is_empty() {
        return Err(Failure::Validation(format!("{}: no data rows", path.display())));
    }
    ctx.note(format!(
        "{}: {} experiment(s) loaded",
        path.display(),
        report.datasets.len()
    ));
    Ok((report.datasets, bad.len()))
}

/// Writes via a temporary file in the same directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path.file_name().context("output path has no file name")?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

fn emit(out: Option<&Path>, file: &str, bytes: &[u8], ctx: &Ctx) -> anyhow::Result<()> {
    match out {
        Some(dir) => {
            let p = dir.join(file);
            write_atomic(&p, bytes)?;
            ctx.note(format!("wrote {}", p.display()));
        }
        None => io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn save(dir: &Path, file: &str, bytes: &[u8], ctx: &Ctx) -> anyhow::Result<()> {
    emit(Some(dir), file, bytes, ctx)
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

enum ModelChoice {
    Fixed(ModelId),
    Auto,
}

fn parse_model(s: &str) -> Result<ModelChoice, Failure> {
    if s.eq_ignore_ascii_case("auto") {
        Ok(ModelChoice::Auto)
    } else {
        Ok(ModelChoice::Fixed(s.parse::<ModelId>()?))
    }
}

/// `auto`: LS5 unless the classifier finds photoinhibition, then Ph10.
fn resolve(choice: &ModelChoice, data: &Dataset, opts: &FitOptions, ctx: &Ctx) -> Result<ModelId, Error> {
    match choice {
        ModelChoice::Fixed(m) => Ok(*m),
        ModelChoice::Auto => {
            let label = classify(data, opts)?;
            let m = if label.label == ModelClass::Photoinhibited {
                ModelId::Ph10
            } else {
                ModelId::Ls5
            };
            ctx.note(format!("{}: classified {}, fitting {m}", data.id, label.label));
            Ok(m)
        }
    }
}

fn tidy_csv(reports: &[FitReport]) -> Result<Vec<u8>, Failure> {
    let rows = tidy(reports)?;
    let mut buf = Vec::new();
    write_tidy_csv(&rows, &mut buf)?;
    Ok(buf)
}

fn json_bytes(reports: &[FitReport], level: f64) -> anyhow::Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(&results_json(reports, level))?;
    v.push(b'\n');
    Ok(v)
}

/// First fit error across reports, as a failure.
fn first_fit_error(reports: &[FitReport]) -> Option<Failure> {
    reports.iter().find_map(|r| r.fit.as_ref().err().cloned().map(Failure::from))
}

fn cmd_fit(common: &FitArgs, model: &str, out: Option<&Path>, ctx: &Ctx) -> Result<(), Failure> {
    let opts = common.options()?;
    let choice = parse_model(model)?;
    let (datasets, _) = read_input(&common.input, ctx, false)?;
    let reports: Vec<FitReport> = datasets
        .par_iter()
        .map(|d| {
            let (model, fit) = match resolve(&choice, d, &opts, ctx) {
                Ok(m) => (m, fit_model(d, m, &opts)),
                Err(e) => (ModelId::Ls5, Err(e)),
            };
            FitReport::new(d, model, fit, common.level)
        })
        .collect();
    emit(out, "fit_tidy.csv", &tidy_csv(&reports)?, ctx)?;
    if let Some(dir) = out {
        save(dir, "fit_results.json", &json_bytes(&reports, common.level)?, ctx)?;
    }
    first_fit_error(&reports).map_or(Ok(()), Err)
}

fn cmd_compare(common: &FitArgs, out: Option<&Path>, ctx: &Ctx) -> Result<(), Failure> {
    let opts = common.options()?;
    let (datasets, _) = read_input(&common.input, ctx, false)?;
    let svg_dir = out.unwrap_or(Path::new("."));
    let mut all = Vec::new();
    for d in &datasets {
        let fits = fit_all(d, &opts)?;
        let ok: Vec<FitResult> = fits.iter().filter_map(|f| f.ok().cloned()).collect();
        let failed = fits.len() - ok.len();
        if failed > 0 {
            ctx.note(format!("{}: {failed} of {} models failed", d.id, fits.len()));
        }
        let svg = render_panel_grid(d, &ok, &PlotSpec::new(PlotKind::PanelGrid)).map_err(|e| match e {
            Error::Empty(m) => Failure::Convergence(format!("{}: {m}", d.id)),
            e => e.into(),
        })?;
        save(svg_dir, &format!("{}_compare.svg", file_stem(&d.id)), svg.as_bytes(), ctx)?;
        all.extend(FitReport::from_model_fits(d, fits, common.level));
    }
    emit(out, "compare_tidy.csv", &tidy_csv(&all)?, ctx)?;
    if let Some(dir) = out {
        save(dir, "compare_results.json", &json_bytes(&all, common.level)?, ctx)?;
    }
    Ok(())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.filter(|v| v.is_finite()).map(|v| format!("{v}")).unwrap_or_default()
}

fn label_record(id: &str, l: &Result<ClassLabel, Error>) -> Vec<String> {
    match l {
        Ok(l) => {
            let mut rec = vec![id.to_string(), l.label.to_string(), l.chosen.to_string()];
            rec.extend(l.evidence.iter().map(|e| fmt_opt(e.aicc)));
            let guards: Vec<String> = l
                .guards_applied
                .iter()
                .map(|g| match g {
                    Guard::InhibitionOutsideRange { i_beta, .. } => {
                        format!("I_beta={} outside observed range", fmt_opt(Some(*i_beta)))
                    }
                })
                .collect();
            rec.push(guards.join("; "));
            rec.push(String::new());
            rec
        }
        Err(e) => {
            let mut rec = vec![id.to_string(), String::new(), String::new()];
            rec.extend([String::new(), String::new(), String::new(), String::new()]);
            rec.push(e.to_string());
            rec
        }
    }
}

fn cmd_classify(input: &Path, summary: bool, seed: u64, out: Option<&Path>, ctx: &Ctx) -> Result<(), Failure> {
    let (datasets, invalid) = read_input(input, ctx, true)?;
    let opts = FitOptions {
        seed,
        ..FitOptions::default()
    };
    let (labels, mut stats) = if datasets.is_empty() {
        (Vec::new(), pifit::ClassSummary::from_labels(std::iter::empty()))
    } else {
        classify_batch(&datasets, &opts)?
    };
    stats.total += invalid;
    stats.failures += invalid;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["dataset", "label", "model", "aicc_lm", "aicc_LS5", "aicc_Ph10", "guards", "error"])
        .map_err(Error::from)?;
    for (d, l) in datasets.iter().zip(&labels) {
        w.write_record(label_record(&d.id, l)).map_err(Error::from)?;
    }
    let buf = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    emit(out, "classify.csv", &buf, ctx)?;

    if summary {
        for ((class, n), (_, f)) in stats.counts.iter().zip(&stats.frequencies) {
            ctx.note(format!("{:>16}: {n:>5}  {:.1}%", class.as_str(), 100.0 * f));
        }
        ctx.note(format!("{:>16}: {:>5}", "failures", stats.failures));
        let svg = render_class_frequency(&stats, &PlotSpec::new(PlotKind::ClassFrequency))?;
        save(out.unwrap_or(Path::new(".")), "class_frequency.svg", svg.as_bytes(), ctx)?;
    }
    if stats.classified() == 0 {
        return Err(Failure::Validation("no experiment could be classified".into()));
    }
    Ok(())
}

fn cmd_predict(
    common: &FitArgs,
    model: &str,
    grid_points: usize,
    ci: bool,
    out: Option<&Path>,
    ctx: &Ctx,
) -> Result<(), Failure> {
    let opts = common.options()?;
    let choice = parse_model(model)?;
    let (datasets, _) = read_input(&common.input, ctx, false)?;
    let blocks: Vec<Result<PredictBlock, Error>> = datasets
        .par_iter()
        .map(|d| {
            let m = resolve(&choice, d, &opts, ctx)?;
            let fit = fit_model(d, m, &opts)?;
            let grid = high_res_grid(d, grid_points)?;
            let pred = fit.model.evaluate_grid(&fit.params, &grid)?;
            let (band, band_err) = if ci { band_for(&fit, d, &grid, common.level, ctx) } else { (None, None) };
            let rows = grid
                .iter()
                .enumerate()
                .map(|(k, i)| {
                    let mut rec = vec![d.id.clone(), m.to_string(), format!("{i}"), format!("{}", pred[k])];
                    if ci {
                        rec.push(band.as_ref().map(|b| format!("{}", b.lower[k])).unwrap_or_default());
                        rec.push(band.as_ref().map(|b| format!("{}", b.upper[k])).unwrap_or_default());
                    }
                    rec
                })
                .collect();
            Ok((rows, band_err))
        })
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["dataset", "model", "I", "P"];
    if ci {
        header.extend(["lower", "upper"]);
    }
    w.write_record(&header).map_err(Error::from)?;
    let mut band_failure = None;
    for b in blocks {
        let (rows, err) = b?;
        for rec in rows {
            w.write_record(&rec).map_err(Error::from)?;
        }
        band_failure = band_failure.or(err);
    }
    let buf = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    emit(out, "predict.csv", &buf, ctx)?;
    band_failure.map_or(Ok(()), |e| Err(Failure::Convergence(e)))
}

fn cmd_plot(common: &FitArgs, model: &str, ci: bool, out: Option<&Path>, ctx: &Ctx) -> Result<(), Failure> {
    let opts = common.options()?;
    let choice = parse_model(model)?;
    let (datasets, _) = read_input(&common.input, ctx, false)?;
    let dir = out.unwrap_or(Path::new("."));
    let svgs: Vec<Result<PlotFile, Error>> = datasets
        .par_iter()
        .map(|d| {
            let m = resolve(&choice, d, &opts, ctx)?;
            let fit = fit_model(d, m, &opts)?;
            let mut spec = PlotSpec::new(PlotKind::SingleFit);
            spec.show_ci = ci;
            let (band, band_err) = if ci {
                let grid = high_res_grid(d, pifit::plot::CURVE_POINTS)?;
                band_for(&fit, d, &grid, common.level, ctx)
            } else {
                (None, None)
            };
            let svg = render_single(d, &fit, band.as_ref(), &spec)?;
            Ok((format!("{}_{}.svg", file_stem(&d.id), m), svg, band_err))
        })
        .collect();
    let mut band_failure = None;
    for s in svgs {
        let (name, svg, err) = s?;
        save(dir, &name, svg.as_bytes(), ctx)?;
        band_failure = band_failure.or(err);
    }
    band_failure.map_or(Ok(()), |e| Err(Failure::Convergence(e)))
}

/// Confidence band for `fit`, or the reason it is unavailable (reported on
/// stderr; the caller carries on without a band).
/// CSV rows for one experiment plus an optional band warning.
type PredictBlock = (Vec<Vec<String>>, Option<String>);
/// `(file name, SVG text, band warning)`.
type PlotFile = (String, String, Option<String>);

fn band_for(
    fit: &FitResult,
    d: &Dataset,
    grid: &[f64],
    level: f64,
    ctx: &Ctx,
) -> (Option<pifit::PredictionBand>, Option<String>) {
    let band = infer(fit, d, level).and_then(|inf| {
        if inf.covariance.pseudo_inverted {
            ctx.note(format!(
                "{}: {} information matrix is singular or indefinite; band uses a pseudo-inverse",
                d.id, fit.model
            ));
        }
        prediction_band(fit, &inf.covariance, grid, level)
    });
    match band {
        Ok(b) => (Some(b), None),
        Err(e) => {
            let msg = format!("{}: no confidence band for {}: {e}", d.id, fit.model);
            ctx.note(&msg);
            (None, Some(msg))
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let ctx = Ctx { quiet: cli.quiet };
    match &cli.command {
        Command::Fit { common, model, out } => cmd_fit(common, model, out.as_deref(), &ctx),
        Command::Compare { common, out } => cmd_compare(common, out.as_deref(), &ctx),
        Command::Classify {
            input,
            summary,
            seed,
            out,
        } => cmd_classify(input, *summary, *seed, out.as_deref(), &ctx),
        Command::Predict {
            common,
            model,
            grid_points,
            ci,
            out,
        } => cmd_predict(common, model, *grid_points, *ci, out.as_deref(), &ctx),
        Command::Plot { common, model, ci, out } => cmd_plot(common, model, *ci, out.as_deref(), &ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Validation(m) => eprintln!("error: {m}"),
                Failure::Convergence(m) => eprintln!("error: fit failed: {m}"),
                Failure::Internal(e) => eprintln!("internal error: {e:#}"),
            }
            ExitCode::from(f.code())
        }
    }
}
