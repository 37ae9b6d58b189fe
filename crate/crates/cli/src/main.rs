//! Command-line front end for the segmentation evaluation pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use segeval::overlap::CvVariant;
use segeval::report::{
    run_compare, validate, AssdPolicy, Metric, MetricTable, OutputWriter, PassOutputs, RunConfig, ScanPass, Session,
};
use segeval::synthetic;
use segeval::volume::Split;
use segeval::{Error, Tissue};

const EXIT_VALIDATION: u8 = 1;
const EXIT_PARTIAL: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(name = "segeval", version, about = "Volumetric segmentation evaluation and ensemble analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Audit the manifest: files, label codes, geometry, model references.
    Validate(Common),
    /// Per-scan metrics for every model and ensemble (metrics.csv).
    Evaluate(Common),
    /// Mean ± sd summary per model, tissue and metric (summary.json).
    Aggregate(TableArgs),
    /// Kruskal–Wallis and Dunn comparisons between models (stats.json).
    Compare(CompareArgs),
    /// Thickness Bland–Altman and metric correlations (bland_altman.json).
    Thickness(TableArgs),
    /// Depth-wise slice Dice profiles (droid_<tissue>.csv/.svg).
    Droid(Common),
    /// Evaluate configured ensembles and their summary (ensembles.json).
    Ensemble(Common),
    /// Mean pairwise Dice between models (dice_correlation_<tissue>.csv).
    Correlate(Common),
    /// Every output in one pass.
    Run(Common),
    /// Write the synthetic phantom dataset and its manifest.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AssdPolicyArg {
    Exclude,
    MaxPenalty,
}

#[derive(Clone, Copy, ValueEnum)]
enum CvVariantArg {
    Sample,
    Population,
}

#[derive(Args, Clone)]
struct Common {
    /// Dataset manifest (CSV or JSON).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Splits to evaluate (repeatable or comma separated).
    #[arg(long, value_delimiter = ',')]
    split: Vec<String>,
    /// Models to evaluate; default is every model in the manifest.
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
    /// Ensemble spec, e.g. vote:k=2, oracle:tp, oracle:tn@a,b (repeatable).
    #[arg(long = "ensemble")]
    ensembles: Vec<String>,
    /// Number of depth-profile bins.
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long, value_enum)]
    assd_policy: Option<AssdPolicyArg>,
    #[arg(long, value_enum)]
    cv_variant: Option<CvVariantArg>,
    /// Stratify the summary by KL grade.
    #[arg(long)]
    stratify_kl: bool,
}

#[derive(Args, Clone)]
struct TableArgs {
    #[command(flatten)]
    common: Common,
    /// Reuse an existing metrics.csv instead of evaluating.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct CompareArgs {
    #[command(flatten)]
    table: TableArgs,
    /// Restrict to one metric (requires --tissue).
    #[arg(long, requires = "tissue")]
    metric: Option<String>,
    #[arg(long, requires = "metric")]
    tissue: Option<String>,
}

#[derive(Args, Clone)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    subjects: usize,
    #[arg(long, default_value_t = synthetic::DEFAULT_SEED)]
    seed: u64,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(e: impl ToString) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: e.to_string(),
        }
    }

    fn internal(e: impl ToString) -> Self {
        Self {
            code: EXIT_INTERNAL,
            message: e.to_string(),
        }
    }
}

fn describe(e: &Error) -> String {
    match e {
        Error::ManifestValidation(list) => format!("manifest validation failed:\n  {}", list.join("\n  ")),
        other => other.to_string(),
    }
}

impl Common {
    fn config(&self) -> Result<RunConfig, Failure> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path).map_err(|e| Failure::validation(describe(&e)))?,
            None => RunConfig::default(),
        };
        if let Some(m) = &self.manifest {
            c.manifest = m.clone();
        }
        if c.manifest.as_os_str().is_empty() {
            return Err(Failure::validation("no manifest given (--manifest or config \"manifest\")"));
        }
        if let Some(o) = &self.out {
            c.out_dir = o.clone();
        }
        if !self.split.is_empty() {
            c.splits = self
                .split
                .iter()
                .map(|s| s.parse::<Split>())
                .collect::<Result<_, _>>()
                .map_err(Failure::validation)?;
        }
        if !self.models.is_empty() {
            c.models = self.models.clone();
        }
        if self.jobs.is_some() {
            c.jobs = self.jobs;
        }
        if !self.ensembles.is_empty() {
            c.ensembles = self.ensembles.clone();
        }
        if let Some(b) = self.bins {
            c.droid_bins = b;
        }
        if let Some(p) = self.assd_policy {
            c.assd_policy = match p {
                AssdPolicyArg::Exclude => AssdPolicy::Exclude,
                AssdPolicyArg::MaxPenalty => AssdPolicy::MaxPenalty,
            };
        }
        if let Some(v) = self.cv_variant {
            c.cv_variant = match v {
                CvVariantArg::Sample => CvVariant::Sample,
                CvVariantArg::Population => CvVariant::Population,
            };
        }
        if self.stratify_kl {
            c.stratify_kl = true;
        }
        Ok(c)
    }

    fn session(&self) -> Result<(Session, OutputWriter), Failure> {
        let config = self.config()?;
        let session = Session::open(config).map_err(|e| Failure::validation(describe(&e)))?;
        let writer = OutputWriter::new(&session.config.out_dir).map_err(Failure::internal)?;
        Ok((session, writer))
    }
}

/// Exit code after a pass: partial if anything was excluded.
fn pass_status(pass: &ScanPass) -> u8 {
    if pass.exclusions.is_empty() {
        0
    } else {
        let scan_level = pass.exclusions.iter().filter(|e| e.is_scan_level()).count();
        log::warn!(
            "{} exclusions ({scan_level} scan-level); see exclusions.json",
            pass.exclusions.len()
        );
        EXIT_PARTIAL
    }
}

fn write_evaluation(session: &Session, writer: &OutputWriter, pass: &ScanPass) -> Result<(), Failure> {
    writer.metrics(&pass.table).map_err(Failure::internal)?;
    writer.run_metadata(&session.metadata(pass.scans)).map_err(Failure::internal)?;
    writer.exclusions(pass).map_err(Failure::internal)?;
    if !session.plan.ensembles.is_empty() {
        writer
            .ensembles(&session.plan.ensembles, &pass.conflicts)
            .map_err(Failure::internal)?;
    }
    Ok(())
}

/// The metric table from `--metrics`, or a fresh evaluation written to the
/// output directory.
fn table_for(args: &TableArgs, session: &Session, writer: &OutputWriter) -> Result<(MetricTable, u8), Failure> {
    match &args.metrics {
        Some(path) => Ok((MetricTable::read_csv(path).map_err(Failure::validation)?, 0)),
        None => {
            let pass = session
                .pass(PassOutputs {
                    metrics: true,
                    ..PassOutputs::default()
                })
                .map_err(Failure::internal)?;
            write_evaluation(session, writer, &pass)?;
            let status = pass_status(&pass);
            Ok((pass.table, status))
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Validate(common) => {
            let config = common.config()?;
            let report = validate(&config);
            for w in &report.warnings {
                log::warn!("{w}");
            }
            if report.is_valid() {
                println!(
                    "manifest valid: {} scans, {} volumes checked",
                    report.scans, report.volumes_checked
                );
                Ok(0)
            } else {
                for p in &report.problems {
                    eprintln!("error: {p}");
                }
                Ok(EXIT_VALIDATION)
            }
        }
        Command::Evaluate(common) => {
            let (session, writer) = common.session()?;
            let pass = session
                .pass(PassOutputs {
                    metrics: true,
                    ..PassOutputs::default()
                })
                .map_err(Failure::internal)?;
            write_evaluation(&session, &writer, &pass)?;
            Ok(pass_status(&pass))
        }
        Command::Ensemble(common) => {
            let (session, writer) = common.session()?;
            if session.plan.ensembles.is_empty() {
                return Err(Failure::validation("no ensembles configured (--ensemble or config \"ensembles\")"));
            }
            let pass = session
                .pass(PassOutputs {
                    metrics: true,
                    ..PassOutputs::default()
                })
                .map_err(Failure::internal)?;
            write_evaluation(&session, &writer, &pass)?;
            let summary = session.summary(&pass.table).map_err(Failure::validation)?;
            writer.summary(&summary).map_err(Failure::internal)?;
            Ok(pass_status(&pass))
        }
        Command::Aggregate(args) => {
            let (session, writer) = args.common.session()?;
            let (table, status) = table_for(&args, &session, &writer)?;
            let summary = session.summary(&table).map_err(Failure::validation)?;
            writer.summary(&summary).map_err(Failure::internal)?;
            Ok(status)
        }
        Command::Compare(args) => {
            let (session, writer) = args.table.common.session()?;
            let (table, status) = table_for(&args.table, &session, &writer)?;
            let entries = match (&args.metric, &args.tissue) {
                (Some(metric), Some(tissue)) => {
                    let metric: Metric = metric.parse().map_err(Failure::validation)?;
                    let tissue = Tissue::from_name(tissue).map_err(Failure::validation)?;
                    let result = run_compare(&table, metric, tissue, &session.ranked_models())
                        .map_err(Failure::validation)?;
                    vec![segeval::report::ComparisonEntry {
                        tissue,
                        metric,
                        result: segeval::report::Outcome::Ok(result),
                    }]
                }
                _ => session.stats(&table),
            };
            writer.stats(&entries).map_err(Failure::internal)?;
            Ok(status)
        }
        Command::Thickness(args) => {
            let (session, writer) = args.common.session()?;
            let (table, status) = table_for(&args, &session, &writer)?;
            let reports = session.thickness(&table).map_err(Failure::internal)?;
            writer.thickness(&reports).map_err(Failure::internal)?;
            Ok(status)
        }
        Command::Droid(common) => {
            let (session, writer) = common.session()?;
            let pass = session
                .pass(PassOutputs {
                    droid: true,
                    ..PassOutputs::default()
                })
                .map_err(Failure::internal)?;
            writer.droid(&pass.droid).map_err(Failure::internal)?;
            Ok(0)
        }
        Command::Correlate(common) => {
            let (session, writer) = common.session()?;
            let pass = session
                .pass(PassOutputs {
                    correlation: true,
                    ..PassOutputs::default()
                })
                .map_err(Failure::internal)?;
            writer.correlations(&pass.correlations).map_err(Failure::internal)?;
            writer.exclusions(&pass).map_err(Failure::internal)?;
            Ok(if pass.correlation_skipped.is_empty() { 0 } else { EXIT_PARTIAL })
        }
        Command::Run(common) => {
            let (session, writer) = common.session()?;
            let pass = session.pass(PassOutputs::ALL).map_err(Failure::internal)?;
            write_evaluation(&session, &writer, &pass)?;
            let summary = session.summary(&pass.table).map_err(Failure::validation)?;
            writer.summary(&summary).map_err(Failure::internal)?;
            writer.stats(&session.stats(&pass.table)).map_err(Failure::internal)?;
            let thickness = session.thickness(&pass.table).map_err(Failure::internal)?;
            writer.thickness(&thickness).map_err(Failure::internal)?;
            writer.droid(&pass.droid).map_err(Failure::internal)?;
            writer.correlations(&pass.correlations).map_err(Failure::internal)?;
            Ok(pass_status(&pass))
        }
        Command::Synth(args) => {
            let scans = synthetic::generate(args.subjects, args.seed);
            let path = synthetic::write_dataset(&args.out, &scans).map_err(Failure::internal)?;
            println!("wrote {} scans; manifest {}", scans.len(), path.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
