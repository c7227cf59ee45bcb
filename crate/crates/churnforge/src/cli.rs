//! Command line front end.
//!
//! Exit codes: 0 on success, 1 for data or runtime errors, 2 for usage and
//! configuration errors.

use std::ffi::OsString;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use churnforge_core::analysis;
use churnforge_core::classify::Scaling;
use churnforge_core::eval::{self, DEFAULT_RATIOS};
use churnforge_core::label::{self, LabeledWorker};
use churnforge_core::synth::{self, MarketConfig};
use churnforge_core::{finalize_log, DropoutLabel, EventLog, LabelRule};

use crate::config::apply_config_text;
use crate::ingest::{parse_events, write_events, Format, IngestReport};
use crate::manifest::{write_atomic, RunManifest};
use crate::report::{self, CorrelationEntry};

/// Seed used when neither `--seed` nor `CHURNFORGE_SEED` is given.
pub const DEFAULT_SEED: u64 = 42;
/// Default ψ: 90 days in seconds.
pub const DEFAULT_PSI: u64 = 90 * 86_400;

#[derive(Debug, Parser)]
#[command(
    name = "churnforge",
    version,
    about = "Dropout prediction for crowdsourcing contest markets"
)]
pub struct Cli {
    /// Random seed [default: 42]
    #[arg(long, global = true, env = "CHURNFORGE_SEED")]
    pub seed: Option<u64>,
    /// Event file format for output, and for input files without a .csv/.jsonl extension
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Directory receiving outputs and manifests
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Print nothing on success
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic market event log
    Simulate(SimulateArgs),
    /// Validate and normalize an event log
    Ingest(IngestArgs),
    /// Degree features, dropout labels, success-rate bins and correlations
    Analyze(AnalyzeArgs),
    /// Split-ratio sweep of k-NN (k = 1, 3) and naive Bayes
    Evaluate(EvaluateArgs),
    /// Print a bin table or sweep table CSV as aligned text
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Events file [default: <out-dir>/events.<format>]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// key = value file with market parameters; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// [default: 1000]
    #[arg(long)]
    pub n_workers: Option<usize>,
    /// [default: 13000]
    #[arg(long)]
    pub n_tasks: Option<usize>,
    /// [default: 600]
    #[arg(long)]
    pub horizon_days: Option<i64>,
    /// Task arrivals per day [default: 22.5]
    #[arg(long)]
    pub task_rate: Option<f64>,
    /// Fraction of the horizon over which workers join [default: 0.4]
    #[arg(long)]
    pub join_spread: Option<f64>,
    /// [default: 1.2]
    #[arg(long)]
    pub skill_alpha: Option<f64>,
    /// [default: 3.0]
    #[arg(long)]
    pub skill_beta: Option<f64>,
    /// Chance an alive worker enters a task [default: 0.01]
    #[arg(long)]
    pub participation_prob: Option<f64>,
    /// Exit hazard per consecutive loss [default: 0.012]
    #[arg(long)]
    pub streak_hazard: Option<f64>,
    /// Exit hazard after every task [default: 0.004]
    #[arg(long)]
    pub base_hazard: Option<f64>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Events file to read
    #[arg(long)]
    pub events: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LabelMode {
    /// No activity after the chronological cut
    Window,
    /// Final inter-arrival gap longer than psi
    LastGap,
    /// Time from the last arrival to the horizon end longer than psi
    Absence,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// Share of tasks in the feature window, as a decimal or a/b
    #[arg(long, default_value = "2/3", value_parser = parse_fraction)]
    pub cut_ratio: f64,
    /// Dropout threshold in seconds for the threshold modes
    #[arg(long, default_value_t = DEFAULT_PSI)]
    pub psi: u64,
    /// How dropouts are labeled
    #[arg(long, value_enum, default_value_t = LabelMode::Window)]
    pub label_mode: LabelMode,
    /// Observation window START:END in seconds [default: span of the events]
    #[arg(long, value_parser = parse_horizon)]
    pub horizon: Option<(i64, i64)>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Event log, CSV or JSONL
    #[arg(
        long,
        required_unless_present = "from_bins",
        conflicts_with = "from_bins"
    )]
    pub events: Option<PathBuf>,
    /// Bin table CSV (range,count,mean_success_rate_pct); only correlations are computed
    #[arg(long)]
    pub from_bins: Option<PathBuf>,
    #[command(flatten)]
    pub label: LabelArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Event log, CSV or JSONL
    #[arg(long, required_unless_present = "labels", conflicts_with = "labels")]
    pub events: Option<PathBuf>,
    /// Labels CSV as written by `analyze`
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Train percentages
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_RATIOS.to_vec())]
    pub ratios: Vec<u32>,
    /// Use raw features for k-NN instead of z-scores
    #[arg(long)]
    pub unscaled: bool,
    #[command(flatten)]
    pub label: LabelArgs,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ReportArgs {
    /// Bin table CSV
    #[arg(long)]
    pub bins: Option<PathBuf>,
    /// Sweep table CSV
    #[arg(long)]
    pub sweep: Option<PathBuf>,
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let value = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a
                .trim()
                .parse()
                .map_err(|_| format!("bad numerator in {s:?}"))?;
            let b: f64 = b
                .trim()
                .parse()
                .map_err(|_| format!("bad denominator in {s:?}"))?;
            a / b
        }
        None => s
            .trim()
            .parse()
            .map_err(|_| format!("{s:?} is not a number"))?,
    };
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(format!("{s} must lie strictly between 0 and 1"))
    }
}

fn parse_horizon(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s.split_once(':').ok_or("expected START:END")?;
    let a = a.trim().parse().map_err(|_| format!("bad start {a:?}"))?;
    let b = b.trim().parse().map_err(|_| format!("bad end {b:?}"))?;
    Ok((a, b))
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration (exit 2).
    Config(String),
    /// Bad data or a runtime failure (exit 1).
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 1,
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

struct Ctx {
    seed: u64,
    format: Format,
    out_dir: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            print!("{}", msg.as_ref());
        }
    }

    fn write(&self, manifest: &mut RunManifest, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.out_dir.join(name);
        write_atomic(&path, bytes).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        manifest.outputs.push(path);
        Ok(())
    }

    fn finish(
        &self,
        mut manifest: RunManifest,
        path: &Path,
        started: Instant,
    ) -> Result<(), CliError> {
        manifest.duration_ms = started.elapsed().as_millis();
        write_atomic(path, &manifest.to_json())
            .map_err(|e| data_err(format!("{}: {e}", path.display())))
    }
}

/// Parses `args` (program name first) and runs the subcommand, returning the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return err.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(err) => {
            match &err {
                CliError::Config(msg) => eprintln!("configuration error: {msg}"),
                CliError::Data(msg) => eprintln!("error: {msg}"),
            }
            err.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let ctx = Ctx {
        seed: cli.seed.unwrap_or(DEFAULT_SEED),
        format: cli.format,
        out_dir: cli.out_dir,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Simulate(args) => simulate(&ctx, args, cli.seed),
        Command::Ingest(args) => ingest(&ctx, args),
        Command::Analyze(args) => analyze(&ctx, args),
        Command::Evaluate(args) => evaluate(&ctx, args),
        Command::Report(args) => print_report(&ctx, args),
    }
}

fn simulate(ctx: &Ctx, args: SimulateArgs, flag_seed: Option<u64>) -> Result<(), CliError> {
    let started = Instant::now();
    let mut config = synth::default_config(DEFAULT_SEED);
    let mut manifest = RunManifest::new("simulate", 0);
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        apply_config_text(&mut config, &text).map_err(|e| CliError::Config(e.to_string()))?;
        manifest.inputs.push(path.clone());
    }
    if let Some(seed) = flag_seed {
        config.seed = seed;
    }
    macro_rules! flag {
        ($arg:ident => $field:ident) => {
            if let Some(v) = args.$arg {
                config.$field = v;
            }
        };
    }
    flag!(n_workers => n_workers);
    flag!(n_tasks => n_tasks);
    flag!(horizon_days => horizon_days);
    flag!(task_rate => task_rate);
    flag!(join_spread => worker_join_spread);
    flag!(skill_alpha => skill_alpha);
    flag!(skill_beta => skill_beta);
    flag!(participation_prob => base_participation_prob);
    flag!(streak_hazard => streak_hazard);
    flag!(base_hazard => base_hazard);

    let log = synth::generate_market(&config).map_err(|e| CliError::Config(e.to_string()))?;

    let out = args.out.clone().unwrap_or_else(|| {
        ctx.out_dir
            .join(format!("events.{}", ctx.format.extension()))
    });
    let format = Format::from_path(&out, ctx.format);
    let mut bytes = Vec::new();
    write_events(&mut bytes, log.events(), format).map_err(data_err)?;
    write_atomic(&out, &bytes).map_err(|e| data_err(format!("{}: {e}", out.display())))?;

    manifest.seed = config.seed;
    record_config(&mut manifest, &config);
    manifest.param("format", format.extension());
    manifest.outputs.push(out.clone());
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("events");
    let manifest_path = out.with_file_name(format!("{stem}.manifest.json"));
    ctx.finish(manifest, &manifest_path, started)?;

    let tasks: std::collections::BTreeSet<&str> =
        log.events().iter().map(|e| e.task_id()).collect();
    ctx.say(format!(
        "wrote {} events ({} tasks, {} workers) to {}\n",
        log.len(),
        tasks.len(),
        log.arrival_times().len(),
        out.display()
    ));
    Ok(())
}

fn record_config(manifest: &mut RunManifest, c: &MarketConfig) {
    manifest
        .param("n_workers", c.n_workers)
        .param("n_tasks", c.n_tasks)
        .param("horizon_days", c.horizon_days)
        .param("task_rate", c.task_rate)
        .param("worker_join_spread", c.worker_join_spread)
        .param("skill_alpha", c.skill_alpha)
        .param("skill_beta", c.skill_beta)
        .param("base_participation_prob", c.base_participation_prob)
        .param("streak_hazard", c.streak_hazard)
        .param("base_hazard", c.base_hazard);
}

/// Reads and finalizes an events file. Rejected records are reported on
/// stderr; a file yielding no usable log is a data error.
fn load_log(
    ctx: &Ctx,
    path: &Path,
    horizon: Option<(i64, i64)>,
) -> Result<(EventLog, IngestReport), CliError> {
    let file = File::open(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    let format = Format::from_path(path, ctx.format);
    let (events, report) =
        parse_events(file, format).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    if events.is_empty() && horizon.is_none() {
        eprint!("{report}");
        return Err(CliError::Data(format!(
            "{}: no usable events",
            path.display()
        )));
    }
    if report.events_rejected > 0 && !ctx.quiet {
        eprint!("{report}");
    }
    let finalized = finalize_log(events, horizon).map_err(|e| {
        eprint!("{report}");
        data_err(format!("{}: {e}", path.display()))
    })?;
    if !finalized.collapsed.is_empty() && !ctx.quiet {
        eprintln!(
            "collapsed {} duplicate participations",
            finalized.collapsed.len()
        );
    }
    Ok((finalized.log, report))
}

fn ingest(ctx: &Ctx, args: IngestArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let (log, report) = load_log(ctx, &args.events, None)?;
    let mut manifest = RunManifest::new("ingest", ctx.seed);
    manifest.inputs.push(args.events.clone());
    manifest.param("format", ctx.format.extension());
    let mut bytes = Vec::new();
    write_events(&mut bytes, log.events(), ctx.format).map_err(data_err)?;
    ctx.write(
        &mut manifest,
        &format!("events.normalized.{}", ctx.format.extension()),
        &bytes,
    )?;
    ctx.write(
        &mut manifest,
        "ingest_report.txt",
        report.to_string().as_bytes(),
    )?;
    ctx.finish(manifest, &ctx.out_dir.join("ingest.manifest.json"), started)?;
    ctx.say(format!(
        "{report}horizon: [{}, {}]\n",
        log.horizon_start(),
        log.horizon_end()
    ));
    Ok(())
}

fn label_rule(log: &EventLog, args: &LabelArgs) -> Result<LabelRule, CliError> {
    Ok(match args.label_mode {
        LabelMode::Window => {
            let cut_time = label::split_cut_time(log, args.cut_ratio).map_err(data_err)?;
            LabelRule::WindowAbsence { cut_time }
        }
        LabelMode::LastGap => LabelRule::ThresholdLastGap { psi: args.psi },
        LabelMode::Absence => LabelRule::ThresholdAbsence { psi: args.psi },
    })
}

fn record_label_args(manifest: &mut RunManifest, args: &LabelArgs, rule: Option<LabelRule>) {
    manifest
        .param("cut_ratio", args.cut_ratio)
        .param("psi", args.psi)
        .param(
            "label_mode",
            format!("{:?}", args.label_mode).to_lowercase(),
        );
    if let Some((a, b)) = args.horizon {
        manifest.param("horizon", format!("{a}:{b}"));
    }
    if let Some(LabelRule::WindowAbsence { cut_time }) = rule {
        manifest.param("cut_time", cut_time);
    }
}

fn bin_entries(table: &churnforge_core::BinTable) -> [CorrelationEntry; 2] {
    [
        CorrelationEntry {
            name: "bin_dropout_excl_top_bin",
            result: analysis::bin_dropout_correlation(table, true),
        },
        CorrelationEntry {
            name: "bin_dropout_all_bins",
            result: analysis::bin_dropout_correlation(table, false),
        },
    ]
}

fn analyze(ctx: &Ctx, args: AnalyzeArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let mut manifest = RunManifest::new("analyze", ctx.seed);

    if let Some(bins) = &args.from_bins {
        let file = File::open(bins).map_err(|e| data_err(format!("{}: {e}", bins.display())))?;
        let table =
            report::read_bins(file).map_err(|e| data_err(format!("{}: {e}", bins.display())))?;
        manifest.inputs.push(bins.clone());
        let entries = bin_entries(&table);
        ctx.write(
            &mut manifest,
            "correlations.csv",
            &report::correlations_csv(&entries),
        )?;
        let text = report::correlations_text(&entries);
        ctx.write(&mut manifest, "correlations.txt", text.as_bytes())?;
        ctx.finish(
            manifest,
            &ctx.out_dir.join("analyze.manifest.json"),
            started,
        )?;
        ctx.say(text);
        return Ok(());
    }

    let events = args
        .events
        .as_ref()
        .expect("clap requires --events without --from-bins");
    let (log, _) = load_log(ctx, events, args.label.horizon)?;
    manifest.inputs.push(events.clone());
    let rule = label_rule(&log, &args.label)?;
    record_label_args(&mut manifest, &args.label, Some(rule));

    let features = churnforge_core::network::features_from_log(&log);
    let labeled = label::label_by_rule(&log, rule).map_err(data_err)?;
    let dropouts: Vec<_> = labeled
        .iter()
        .filter(|l| l.label == DropoutLabel::Dropout)
        .map(|l| l.features.clone())
        .collect();
    let table = analysis::bin_success_rates(&dropouts);

    let [excl, all] = bin_entries(&table);
    let entries = [
        CorrelationEntry {
            name: "degree",
            result: analysis::degree_correlation(&features),
        },
        excl,
        all,
    ];

    ctx.write(
        &mut manifest,
        "features.csv",
        &report::features_csv(&features),
    )?;
    ctx.write(&mut manifest, "labels.csv", &report::labels_csv(&labeled))?;
    ctx.write(&mut manifest, "bins.csv", &report::bins_csv(&table))?;
    let table_text = report::bins_text(&table);
    ctx.write(&mut manifest, "bins.txt", table_text.as_bytes())?;
    ctx.write(
        &mut manifest,
        "correlations.csv",
        &report::correlations_csv(&entries),
    )?;
    let corr_text = report::correlations_text(&entries);
    ctx.write(&mut manifest, "correlations.txt", corr_text.as_bytes())?;
    ctx.finish(
        manifest,
        &ctx.out_dir.join("analyze.manifest.json"),
        started,
    )?;

    ctx.say(format!(
        "{} workers, {} labeled, {} dropouts\n\n{table_text}\n{corr_text}",
        features.len(),
        labeled.len(),
        dropouts.len()
    ));
    Ok(())
}

fn evaluate(ctx: &Ctx, args: EvaluateArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let mut manifest = RunManifest::new("evaluate", ctx.seed);
    if let Some(&bad) = args.ratios.iter().find(|&&r| r == 0 || r >= 100) {
        return Err(CliError::Config(format!(
            "train percentage {bad} must lie in 1..=99"
        )));
    }
    let labeled: Vec<LabeledWorker> = if let Some(path) = &args.labels {
        let file = File::open(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        manifest.inputs.push(path.clone());
        report::read_labels(file).map_err(|e| data_err(format!("{}: {e}", path.display())))?
    } else {
        let events = args
            .events
            .as_ref()
            .expect("clap requires --events without --labels");
        let (log, _) = load_log(ctx, events, args.label.horizon)?;
        manifest.inputs.push(events.clone());
        let rule = label_rule(&log, &args.label)?;
        record_label_args(&mut manifest, &args.label, Some(rule));
        label::label_by_rule(&log, rule).map_err(data_err)?
    };
    let scaling = if args.unscaled {
        Scaling::Raw
    } else {
        Scaling::Standardized
    };
    let ratios: Vec<String> = args.ratios.iter().map(u32::to_string).collect();
    manifest
        .param("ratios", ratios.join(","))
        .param("unscaled", args.unscaled);

    let rows = eval::split_sweep_with(&labeled, &args.ratios, ctx.seed, scaling).map_err(|e| {
        let dropouts = labeled
            .iter()
            .filter(|l| l.label == DropoutLabel::Dropout)
            .count();
        data_err(format!(
            "{e} ({} labeled workers, {dropouts} dropouts)",
            labeled.len()
        ))
    })?;

    ctx.write(&mut manifest, "sweep.csv", &report::sweep_csv(&rows))?;
    let text = report::sweep_text(&rows);
    ctx.write(&mut manifest, "sweep.txt", text.as_bytes())?;
    ctx.finish(
        manifest,
        &ctx.out_dir.join("evaluate.manifest.json"),
        started,
    )?;
    ctx.say(text);
    Ok(())
}

fn print_report(_ctx: &Ctx, args: ReportArgs) -> Result<(), CliError> {
    if let Some(path) = &args.bins {
        let file = File::open(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        let table = report::read_bins(file).map_err(data_err)?;
        print!("{}", report::bins_text(&table));
    }
    if let Some(path) = &args.sweep {
        let file = File::open(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        let rows = report::read_sweep(file).map_err(data_err)?;
        print!("{}", report::sweep_text(&rows));
    }
    Ok(())
}
