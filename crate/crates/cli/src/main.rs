//! retrac — command-line front end for the retraction session engine.
//!
//! Subcommands: calibrate, gen-trace, run, replay, serve, report, score-ux.
//! Exit codes: 0 success, 1 usage error, 2 data/validation error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use retraction_engine::calibration::{CalibrationProfile, Calibrator, MovementKind};
use retraction_engine::level::LevelSpec;
use retraction_engine::pose::{PoseSample, Trace};
use retraction_engine::server::{StreamConfig, StreamServer};
use retraction_engine::session::{replay_trace, Session, SessionEvent, SessionSummary};
use retraction_engine::store::{
    self, is_session_dir, load_session, save_session, SessionParams, SessionRecord,
};
use retraction_engine::synth::TraceScript;
use retraction_engine::ux;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "retrac",
    version,
    about = "Headless session engine for neck-retraction rehabilitation exercises"
)]
struct Cli {
    /// Tunables file (engine + guard parameters) as a single JSON document.
    #[arg(long, global = true, value_name = "FILE")]
    params: Option<PathBuf>,

    /// Verbose diagnostics on stderr.
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a calibration profile from a pose stream.
    Calibrate(CalibrateArgs),
    /// Generate a synthetic pose trace plus its ground truth.
    GenTrace(GenTraceArgs),
    /// Score a live pose stream (file, `-` for stdin, or tcp://host:port).
    Run(RunArgs),
    /// Deterministically re-score a recorded trace.
    Replay(ReplayArgs),
    /// Serve live sessions over TCP, one session per connection.
    Serve(ServeArgs),
    /// Summarize stored session directories.
    Report(ReportArgs),
    /// Score subjective-evaluation response CSVs.
    ScoreUx(ScoreUxArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CalibrationModeArg {
    Manual,
    Auto,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MovementArg {
    Retraction,
    Bending,
    Extension,
    Custom,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Manual: the range comes from --range-m. Auto: from two marked samples.
    #[arg(long, value_enum)]
    mode: CalibrationModeArg,

    /// Pose input: file path, `-` for stdin, or tcp://host:port.
    #[arg(long = "in", value_name = "SRC")]
    input: String,

    /// Where to write the profile JSON.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,

    /// Maximum retraction range in meters (manual mode).
    #[arg(long, value_name = "METERS")]
    range_m: Option<f64>,

    #[arg(long, value_enum, default_value = "retraction")]
    movement: MovementArg,

    /// World-frame axis `x,y,z` for --movement custom.
    #[arg(long, value_name = "X,Y,Z")]
    custom_axis: Option<String>,

    /// Auto mode: session time of the start mark (defaults to the first sample).
    #[arg(long, value_name = "SECONDS")]
    mark_start: Option<f64>,

    /// Auto mode: session time of the end mark (defaults to the last sample).
    #[arg(long, value_name = "SECONDS")]
    mark_end: Option<f64>,

    /// Override the smallest accepted range, meters.
    #[arg(long, value_name = "METERS")]
    range_min: Option<f64>,

    /// Override the largest accepted range, meters.
    #[arg(long, value_name = "METERS")]
    range_max: Option<f64>,
}

#[derive(Args)]
struct GenTraceArgs {
    /// Trace script JSON.
    #[arg(long, value_name = "FILE")]
    script: PathBuf,
    /// Calibration profile JSON.
    #[arg(long, value_name = "FILE")]
    profile: PathBuf,
    /// Output trace JSONL.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Output ground-truth JSON.
    #[arg(long, value_name = "FILE")]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Calibration profile JSON.
    #[arg(long, value_name = "FILE")]
    profile: PathBuf,
    /// Built-in level, 1..=6.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6))]
    level: u8,
    /// Pose input: file path, `-` for stdin, or tcp://host:port.
    #[arg(long = "in", value_name = "SRC", default_value = "-")]
    input: String,
    /// Also write the event log here (JSONL).
    #[arg(long, value_name = "FILE")]
    events: Option<PathBuf>,
    /// Persist the full session directory here.
    #[arg(long, value_name = "DIR")]
    save_dir: Option<PathBuf>,
    /// Suppress per-event output; print only the final summary.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ReplayArgs {
    /// Recorded trace (JSONL pose records).
    #[arg(value_name = "TRACE")]
    trace: PathBuf,
    #[arg(long, value_name = "FILE")]
    profile: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6))]
    level: u8,
    /// Also write the event log here (JSONL).
    #[arg(long, value_name = "FILE")]
    events: Option<PathBuf>,
    /// Also write the summary JSON here.
    #[arg(long, value_name = "FILE")]
    summary: Option<PathBuf>,
    /// Suppress per-event output; print only the final summary.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ServeArgs {
    /// Bind address, e.g. 127.0.0.1:7878 (port 0 picks a free port).
    #[arg(long, value_name = "ADDR:PORT")]
    bind: String,
    #[arg(long, value_name = "FILE")]
    profile: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6))]
    level: u8,
    /// Where per-session directories are written.
    #[arg(long, value_name = "DIR", default_value = "sessions")]
    sessions_dir: PathBuf,
    /// Close idle connections after this many seconds.
    #[arg(long, value_name = "SECONDS", default_value_t = 30.0)]
    idle_timeout: f64,
    /// Close the connection on the first malformed line.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Session directories, or directories containing session directories.
    #[arg(long = "sessions", value_name = "DIR", num_args = 1.., required = true)]
    sessions: Vec<PathBuf>,
    /// Also write the report as CSV.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InstrumentArg {
    Engagement,
    Bipolar,
}

#[derive(Args)]
struct ScoreUxArgs {
    #[arg(long, value_enum)]
    instrument: InstrumentArg,
    /// Response CSV (see the guide for the column layout).
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Write the score table CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also write a plain-text report here.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
    /// Override the instrument wording (JSON definition file).
    #[arg(long, value_name = "FILE")]
    instrument_def: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version are success paths
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.exit_code());
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let params = load_params(cli.params.as_deref())?;
    match cli.command {
        Command::Calibrate(args) => calibrate(args, cli.verbose),
        Command::GenTrace(args) => gen_trace(args),
        Command::Run(args) => run(args, params, cli.verbose),
        Command::Replay(args) => replay(args, params),
        Command::Serve(args) => serve(args, params),
        Command::Report(args) => report(args),
        Command::ScoreUx(args) => score_ux(args),
    }
}

fn load_params(path: Option<&Path>) -> Result<SessionParams, CliError> {
    match path {
        None => Ok(SessionParams::default()),
        Some(p) => read_json(p),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let body = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&body).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let body = serde_json::to_string_pretty(value).map_err(data_err)?;
    fs::write(path, body + "\n").map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Opens a pose source: `-` for stdin, `tcp://host:port`, or a file path.
fn open_input(spec: &str) -> Result<Box<dyn BufRead>, CliError> {
    if spec == "-" {
        return Ok(Box::new(BufReader::new(std::io::stdin())));
    }
    if let Some(addr) = spec.strip_prefix("tcp://") {
        let stream = std::net::TcpStream::connect(addr)
            .map_err(|e| CliError::Data(format!("connect {addr}: {e}")))?;
        return Ok(Box::new(BufReader::new(stream)));
    }
    let file = fs::File::open(spec).map_err(|e| CliError::Data(format!("{spec}: {e}")))?;
    Ok(Box::new(BufReader::new(file)))
}

fn load_trace(spec: &str) -> Result<Trace, CliError> {
    Trace::from_jsonl(open_input(spec)?).map_err(data_err)
}

fn parse_axis(text: &str) -> Result<[f64; 3], CliError> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--custom-axis `{text}` is not three numbers")))?;
    parts
        .try_into()
        .map_err(|_| CliError::Usage(format!("--custom-axis `{text}` is not three numbers")))
}

fn calibrate(args: CalibrateArgs, verbose: bool) -> Result<(), CliError> {
    let movement = match args.movement {
        MovementArg::Retraction => MovementKind::Retraction,
        MovementArg::Bending => MovementKind::Bending,
        MovementArg::Extension => MovementKind::Extension,
        MovementArg::Custom => {
            let text = args.custom_axis.as_deref().ok_or_else(|| {
                CliError::Usage("--movement custom requires --custom-axis".into())
            })?;
            MovementKind::Custom(parse_axis(text)?)
        }
    };

    let trace = load_trace(&args.input)?;
    let mut calibrator = Calibrator::new(movement);
    if let (Some(min), Some(max)) = (args.range_min, args.range_max) {
        calibrator = calibrator.with_range_bounds(min, max);
    } else if args.range_min.is_some() || args.range_max.is_some() {
        return Err(CliError::Usage(
            "--range-min and --range-max must be given together".into(),
        ));
    }

    let sample_at = |mark: Option<f64>, default_idx: usize| -> &PoseSample {
        match mark {
            None => &trace.samples[default_idx],
            Some(t) => trace
                .samples
                .iter()
                .find(|s| s.t >= t)
                .unwrap_or(&trace.samples[trace.samples.len() - 1]),
        }
    };

    let profile = match args.mode {
        CalibrationModeArg::Manual => {
            let range_m = args
                .range_m
                .ok_or_else(|| CliError::Usage("--mode manual requires --range-m".into()))?;
            calibrator
                .capture_neutral(&trace.samples[0])
                .map_err(data_err)?;
            calibrator.set_manual_range(range_m).map_err(data_err)?
        }
        CalibrationModeArg::Auto => {
            let start = sample_at(args.mark_start, 0).clone();
            let end = sample_at(args.mark_end, trace.samples.len() - 1).clone();
            calibrator.auto_calibrate(&start, &end).map_err(data_err)?
        }
    };

    write_json(&args.out, &profile)?;
    if verbose {
        eprintln!(
            "calibrated: R = {:.4} m along [{:.3}, {:.3}, {:.3}]",
            profile.max_range_m, profile.axis[0], profile.axis[1], profile.axis[2]
        );
    }
    Ok(())
}

fn gen_trace(args: GenTraceArgs) -> Result<(), CliError> {
    let script: TraceScript = read_json(&args.script)?;
    let profile: CalibrationProfile = read_json(&args.profile)?;
    let (trace, truth) = script.generate(&profile).map_err(data_err)?;

    let file = fs::File::create(&args.out)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.out.display())))?;
    let mut writer = std::io::BufWriter::new(file);
    trace.to_jsonl(&mut writer).map_err(data_err)?;
    writer.flush().map_err(data_err)?;

    if let Some(truth_path) = &args.truth {
        write_json(truth_path, &truth)?;
    }
    Ok(())
}

fn load_profile_and_level(
    profile_path: &Path,
    level_index: u8,
) -> Result<(CalibrationProfile, LevelSpec), CliError> {
    let profile: CalibrationProfile = read_json(profile_path)?;
    profile.validate().map_err(data_err)?;
    let level = LevelSpec::builtin(level_index).map_err(data_err)?;
    Ok((profile, level))
}

fn emit_events(
    events: &[SessionEvent],
    quiet: bool,
    sink: &mut Option<std::io::BufWriter<fs::File>>,
) -> Result<(), CliError> {
    for event in events {
        let line = event.to_jsonl();
        if !quiet {
            println!("{line}");
        }
        if let Some(w) = sink {
            writeln!(w, "{line}").map_err(data_err)?;
        }
    }
    Ok(())
}

fn finalize_session(
    summary: &SessionSummary,
    events: Vec<SessionEvent>,
    profile: CalibrationProfile,
    level: LevelSpec,
    params: SessionParams,
    save_dir: Option<&Path>,
) -> Result<(), CliError> {
    if let Some(dir) = save_dir {
        let record = SessionRecord::new(profile, level, params, events, summary.clone());
        save_session(dir, &record).map_err(data_err)?;
    }
    println!("{}", serde_json::to_string(summary).map_err(data_err)?);
    Ok(())
}

fn run(args: RunArgs, params: SessionParams, verbose: bool) -> Result<(), CliError> {
    let (profile, level) = load_profile_and_level(&args.profile, args.level)?;
    let mut session = Session::new(
        profile.clone(),
        level.clone(),
        params.engine,
        params.guard.clone(),
    )
    .map_err(data_err)?;

    let mut events_sink = match &args.events {
        Some(path) => Some(std::io::BufWriter::new(fs::File::create(path).map_err(
            |e| CliError::Data(format!("{}: {e}", path.display())),
        )?)),
        None => None,
    };

    let reader = open_input(&args.input)?;
    let mut all_events = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(data_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let sample = PoseSample::parse(&line)
            .map_err(|e| CliError::Data(format!("line {}: {e}", idx + 1)))?;
        let events = session
            .ingest(&sample)
            .map_err(|e| CliError::Data(format!("line {}: {e}", idx + 1)))?;
        emit_events(&events, args.quiet, &mut events_sink)?;
        all_events.extend(events);
        if session.is_completed() {
            break;
        }
    }
    if let Some(w) = &mut events_sink {
        w.flush().map_err(data_err)?;
    }
    if verbose {
        eprintln!("ingested stream; reps = {}", session.rep_count());
    }
    let summary = session.finish();
    finalize_session(
        &summary,
        all_events,
        profile,
        level,
        params,
        args.save_dir.as_deref(),
    )
}

fn replay(args: ReplayArgs, params: SessionParams) -> Result<(), CliError> {
    let (profile, level) = load_profile_and_level(&args.profile, args.level)?;
    let trace_spec = args
        .trace
        .to_str()
        .ok_or_else(|| CliError::Usage("trace path is not valid UTF-8".into()))?;
    let trace = load_trace(trace_spec)?;
    let outcome =
        replay_trace(&profile, &level, &params.engine, &params.guard, &trace).map_err(data_err)?;

    let mut events_sink = match &args.events {
        Some(path) => Some(std::io::BufWriter::new(fs::File::create(path).map_err(
            |e| CliError::Data(format!("{}: {e}", path.display())),
        )?)),
        None => None,
    };
    emit_events(&outcome.events, args.quiet, &mut events_sink)?;
    if let Some(w) = &mut events_sink {
        w.flush().map_err(data_err)?;
    }
    if let Some(path) = &args.summary {
        write_json(path, &outcome.summary)?;
    }
    println!(
        "{}",
        serde_json::to_string(&outcome.summary).map_err(data_err)?
    );
    Ok(())
}

fn serve(args: ServeArgs, params: SessionParams) -> Result<(), CliError> {
    let (profile, level) = load_profile_and_level(&args.profile, args.level)?;
    let mut config = StreamConfig::new(args.bind, profile, level);
    config.params = params;
    config.idle_timeout_s = args.idle_timeout;
    config.sessions_dir = args.sessions_dir;
    config.strict = args.strict;
    let server = StreamServer::bind(config).map_err(data_err)?;
    eprintln!("listening on {}", server.local_addr());
    server.run().map_err(data_err)
}

fn report(args: ReportArgs) -> Result<(), CliError> {
    let mut records: Vec<(String, SessionRecord)> = Vec::new();
    for root in &args.sessions {
        let dirs: Vec<PathBuf> = if is_session_dir(root) {
            vec![root.clone()]
        } else {
            let entries = fs::read_dir(root)
                .map_err(|e| CliError::Data(format!("{}: {e}", root.display())))?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| is_session_dir(p))
                .collect();
            found.sort();
            found
        };
        for dir in dirs {
            let record = load_session(&dir).map_err(data_err)?;
            records.push((dir.display().to_string(), record));
        }
    }
    if records.is_empty() {
        return Err(CliError::Usage(
            "no session directories found under --sessions".into(),
        ));
    }
    let report = store::report(&records).map_err(data_err)?;
    print!("{}", report.to_text());
    if let Some(path) = &args.csv {
        fs::write(path, report.to_csv())
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn score_ux(args: ScoreUxArgs) -> Result<(), CliError> {
    let instruments = match &args.instrument_def {
        None => ux::InstrumentSet::default_set(),
        Some(path) => {
            let body = fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            ux::InstrumentSet::from_json(&body).map_err(data_err)?
        }
    };
    let file = fs::File::open(&args.input)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.input.display())))?;

    let map_ux_err = |e: ux::UxError| match e {
        ux::UxError::EmptyResponses => CliError::Usage(e.to_string()),
        other => CliError::Data(other.to_string()),
    };

    let (table_csv, text_report) = match args.instrument {
        InstrumentArg::Bipolar => {
            let responses = ux::read_bipolar_csv(file).map_err(map_ux_err)?;
            let means = ux::aspect_means(&responses).map_err(map_ux_err)?;
            let csv = ux::bipolar_csv(&instruments.bipolar, &means);
            let mut text = format!(
                "bipolar user-experience scores ({} responses)\n",
                responses.len()
            );
            for (i, aspect) in instruments.bipolar.aspects.iter().enumerate() {
                text.push_str(&format!(
                    "  {:<16} {:>6.2}  {}\n",
                    aspect.negative, means[i], aspect.positive
                ));
            }
            (csv, text)
        }
        InstrumentArg::Engagement => {
            let responses = ux::read_engagement_csv(file).map_err(map_ux_err)?;
            let mut csv = String::new();
            let mut text = format!("engagement responses ({} total)\n", responses.len());
            for setting in [ux::Setting::Setting1, ux::Setting::Setting2] {
                match ux::response_distribution(&responses, setting) {
                    Ok(counts) => {
                        let table = ux::engagement_csv(&instruments.engagement, setting, &counts);
                        if csv.is_empty() {
                            csv.push_str(&table);
                        } else {
                            // skip the duplicate header when appending
                            for line in table.lines().skip(1) {
                                csv.push_str(line);
                                csv.push('\n');
                            }
                        }
                        text.push_str(&format!("setting {setting:?}\n"));
                        for (i, label) in instruments.engagement.questions.iter().enumerate() {
                            text.push_str(&format!(
                                "  Q{} {:<46} -1:{:<3} 0:{:<3} +1:{:<3}\n",
                                i + 1,
                                label,
                                counts[i][0],
                                counts[i][1],
                                counts[i][2]
                            ));
                        }
                    }
                    Err(ux::UxError::EmptyResponses) => continue,
                    Err(e) => return Err(map_ux_err(e)),
                }
            }
            if responses.is_empty() {
                return Err(CliError::Usage("no responses in the CSV".into()));
            }
            (csv, text)
        }
    };

    match &args.out {
        Some(path) => fs::write(path, &table_csv)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
        None => print!("{table_csv}"),
    }
    if let Some(path) = &args.report {
        fs::write(path, &text_report)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}
