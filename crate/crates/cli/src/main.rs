mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "radaract", version, about = "FMCW radar activity recognition pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate an activity and write an RCUB radar cube.
    Simulate(SimulateArgs),
    /// Turn an RCUB cube into a JTF0 spectrogram, or an empty-room cube into a calibration.
    Process(ProcessArgs),
    /// Generate a labeled synthetic corpus with a window manifest.
    Dataset(DatasetArgs),
    /// Train a GRU classifier on a corpus split.
    Train(TrainArgs),
    /// Evaluate a trained model on a corpus split.
    Eval(EvalArgs),
    /// Run the aggregation service.
    Serve(ServeArgs),
    /// Run one edge node.
    Edge(EdgeArgs),
    /// Compute a daily report from an event log or a running service.
    Report(ReportArgs),
    /// Print the derived radar parameters of a chirp config.
    Params(ParamsArgs),
}

#[derive(Args, Debug, Clone)]
struct RadarArgs {
    /// ChirpConfig JSON; `ti_awr1443.json` resolves to the bundled copy.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in configuration used when --config is absent.
    #[arg(long, value_enum, default_value_t = Preset::Awr1443)]
    preset: Preset,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Preset {
    Awr1443,
    Compact,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    activity: String,
    /// Seconds.
    #[arg(long)]
    duration: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Synthetic subject whose motion scaling is applied.
    #[arg(long)]
    subject: Option<u32>,
    #[command(flatten)]
    radar: RadarArgs,
    #[arg(long, default_value = "simulation.rcub")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ProcessArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Calibration JSON whose coupling profile is subtracted first.
    #[arg(long, conflicts_with = "calibrate")]
    calibration: Option<PathBuf>,
    /// Treat the input as an empty-room recording and write a calibration for this room.
    #[arg(long, value_name = "ROOM")]
    calibrate: Option<String>,
    #[arg(long, default_value_t = 3.0)]
    kappa: f64,
    #[arg(long, default_value_t = 10)]
    horizon_frames: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ClassSet {
    /// All six living-room classes.
    Six,
    /// Empty, sedentary, in-place movement, walking.
    Four,
}

#[derive(Args, Debug)]
struct DatasetArgs {
    #[arg(long, default_value_t = 2)]
    subjects: u32,
    #[arg(long, default_value_t = 5)]
    sessions: u32,
    #[arg(long, default_value_t = 8.0)]
    minutes_per_class: f64,
    #[arg(long, value_enum, default_value_t = ClassSet::Six)]
    classes: ClassSet,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Columns between manifest windows.
    #[arg(long, default_value_t = 10)]
    stride: usize,
    #[arg(long, default_value_t = 12.0)]
    segment_seconds: f64,
    /// Chirp config JSON; defaults to the compact preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "dataset")]
    out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum SplitKind {
    SessionIndependent,
    UnseenSubject,
}

#[derive(Args, Debug, Clone)]
struct SplitArgs {
    /// Corpus directory holding manifest.jsonl.
    #[arg(long, default_value = "dataset")]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitKind::SessionIndependent)]
    split: SplitKind,
    /// Defaults to the highest session.
    #[arg(long)]
    test_session: Option<u32>,
    /// Defaults to the highest subject.
    #[arg(long)]
    test_subject: Option<u32>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum NormArg {
    Peak,
    LogPeak,
    None,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    split: SplitArgs,
    /// Use the full 7x128 network instead of --layers/--hidden.
    #[arg(long)]
    full: bool,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.005)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    grad_clip: Option<f64>,
    #[arg(long, value_enum, default_value_t = NormArg::Peak)]
    normalization: NormArg,
    #[arg(long, default_value = "model.grum")]
    out: PathBuf,
    #[arg(long, default_value = "metrics.json")]
    metrics: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long, default_value = "model.grum")]
    model: PathBuf,
    #[arg(long, default_value = "eval.json")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ServiceConfigArgs {
    /// Telemetry JSON config; environment variables override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[command(flatten)]
    cfg: ServiceConfigArgs,
    #[arg(long)]
    bind: Option<String>,
    #[arg(long)]
    report_bind: Option<String>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EdgeArgs {
    #[command(flatten)]
    cfg: ServiceConfigArgs,
    #[arg(long)]
    room: String,
    #[arg(long)]
    connect: Option<String>,
    /// Calibration JSON; defaults to <calibration_dir>/<room>.json.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Replay a recorded RCUB cube.
    #[arg(long, conflicts_with_all = ["activity", "scenario"])]
    input: Option<PathBuf>,
    /// Simulate this activity instead.
    #[arg(long, requires = "duration", conflicts_with = "scenario")]
    activity: Option<String>,
    #[arg(long)]
    duration: Option<f64>,
    /// Replay this room's share of a scripted day (DayScript JSON).
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    radar: RadarArgs,
    /// Play at this multiple of sensor speed; flat out when absent.
    #[arg(long)]
    pace: Option<f64>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[command(flatten)]
    cfg: ServiceConfigArgs,
    /// YYYY-MM-DD (UTC).
    #[arg(long)]
    date: String,
    /// Read this event log directly.
    #[arg(long, conflicts_with = "connect")]
    store: Option<PathBuf>,
    /// Query a running service's report port.
    #[arg(long)]
    connect: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ParamsArgs {
    #[command(flatten)]
    radar: RadarArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
