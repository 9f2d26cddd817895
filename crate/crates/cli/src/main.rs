use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use usc_core::bench::{self, ExperimentPlan, RunOptions, PRESETS};
use usc_core::channel::PathModel;

#[derive(Parser)]
#[command(name = "usc-bench", version, about = "Monte-Carlo BER runs for USC waveforms over EVA channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a BER sweep and write CSV plus a resumable manifest.
    Run(RunArgs),
    /// Write one EVA delay-time channel realization as CSV.
    DumpChannel(DumpArgs),
    /// Run the invariant suite.
    Validate,
    /// Print a preset as a plan file.
    ShowPreset { name: String },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct PlanSource {
    /// Plan file with key=value lines.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Built-in plan: fig1-desk, fig2-desk, fig3-desk or smoke.
    #[arg(long)]
    preset: Option<String>,
}

impl PlanSource {
    fn load(&self) -> Result<ExperimentPlan, String> {
        match (&self.plan, &self.preset) {
            (Some(path), _) => {
                let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                ExperimentPlan::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
            }
            (None, Some(name)) => ExperimentPlan::preset(name).map_err(|e| e.to_string()),
            (None, None) => unreachable!("clap requires one source"),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: PlanSource,
    /// Overrides the plan seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Overrides frames per point.
    #[arg(long)]
    frames: Option<u64>,
    /// Ignore an existing manifest and recompute everything.
    #[arg(long)]
    fresh: bool,
    /// Write elapsed_ms = 0 so the CSV is byte-reproducible.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long, default_value_t = 500.0)]
    speed: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Take the frame dimensions from this plan file instead of the 64 × 64 default.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// per-path, per-tap or awgn.
    #[arg(long, default_value = "per-path")]
    model: String,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(args: RunArgs) -> Result<(), String> {
    let mut plan = args.source.load()?;
    if let Some(seed) = args.seed {
        plan.seed = seed;
    }
    if let Some(frames) = args.frames {
        plan.frames_per_point = frames;
    }
    if args.no_timing {
        plan.timing = false;
    }
    plan.validate().map_err(|e| e.to_string())?;
    let total = bench::plan_points(&plan).len();
    eprintln!(
        "{}: {total} points x {} frames, seed {}, config {}",
        plan.name,
        plan.frames_per_point,
        plan.seed,
        &plan.config_hash()[..12]
    );
    let mut done = 0;
    let summary = bench::run_plan(
        &plan,
        &args.out,
        RunOptions {
            workers: args.workers,
            fresh: args.fresh,
        },
        |r, resumed| {
            done += 1;
            let flag = if r.low_confidence() { "  (low confidence)" } else { "" };
            let how = if resumed { "resumed" } else { "done" };
            eprintln!(
                "[{done}/{total}] {how} {} {} {} dB {} km/h: BER {:.3e} FER {:.3}{flag}",
                r.scheme, r.detector, r.snr_db, r.speed_kmh, r.ber, r.fer
            );
        },
    )
    .map_err(|e| e.to_string())?;
    eprintln!(
        "wrote {} ({} rows, {} resumed) and {}",
        args.out.display(),
        summary.records.len(),
        summary.resumed,
        summary.manifest.display()
    );
    Ok(())
}

fn dump(args: DumpArgs) -> Result<(), String> {
    let frame = match &args.plan {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            ExperimentPlan::parse(&text).map_err(|e| e.to_string())?.frame
        }
        None => ExperimentPlan::new("dump").frame,
    };
    let model: PathModel = args.model.parse().map_err(|e: usc_core::Error| e.to_string())?;
    let mut buf = Vec::new();
    bench::dump_channel(&frame, args.speed, args.seed, model, &mut buf).map_err(|e| e.to_string())?;
    match &args.out {
        Some(path) => write_file(path, &buf),
        None => io::stdout().write_all(&buf).map_err(|e| e.to_string()),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), String> {
    fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()))
}

fn validate() -> Result<(), String> {
    let checks = usc_core::validate::run_all();
    let failed = checks.iter().filter(|c| !c.passed).count();
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if failed == 0 {
        println!("{} checks passed", checks.len());
        Ok(())
    } else {
        Err(format!("{failed} of {} checks failed", checks.len()))
    }
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::DumpChannel(args) => dump(args),
        Command::Validate => validate(),
        Command::ShowPreset { name } => ExperimentPlan::preset(&name)
            .map(|p| print!("{}", p.to_plan_text()))
            .map_err(|e| format!("{e}; presets: {}", PRESETS.join(", "))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
