use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use tsnsim::harness::{
    report, run_scenario, sweep, write_histograms, write_outputs, HarnessError, KindStats,
    ScenarioConfig, StatsFile, TimestampKind, DEFAULT_BIN_WIDTH_NS,
};

#[derive(Parser)]
#[command(
    name = "tsnsim",
    version,
    about = "Run and analyze TSN simulation scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write records, stats.json and histograms.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `run.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recompute statistics and histograms from a records CSV.
    Report {
        csv: PathBuf,
        /// Histogram bin width; defaults to the value in a sibling stats.json,
        /// else 100 ns.
        #[arg(long)]
        bin_ns: Option<u64>,
    },
    /// Run a scenario once per value of a dotted config key.
    Sweep {
        scenario: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Write each run's outputs to `<out>/<param>=<value>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario file and print diagnostics.
    Validate { scenario: PathBuf },
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_config() {
            Failure::Config(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run {
            scenario,
            out,
            seed,
        } => cmd_run(&scenario, &out, seed),
        Command::Report { csv, bin_ns } => cmd_report(&csv, bin_ns),
        Command::Sweep {
            scenario,
            param,
            values,
            out,
        } => cmd_sweep(&scenario, &param, &values, out.as_deref()),
        Command::Validate { scenario } => cmd_validate(&scenario),
    }
}

fn read_document(path: &Path) -> Result<Value, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Config)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(Failure::Config)
}

fn load(path: &Path) -> Result<ScenarioConfig, Failure> {
    let cfg = ScenarioConfig::from_value(read_document(path)?)?;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(scenario: &Path, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let mut cfg = load(scenario)?;
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    let result = run_scenario(&cfg)?;
    let file = write_outputs(&result, out)?;
    print_summary(&file);
    println!("outputs written to {}", out.display());
    Ok(())
}

fn print_summary(file: &StatsFile) {
    println!(
        "scenario {} seed {} ({} events)",
        file.metadata.scenario, file.metadata.seed, file.metadata.events_executed
    );
    for s in &file.streams {
        println!("stream {} ({} records)", s.talker, s.records);
        print_kinds(&s.stats);
    }
    for (reason, n) in &file.drops {
        println!("dropped {reason}: {n}");
    }
}

fn print_kinds(stats: &KindStats) {
    println!(
        "  {:<6} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "kind", "min", "mean", "median", "p80", "max"
    );
    for kind in TimestampKind::ALL {
        if let Some(s) = stats.get(kind) {
            println!(
                "  {:<6} {:>12} {:>12.1} {:>12} {:>12} {:>12}",
                kind.name(),
                s.min,
                s.mean,
                s.median,
                s.p80,
                s.max
            );
        }
    }
}

/// Histogram prefix matching the naming used by `run`.
fn histogram_prefix(csv: &Path) -> String {
    let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    match stem.strip_prefix("records_") {
        Some(talker) => format!("{talker}_"),
        None if stem == "records" => String::new(),
        None => format!("{stem}_"),
    }
}

fn sibling_bin(csv: &Path) -> Option<u64> {
    let path = csv.parent()?.join("stats.json");
    let file: StatsFile = serde_json::from_str(&fs::read_to_string(path).ok()?).ok()?;
    Some(file.metadata.histogram_bin_ns)
}

fn cmd_report(csv: &Path, bin_ns: Option<u64>) -> Result<(), Failure> {
    let bin = bin_ns
        .or_else(|| sibling_bin(csv))
        .unwrap_or(DEFAULT_BIN_WIDTH_NS);
    if bin == 0 {
        return Err(Failure::Config(anyhow!("--bin-ns must be positive")));
    }
    let rep = report(csv, bin)?;
    let dir = csv.parent().unwrap_or(Path::new("."));
    write_histograms(&rep.stats, dir, &histogram_prefix(csv))?;
    let text = serde_json::to_string_pretty(&rep).map_err(anyhow::Error::from)?;
    println!("{text}");
    Ok(())
}

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn cmd_sweep(
    scenario: &Path,
    param: &str,
    values: &[String],
    out: Option<&Path>,
) -> Result<(), Failure> {
    let base = read_document(scenario)?;
    let parsed: Vec<Value> = values.iter().map(|v| parse_value(v)).collect();
    let runs = sweep(&base, param, &parsed)?;
    let mut summary = Vec::new();
    let mut failed = 0;
    for (raw, run) in values.iter().zip(runs) {
        match run.result {
            Ok(result) => {
                let entry = match out {
                    Some(dir) => {
                        let file = write_outputs(&result, &dir.join(format!("{param}={raw}")))?;
                        json!({ "value": run.value, "streams": file.streams, "drops": file.drops })
                    }
                    None => {
                        let streams: Vec<Value> = result
                            .streams
                            .iter()
                            .map(|s| {
                                let stats = tsnsim::harness::summarize(
                                    &s.records,
                                    s.period_ns,
                                    result.histogram_bin_ns,
                                )?;
                                Ok(json!({ "talker": s.talker, "records": s.records.len(), "stats": stats }))
                            })
                            .collect::<Result<_, HarnessError>>()?;
                        json!({ "value": run.value, "streams": streams, "drops": result.drops })
                    }
                };
                summary.push(entry);
            }
            Err(e) => {
                failed += 1;
                eprintln!("{param}={raw}: {e}");
                summary.push(json!({ "value": run.value, "error": e.to_string() }));
            }
        }
    }
    let text = serde_json::to_string_pretty(&summary).map_err(anyhow::Error::from)?;
    println!("{text}");
    if failed > 0 {
        return Err(Failure::Runtime(anyhow!(
            "{failed} of {} runs failed",
            values.len()
        )));
    }
    Ok(())
}

fn cmd_validate(scenario: &Path) -> Result<(), Failure> {
    let doc = read_document(scenario)?;
    let res = ScenarioConfig::from_value(doc).and_then(|cfg| cfg.validate().map(|()| cfg));
    match res {
        Ok(cfg) => {
            println!("{}: ok", display_name(&cfg, scenario));
            Ok(())
        }
        Err(HarnessError::ConfigInvalid(diags)) => {
            for d in &diags {
                println!("{d}");
            }
            Err(Failure::Config(anyhow!(
                "{} problem(s) in {}",
                diags.len(),
                scenario.display()
            )))
        }
        Err(e) => Err(e.into()),
    }
}

fn display_name(cfg: &ScenarioConfig, path: &Path) -> String {
    if cfg.name.is_empty() {
        path.display().to_string()
    } else {
        cfg.name.clone()
    }
}
