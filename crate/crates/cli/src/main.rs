mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use config::{ConfigArgs, RunConfig};
use spes_core::classifier::{categorize_all, Categorization};
use spes_core::metrics::{
    export_report, simulate, sweep_categorized, with_workers, write_run_timing, write_sweep_csv,
    SimReport, SweepGrid,
};
use spes_core::predictor::write_profiles_jsonl;
use spes_core::provision::{DecisionLogWriter, PolicyKind};
use spes_core::trace_store::{
    generate_synthetic, load_azure_csv, split_dataset, write_trace_days, SyntheticSpec,
};
use spes_core::{FunctionCategory, TraceDataset};

/// A problem with the command line or configuration (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(
    name = "spes-sim",
    version,
    about = "Serverless pre-warming and keep-alive simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic trace from a JSON spec.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Categorize the training window and write categories.csv and links.csv.
    Train {
        /// Trace files or directories.
        #[arg(long, required = true, num_args = 1..)]
        trace: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Replay the simulation window and export a report.
    Simulate {
        #[arg(long, required = true, num_args = 1..)]
        trace: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Directory written by `train`. Without it SPES categorizes first.
        #[arg(long)]
        categorization: Option<PathBuf>,
        /// Also write every load, eviction, cold start and warm hit.
        #[arg(long)]
        decision_log: Option<PathBuf>,
        /// Also write the final runtime profiles as JSON lines.
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Trade-off sweep over pre-warm windows and give-up multipliers.
    Sweep {
        #[arg(long, required = true, num_args = 1..)]
        trace: Vec<PathBuf>,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5")]
        theta_grid: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        givenup_multipliers: Vec<u32>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Print the summary of an exported report directory.
    Report { dir: PathBuf },
}

/// Expand directories to the trace files they contain.
fn trace_files(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = vec![];
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("cannot list {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    let name = f.file_name().and_then(|n| n.to_str()).unwrap_or("");
                    name == "trace.csv"
                        || (name.starts_with("invocations_per_function") && name.ends_with(".csv"))
                })
                .collect();
            found.sort();
            if found.is_empty() {
                anyhow::bail!("{}: no trace files found", p.display());
            }
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn load_split(inputs: &[PathBuf], c: &RunConfig) -> anyhow::Result<(TraceDataset, TraceDataset)> {
    let ds = load_azure_csv(&trace_files(inputs)?)?;
    let (train_days, sim_days) = c.split_days(ds.days())?;
    Ok(split_dataset(&ds, train_days, sim_days)?)
}

fn print_counts(cat: &Categorization) {
    let counts = cat.category_counts();
    for c in FunctionCategory::ALL {
        println!(
            "{:<14} {}",
            c.as_str(),
            counts.get(&c).copied().unwrap_or(0)
        );
    }
}

fn cmd_gen(spec: &Path, out: &Path) -> anyhow::Result<()> {
    let spec = SyntheticSpec::from_json_file(spec)?;
    let (ds, labels) = generate_synthetic(&spec)?;
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let files = write_trace_days(&ds, out)?;
    let mut text = String::from("function_id,category\n");
    for (id, c) in &labels {
        text.push_str(&format!("{id},{}\n", c.as_str()));
    }
    std::fs::write(out.join("labels.csv"), text)?;
    println!(
        "{} functions, {} slots, {} files",
        ds.len(),
        ds.window(),
        files.len()
    );
    Ok(())
}

fn cmd_train(trace: &[PathBuf], out: &Path, c: &RunConfig) -> anyhow::Result<()> {
    let (train, _) = load_split(trace, c)?;
    let cat = with_workers(c.workers, || categorize_all(&train, &c.sim.spes))??;
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    cat.write_csv(out.join("categories.csv"))?;
    cat.write_links_csv(out.join("links.csv"))?;
    print_counts(&cat);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    trace: &[PathBuf],
    out: &Path,
    categorization: Option<&Path>,
    decision_log: Option<&Path>,
    profiles: Option<&Path>,
    c: &RunConfig,
) -> anyhow::Result<()> {
    let started = std::time::Instant::now();
    let (train, sim) = load_split(trace, c)?;
    let policy = c.policy_kind();
    let cfg = c.sim_config();
    let run = with_workers(c.workers, || -> anyhow::Result<_> {
        let cat = match (&policy, categorization) {
            (PolicyKind::FixedKeepAlive { .. }, _) => None,
            (PolicyKind::Spes(s), Some(dir)) => Some(Categorization::read_csv(
                dir.join("categories.csv"),
                dir.join("links.csv"),
                &train,
                &s.classifier,
            )?),
            (PolicyKind::Spes(s), None) => Some(categorize_all(&train, s)?),
        };
        let mut log = decision_log.map(DecisionLogWriter::create).transpose()?;
        let mut write = |d: &_, ids: &[String]| -> spes_core::Result<()> {
            if let Some(w) = log.as_mut() {
                w.write(d, ids).map_err(|e| spes_core::Error::Io {
                    path: decision_log.unwrap().into(),
                    source: e,
                })?;
            }
            Ok(())
        };
        let run = simulate(cat.as_ref(), &sim, &policy, &cfg, Some(&mut write))?;
        if let Some(w) = log {
            w.finish()
                .with_context(|| format!("cannot write {}", decision_log.unwrap().display()))?;
        }
        Ok(run)
    })??;
    let mut report = run.report;
    report.wall_clock = started.elapsed();
    export_report(&report, out)?;
    write_run_timing(&report, out)?;
    if let Some(p) = profiles {
        write_profiles_jsonl(&run.profiles, p)?;
    }
    print_summary(&report);
    Ok(())
}

fn cmd_sweep(trace: &[PathBuf], out: &Path, grid: SweepGrid, c: &RunConfig) -> anyhow::Result<()> {
    if c.policy != config::PolicyName::Spes {
        anyhow::bail!(UsageError("sweep only applies to the spes policy".into()));
    }
    let (train, sim) = load_split(trace, c)?;
    let cfg = c.sim_config();
    let rows = with_workers(c.workers, || -> anyhow::Result<_> {
        let cat = categorize_all(&train, &cfg.spes)?;
        sweep_categorized(&cat, &sim, &grid, &cfg).map_err(|e| match e {
            spes_core::Error::Config(m) => anyhow::Error::new(UsageError(m)),
            e => e.into(),
        })
    })??;
    write_sweep_csv(&rows, out)?;
    for r in &rows {
        println!(
            "theta={} x{} q3_csr={} normalized_memory={}",
            r.theta_prewarm,
            r.givenup_multiplier,
            fmt_opt(r.q3_csr),
            fmt_opt(r.normalized_memory)
        );
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

fn print_summary(r: &SimReport) {
    print_aggregates(
        &r.metadata.policy,
        &serde_json::to_value(&r.aggregates).unwrap_or_default(),
    );
}

fn print_aggregates(policy: &str, a: &serde_json::Value) {
    println!("policy            {policy}");
    for key in [
        "functions_total",
        "functions_invoked",
        "total_invoked_slots",
        "total_cold_starts",
        "csr_p50",
        "csr_q3",
        "csr_p90",
        "always_cold_fraction",
        "total_wmt",
        "emcr",
        "mean_memory_usage",
        "peak_memory_usage",
    ] {
        println!(
            "{key:<21} {}",
            a.get(key).map_or("-".to_string(), |v| v.to_string())
        );
    }
    if let Some(per_type) = a
        .get("per_type")
        .and_then(|v| v.as_object())
        .filter(|m| !m.is_empty())
    {
        println!(
            "{:<14} {:>9} {:>9} {:>12}",
            "category", "functions", "mean_csr", "median_wmt/s"
        );
        for (cat, t) in per_type {
            println!(
                "{cat:<14} {:>9} {:>9.4} {:>12.2}",
                t["functions"].as_u64().unwrap_or(0),
                t["mean_csr"].as_f64().unwrap_or(f64::NAN),
                t["wmt_ratio"]["median"].as_f64().unwrap_or(f64::NAN)
            );
        }
    }
}

fn cmd_report(dir: &Path) -> anyhow::Result<()> {
    let path = dir.join("report.json");
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("bad report {}", path.display()))?;
    let policy = v["metadata"]["policy"].as_str().unwrap_or("?").to_string();
    print_aggregates(&policy, &v["aggregates"]);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen { spec, out } => cmd_gen(&spec, &out),
        Command::Train { trace, out, cfg } => cmd_train(&trace, &out, &cfg.resolve()?),
        Command::Simulate {
            trace,
            out,
            categorization,
            decision_log,
            profiles,
            cfg,
        } => cmd_simulate(
            &trace,
            &out,
            categorization.as_deref(),
            decision_log.as_deref(),
            profiles.as_deref(),
            &cfg.resolve()?,
        ),
        Command::Sweep {
            trace,
            out,
            theta_grid,
            givenup_multipliers,
            cfg,
        } => cmd_sweep(
            &trace,
            &out,
            SweepGrid {
                theta_prewarm: theta_grid,
                givenup_multipliers,
            },
            &cfg.resolve()?,
        ),
        Command::Report { dir } => cmd_report(&dir),
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<spes_core::Error>() {
        Some(spes_core::Error::Config(_) | spes_core::Error::InvalidSplit(_)) => 2,
        _ => 3,
    }
}

/// The error chain, skipping causes already quoted by their parent.
fn message(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.ends_with(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spes-sim: {}", message(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
