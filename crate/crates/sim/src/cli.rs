//! The `diffsync` command line.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use diffsync_core::calibration;
use diffsync_core::energy::{EnergyPreset, LinkKind};

use crate::config::{self, parse_link, ConfigError, Overrides};
use crate::output;
use crate::presets;
use crate::report::{self, RunError};

#[derive(Debug, Parser)]
#[command(name = "diffsync", about = "Differential synchronization energy simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write result.json and events.csv.
    Run {
        /// Scenario file or bundled scenario name.
        scenario: String,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Output directory (default: $DIFFSYNC_OUT/<name> or ./out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a fixed-interval scenario over a list of intervals and links.
    Sweep {
        scenario: String,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Comma-separated intervals in seconds.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        /// Comma-separated links (default: the scenario's link).
        #[arg(long, value_delimiter = ',', value_parser = parse_link)]
        links: Option<Vec<LinkKind>>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run two scenarios and print them side by side.
    Compare {
        a: String,
        b: String,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Fit the default preset to the reference anchors and write it as JSON.
    FitPreset {
        /// Output file (default: <out root>/<preset name>.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a scenario's edit trace as JSON Lines.
    Trace {
        scenario: String,
        #[command(flatten)]
        overrides: OverrideArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct OverrideArgs {
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_link)]
    pub link: Option<LinkKind>,
    #[arg(long)]
    pub n_clients: Option<usize>,
    #[arg(long)]
    pub preset: Option<String>,
    /// Fixed cycle interval in seconds; 0 means back-to-back.
    #[arg(long)]
    pub interval: Option<f64>,
}

impl OverrideArgs {
    pub fn to_overrides(&self) -> Overrides {
        Overrides {
            duration_s: self.duration,
            seed: self.seed,
            link: self.link,
            n_clients: self.n_clients,
            preset: self.preset.clone(),
            interval_s: self.interval,
        }
    }
}

/// Runs the parsed command and returns the process exit code.
pub fn dispatch(cli: Cli) -> i32 {
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cmd: Command) -> Result<(), RunError> {
    match cmd {
        Command::Run { scenario, overrides, out } => {
            let (p, r) = report::load_and_run(&scenario, &overrides.to_overrides())?;
            let dir = output::out_dir(out.as_deref(), &p.scenario.name);
            output::write_result(&dir, &r)?;
            print!("{}", report::summary(&r));
            println!("output           {}", dir.display());
            if !r.converged {
                eprintln!("warning: replicas did not converge");
            }
            Ok(())
        }
        Command::Sweep {
            scenario,
            overrides,
            values,
            links,
            jobs,
            out,
        } => {
            let loaded = config::load(&scenario)?;
            let intervals = values
                .or_else(|| loaded.scenario.sweep_intervals_s.clone())
                .unwrap_or_else(|| report::DEFAULT_SWEEP.to_vec());
            let o = overrides.to_overrides();
            let links = links.unwrap_or_else(|| vec![o.link.unwrap_or(loaded.scenario.link)]);
            let sweep_jobs = report::sweep_jobs(&loaded, &o, &links, &intervals)?;
            let dir = output::out_dir(out.as_deref(), &loaded.scenario.name);
            let results = report::run_jobs(&sweep_jobs, jobs.unwrap_or_else(report::default_parallelism), |job, r| {
                output::write_result(&dir.join(&job.prepared.scenario.name), r)?;
                Ok(())
            })?;
            let rows: Vec<_> = results.into_iter().map(|(row, _)| row).collect();
            output::write_csv_rows(&dir.join("sweep.csv"), &rows)?;
            print!("{}", report::sweep_table(&rows));
            println!("output {}", dir.join("sweep.csv").display());
            Ok(())
        }
        Command::Compare { a, b, overrides } => {
            let o = overrides.to_overrides();
            let (_, ra) = report::load_and_run(&a, &o)?;
            let (_, rb) = report::load_and_run(&b, &o)?;
            print!(
                "{}",
                report::compare_table(&report::CompareRow::of(&ra), &report::CompareRow::of(&rb))
            );
            Ok(())
        }
        Command::FitPreset { out } => {
            let preset = fit_default()?;
            let path = out.unwrap_or_else(|| output::out_root().join(format!("{}.json", presets::DEFAULT_PRESET)));
            output::write_atomic(&path, presets::to_json(&preset).as_bytes())?;
            print!("{}", fit_summary(&preset));
            println!("written to {}", path.display());
            Ok(())
        }
        Command::Trace { scenario, overrides, out } => {
            let loaded = config::load(&scenario)?;
            let mut s = loaded.scenario.clone();
            s.apply(&overrides.to_overrides())?;
            s.validate()?;
            let trace = s.trace(&loaded.base_dir)?;
            let path = out.unwrap_or_else(|| output::out_root().join(&s.name).join("trace.jsonl"));
            output::write_atomic(&path, output::trace_jsonl(&trace).as_bytes())?;
            println!("{} edits, {} sessions -> {}", trace.edits.len(), trace.sessions.len(), path.display());
            Ok(())
        }
    }
}

pub fn fit_default() -> Result<EnergyPreset, RunError> {
    calibration::calibrate(&EnergyPreset::prior(), presets::DEFAULT_PRESET)
        .map_err(|e| RunError::Config(ConfigError::Invalid(format!("fit failed: {e}"))))
}

pub fn fit_summary(preset: &EnergyPreset) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let Some(report) = &preset.fit_report else {
        return s;
    };
    for (name, v) in &report.params {
        let _ = writeln!(s, "{name:<20} {v:.6e}");
    }
    let _ = writeln!(s, "{:<24} {:>9} {:>9} {:>8}", "anchor", "target", "fitted", "error");
    for r in &report.residuals {
        let _ = writeln!(
            s,
            "{:<24} {:>9.4} {:>9.4} {:>7.2}%",
            r.name,
            r.target,
            r.fitted,
            100.0 * r.relative_error
        );
    }
    if !report.active_constraints.is_empty() {
        let _ = writeln!(s, "active constraints: {}", report.active_constraints.join(", "));
    }
    s
}
