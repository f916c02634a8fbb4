//! Running scenarios and turning results into tables.

use std::fmt::Write as _;

use diffsync_core::energy::LinkKind;
use diffsync_core::simnet::{run, SimError, SimResult, SimSetup};
use serde::Serialize;

use crate::config::{ConfigError, Loaded, Overrides, PolicySpec, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{scenario}: {source}")]
    Sim { scenario: String, source: SimError },
    #[error("writing output: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// 1 for bad input, 2 for failures during or after simulation.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Sim { .. } | RunError::Io(_) => 2,
        }
    }
}

/// A scenario after overrides, with its resolved setup.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub setup: SimSetup,
}

pub fn prepare(loaded: &Loaded, overrides: &Overrides) -> Result<Prepared, ConfigError> {
    let mut scenario = loaded.scenario.clone();
    scenario.apply(overrides)?;
    let setup = scenario.resolve(&loaded.base_dir)?;
    Ok(Prepared { scenario, setup })
}

pub fn execute(p: &Prepared) -> Result<SimResult, RunError> {
    run(&p.setup, p.scenario.seed).map_err(|source| RunError::Sim {
        scenario: p.scenario.name.clone(),
        source,
    })
}

pub fn load_and_run(arg: &str, overrides: &Overrides) -> Result<(Prepared, SimResult), RunError> {
    let loaded = crate::config::load(arg)?;
    let p = prepare(&loaded, overrides)?;
    let r = execute(&p)?;
    Ok((p, r))
}

pub fn summary(r: &SimResult) -> String {
    let mut s = String::new();
    let attributable: f64 = r.devices.iter().map(|d| d.attributable).sum();
    let minutes = r.duration.as_mins_f64();
    let _ = writeln!(s, "scenario         {}", r.scenario);
    let _ = writeln!(s, "link / policy    {} / {}", r.link, policy_label(&r.policy));
    let _ = writeln!(s, "duration         {:.1} s, seed {}", r.duration.as_secs_f64(), r.seed);
    let _ = writeln!(s, "energy total     {:.4} %", r.total_energy());
    let _ = writeln!(s, "attributable     {:.4} %", attributable);
    let _ = writeln!(
        s,
        "rate             {:.4} %/min ({:.4} attributable)",
        r.total_energy() / minutes / r.devices.len() as f64,
        attributable / minutes / r.devices.len() as f64
    );
    let _ = writeln!(s, "cycles           {}", r.total_cycles());
    let _ = writeln!(
        s,
        "empty cycles     {} ({:.1} %)",
        r.total_empty_cycles(),
        100.0 * empty_share(r)
    );
    let _ = writeln!(s, "converged        {}", r.converged);
    if r.devices.len() > 1 {
        for d in &r.devices {
            let _ = writeln!(
                s,
                "  {:<6} {:.4} % ({:.4} attributable), {} cycles, {} empty",
                d.client_id, d.energy.total, d.attributable, d.cycles_completed, d.empty_cycles
            );
        }
    }
    s
}

pub fn policy_label(p: &diffsync_core::scheduler::SchedulerPolicy) -> String {
    use diffsync_core::scheduler::SchedulerPolicy::*;
    match p {
        FixedInterval { period } => format!("fixed {} s", period.as_secs_f64()),
        BackToBack => String::from("back-to-back"),
        PushBased { min_notify_gap } => format!("push (gap {} s)", min_notify_gap.as_secs_f64()),
    }
}

fn empty_share(r: &SimResult) -> f64 {
    let cycles = r.total_cycles();
    if cycles == 0 {
        0.0
    } else {
        r.total_empty_cycles() as f64 / cycles as f64
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub scenario: String,
    pub energy: f64,
    pub attributable: f64,
    pub cycles: u64,
    pub empty_cycle_pct: f64,
}

impl CompareRow {
    pub fn of(r: &SimResult) -> Self {
        Self {
            scenario: r.scenario.clone(),
            energy: r.total_energy(),
            attributable: r.devices.iter().map(|d| d.attributable).sum(),
            cycles: r.total_cycles(),
            empty_cycle_pct: 100.0 * empty_share(r),
        }
    }
}

/// How many times more attributable energy `a` uses than `b`.
pub fn savings_factor(a: &CompareRow, b: &CompareRow) -> f64 {
    if a.attributable == b.attributable {
        1.0
    } else {
        a.attributable / b.attributable
    }
}

pub fn compare_table(a: &CompareRow, b: &CompareRow) -> String {
    let mut s = String::new();
    let w = a.scenario.len().max(b.scenario.len()).max(8);
    let _ = writeln!(s, "{:<20} {:>w$} {:>w$}", "", a.scenario, b.scenario);
    let _ = writeln!(s, "{:<20} {:>w$.4} {:>w$.4}", "energy %", a.energy, b.energy);
    let _ = writeln!(s, "{:<20} {:>w$.4} {:>w$.4}", "attributable %", a.attributable, b.attributable);
    let _ = writeln!(s, "{:<20} {:>w$} {:>w$}", "cycles", a.cycles, b.cycles);
    let _ = writeln!(s, "{:<20} {:>w$.1} {:>w$.1}", "empty cycles %", a.empty_cycle_pct, b.empty_cycle_pct);
    let _ = writeln!(s, "savings factor       {:.2}x", savings_factor(a, b));
    s
}

pub const DEFAULT_SWEEP: &[f64] = &[1., 2., 3., 4., 5., 6., 7., 8., 9., 10., 11., 12., 13., 20., 30., 60.];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub interval_s: f64,
    pub link: String,
    pub rate_per_min: f64,
    pub attributable: f64,
    pub cycles: u64,
    pub tail_energy_per_cycle: f64,
}

pub struct SweepJob {
    pub link: LinkKind,
    pub interval_s: f64,
    pub prepared: Prepared,
}

/// One job per (link, interval); fails on the first invalid combination.
pub fn sweep_jobs(loaded: &Loaded, overrides: &Overrides, links: &[LinkKind], intervals: &[f64]) -> Result<Vec<SweepJob>, ConfigError> {
    if !matches!(loaded.scenario.policy, PolicySpec::FixedInterval { .. } | PolicySpec::BackToBack) {
        return Err(ConfigError::Invalid(String::from("sweep needs a fixed-interval scenario")));
    }
    let mut jobs = Vec::new();
    for &link in links {
        for &interval_s in intervals {
            let o = Overrides {
                link: Some(link),
                interval_s: Some(interval_s),
                ..overrides.clone()
            };
            let mut prepared = prepare(loaded, &o)?;
            prepared.scenario.name = format!("{}_{}_{}s", loaded.scenario.name, link, interval_s);
            prepared.setup.name = prepared.scenario.name.clone();
            jobs.push(SweepJob {
                link,
                interval_s,
                prepared,
            });
        }
    }
    Ok(jobs)
}

pub fn sweep_row(job: &SweepJob, r: &SimResult) -> SweepRow {
    let d = &r.devices[0];
    let minutes = r.duration.as_mins_f64();
    let tail_power = job.prepared.setup.preset.link(job.link).power.tail;
    let tail_energy = d.radio_time.tail.as_mins_f64() * tail_power;
    SweepRow {
        interval_s: job.interval_s,
        link: job.link.to_string(),
        rate_per_min: d.energy.total / minutes,
        attributable: d.attributable,
        cycles: d.cycles_completed,
        tail_energy_per_cycle: if d.cycles_completed == 0 {
            0.0
        } else {
            tail_energy / d.cycles_completed as f64
        },
    }
}

/// Runs every job on its own scoped thread, at most `parallelism` at a time,
/// and returns the results in job order. `each` is called from the worker
/// threads as results arrive.
pub fn run_jobs<F>(jobs: &[SweepJob], parallelism: usize, each: F) -> Result<Vec<(SweepRow, SimResult)>, RunError>
where
    F: Fn(&SweepJob, &SimResult) -> Result<(), RunError> + Sync,
{
    let parallelism = parallelism.max(1);
    let mut out: Vec<Option<Result<(SweepRow, SimResult), RunError>>> = (0..jobs.len()).map(|_| None).collect();
    for (chunk_jobs, chunk_out) in jobs.chunks(parallelism).zip(out.chunks_mut(parallelism)) {
        std::thread::scope(|s| {
            for (job, slot) in chunk_jobs.iter().zip(chunk_out.iter_mut()) {
                let each = &each;
                s.spawn(move || {
                    *slot = Some(execute(&job.prepared).and_then(|r| {
                        each(job, &r)?;
                        Ok((sweep_row(job, &r), r))
                    }));
                });
            }
        });
    }
    out.into_iter().map(|r| r.expect("every job ran")).collect()
}

pub fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>10} {:>5} {:>12} {:>8} {:>14}", "interval_s", "link", "%/min", "cycles", "tail/cycle %");
    for r in rows {
        let _ = writeln!(
            s,
            "{:>10} {:>5} {:>12.5} {:>8} {:>14.6}",
            r.interval_s, r.link, r.rate_per_min, r.cycles, r.tail_energy_per_cycle
        );
    }
    s
}
