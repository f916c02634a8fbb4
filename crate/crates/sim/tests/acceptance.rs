//! Acceptance checks, one line per criterion. Run with
//! `cargo test -p diffsync-sim --test acceptance`.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use diffsync_core::diff::{diff_text, patch, Content, EditScript, PatchMode};
use diffsync_core::energy::LinkKind;
use diffsync_core::scheduler::SchedulerPolicy;
use diffsync_core::simnet::{run, SimError, SimResult, SimSetup};
use diffsync_core::workload::{generate_trace, random_text_trace, EditKind, EditTarget, WorkloadParams};
use diffsync_core::SimTime;
use diffsync_sim::config::{self, Overrides};
use diffsync_sim::presets;
use diffsync_sim::report::{self, SweepRow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel(x: f64, target: f64) -> f64 {
    (x - target) / target
}

fn timed_run(name: &str) -> (SimResult, Duration) {
    let t = Instant::now();
    let (_, r) = report::load_and_run(name, &Overrides::default()).unwrap_or_else(|e| panic!("{name}: {e}"));
    (r, t.elapsed())
}

fn attributable(r: &SimResult) -> f64 {
    r.devices.iter().map(|d| d.attributable).sum()
}

fn rate(r: &SimResult) -> f64 {
    r.devices[0].rate_per_min
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_diffsync"))
}

fn headlines() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, target) in [
        ("mendeley_7min_fixed2s_3g", 1.729),
        ("mendeley_7min_push_3g", 0.084),
        ("mendeley_33min_fixed2s_3g", 8.151),
        ("mendeley_33min_push_3g", 0.398),
    ] {
        let (r, took) = timed_run(name);
        let e = rel(attributable(&r), target);
        pass &= e.abs() <= 0.02 && took < Duration::from_secs(10);
        parts.push(format!("{name} {:.4}% ({:+.2}%, {:.0} ms)", attributable(&r), 100.0 * e, took.as_secs_f64() * 1e3));
    }
    let out = tempfile::tempdir().unwrap();
    let ok = cli()
        .args(["run", "mendeley_7min_fixed2s_3g"])
        .env(diffsync_sim::output::OUT_ENV, out.path())
        .output()
        .unwrap();
    let bad = cli()
        .args(["run", "mendeley_7min_fixed2s_3g", "--duration=0"])
        .env(diffsync_sim::output::OUT_ENV, out.path())
        .output()
        .unwrap();
    let wrote = out.path().join("mendeley_7min_fixed2s_3g/result.json").is_file()
        && out.path().join("mendeley_7min_fixed2s_3g/events.csv").is_file();
    pass &= ok.status.code() == Some(0) && bad.status.code() == Some(1) && wrote;
    parts.push(format!("cli exit {:?}/{:?}", ok.status.code(), bad.status.code()));
    check(pass, parts.join("; "))
}

fn composite() -> Outcome {
    let (r, _) = timed_run("push_small_item_6s_3g");
    let e = rel(rate(&r), 0.35);
    check(e.abs() <= 0.05, format!("{:.4} %/min ({:+.2}%)", rate(&r), 100.0 * e))
}

fn complexity() -> Outcome {
    let (empty, _) = timed_run("complexity_empty_6s_3g");
    let (worst7000, _) = timed_run("complexity_worst_7000_6s_3g");
    let (worst700, _) = timed_run("complexity_worst_700_6s_3g");
    let (simple7000, _) = timed_run("complexity_simple_7000_6s_3g");
    // one 1 % battery step within a 20 %-drain run
    let floor = 1.0 / 20.0;
    let e_empty = rel(rate(&empty), 0.22);
    let e_worst = rel(rate(&worst7000), 0.34);
    let d700 = rel(rate(&worst700), rate(&empty));
    let d7000 = rel(rate(&simple7000), rate(&empty));
    let pass = e_empty.abs() <= 0.15 && e_worst.abs() <= 0.15 && d700.abs() < floor && d7000.abs() < floor;
    check(
        pass,
        format!(
            "empty {:.4} ({:+.1}%), worst7000 {:.4} ({:+.1}%), worst700 {:+.2}% and simple7000 {:+.2}% from empty (floor {:.0}%); from 0.22: {:+.2}% / {:+.2}%",
            rate(&empty),
            100.0 * e_empty,
            rate(&worst7000),
            100.0 * e_worst,
            100.0 * d700,
            100.0 * d7000,
            100.0 * floor,
            100.0 * rel(rate(&worst700), 0.22),
            100.0 * rel(rate(&simple7000), 0.22),
        ),
    )
}

fn sweep(name: &str, link: LinkKind) -> Vec<SweepRow> {
    let loaded = config::load(name).unwrap();
    let intervals = loaded.scenario.sweep_intervals_s.clone().unwrap();
    let jobs = report::sweep_jobs(&loaded, &Overrides::default(), &[link], &intervals).unwrap();
    report::run_jobs(&jobs, report::default_parallelism(), |_, _| Ok(()))
        .unwrap()
        .into_iter()
        .map(|(row, _)| row)
        .collect()
}

fn at(rows: &[SweepRow], interval: f64) -> &SweepRow {
    rows.iter().find(|r| r.interval_s == interval).unwrap()
}

fn interval_shape() -> Outcome {
    let wlan = sweep("interval_sweep_wlan", LinkKind::Wlan);
    let g3 = sweep("interval_sweep_3g", LinkKind::ThreeG);
    let gsm = sweep("interval_sweep_gsm", LinkKind::Gsm);
    let max = wlan.iter().map(|r| r.rate_per_min).fold(f64::MIN, f64::max);
    let min = wlan.iter().map(|r| r.rate_per_min).fold(f64::MAX, f64::min);
    let wlan_ok = max / min < 1.05;
    let long: Vec<&SweepRow> = g3.iter().filter(|r| r.interval_s >= 12.0).collect();
    let monotone = long.windows(2).all(|w| w[1].rate_per_min <= w[0].rate_per_min);
    let g3_ok = monotone && at(&g3, 60.0).rate_per_min < at(&g3, 12.0).rate_per_min;
    let tail_gsm = at(&gsm, 8.0).tail_energy_per_cycle;
    let tail_3g = at(&g3, 8.0).tail_energy_per_cycle;
    check(
        wlan_ok && g3_ok && tail_gsm < tail_3g,
        format!(
            "wlan max/min {:.4}; 3g non-increasing from 12 s: {monotone}, rate(12) {:.4} rate(60) {:.4}; tail/cycle at 8 s gsm {:.6} vs 3g {:.6}",
            max / min,
            at(&g3, 12.0).rate_per_min,
            at(&g3, 60.0).rate_per_min,
            tail_gsm,
            tail_3g
        ),
    )
}

fn convergence_setup(seed: u64) -> SimSetup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clients = rng.random_range(1..=4);
    let edits = rng.random_range(0..=50);
    let horizon = SimTime::from_secs(60);
    let quiet = SimTime::from_secs(30);
    let trace = random_text_trace(clients, edits, horizon, quiet, seed);
    let policy = SchedulerPolicy::PushBased {
        min_notify_gap: SimTime::from_secs(2),
    };
    SimSetup::new(
        format!("convergence_{seed}"),
        LinkKind::ThreeG,
        policy,
        presets::bundled_default().unwrap(),
        trace,
        horizon + quiet,
    )
}

fn convergence() -> Outcome {
    let (mut converged, mut divergence, mut other_errors, mut lost) = (0, 0, 0, 0u64);
    let mut edits = 0;
    for seed in 0..1000 {
        let setup = convergence_setup(seed);
        edits += setup.trace.edits.len();
        match run(&setup, seed) {
            Ok(r) => {
                converged += usize::from(r.converged);
                lost += r
                    .devices
                    .iter()
                    .map(|d| d.notifications_dropped + d.notifications_reordered)
                    .sum::<u64>();
            }
            Err(SimError::Sync { source, .. }) if source.is_divergence() => divergence += 1,
            Err(_) => other_errors += 1,
        }
    }
    check(
        converged == 1000 && divergence == 0 && other_errors == 0 && lost == 0,
        format!("{converged}/1000 converged over {edits} edits, {divergence} divergences, {other_errors} other errors, {lost} lost or reordered notifications"),
    )
}

fn lcs(a: &[char], b: &[char]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 0..a.len() {
        for j in 0..b.len() {
            t[i + 1][j + 1] = if a[i] == b[j] { t[i][j] + 1 } else { t[i][j + 1].max(t[i + 1][j]) };
        }
    }
    t[a.len()][b.len()]
}

fn apply(base: &str, script: &EditScript) -> Option<String> {
    let out = patch(&Content::text(base), script, PatchMode::Exact).ok()?;
    out.content.as_text().map(str::to_string)
}

fn diff_oracle() -> Outcome {
    let mut strings = vec![String::new()];
    let mut start = 0;
    for _ in 0..6 {
        let end = strings.len();
        for i in start..end {
            for c in ['a', 'b', 'c'] {
                let s = format!("{}{c}", strings[i]);
                strings.push(s);
            }
        }
        start = end;
    }
    let chars: Vec<Vec<char>> = strings.iter().map(|s| s.chars().collect()).collect();
    let (mut pairs, mut length_mismatch, mut bad_apply) = (0u64, 0u64, 0u64);
    for (a, ac) in strings.iter().zip(&chars) {
        for (b, bc) in strings.iter().zip(&chars) {
            let (ops, work) = diff_text(a, b);
            let script = EditScript::text(ops, work);
            if script.edit_length() != ac.len() + bc.len() - 2 * lcs(ac, bc) {
                length_mismatch += 1;
            }
            if apply(a, &script).as_deref() != Some(b.as_str()) {
                bad_apply += 1;
            }
            pairs += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let alphabet: Vec<char> = "abcdefgh \u{e9}\u{4e2d}\n".chars().collect();
    let (mut round_trips, mut failures, mut longest) = (0, 0, 0);
    for i in 0..10_000 {
        let max_len = if i % 50 == 0 { 10_000 } else { 400 };
        let len = rng.random_range(0..=max_len);
        let a: Vec<char> = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
        let mut b = a.clone();
        if rng.random_bool(0.1) {
            let len = rng.random_range(0..=max_len);
            b = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
        } else {
            for _ in 0..rng.random_range(0..10) {
                let at = rng.random_range(0..=b.len());
                let del = rng.random_range(0..=(b.len() - at).min(30));
                let ins: Vec<char> = (0..rng.random_range(0..30)).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
                b.splice(at..at + del, ins);
            }
        }
        longest = longest.max(a.len()).max(b.len());
        let (a, b): (String, String) = (a.into_iter().collect(), b.into_iter().collect());
        let (ops, work) = diff_text(&a, &b);
        if apply(&a, &EditScript::text(ops, work)).as_deref() != Some(b.as_str()) {
            failures += 1;
        }
        round_trips += 1;
    }
    check(
        pairs == 1093 * 1093 && length_mismatch == 0 && bad_apply == 0 && failures == 0 && longest <= 10_000,
        format!(
            "{pairs} pairs: {length_mismatch} length mismatches, {bad_apply} bad round trips; {round_trips} random pairs up to {longest} scalars: {failures} failures"
        ),
    )
}

fn scheduler_laws() -> Outcome {
    let (idle, _) = timed_run("polling_idle_3g");
    let silent = idle.devices[0].cycles_started;
    let mut fixed = config::load("complexity_empty_6s_3g").unwrap();
    fixed
        .scenario
        .apply(&Overrides {
            interval_s: Some(2.0),
            duration_s: Some(60.0),
            ..Overrides::default()
        })
        .unwrap();
    let p = report::prepare(&fixed, &Overrides::default()).unwrap();
    let r = report::execute(&p).unwrap();
    let cycles = r.devices[0].cycles_started;
    let mut lost = 0;
    let mut sent = 0;
    for seed in 0..200 {
        let r = run(&convergence_setup(10_000 + seed), seed).unwrap();
        sent += r.server.notifications_sent;
        lost += r
            .devices
            .iter()
            .map(|d| d.notifications_dropped + d.notifications_reordered)
            .sum::<u64>();
    }
    check(
        silent == 1 && cycles == 31 && lost == 0 && sent > 0,
        format!("push silence {silent} cycle(s); fixed 2 s over 60 s {cycles} cycles; throttled push {sent} notifications, {lost} lost or reordered"),
    )
}

fn workload_stats() -> Outcome {
    let params = WorkloadParams::default();
    let trace = generate_trace(&params, 2000, 8).unwrap();
    let mut by_client: BTreeMap<String, Vec<SimTime>> = BTreeMap::new();
    let (mut highlights, mut notes, mut counted) = (0u32, 0u32, 0u32);
    for e in &trace.edits {
        if let EditTarget::Client(c) = &e.target {
            by_client.entry(c.as_str().to_string()).or_default().push(e.time);
        }
        if counted < 10_000 {
            match e.kind {
                EditKind::Highlight => highlights += 1,
                EditKind::Note => notes += 1,
                EditKind::Text => {}
            }
            counted += 1;
        }
    }
    let two = SimTime::from_secs(2);
    let (mut windows, mut empty) = (0u32, 0u32);
    'outer: for s in &trace.sessions {
        let times = by_client.get(s.client.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        let mut w = s.start;
        while w + two <= s.end {
            if windows == 10_000 {
                break 'outer;
            }
            let busy = times.iter().any(|&t| t >= w && t < w + two);
            windows += 1;
            empty += u32::from(!busy);
            w += two;
        }
    }
    let frac = f64::from(empty) / f64::from(windows);
    let ratio = f64::from(highlights) / f64::from(notes);
    check(
        windows == 10_000 && counted == 10_000 && (frac - 0.968).abs() <= 0.005 && rel(ratio, 3.0).abs() <= 0.05,
        format!("{:.2}% of {windows} 2 s windows empty; highlight:note {ratio:.3}:1 over {counted} edits", 100.0 * frac),
    )
}

fn determinism() -> Outcome {
    let out = tempfile::tempdir().unwrap();
    let mut same = true;
    let mut names = Vec::new();
    for name in ["generated_push_4clients_3g", "mendeley_7min_fixed2s_3g"] {
        let mut bytes = Vec::new();
        for k in 0..2 {
            let dir = out.path().join(format!("{name}_{k}"));
            let status = cli()
                .args(["run", name, "--seed", "42", "--out"])
                .arg(&dir)
                .output()
                .unwrap()
                .status;
            same &= status.success();
            bytes.push(std::fs::read(dir.join("result.json")).unwrap_or_default());
        }
        same &= !bytes[0].is_empty() && bytes[0] == bytes[1];
        names.push(format!("{name} {} bytes", bytes[0].len()));
    }
    let (_, a) = report::load_and_run("generated_push_4clients_3g", &Overrides::default()).unwrap();
    let (_, b) = report::load_and_run("generated_push_4clients_3g", &Overrides::default()).unwrap();
    same &= diffsync_sim::output::result_json(&a) == diffsync_sim::output::result_json(&b);
    check(same, format!("identical result.json across runs: {}", names.join(", ")))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("headline reproduction", headlines),
        ("composite push rate", composite),
        ("complexity rates", complexity),
        ("interval sweep shape", interval_shape),
        ("convergence suite", convergence),
        ("diff oracle equivalence", diff_oracle),
        ("scheduler laws", scheduler_laws),
        ("workload statistics", workload_stats),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        println!(
            "{} {}. {name}: {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            t.elapsed().as_secs_f64()
        );
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
