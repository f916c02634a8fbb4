use diffsync_core::energy::{EnergyPreset, LinkKind};
use diffsync_core::scheduler::SchedulerPolicy;
use diffsync_core::simnet::{run, SimSetup};
use diffsync_core::workload::{generate_trace, random_text_trace, EditTrace, MicroKind, WorkloadParams};
use diffsync_core::SimTime;
use proptest::prelude::*;

fn setup(policy: SchedulerPolicy, trace: EditTrace, duration: SimTime) -> SimSetup {
    SimSetup::new("prop", LinkKind::ThreeG, policy, EnergyPreset::prior(), trace, duration)
}

fn random_setup(clients: usize, edits: usize, seed: u64) -> SimSetup {
    let horizon = SimTime::from_secs(60);
    let quiet = SimTime::from_secs(30);
    let trace = random_text_trace(clients, edits, horizon, quiet, seed);
    setup(SchedulerPolicy::push(), trace, horizon + quiet)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn push_runs_converge(clients in 1usize..=4, edits in 0usize..=50, seed in any::<u64>()) {
        let r = run(&random_setup(clients, edits, seed), seed).unwrap();
        prop_assert!(r.converged);
        for d in &r.devices {
            prop_assert_eq!(d.notifications_dropped, 0);
            prop_assert_eq!(d.notifications_reordered, 0);
        }
    }

    #[test]
    fn fixed_interval_runs_converge(clients in 1usize..=4, edits in 0usize..=50, seed in any::<u64>(), period in 1u64..=6) {
        let horizon = SimTime::from_secs(60);
        let trace = random_text_trace(clients, edits, horizon, SimTime::from_secs(30), seed);
        let r = run(&setup(SchedulerPolicy::fixed_secs(period as f64), trace, SimTime::from_secs(90)), seed).unwrap();
        prop_assert!(r.converged);
    }

    #[test]
    fn same_seed_same_result(clients in 1usize..=4, edits in 0usize..=30, seed in any::<u64>()) {
        let s = random_setup(clients, edits, seed);
        prop_assert_eq!(run(&s, seed).unwrap(), run(&s, seed).unwrap());
    }

    #[test]
    fn energy_components_add_up(clients in 1usize..=3, seed in any::<u64>()) {
        let trace = generate_trace(&WorkloadParams::default(), clients, seed).unwrap();
        let r = run(&setup(SchedulerPolicy::fixed_secs(2.0), trace, SimTime::from_secs(600)), seed).unwrap();
        for d in &r.devices {
            let e = d.energy;
            let sum = e.baseline + e.radio + e.idle_polling + e.notifications + e.cpu;
            prop_assert!((sum - e.total).abs() <= 1e-9 * e.total.max(1.0));
            prop_assert!((e.attributable() - d.attributable).abs() <= 1e-12);
            prop_assert!(d.empty_cycles <= d.cycles_completed);
        }
    }
}

#[test]
fn push_silence_runs_one_cycle() {
    let trace = diffsync_core::workload::micro_trace(MicroKind::Empty, Default::default(), SimTime::from_secs(6), SimTime::from_secs(600));
    let r = run(&setup(SchedulerPolicy::push(), trace, SimTime::from_secs(600)), 0).unwrap();
    assert_eq!(r.devices[0].cycles_completed, 1);
}

#[test]
fn fixed_two_seconds_over_a_minute_runs_31_cycles() {
    let trace = diffsync_core::workload::micro_trace(MicroKind::Empty, Default::default(), SimTime::from_secs(6), SimTime::from_secs(60));
    let r = run(&setup(SchedulerPolicy::fixed_secs(2.0), trace, SimTime::from_secs(60)), 0).unwrap();
    assert_eq!(r.devices[0].cycles_started, 31);
}

/// Without the throttle, bursts of server changes hit the unreliable channel.
#[test]
fn unthrottled_bursts_lose_notifications() {
    let mut lost = 0;
    for seed in 0..20 {
        let trace = random_text_trace(3, 50, SimTime::from_secs(20), SimTime::from_secs(30), seed);
        let policy = SchedulerPolicy::PushBased {
            min_notify_gap: SimTime::ZERO,
        };
        let r = run(&setup(policy, trace, SimTime::from_secs(50)), seed).unwrap();
        lost += r.devices.iter().map(|d| d.notifications_dropped + d.notifications_reordered).sum::<u64>();
    }
    assert!(lost > 0);
}
