//! Reference scenarios and the anchor set used to fit the shipped preset.
//!
//! Radio timelines, work units and notification counts do not depend on the
//! preset's power figures, so every anchor scenario is simulated once with
//! the prior and the fit works on the resulting exposures.

use alloc::string::String;
use alloc::vec::Vec;

use crate::energy::{fit_preset, Anchor, EnergyPreset, FitConstraint, FitError, LinkKind, Measure, Param};
use crate::scheduler::SchedulerPolicy;
use crate::simnet::{run, SimError, SimSetup};
use crate::workload::{expected_rate_trace, micro_trace, EditOrigin, MicroKind, WorkloadParams};
use crate::SimTime;

pub const HEADLINE_SHORT: SimTime = SimTime::from_secs(7 * 60);
pub const HEADLINE_LONG: SimTime = SimTime::from_secs(33 * 60);
/// Length of the steady-rate measurement runs.
pub const RATE_RUN: SimTime = SimTime::from_secs(60 * 60);
pub const POLLING_RUN: SimTime = SimTime::from_secs(2 * 60 * 60);
pub const MICRO_PERIOD: SimTime = SimTime::from_secs(6);
/// Item size of the small-item push scenario.
pub const SMALL_ITEM_BYTES: usize = 24;

/// Share of a 20 %-drain run that one 1 % battery step represents.
pub const FLOOR_SHARE: f64 = 1.0 / 20.0;
/// Margin kept below the floor when bounding the CPU cost.
pub const FLOOR_HEADROOM: f64 = 0.9;
/// Keeps the 3G rate non-increasing once the interval passes the tail length.
pub const PROMO_TAIL_MAX_RATIO: f64 = 0.3;

pub const HEADLINE_WEIGHT: f64 = 10.0;

/// Single-client annotation editing at the average observed rate.
pub fn headline(policy: SchedulerPolicy, duration: SimTime, preset: &EnergyPreset) -> SimSetup {
    let trace = expected_rate_trace(&WorkloadParams::default(), duration).expect("default params are valid");
    let name = alloc::format!(
        "mendeley_{}min_{}_3g",
        duration.as_micros() / 60_000_000,
        if policy.uses_push() { "push" } else { "fixed2s" }
    );
    SimSetup::new(name, LinkKind::ThreeG, policy, preset.clone(), trace, duration)
}

pub fn micro(
    name: &str,
    kind: MicroKind,
    origin: EditOrigin,
    link: LinkKind,
    policy: SchedulerPolicy,
    duration: SimTime,
    preset: &EnergyPreset,
) -> SimSetup {
    let trace = micro_trace(kind, origin, MICRO_PERIOD, duration);
    SimSetup::new(name, link, policy, preset.clone(), trace, duration)
}

pub fn empty_cycles_6s(preset: &EnergyPreset) -> SimSetup {
    micro(
        "complexity_empty_6s_3g",
        MicroKind::Empty,
        EditOrigin::Client,
        LinkKind::ThreeG,
        SchedulerPolicy::fixed_secs(6.0),
        RATE_RUN,
        preset,
    )
}

pub fn worst_case_6s(item_bytes: usize, preset: &EnergyPreset) -> SimSetup {
    micro(
        &alloc::format!("complexity_worst_{item_bytes}_6s_3g"),
        MicroKind::WorstCase { item_bytes },
        EditOrigin::Client,
        LinkKind::ThreeG,
        SchedulerPolicy::fixed_secs(6.0),
        RATE_RUN,
        preset,
    )
}

pub fn simple_change_6s(item_bytes: usize, preset: &EnergyPreset) -> SimSetup {
    micro(
        &alloc::format!("complexity_simple_{item_bytes}_6s_3g"),
        MicroKind::SimpleChange { item_bytes },
        EditOrigin::Client,
        LinkKind::ThreeG,
        SchedulerPolicy::fixed_secs(6.0),
        RATE_RUN,
        preset,
    )
}

/// Push client that is never notified.
pub fn idle_polling(preset: &EnergyPreset) -> SimSetup {
    micro(
        "polling_idle_3g",
        MicroKind::Empty,
        EditOrigin::Client,
        LinkKind::ThreeG,
        SchedulerPolicy::push(),
        POLLING_RUN,
        preset,
    )
}

/// Another user changes a small item every 6 s; the push client follows.
pub fn small_item_push_6s(duration: SimTime, preset: &EnergyPreset) -> SimSetup {
    micro(
        "push_small_item_6s_3g",
        MicroKind::SimpleChange {
            item_bytes: SMALL_ITEM_BYTES,
        },
        EditOrigin::Server,
        LinkKind::ThreeG,
        SchedulerPolicy::push(),
        duration,
        preset,
    )
}

/// One anchor: a scenario, the slice of energy measured and its target.
#[derive(Debug, Clone)]
pub struct AnchorSpec {
    pub name: String,
    pub setup: SimSetup,
    pub measure: Measure,
    pub target: f64,
    pub weight: f64,
}

fn spec(name: &str, setup: SimSetup, measure: Measure, target: f64, weight: f64) -> AnchorSpec {
    AnchorSpec {
        name: String::from(name),
        setup,
        measure,
        target,
        weight,
    }
}

pub fn anchor_specs(prior: &EnergyPreset) -> Vec<AnchorSpec> {
    alloc::vec![
        spec("baseline", idle_polling(prior), Measure::BaselineRate, 0.108, 1.0),
        spec("idle_polling", idle_polling(prior), Measure::PollingRate, 0.02, 1.0),
        spec("active_polling_6s", small_item_push_6s(POLLING_RUN, prior), Measure::PollingRate, 0.13, 1.0),
        spec("empty_cycles_6s", empty_cycles_6s(prior), Measure::Rate, 0.22, 1.0),
        spec("worst_case_7000_6s", worst_case_6s(7000, prior), Measure::Rate, 0.34, 1.0),
        spec(
            "headline_7min_fixed2s",
            headline(SchedulerPolicy::fixed_secs(2.0), HEADLINE_SHORT, prior),
            Measure::Attributable,
            1.729,
            HEADLINE_WEIGHT,
        ),
        spec(
            "headline_7min_push",
            headline(SchedulerPolicy::push(), HEADLINE_SHORT, prior),
            Measure::Attributable,
            0.084,
            HEADLINE_WEIGHT,
        ),
        spec(
            "headline_33min_fixed2s",
            headline(SchedulerPolicy::fixed_secs(2.0), HEADLINE_LONG, prior),
            Measure::Attributable,
            8.151,
            HEADLINE_WEIGHT,
        ),
        spec(
            "headline_33min_push",
            headline(SchedulerPolicy::push(), HEADLINE_LONG, prior),
            Measure::Attributable,
            0.398,
            HEADLINE_WEIGHT,
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalibrationError {
    #[error("anchor scenario `{name}` failed: {source}")]
    Scenario { name: String, source: SimError },
    #[error(transparent)]
    Fit(#[from] FitError),
}

fn exposure_of(name: &str, setup: &SimSetup) -> Result<crate::energy::Exposure, CalibrationError> {
    let r = run(setup, 0).map_err(|source| CalibrationError::Scenario {
        name: String::from(name),
        source,
    })?;
    Ok(r.exposure(0))
}

/// Runs the given anchors and fits `prior` to them under the measurement-floor
/// and interval-shape constraints.
pub fn calibrate_with(prior: &EnergyPreset, specs: &[AnchorSpec], name: &str) -> Result<EnergyPreset, CalibrationError> {
    let mut anchors = Vec::with_capacity(specs.len());
    for s in specs {
        anchors.push(Anchor {
            name: s.name.clone(),
            exposure: exposure_of(&s.name, &s.setup)?,
            measure: s.measure,
            target: s.target,
            weight: s.weight,
        });
    }
    let reference = exposure_of("empty_cycles_6s", &empty_cycles_6s(prior))?;
    let mut constraints = Vec::new();
    for (label, setup) in [
        ("worst_case_700_6s", worst_case_6s(700, prior)),
        ("simple_change_7000_6s", simple_change_6s(7000, prior)),
    ] {
        constraints.push(FitConstraint::RateFloor {
            name: String::from(label),
            scenario: exposure_of(label, &setup)?,
            reference,
            max_share: FLOOR_SHARE,
            headroom: FLOOR_HEADROOM,
        });
    }
    for param in [Param::Baseline, Param::IdlePolling] {
        constraints.push(FitConstraint::Hold { param });
    }
    constraints.push(FitConstraint::PromoTailRatio {
        max_ratio: PROMO_TAIL_MAX_RATIO,
    });
    let mut preset = fit_preset(prior, &anchors, &constraints)?;
    preset.name = String::from(name);
    Ok(preset)
}

/// The full reference calibration.
pub fn calibrate(prior: &EnergyPreset, name: &str) -> Result<EnergyPreset, CalibrationError> {
    calibrate_with(prior, &anchor_specs(prior), name)
}
