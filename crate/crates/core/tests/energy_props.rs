use diffsync_core::energy::{LinkKind, LinkProfile, RadioLedger, RadioState};
use diffsync_core::SimTime;
use proptest::prelude::*;

/// Per-state durations over [0, horizon] built from explicit intervals.
fn oracle(link: &LinkProfile, transfers: &[(u64, usize)], horizon: u64) -> [u64; 4] {
    let mut intervals: Vec<(u64, u64, RadioState)> = Vec::new();
    let mut prev_end: Option<u64> = None;
    let tail = link.tail_duration.as_micros();
    let promo = link.promo_duration.as_micros();
    for &(start, bytes) in transfers {
        let tx = link.transfer_time(bytes).as_micros();
        let data_start = match prev_end {
            Some(e) if start <= e => e,
            Some(e) if start < e + tail => {
                intervals.push((e, start, RadioState::Tail));
                start
            }
            _ => {
                if let Some(e) = prev_end {
                    intervals.push((e, e + tail, RadioState::Tail));
                }
                intervals.push((start, start + promo, RadioState::Promo));
                start + promo
            }
        };
        intervals.push((data_start, data_start + tx, RadioState::Active));
        prev_end = Some(data_start + tx);
    }
    if let Some(e) = prev_end {
        intervals.push((e, e + tail, RadioState::Tail));
    }
    let mut out = [0u64; 4];
    for (a, b, s) in intervals {
        let (a, b) = (a.min(horizon), b.min(horizon));
        out[s as usize] += b - a;
    }
    out[RadioState::Sleep as usize] = horizon - out[1] - out[2] - out[3];
    out
}

fn transfers() -> impl Strategy<Value = Vec<(u64, usize)>> {
    prop::collection::vec((0u64..30_000_000, 0usize..50_000), 0..12).prop_map(|gaps| {
        let mut t = 0;
        gaps.into_iter()
            .map(|(gap, bytes)| {
                t += gap;
                (t, bytes)
            })
            .collect()
    })
}

fn ledger(link: &LinkProfile, transfers: &[(u64, usize)]) -> RadioLedger {
    let mut l = RadioLedger::new(*link);
    for &(start, bytes) in transfers {
        l.record_transfer(bytes, SimTime::from_micros(start)).unwrap();
    }
    l
}

fn link_strategy() -> impl Strategy<Value = LinkKind> {
    prop::sample::select(LinkKind::ALL.to_vec())
}

proptest! {
    #[test]
    fn state_times_match_interval_oracle(kind in link_strategy(), ts in transfers(), extra in 0u64..60_000_000) {
        let link = LinkProfile::default_for(kind);
        let horizon = ts.last().map_or(0, |t| t.0) + extra;
        let st = ledger(&link, &ts).time_in_states(SimTime::ZERO, SimTime::from_micros(horizon));
        let got = [st.sleep, st.promo, st.active, st.tail].map(SimTime::as_micros);
        prop_assert_eq!(got, oracle(&link, &ts, horizon));
    }

    /// With transfers spaced so none queue, tail time is Σ min(gap, tail).
    #[test]
    fn tail_truncates_at_next_transfer(gaps in prop::collection::vec(0u64..40_000_000, 1..10)) {
        let link = LinkProfile::three_g();
        let tx = link.transfer_time(0).as_micros();
        let tail = link.tail_duration.as_micros();
        let mut l = RadioLedger::new(link);
        let mut expected = 0;
        let mut end = l.record_transfer(0, SimTime::ZERO).unwrap().as_micros();
        for g in &gaps {
            let t = end + 1 + g;
            expected += (t - end).min(tail);
            end = l.record_transfer(0, SimTime::from_micros(t)).unwrap().as_micros();
            prop_assert!(end >= t + tx);
        }
        let horizon = end + 2 * tail;
        expected += tail;
        prop_assert_eq!(l.time_in_states(SimTime::ZERO, SimTime::from_micros(horizon)).tail.as_micros(), expected);
    }

    #[test]
    fn energy_is_additive_over_time(kind in link_strategy(), ts in transfers(), cut_a in 0u64..200_000_000, cut_b in 0u64..200_000_000) {
        let l = ledger(&LinkProfile::default_for(kind), &ts);
        let (a, b) = (cut_a.min(cut_b), cut_a.max(cut_b));
        let (t0, ta, tb) = (SimTime::ZERO, SimTime::from_micros(a), SimTime::from_micros(b));
        let whole = l.energy_between(0.1, t0, tb);
        let parts = l.energy_between(0.1, t0, ta) + l.energy_between(0.1, ta, tb);
        prop_assert!((whole - parts).abs() <= 1e-9 * whole.max(1.0));
    }

    #[test]
    fn state_at_agrees_with_time_in_states(ts in transfers(), probe in 0u64..200_000_000) {
        let l = ledger(&LinkProfile::three_g(), &ts);
        let t = SimTime::from_micros(probe);
        let st = l.time_in_states(t, t + SimTime::from_micros(1));
        let s = l.state_at(t);
        prop_assert_eq!(st.get(s).as_micros(), 1);
    }
}

#[test]
fn wlan_has_no_tail() {
    let link = LinkProfile::wlan();
    let l = ledger(&link, &[(0, 1000), (5_000_000, 1000)]);
    let st = l.time_in_states(SimTime::ZERO, SimTime::from_secs(60));
    assert_eq!(st.tail, SimTime::ZERO);
    assert_eq!(st.promo, SimTime::ZERO);
}
