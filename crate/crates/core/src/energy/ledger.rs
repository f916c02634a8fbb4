use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::link::LinkProfile;
use crate::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadioState {
    Sleep,
    Promo,
    Active,
    Tail,
}

impl RadioState {
    pub const ALL: [RadioState; 4] = [RadioState::Sleep, RadioState::Promo, RadioState::Active, RadioState::Tail];

    pub fn as_str(self) -> &'static str {
        match self {
            RadioState::Sleep => "sleep",
            RadioState::Promo => "promo",
            RadioState::Active => "active",
            RadioState::Tail => "tail",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Time spent in each radio state over some window.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateTimes {
    pub sleep: SimTime,
    pub promo: SimTime,
    pub active: SimTime,
    pub tail: SimTime,
}

impl StateTimes {
    pub fn get(&self, s: RadioState) -> SimTime {
        match s {
            RadioState::Sleep => self.sleep,
            RadioState::Promo => self.promo,
            RadioState::Active => self.active,
            RadioState::Tail => self.tail,
        }
    }

    fn from_array(a: [u64; 4]) -> Self {
        Self {
            sleep: SimTime::from_micros(a[0]),
            promo: SimTime::from_micros(a[1]),
            active: SimTime::from_micros(a[2]),
            tail: SimTime::from_micros(a[3]),
        }
    }

    pub fn total(&self) -> SimTime {
        self.sleep + self.promo + self.active + self.tail
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub at: SimTime,
    pub state: RadioState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("transfer at {got} precedes the last radio event at {last}")]
    NonMonotonic { last: SimTime, got: SimTime },
}

#[derive(Debug, Clone, Copy)]
struct Mark {
    at: SimTime,
    state: RadioState,
    /// Cumulative microseconds per state up to `at`.
    cum: [u64; 4],
}

/// Per-device radio state machine.
///
/// Transfers are recorded in time order. The tail after the last transfer and
/// the drop back to sleep are not stored; they are derived on query, so a
/// transfer that lands inside a tail cuts it short.
#[derive(Debug, Clone)]
pub struct RadioLedger {
    link: LinkProfile,
    marks: Vec<Mark>,
    active_until: Option<SimTime>,
    last_request: SimTime,
    transfers: u64,
}

impl RadioLedger {
    pub fn new(link: LinkProfile) -> Self {
        Self {
            link,
            marks: alloc::vec![Mark {
                at: SimTime::ZERO,
                state: RadioState::Sleep,
                cum: [0; 4],
            }],
            active_until: None,
            last_request: SimTime::ZERO,
            transfers: 0,
        }
    }

    pub fn link(&self) -> &LinkProfile {
        &self.link
    }

    pub fn transfers(&self) -> u64 {
        self.transfers
    }

    fn last(&self) -> Mark {
        *self.marks.last().expect("ledger always holds the initial mark")
    }

    fn push(&mut self, at: SimTime, state: RadioState) {
        let prev = self.last();
        if prev.state == state {
            return;
        }
        if at == prev.at && self.marks.len() > 1 {
            // zero-length segment: overwrite it
            self.marks.pop();
            if self.last().state != state {
                self.marks.push(Mark { at, state, cum: prev.cum });
            }
            return;
        }
        let mut cum = prev.cum;
        cum[prev.state.index()] += (at - prev.at).as_micros();
        self.marks.push(Mark { at, state, cum });
    }

    /// Settles the tail that followed the previous transfer, up to `now`.
    fn settle(&mut self, now: SimTime) {
        let Some(end) = self.active_until else { return };
        if now <= end {
            return;
        }
        let tail = self.link.tail_duration;
        if tail > SimTime::ZERO {
            self.push(end, RadioState::Tail);
        }
        if now >= end + tail {
            self.push(end + tail, RadioState::Sleep);
        }
    }

    /// Records a transfer of `bytes` requested at `start`; returns when it ends.
    ///
    /// From sleep the radio first spends the promotion delay before any data
    /// moves. A request during an ongoing transfer queues behind it.
    pub fn record_transfer(&mut self, bytes: usize, start: SimTime) -> Result<SimTime, LedgerError> {
        if start < self.last_request {
            return Err(LedgerError::NonMonotonic {
                last: self.last_request,
                got: start,
            });
        }
        self.last_request = start;
        let queued = self.active_until.filter(|&end| start <= end);
        let data_start = match queued {
            Some(end) => end,
            None => {
                self.settle(start);
                if self.last().state == RadioState::Tail {
                    self.push(start, RadioState::Active);
                    start
                } else {
                    let promo = self.link.promo_duration;
                    if promo > SimTime::ZERO {
                        self.push(start, RadioState::Promo);
                    }
                    self.push(start + promo, RadioState::Active);
                    start + promo
                }
            }
        };
        let end = data_start + self.link.transfer_time(bytes);
        self.active_until = Some(end);
        self.transfers += 1;
        Ok(end)
    }

    /// Explicit transitions so far, including the settled tail of past transfers.
    pub fn transitions(&self) -> Vec<Transition> {
        self.marks
            .iter()
            .map(|m| Transition { at: m.at, state: m.state })
            .collect()
    }

    /// Marks derived from the last transfer that are not stored yet.
    fn implied(&self) -> ([(SimTime, RadioState); 2], usize) {
        let mut out = [(SimTime::ZERO, RadioState::Sleep); 2];
        let Some(end) = self.active_until else { return (out, 0) };
        let last = self.last();
        if last.at > end || last.state != RadioState::Active {
            return (out, 0);
        }
        let tail = self.link.tail_duration;
        let mut n = 0;
        if tail > SimTime::ZERO {
            out[n] = (end, RadioState::Tail);
            n += 1;
        }
        out[n] = (end + tail, RadioState::Sleep);
        n += 1;
        (out, n)
    }

    /// Cumulative microseconds per state over [0, t].
    fn cumulative(&self, t: SimTime) -> [u64; 4] {
        let idx = self.marks.partition_point(|m| m.at <= t);
        let mut mark = self.marks[idx.saturating_sub(1)];
        if idx == self.marks.len() {
            let (extra, n) = self.implied();
            for &(at, state) in &extra[..n] {
                if at > t {
                    break;
                }
                mark.cum[mark.state.index()] += (at - mark.at).as_micros();
                mark.at = at;
                mark.state = state;
            }
        }
        let mut cum = mark.cum;
        cum[mark.state.index()] += (t.max(mark.at) - mark.at).as_micros();
        cum
    }

    pub fn state_at(&self, t: SimTime) -> RadioState {
        let idx = self.marks.partition_point(|m| m.at <= t);
        let mut state = self.marks[idx.saturating_sub(1)].state;
        if idx == self.marks.len() {
            let (extra, n) = self.implied();
            for &(at, s) in &extra[..n] {
                if at <= t {
                    state = s;
                }
            }
        }
        state
    }

    pub fn time_in_states(&self, t0: SimTime, t1: SimTime) -> StateTimes {
        if t1 <= t0 {
            return StateTimes::default();
        }
        let a = self.cumulative(t0);
        let b = self.cumulative(t1);
        StateTimes::from_array([b[0] - a[0], b[1] - a[1], b[2] - a[2], b[3] - a[3]])
    }

    /// Radio energy over [t0, t1] in %-battery.
    pub fn radio_energy_between(&self, t0: SimTime, t1: SimTime) -> f64 {
        let st = self.time_in_states(t0, t1);
        let p = self.link.power;
        p.promo * st.promo.as_mins_f64() + p.active * st.active.as_mins_f64() + p.tail * st.tail.as_mins_f64()
    }

    /// Radio plus baseline energy over [t0, t1].
    pub fn energy_between(&self, baseline_per_min: f64, t0: SimTime, t1: SimTime) -> f64 {
        let span = if t1 > t0 { t1 - t0 } else { SimTime::ZERO };
        baseline_per_min * span.as_mins_f64() + self.radio_energy_between(t0, t1)
    }
}
