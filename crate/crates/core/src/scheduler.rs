//! When to run a diffsync cycle.
//!
//! Fixed-interval polling runs a cycle on every tick. Push-based scheduling
//! runs one on connect, on a local edit and on a server notification; a
//! trigger that arrives mid-cycle sets the one-bit `loop_once_more` flag so
//! exactly one follow-up cycle runs when the current one completes.
//!
//! On the server side, [`NotifyThrottle`] keeps push notifications at least
//! `min_gap` apart and folds every change inside the gap into one deferred
//! notification.

use serde::{Deserialize, Serialize};

use crate::sync::ServerEndpoint;
use crate::SimTime;

/// Default gap between push notifications; below it delivery gets unreliable.
pub const DEFAULT_MIN_NOTIFY_GAP: SimTime = SimTime::from_secs(2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SchedulerPolicy {
    /// Cycle at t = 0, period, 2·period, …
    FixedInterval { period: SimTime },
    /// Next cycle starts as soon as the previous one completes (a "0 s" interval).
    BackToBack,
    /// Cycles on connect, local edit and notification only.
    PushBased { min_notify_gap: SimTime },
}

impl SchedulerPolicy {
    pub fn fixed_secs(secs: f64) -> Self {
        if secs <= 0.0 {
            SchedulerPolicy::BackToBack
        } else {
            SchedulerPolicy::FixedInterval {
                period: SimTime::from_secs_f64(secs),
            }
        }
    }

    pub fn push() -> Self {
        SchedulerPolicy::PushBased {
            min_notify_gap: DEFAULT_MIN_NOTIFY_GAP,
        }
    }

    pub fn uses_push(&self) -> bool {
        matches!(self, SchedulerPolicy::PushBased { .. })
    }

    pub fn is_valid(&self) -> bool {
        match self {
            SchedulerPolicy::FixedInterval { period } => *period > SimTime::ZERO,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", content = "time", rename_all = "snake_case")]
pub enum SchedulerEvent {
    Connected(SimTime),
    LocalEdit(SimTime),
    NotificationReceived(SimTime),
    CycleCompleted(SimTime),
    Tick(SimTime),
}

impl SchedulerEvent {
    pub fn time(&self) -> SimTime {
        match *self {
            SchedulerEvent::Connected(t)
            | SchedulerEvent::LocalEdit(t)
            | SchedulerEvent::NotificationReceived(t)
            | SchedulerEvent::CycleCompleted(t)
            | SchedulerEvent::Tick(t) => t,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Decision {
    pub start_cycle: bool,
    pub set_loop_once_more: bool,
    pub next_tick: Option<SimTime>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum SchedulerError {
    #[error("event at {got} precedes the previous event at {last}")]
    OutOfOrder { last: SimTime, got: SimTime },
}

/// Per-client scheduler state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleScheduler {
    pub policy: SchedulerPolicy,
    cycle_active: bool,
    loop_once_more: bool,
    last_event: Option<SimTime>,
}

impl CycleScheduler {
    pub fn new(policy: SchedulerPolicy) -> Self {
        Self {
            policy,
            cycle_active: false,
            loop_once_more: false,
            last_event: None,
        }
    }

    pub fn cycle_active(&self) -> bool {
        self.cycle_active
    }

    pub fn loop_once_more(&self) -> bool {
        self.loop_once_more
    }

    fn trigger(&mut self) -> Decision {
        if self.cycle_active {
            self.loop_once_more = true;
            Decision {
                set_loop_once_more: true,
                ..Decision::default()
            }
        } else {
            self.cycle_active = true;
            self.loop_once_more = false;
            Decision {
                start_cycle: true,
                ..Decision::default()
            }
        }
    }

    pub fn on_event(&mut self, event: SchedulerEvent) -> Result<Decision, SchedulerError> {
        let now = event.time();
        if let Some(last) = self.last_event {
            if now < last {
                return Err(SchedulerError::OutOfOrder { last, got: now });
            }
        }
        self.last_event = Some(now);

        let decision = match (event, self.policy) {
            (SchedulerEvent::Connected(_), SchedulerPolicy::FixedInterval { period }) => Decision {
                next_tick: Some(now + period),
                ..self.trigger()
            },
            (SchedulerEvent::Connected(_), _) => self.trigger(),
            (SchedulerEvent::Tick(_), SchedulerPolicy::FixedInterval { period }) => Decision {
                next_tick: Some(now + period),
                ..self.trigger()
            },
            (
                SchedulerEvent::LocalEdit(_) | SchedulerEvent::NotificationReceived(_),
                SchedulerPolicy::PushBased { .. },
            ) => self.trigger(),
            (SchedulerEvent::CycleCompleted(_), policy) => {
                self.cycle_active = false;
                if self.loop_once_more || policy == SchedulerPolicy::BackToBack {
                    self.trigger()
                } else {
                    Decision::default()
                }
            }
            _ => Decision::default(),
        };
        Ok(decision)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NotifyDecision {
    pub send_now: bool,
    pub defer_until: Option<SimTime>,
    /// The change was folded into an already scheduled notification.
    pub coalesced: bool,
}

/// Server-side notification throttle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotifyThrottle {
    pub min_gap: SimTime,
    last_sent: Option<SimTime>,
    pending: Option<SimTime>,
}

impl NotifyThrottle {
    pub fn new(min_gap: SimTime) -> Self {
        Self {
            min_gap,
            last_sent: None,
            pending: None,
        }
    }

    pub fn last_sent(&self) -> Option<SimTime> {
        self.last_sent
    }

    pub fn pending(&self) -> Option<SimTime> {
        self.pending
    }

    /// Called whenever the server item changes.
    pub fn on_change(&mut self, now: SimTime) -> NotifyDecision {
        if let Some(at) = self.pending {
            return NotifyDecision {
                send_now: false,
                defer_until: Some(at),
                coalesced: true,
            };
        }
        match self.last_sent {
            Some(last) if now.saturating_sub(last) < self.min_gap => {
                let at = last + self.min_gap;
                self.pending = Some(at);
                NotifyDecision {
                    send_now: false,
                    defer_until: Some(at),
                    coalesced: false,
                }
            }
            _ => NotifyDecision {
                send_now: true,
                ..NotifyDecision::default()
            },
        }
    }

    /// Clears the deferred notification once its time has come; true if one was pending.
    pub fn take_pending(&mut self, now: SimTime) -> bool {
        match self.pending {
            Some(at) if at <= now => {
                self.pending = None;
                true
            }
            _ => false,
        }
    }

    /// Records an actual send; the gap is measured from here.
    pub fn mark_sent(&mut self, now: SimTime) {
        self.last_sent = Some(now);
    }
}

/// Throttle decision for a change to the server item at `now`.
pub fn server_notify(server: &mut ServerEndpoint, now: SimTime) -> NotifyDecision {
    server.notify.on_change(now)
}
