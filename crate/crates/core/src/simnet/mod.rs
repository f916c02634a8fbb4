//! Deterministic discrete-event simulation of one server and its clients.
//!
//! Each client sits on its own device with a radio ledger, a scheduler and a
//! push channel. Events are processed in (time, seq) order up to the session
//! end; everything the run did is returned as a [`SimResult`].

mod channel;

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use serde::{Deserialize, Serialize};

pub use channel::{Delivery, PushChannel, PushChannelConfig};

use crate::energy::{EnergyPreset, Exposure, LedgerError, LinkKind, RadioLedger, RadioState, StateTimes};
use crate::scheduler::{server_notify, CycleScheduler, SchedulerError, SchedulerEvent, SchedulerPolicy};
use crate::sync::{ClientEndpoint, ClientId, EditPacket, ServerEndpoint, SyncError};
use crate::workload::{EditTarget, EditTrace};
use crate::scheduler::NotifyThrottle;
use crate::SimTime;

/// Fixed latency added to every data packet on top of its transfer time.
pub const DEFAULT_RTT: SimTime = SimTime::from_millis(50);

/// Everything a run needs, fully resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSetup {
    pub name: String,
    pub link: LinkKind,
    pub policy: SchedulerPolicy,
    pub preset: EnergyPreset,
    pub trace: EditTrace,
    pub duration: SimTime,
    pub channel: PushChannelConfig,
    pub rtt: SimTime,
}

impl SimSetup {
    pub fn new(name: impl Into<String>, link: LinkKind, policy: SchedulerPolicy, preset: EnergyPreset, trace: EditTrace, duration: SimTime) -> Self {
        Self {
            name: name.into(),
            link,
            policy,
            preset,
            trace,
            duration,
            channel: PushChannelConfig::default(),
            rtt: DEFAULT_RTT,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.duration == SimTime::ZERO {
            return Err(SimError::Invalid(String::from("duration must be positive")));
        }
        if self.trace.sessions.is_empty() {
            return Err(SimError::Invalid(String::from("no clients")));
        }
        if !self.policy.is_valid() {
            return Err(SimError::Invalid(String::from("fixed interval must be positive")));
        }
        if !self.channel.is_valid() {
            return Err(SimError::Invalid(String::from("drop probability must lie in [0, 1]")));
        }
        let bad = self.preset.invalid_fields();
        if !bad.is_empty() {
            return Err(SimError::Invalid(format!("preset has invalid fields: {}", bad.join(", "))));
        }
        let mut seen = BTreeMap::new();
        for s in &self.trace.sessions {
            if seen.insert(s.client.clone(), ()).is_some() {
                return Err(SimError::Invalid(format!("client {} listed twice", s.client)));
            }
            if s.end < s.start {
                return Err(SimError::Invalid(format!("session of {} ends before it starts", s.client)));
            }
        }
        for (i, e) in self.trace.edits.iter().enumerate() {
            if let EditTarget::Client(c) = &e.target {
                if !seen.contains_key(c) {
                    return Err(SimError::Invalid(format!("edit {i} targets unregistered client {c}")));
                }
            }
        }
        self.trace.validate().map_err(|e| SimError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("sync failure at {time}: {source}")]
    Sync { time: SimTime, source: SyncError },
    #[error("edit {index} at {time} cannot be applied: {reason}")]
    Edit { index: usize, time: SimTime, reason: String },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub baseline: f64,
    pub radio: f64,
    pub idle_polling: f64,
    pub notifications: f64,
    pub cpu: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    /// Energy above the idle baseline and push-channel upkeep.
    pub fn attributable(&self) -> f64 {
        self.radio + self.cpu + self.notifications
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceReport {
    pub client_id: ClientId,
    pub energy: EnergyBreakdown,
    pub rate_per_min: f64,
    pub attributable: f64,
    pub cycles_started: u64,
    pub cycles_completed: u64,
    pub empty_cycles: u64,
    /// Reply ops the fuzzy patch could not place on the client item.
    pub dropped_edits: u64,
    pub notifications_received: u64,
    pub notifications_dropped: u64,
    pub notifications_reordered: u64,
    pub bytes_up: u64,
    pub bytes_down: u64,
    pub work_units: u64,
    pub online_time: SimTime,
    pub radio_time: StateTimes,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerReport {
    pub edits: u64,
    /// Client ops the fuzzy patch could not place on the server item.
    pub dropped_edits: u64,
    pub notifications_sent: u64,
    pub notifications_deferred: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub time: SimTime,
    pub device: String,
    pub event: String,
    pub bytes: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radio_state: Option<RadioState>,
    pub energy_cum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub scenario: String,
    pub seed: u64,
    pub link: LinkKind,
    pub policy: SchedulerPolicy,
    pub duration: SimTime,
    pub devices: Vec<DeviceReport>,
    pub server: ServerReport,
    /// Online copies equal the server item and offline copies have nothing unsent.
    pub converged: bool,
    pub events: Vec<LogRecord>,
}

impl SimResult {
    pub fn total_energy(&self) -> f64 {
        self.devices.iter().map(|d| d.energy.total).sum()
    }

    pub fn total_cycles(&self) -> u64 {
        self.devices.iter().map(|d| d.cycles_completed).sum()
    }

    pub fn total_empty_cycles(&self) -> u64 {
        self.devices.iter().map(|d| d.empty_cycles).sum()
    }

    pub fn total_dropped_edits(&self) -> u64 {
        self.server.dropped_edits + self.devices.iter().map(|d| d.dropped_edits).sum::<u64>()
    }

    /// Linear summary of device `i`, for preset fitting.
    pub fn exposure(&self, i: usize) -> Exposure {
        let d = &self.devices[i];
        Exposure {
            link: self.link,
            minutes: self.duration.as_mins_f64(),
            polling_minutes: if self.policy.uses_push() { d.online_time.as_mins_f64() } else { 0.0 },
            notifications: d.notifications_received as f64,
            work_units: d.work_units as f64,
            promo_minutes: d.radio_time.promo.as_mins_f64(),
            active_minutes: d.radio_time.active.as_mins_f64(),
            tail_minutes: d.radio_time.tail.as_mins_f64(),
        }
    }
}

enum Payload {
    SessionStart(usize),
    SessionEnd(usize),
    Tick(usize),
    Edit(usize),
    ToServer(usize, EditPacket),
    ToClient(usize, EditPacket),
    Notification(usize),
    NotifyFlush,
}

/// Queue entry. Session ends sort after every other event at the same
/// instant, so a client still sees what happens at its last moment.
struct Queued {
    time: SimTime,
    seq: u64,
    payload: Payload,
}

impl Queued {
    fn key(&self) -> (SimTime, bool, u64) {
        (self.time, matches!(self.payload, Payload::SessionEnd(_)), self.seq)
    }
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

struct Device {
    endpoint: ClientEndpoint,
    sched: CycleScheduler,
    ledger: RadioLedger,
    channel: PushChannel,
    online: bool,
    online_since: SimTime,
    online_time: SimTime,
    session_end: SimTime,
    up_empty: bool,
    cpu: f64,
    notif_energy: f64,
    report: DeviceReport,
}

struct Sim<'a> {
    setup: &'a SimSetup,
    uses_push: bool,
    queue: BinaryHeap<Reverse<Queued>>,
    seq: u64,
    server: ServerEndpoint,
    devices: Vec<Device>,
    index: BTreeMap<ClientId, usize>,
    server_report: ServerReport,
    events: Vec<LogRecord>,
}

/// Mixes the run seed with a device index (splitmix64 finaliser).
fn device_seed(seed: u64, i: usize) -> u64 {
    let mut z = seed ^ (i as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl<'a> Sim<'a> {
    fn schedule(&mut self, time: SimTime, payload: Payload) {
        self.seq += 1;
        self.queue.push(Reverse(Queued {
            time,
            seq: self.seq,
            payload,
        }));
    }

    fn energy_so_far(&self, i: usize, t: SimTime) -> f64 {
        let d = &self.devices[i];
        let p = &self.setup.preset;
        let mut online = d.online_time;
        if d.online {
            online += t.saturating_sub(d.online_since);
        }
        let idle = if self.uses_push { p.idle_polling * online.as_mins_f64() } else { 0.0 };
        d.ledger.energy_between(p.baseline, SimTime::ZERO, t) + idle + d.cpu + d.notif_energy
    }

    fn log(&mut self, time: SimTime, device: Option<usize>, event: &str, bytes: usize) {
        let (name, state, energy) = match device {
            Some(i) => (
                self.devices[i].report.client_id.as_str().to_string(),
                Some(self.devices[i].ledger.state_at(time)),
                self.energy_so_far(i, time),
            ),
            None => (String::from("server"), None, 0.0),
        };
        self.events.push(LogRecord {
            time,
            device: name,
            event: String::from(event),
            bytes: bytes as u64,
            radio_state: state,
            energy_cum: energy,
        });
    }

    fn sync_err(time: SimTime) -> impl Fn(SyncError) -> SimError {
        move |source| SimError::Sync { time, source }
    }

    fn start_cycle(&mut self, i: usize, now: SimTime) -> Result<(), SimError> {
        let packet = self.devices[i].endpoint.begin_cycle().map_err(Self::sync_err(now))?;
        let cpu = self.setup.preset.cpu_energy(packet.script.work_units);
        let d = &mut self.devices[i];
        d.cpu += cpu;
        d.report.work_units += packet.script.work_units;
        d.report.cycles_started += 1;
        d.report.bytes_up += packet.wire_bytes as u64;
        d.up_empty = packet.script.is_empty();
        let end = d.ledger.record_transfer(packet.wire_bytes, now)?;
        let bytes = packet.wire_bytes;
        self.log(now, Some(i), "cycle_start", bytes);
        self.schedule(end + self.setup.rtt, Payload::ToServer(i, packet));
        Ok(())
    }

    fn drive(&mut self, i: usize, event: SchedulerEvent) -> Result<(), SimError> {
        let now = event.time();
        let decision = self.devices[i].sched.on_event(event)?;
        if decision.start_cycle {
            self.start_cycle(i, now)?;
        }
        if let Some(t) = decision.next_tick {
            if t <= self.setup.duration && t <= self.devices[i].session_end {
                self.schedule(t, Payload::Tick(i));
            }
        }
        Ok(())
    }

    fn server_changed(&mut self, now: SimTime) {
        if !self.uses_push {
            return;
        }
        let d = server_notify(&mut self.server, now);
        if d.send_now {
            self.notify_stale(now);
        } else if let (Some(at), false) = (d.defer_until, d.coalesced) {
            self.server_report.notifications_deferred += 1;
            self.schedule(at, Payload::NotifyFlush);
        }
    }

    fn notify_stale(&mut self, now: SimTime) {
        let stale: Vec<usize> = self.server.stale_clients().map(|c| self.index[c]).collect();
        let mut sent = false;
        for i in stale {
            if !self.devices[i].online {
                continue;
            }
            sent = true;
            self.server_report.notifications_sent += 1;
            let delivery = self.devices[i].channel.send(now);
            self.log(now, Some(i), "notify_sent", 0);
            match delivery.deliver_at {
                Some(at) => {
                    if delivery.reordered {
                        self.devices[i].report.notifications_reordered += 1;
                    }
                    self.schedule(at, Payload::Notification(i));
                }
                None => {
                    self.devices[i].report.notifications_dropped += 1;
                    self.log(now, Some(i), "notify_lost", 0);
                }
            }
        }
        if sent {
            self.server.notify.mark_sent(now);
        }
    }

    fn handle(&mut self, now: SimTime, payload: Payload) -> Result<(), SimError> {
        match payload {
            Payload::SessionStart(i) => {
                let d = &mut self.devices[i];
                d.online = true;
                d.online_since = now;
                self.log(now, Some(i), "session_start", 0);
                self.drive(i, SchedulerEvent::Connected(now))?;
            }
            Payload::SessionEnd(i) => {
                let d = &mut self.devices[i];
                if d.online {
                    d.online = false;
                    d.online_time += now - d.online_since;
                }
                self.log(now, Some(i), "session_end", 0);
            }
            Payload::Tick(i) => {
                if self.devices[i].online {
                    self.drive(i, SchedulerEvent::Tick(now))?;
                }
            }
            Payload::Edit(k) => {
                let edit = &self.setup.trace.edits[k];
                let bad = |reason: &str| SimError::Edit {
                    index: k,
                    time: now,
                    reason: String::from(reason),
                };
                match &edit.target {
                    EditTarget::Client(c) => {
                        let i = self.index[c];
                        let script = edit.edit.resolve(&self.devices[i].endpoint.item).map_err(bad)?;
                        self.devices[i]
                            .endpoint
                            .apply_local_edit(&script)
                            .map_err(|e| bad(&e.to_string()))?;
                        self.log(now, Some(i), "local_edit", 0);
                        if self.devices[i].online && self.uses_push {
                            self.drive(i, SchedulerEvent::LocalEdit(now))?;
                        }
                    }
                    EditTarget::Server => {
                        let script = edit.edit.resolve(&self.server.item).map_err(bad)?;
                        let before = self.server.item.clone();
                        self.server.apply_local_edit(&script).map_err(|e| bad(&e.to_string()))?;
                        self.server_report.edits += 1;
                        self.log(now, None, "server_edit", 0);
                        if self.server.item != before {
                            self.server_changed(now);
                        }
                    }
                }
            }
            Payload::ToServer(i, packet) => {
                let reply = self.server.process(&packet).map_err(Self::sync_err(now))?;
                self.server_report.dropped_edits += reply.dropped as u64;
                self.log(now, None, "server_process", packet.wire_bytes);
                if reply.item_changed {
                    self.server_changed(now);
                }
                let bytes = reply.packet.wire_bytes;
                let start = now + self.setup.rtt;
                let d = &mut self.devices[i];
                d.report.bytes_down += bytes as u64;
                let end = d.ledger.record_transfer(bytes, start)?;
                self.schedule(end, Payload::ToClient(i, reply.packet));
            }
            Payload::ToClient(i, packet) => {
                let outcome = self.devices[i].endpoint.apply_reply(&packet).map_err(Self::sync_err(now))?;
                let d = &mut self.devices[i];
                d.report.cycles_completed += 1;
                d.report.dropped_edits += outcome.dropped as u64;
                if d.up_empty && packet.script.is_empty() {
                    d.report.empty_cycles += 1;
                }
                self.log(now, Some(i), "cycle_complete", packet.wire_bytes);
                if self.devices[i].online {
                    self.drive(i, SchedulerEvent::CycleCompleted(now))?;
                } else {
                    // offline: no follow-up cycle
                    self.devices[i].sched = CycleScheduler::new(self.setup.policy);
                }
            }
            Payload::Notification(i) => {
                if self.devices[i].online {
                    let cost = self.setup.preset.per_notification;
                    let d = &mut self.devices[i];
                    d.report.notifications_received += 1;
                    d.notif_energy += cost;
                    self.log(now, Some(i), "notification", 0);
                    self.drive(i, SchedulerEvent::NotificationReceived(now))?;
                }
            }
            Payload::NotifyFlush => {
                if self.server.notify.take_pending(now) {
                    self.notify_stale(now);
                }
            }
        }
        Ok(())
    }
}

/// Runs `setup` with `seed`. Identical inputs give identical results.
pub fn run(setup: &SimSetup, seed: u64) -> Result<SimResult, SimError> {
    setup.validate()?;
    let min_gap = match setup.policy {
        SchedulerPolicy::PushBased { min_notify_gap } => min_notify_gap,
        _ => SimTime::ZERO,
    };
    let mut server = ServerEndpoint::new(setup.trace.initial.clone(), NotifyThrottle::new(min_gap));
    let link = *setup.preset.link(setup.link);
    let mut devices = Vec::new();
    let mut index = BTreeMap::new();
    for (i, s) in setup.trace.sessions.iter().enumerate() {
        let endpoint = server.register(s.client.clone()).map_err(|e| SimError::Invalid(e.to_string()))?;
        index.insert(s.client.clone(), i);
        devices.push(Device {
            endpoint,
            sched: CycleScheduler::new(setup.policy),
            ledger: RadioLedger::new(link),
            channel: PushChannel::new(setup.channel, device_seed(seed, i)),
            online: false,
            online_since: SimTime::ZERO,
            online_time: SimTime::ZERO,
            session_end: s.end,
            up_empty: true,
            cpu: 0.0,
            notif_energy: 0.0,
            report: DeviceReport {
                client_id: s.client.clone(),
                energy: EnergyBreakdown::default(),
                rate_per_min: 0.0,
                attributable: 0.0,
                cycles_started: 0,
                cycles_completed: 0,
                empty_cycles: 0,
                dropped_edits: 0,
                notifications_received: 0,
                notifications_dropped: 0,
                notifications_reordered: 0,
                bytes_up: 0,
                bytes_down: 0,
                work_units: 0,
                online_time: SimTime::ZERO,
                radio_time: StateTimes::default(),
            },
        });
    }
    let mut sim = Sim {
        setup,
        uses_push: setup.policy.uses_push(),
        queue: BinaryHeap::new(),
        seq: 0,
        server,
        devices,
        index,
        server_report: ServerReport::default(),
        events: Vec::new(),
    };
    for (i, s) in setup.trace.sessions.iter().enumerate() {
        sim.schedule(s.start, Payload::SessionStart(i));
        sim.schedule(s.end, Payload::SessionEnd(i));
    }
    for (k, e) in setup.trace.edits.iter().enumerate() {
        sim.schedule(e.time, Payload::Edit(k));
    }

    let end = setup.duration;
    while let Some(Reverse(q)) = sim.queue.pop() {
        if q.time > end {
            break;
        }
        sim.handle(q.time, q.payload)?;
    }

    // Online copies must match the server; an in-flight cycle that carries no
    // edits leaves them identical. Offline copies will catch up on reconnect,
    // so they only need to have nothing unsent.
    let converged = sim.devices.iter().all(|d| {
        let id = &d.report.client_id;
        let e = &d.endpoint;
        if d.online {
            e.item == sim.server.item && e.shadow == sim.server.item && sim.server.shadow(id) == Some(&sim.server.item)
        } else {
            e.item == e.shadow && sim.server.shadow(id) == Some(&e.shadow)
        }
    });

    let p = &setup.preset;
    let minutes = end.as_mins_f64();
    let uses_push = sim.uses_push;
    let mut reports = Vec::with_capacity(sim.devices.len());
    for d in &mut sim.devices {
        if d.online {
            d.online_time += end.saturating_sub(d.online_since);
        }
        let radio = d.ledger.radio_energy_between(SimTime::ZERO, end);
        let baseline = p.baseline * minutes;
        let idle_polling = if uses_push { p.idle_polling * d.online_time.as_mins_f64() } else { 0.0 };
        let energy = EnergyBreakdown {
            baseline,
            radio,
            idle_polling,
            notifications: d.notif_energy,
            cpu: d.cpu,
            total: baseline + radio + idle_polling + d.notif_energy + d.cpu,
        };
        let mut r = d.report.clone();
        r.energy = energy;
        r.rate_per_min = energy.total / minutes;
        r.attributable = energy.attributable();
        r.online_time = d.online_time;
        r.radio_time = d.ledger.time_in_states(SimTime::ZERO, end);
        reports.push(r);
    }

    Ok(SimResult {
        scenario: setup.name.clone(),
        seed,
        link: setup.link,
        policy: setup.policy,
        duration: end,
        devices: reports,
        server: sim.server_report,
        converged,
        events: sim.events,
    })
}
