//! Edit traces: synthetic sessions shaped by usage statistics, fixed-period
//! micro traces for the diff-cost experiments and random concurrent text
//! edits for convergence testing.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use crate::diff::{
    self, AnnotationEntry, AnnotationId, Annotations, Color, Content, Decimal6, EditScript, Position,
};
use crate::sync::ClientId;
use crate::SimTime;

/// Standard normal quantile for 0.99: the untruncated session length exceeds
/// `session_max` with probability 0.01.
const Z_99: f64 = 2.326_347_874;

/// Seed for the filler text of micro traces, so every run edits the same item.
const MICRO_TEXT_SEED: u64 = 0x6d69_6372_6f00;

const PALETTE: [u32; 5] = [0xFFFF00, 0x00FF00, 0xFF80C0, 0x80C0FF, 0xFFA040];

const WORDS: [&str; 16] = [
    "model", "results", "see", "figure", "method", "data", "cite", "this", "proof", "check", "table", "note", "important",
    "compare", "related", "work",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemSizeProfile {
    Small,
    Large,
    Xlarge,
}

impl ItemSizeProfile {
    /// Length of note texts under this profile.
    pub fn note_bytes(self) -> usize {
        match self {
            ItemSizeProfile::Small => 24,
            ItemSizeProfile::Large => 700,
            ItemSizeProfile::Xlarge => 7000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadParams {
    pub session_mean: f64,
    pub session_min: f64,
    pub session_max: f64,
    /// Highlight edits per `note` edits.
    pub highlight_to_note_ratio: (u32, u32),
    pub target_empty_cycle_fraction_at_2s: f64,
    pub item_size_profile: ItemSizeProfile,
}

impl Default for WorkloadParams {
    fn default() -> Self {
        Self {
            session_mean: 431.4,
            session_min: 3.3,
            session_max: 1977.8,
            highlight_to_note_ratio: (3, 1),
            target_empty_cycle_fraction_at_2s: 0.968,
            item_size_profile: ItemSizeProfile::Small,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorkloadError {
    #[error("degenerate workload parameters: {0}")]
    Degenerate(&'static str),
    #[error("edit {index} does not fit the item: {reason}")]
    BadEdit { index: usize, reason: String },
}

impl WorkloadParams {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let finite = [self.session_mean, self.session_min, self.session_max, self.target_empty_cycle_fraction_at_2s]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(WorkloadError::Degenerate("non-finite value"));
        }
        if !(self.session_min > 0.0 && self.session_min <= self.session_mean && self.session_mean <= self.session_max) {
            return Err(WorkloadError::Degenerate("need 0 < session_min ≤ session_mean ≤ session_max"));
        }
        if self.session_max / self.session_mean > libm::exp(Z_99 * Z_99 / 2.0) {
            return Err(WorkloadError::Degenerate("session_max too far above session_mean for a log-normal fit"));
        }
        let (h, n) = self.highlight_to_note_ratio;
        if h == 0 || n == 0 {
            return Err(WorkloadError::Degenerate("ratio components must be positive"));
        }
        if !(0.0..=1.0).contains(&self.target_empty_cycle_fraction_at_2s) || self.target_empty_cycle_fraction_at_2s == 0.0 {
            return Err(WorkloadError::Degenerate("empty-cycle fraction must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Log-normal (μ, σ) with the configured mean and a 1 % chance of
    /// exceeding `session_max` before truncation.
    pub fn session_lognormal(&self) -> (f64, f64) {
        let r = libm::log(self.session_max / self.session_mean);
        let sigma = Z_99 - libm::sqrt(Z_99 * Z_99 - 2.0 * r);
        let mu = libm::log(self.session_mean) - sigma * sigma / 2.0;
        (mu, sigma)
    }

    /// Edits per second per client so that a 2 s window is empty with the target probability.
    pub fn edit_rate(&self) -> f64 {
        -libm::log(self.target_empty_cycle_fraction_at_2s) / 2.0
    }

    fn highlight_probability(&self) -> f64 {
        let (h, n) = self.highlight_to_note_ratio;
        h as f64 / (h + n) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditTarget {
    Client(ClientId),
    Server,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    Highlight,
    Note,
    Text,
}

/// One user edit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edit {
    /// A script that applies exactly to the editing side's item.
    Script(EditScript),
    /// Text replacement placed relative to whatever the item holds when the
    /// edit happens: `delete` scalars at `at_permille`‰ of the text are
    /// replaced by `insert`.
    Splice { at_permille: u16, delete: u32, insert: String },
}

impl Edit {
    /// The concrete script for this edit against `current`.
    pub fn resolve(&self, current: &Content) -> Result<EditScript, &'static str> {
        match self {
            Edit::Script(s) => Ok(s.clone()),
            Edit::Splice { at_permille, delete, insert } => {
                let Content::Text(text) = current else {
                    return Err("splice on non-text item");
                };
                let chars: Vec<char> = text.chars().collect();
                let at = (chars.len() * (*at_permille).min(1000) as usize) / 1000;
                let end = (at + *delete as usize).min(chars.len());
                let mut next: String = chars[..at].iter().collect();
                next.push_str(insert);
                next.extend(chars[end..].iter());
                let (ops, work) = diff::diff_text(text, &next);
                Ok(EditScript::text(ops, work))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEdit {
    pub time: SimTime,
    pub target: EditTarget,
    pub kind: EditKind,
    pub edit: Edit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionWindow {
    pub client: ClientId,
    pub start: SimTime,
    pub end: SimTime,
}

/// Initial item, who is online when, and the edits in time order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditTrace {
    pub initial: Content,
    pub sessions: Vec<SessionWindow>,
    pub edits: Vec<TraceEdit>,
}

impl EditTrace {
    pub fn clients(&self) -> Vec<ClientId> {
        self.sessions.iter().map(|s| s.client.clone()).collect()
    }

    /// Sorts edits by time, keeping the order of simultaneous ones.
    pub fn normalize(&mut self) {
        self.edits.sort_by_key(|e| e.time);
    }

    /// Checks time order and that every edit lies inside its client's session.
    pub fn validate(&self) -> Result<(), WorkloadError> {
        for (i, w) in self.edits.windows(2).enumerate() {
            if w[1].time < w[0].time {
                return Err(WorkloadError::BadEdit {
                    index: i + 1,
                    reason: String::from("edits out of time order"),
                });
            }
        }
        for (i, e) in self.edits.iter().enumerate() {
            if let EditTarget::Client(c) = &e.target {
                let inside = self
                    .sessions
                    .iter()
                    .any(|s| &s.client == c && s.start <= e.time && e.time <= s.end);
                if !inside {
                    return Err(WorkloadError::BadEdit {
                        index: i,
                        reason: format!("{c} edits outside its session"),
                    });
                }
            }
        }
        Ok(())
    }
}

pub fn client_id(i: usize) -> ClientId {
    ClientId::new(format!("c{i}"))
}

fn random_id(rng: &mut ChaCha8Rng) -> AnnotationId {
    AnnotationId::from_random_bytes(rng.random())
}

fn random_position(rng: &mut ChaCha8Rng) -> Position {
    let x = rng.random_range(50_000_000..500_000_000i64);
    let y = rng.random_range(50_000_000..700_000_000i64);
    let w = rng.random_range(10_000_000..200_000_000i64);
    Position {
        page: rng.random_range(1..=20),
        rect: [
            Decimal6::from_micros(x),
            Decimal6::from_micros(y),
            Decimal6::from_micros(x + w),
            Decimal6::from_micros(y + 12_000_000),
        ],
    }
}

fn random_words(rng: &mut ChaCha8Rng, bytes: usize) -> String {
    let mut s = String::new();
    while s.len() < bytes {
        if !s.is_empty() {
            s.push(' ');
        }
        s.push_str(WORDS[rng.random_range(0..WORDS.len())]);
    }
    s.truncate(bytes);
    s
}

fn other_color(rng: &mut ChaCha8Rng, current: Color) -> Color {
    loop {
        let c = Color::new(PALETTE[rng.random_range(0..PALETTE.len())]);
        if c != current {
            return c;
        }
    }
}

/// Script that turns `before` into `after` for a single annotation owned by one client.
fn entry_script(id: &AnnotationId, before: Option<&AnnotationEntry>, after: Option<&AnnotationEntry>) -> EditScript {
    let mut a = Annotations::new();
    let mut b = Annotations::new();
    if let Some(e) = before {
        a.insert(id.clone(), e.clone());
    }
    if let Some(e) = after {
        b.insert(id.clone(), e.clone());
    }
    let (ops, work) = diff::diff_annotations(&a, &b);
    EditScript::annotations(ops, work)
}

/// Annotations owned by one client, edited only by that client.
struct Owned {
    entries: Annotations,
    highlights: Vec<AnnotationId>,
    notes: Vec<AnnotationId>,
}

impl Owned {
    fn seed(rng: &mut ChaCha8Rng, profile: ItemSizeProfile, author: &str, doc: &mut Annotations) -> Self {
        let mut o = Owned {
            entries: Annotations::new(),
            highlights: Vec::new(),
            notes: Vec::new(),
        };
        for _ in 0..2 {
            let id = random_id(rng);
            let e = AnnotationEntry::highlight(random_position(rng), Color::new(PALETTE[0]));
            o.entries.insert(id.clone(), e);
            o.highlights.push(id);
        }
        let id = random_id(rng);
        let text = random_words(rng, profile.note_bytes());
        let e = AnnotationEntry::note(random_position(rng), Color::new(PALETTE[0]), text, Some(String::from(author)));
        o.entries.insert(id.clone(), e);
        o.notes.push(id);
        for (k, v) in &o.entries {
            doc.insert(k.clone(), v.clone());
        }
        o
    }

    fn change(&mut self, id: &AnnotationId, next: AnnotationEntry) -> EditScript {
        let script = entry_script(id, self.entries.get(id), Some(&next));
        self.entries.insert(id.clone(), next);
        script
    }

    fn highlight_edit(&mut self, rng: &mut ChaCha8Rng) -> EditScript {
        if self.highlights.is_empty() || rng.random_bool(0.25) {
            let id = random_id(rng);
            let e = AnnotationEntry::highlight(random_position(rng), Color::new(PALETTE[rng.random_range(0..PALETTE.len())]));
            self.highlights.push(id.clone());
            return self.change(&id, e);
        }
        let id = self.highlights[rng.random_range(0..self.highlights.len())].clone();
        let mut e = self.entries[&id].clone();
        if rng.random_bool(0.8) {
            e.color = other_color(rng, e.color);
        } else {
            e.position = random_position(rng);
        }
        self.change(&id, e)
    }

    fn note_edit(&mut self, rng: &mut ChaCha8Rng, profile: ItemSizeProfile, author: &str) -> EditScript {
        if self.notes.is_empty() || rng.random_bool(0.2) {
            let id = random_id(rng);
            let text = random_words(rng, profile.note_bytes());
            let e = AnnotationEntry::note(random_position(rng), Color::new(PALETTE[0]), text, Some(String::from(author)));
            self.notes.push(id.clone());
            return self.change(&id, e);
        }
        let id = self.notes[rng.random_range(0..self.notes.len())].clone();
        let mut e = self.entries[&id].clone();
        let mut text = e.text.take().unwrap_or_default();
        let word = WORDS[rng.random_range(0..WORDS.len())];
        if rng.random_bool(0.5) || text.is_empty() {
            text.push(' ');
            text.push_str(word);
        } else {
            let cut = text.char_indices().nth(rng.random_range(0..text.chars().count())).map_or(0, |(i, _)| i);
            text.insert_str(cut, word);
        }
        e.text = Some(text);
        self.change(&id, e)
    }
}

/// Synthetic multi-client trace.
///
/// Every client owns the annotations it creates and edits nothing else, so
/// its scripts stay exactly applicable to its own item whatever the others do.
pub fn generate_trace(params: &WorkloadParams, n_clients: usize, seed: u64) -> Result<EditTrace, WorkloadError> {
    params.validate()?;
    if n_clients == 0 {
        return Err(WorkloadError::Degenerate("need at least one client"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mu, sigma) = params.session_lognormal();
    let lognormal = LogNormal::new(mu, sigma).map_err(|_| WorkloadError::Degenerate("log-normal parameters"))?;
    let rate = params.edit_rate();
    let gaps = if rate > 0.0 {
        Some(Exp::new(rate).map_err(|_| WorkloadError::Degenerate("edit rate"))?)
    } else {
        None
    };
    let p_highlight = params.highlight_probability();

    let mut doc = Annotations::new();
    let mut owned = Vec::with_capacity(n_clients);
    let mut sessions = Vec::with_capacity(n_clients);
    let mut edits = Vec::new();
    for i in 0..n_clients {
        let id = client_id(i);
        owned.push(Owned::seed(&mut rng, params.item_size_profile, id.as_str(), &mut doc));
        let length = loop {
            let x: f64 = lognormal.sample(&mut rng);
            if (params.session_min..=params.session_max).contains(&x) {
                break x;
            }
        };
        sessions.push(SessionWindow {
            client: id,
            start: SimTime::ZERO,
            end: SimTime::from_secs_f64(length),
        });
    }
    for (i, (own, session)) in owned.iter_mut().zip(&sessions).enumerate() {
        let Some(gaps) = gaps else { break };
        let mut t = session.start.as_secs_f64();
        loop {
            t += gaps.sample(&mut rng);
            let at = SimTime::from_secs_f64(t);
            if at > session.end {
                break;
            }
            let (kind, script) = if rng.random_bool(p_highlight) {
                (EditKind::Highlight, own.highlight_edit(&mut rng))
            } else {
                (EditKind::Note, own.note_edit(&mut rng, params.item_size_profile, session.client.as_str()))
            };
            edits.push((
                at,
                i,
                TraceEdit {
                    time: at,
                    target: EditTarget::Client(session.client.clone()),
                    kind,
                    edit: Edit::Script(script),
                },
            ));
        }
    }
    edits.sort_by_key(|(t, i, _)| (*t, *i));
    Ok(EditTrace {
        initial: Content::Annotations(doc),
        sessions,
        edits: edits.into_iter().map(|(_, _, e)| e).collect(),
    })
}

/// Single-client trace at the expected edit rate: one edit every
/// `2 s / (1 − f)` (62.5 s for f = 0.968), kinds cycling through the
/// configured ratio. Online for the whole `duration`.
pub fn expected_rate_trace(params: &WorkloadParams, duration: SimTime) -> Result<EditTrace, WorkloadError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let id = client_id(0);
    let mut doc = Annotations::new();
    let mut own = Owned::seed(&mut rng, params.item_size_profile, id.as_str(), &mut doc);
    // one more highlight so three can take turns
    let extra = random_id(&mut rng);
    let entry = AnnotationEntry::highlight(random_position(&mut rng), Color::new(PALETTE[0]));
    doc.insert(extra.clone(), entry.clone());
    own.entries.insert(extra.clone(), entry);
    own.highlights.push(extra);

    let mut edits = Vec::new();
    let f = params.target_empty_cycle_fraction_at_2s;
    if f < 1.0 {
        let period = SimTime::from_secs_f64(2.0 / (1.0 - f));
        let (h, n) = params.highlight_to_note_ratio;
        let cycle = (h + n) as usize;
        let mut t = period;
        let mut k = 0usize;
        while t < duration {
            let (kind, script) = if k % cycle < h as usize {
                let hid = own.highlights[k % own.highlights.len()].clone();
                let mut e = own.entries[&hid].clone();
                e.color = Color::new(PALETTE[(k / own.highlights.len() + 1) % PALETTE.len()]);
                if e.color == own.entries[&hid].color {
                    e.color = other_color(&mut rng, e.color);
                }
                (EditKind::Highlight, own.change(&hid, e))
            } else {
                (EditKind::Note, own.note_edit(&mut rng, params.item_size_profile, id.as_str()))
            };
            edits.push(TraceEdit {
                time: t,
                target: EditTarget::Client(id.clone()),
                kind,
                edit: Edit::Script(script),
            });
            t += period;
            k += 1;
        }
    }
    Ok(EditTrace {
        initial: Content::Annotations(doc),
        sessions: alloc::vec![SessionWindow {
            client: id,
            start: SimTime::ZERO,
            end: duration,
        }],
        edits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MicroKind {
    Empty,
    /// First and last character replaced: no common prefix or suffix to trim.
    WorstCase { item_bytes: usize },
    /// Last character deleted and a different one appended.
    SimpleChange { item_bytes: usize },
}

/// Who makes the micro-trace edits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditOrigin {
    #[default]
    Client,
    Server,
}

fn filler_text(bytes: usize) -> Vec<char> {
    let mut rng = ChaCha8Rng::seed_from_u64(MICRO_TEXT_SEED);
    (0..bytes).map(|_| char::from(b'a' + rng.random_range(0..26u8))).collect()
}

fn next_letter(c: char) -> char {
    if c == 'z' {
        'a'
    } else {
        char::from(c as u8 + 1)
    }
}

/// One edit at the middle of every `period`, single client `c0`.
pub fn micro_trace(kind: MicroKind, origin: EditOrigin, period: SimTime, duration: SimTime) -> EditTrace {
    let bytes = match kind {
        MicroKind::Empty => 700,
        MicroKind::WorstCase { item_bytes } | MicroKind::SimpleChange { item_bytes } => item_bytes.max(2),
    };
    let mut text = filler_text(bytes);
    let initial = Content::Text(text.iter().collect());
    let target = match origin {
        EditOrigin::Client => EditTarget::Client(client_id(0)),
        EditOrigin::Server => EditTarget::Server,
    };
    let mut edits = Vec::new();
    if kind != MicroKind::Empty && period > SimTime::ZERO {
        let half = SimTime::from_micros(period.as_micros() / 2);
        let mut t = half;
        while t < duration {
            let before: String = text.iter().collect();
            let n = text.len();
            match kind {
                MicroKind::WorstCase { .. } => {
                    text[0] = next_letter(text[0]);
                    text[n - 1] = next_letter(text[n - 1]);
                }
                MicroKind::SimpleChange { .. } => {
                    let last = text.pop().unwrap_or('a');
                    text.push(next_letter(last));
                }
                MicroKind::Empty => {}
            }
            let after: String = text.iter().collect();
            let (ops, work) = diff::diff_text(&before, &after);
            edits.push(TraceEdit {
                time: t,
                target: target.clone(),
                kind: EditKind::Text,
                edit: Edit::Script(EditScript::text(ops, work)),
            });
            t += period;
        }
    }
    EditTrace {
        initial,
        sessions: alloc::vec![SessionWindow {
            client: client_id(0),
            start: SimTime::ZERO,
            end: duration,
        }],
        edits,
    }
}

/// Random concurrent splices on a shared text by `n_clients` clients, all
/// online for `edit_horizon + quiet`. Edits fall inside the horizon only.
pub fn random_text_trace(n_clients: usize, n_edits: usize, edit_horizon: SimTime, quiet: SimTime, seed: u64) -> EditTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphabet = ['a', 'b', 'c', 'd', ' '];
    let len = rng.random_range(0..80);
    let initial: String = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
    let n_clients = n_clients.max(1);
    let mut edits: Vec<TraceEdit> = (0..n_edits)
        .map(|_| {
            let time = SimTime::from_micros(rng.random_range(0..=edit_horizon.as_micros()));
            let target = EditTarget::Client(client_id(rng.random_range(0..n_clients)));
            let ins_len = rng.random_range(0..6);
            TraceEdit {
                time,
                target,
                kind: EditKind::Text,
                edit: Edit::Splice {
                    at_permille: rng.random_range(0..=1000),
                    delete: rng.random_range(0..5),
                    insert: (0..ins_len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect(),
                },
            }
        })
        .collect();
    edits.sort_by_key(|e| e.time);
    EditTrace {
        initial: Content::Text(initial),
        sessions: (0..n_clients)
            .map(|i| SessionWindow {
                client: client_id(i),
                start: SimTime::ZERO,
                end: edit_horizon + quiet,
            })
            .collect(),
        edits,
    }
}
