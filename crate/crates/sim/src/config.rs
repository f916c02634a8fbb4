//! Scenario files.
//!
//! A scenario is a JSON object; times are given in seconds. Bundled
//! scenarios can be referenced by name instead of by path.

use std::path::{Path, PathBuf};

use diffsync_core::energy::{EnergyPreset, LinkKind};
use diffsync_core::scheduler::SchedulerPolicy;
use diffsync_core::simnet::{PushChannelConfig, SimSetup};
use diffsync_core::workload::{
    expected_rate_trace, generate_trace, micro_trace, random_text_trace, EditOrigin, EditTrace, MicroKind, WorkloadParams,
};
use diffsync_core::SimTime;
use serde::{Deserialize, Serialize};

use crate::output;
use crate::presets;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {origin}: {source}")]
    Parse { origin: String, source: serde_json::Error },
    #[error("no scenario file or bundled scenario named `{0}`")]
    UnknownScenario(String),
    #[error("unknown preset `{0}` (not bundled and no such file)")]
    UnknownPreset(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("bad override: {0}")]
    Override(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PolicySpec {
    /// `interval_s` = 0 means back-to-back cycles.
    FixedInterval { interval_s: f64 },
    BackToBack,
    Push {
        #[serde(default = "default_notify_gap")]
        min_notify_gap_s: f64,
    },
}

fn default_notify_gap() -> f64 {
    2.0
}

impl PolicySpec {
    pub fn to_policy(self) -> Result<SchedulerPolicy, ConfigError> {
        match self {
            PolicySpec::FixedInterval { interval_s } => {
                if !(interval_s.is_finite() && interval_s >= 0.0) {
                    return Err(ConfigError::Invalid(format!("interval_s must be ≥ 0, got {interval_s}")));
                }
                Ok(SchedulerPolicy::fixed_secs(interval_s))
            }
            PolicySpec::BackToBack => Ok(SchedulerPolicy::BackToBack),
            PolicySpec::Push { min_notify_gap_s } => {
                if !(min_notify_gap_s.is_finite() && min_notify_gap_s >= 0.0) {
                    return Err(ConfigError::Invalid(format!("min_notify_gap_s must be ≥ 0, got {min_notify_gap_s}")));
                }
                Ok(SchedulerPolicy::PushBased {
                    min_notify_gap: SimTime::from_secs_f64(min_notify_gap_s),
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WorkloadSpec {
    /// One client editing annotations at the average observed rate.
    ExpectedRate {
        #[serde(default)]
        params: WorkloadParamsSpec,
    },
    /// Random sessions and edits for `n_clients` clients, drawn with the scenario seed.
    Generated {
        #[serde(default)]
        params: WorkloadParamsSpec,
    },
    Micro {
        #[serde(flatten)]
        kind: MicroKind,
        #[serde(default)]
        origin: EditOrigin,
        period_s: f64,
    },
    /// Random concurrent splices on a shared text.
    RandomText { edits: usize, horizon_s: f64, quiet_s: f64 },
    /// A JSON Lines trace, relative to the scenario file.
    File { path: PathBuf },
}

/// [`WorkloadParams`] with every field optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadParamsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub highlight_to_note_ratio: Option<(u32, u32)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_empty_cycle_fraction_at_2s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_size_profile: Option<diffsync_core::workload::ItemSizeProfile>,
}

impl WorkloadParamsSpec {
    pub fn resolve(&self) -> WorkloadParams {
        let d = WorkloadParams::default();
        WorkloadParams {
            session_mean: self.session_mean.unwrap_or(d.session_mean),
            session_min: self.session_min.unwrap_or(d.session_min),
            session_max: self.session_max.unwrap_or(d.session_max),
            highlight_to_note_ratio: self.highlight_to_note_ratio.unwrap_or(d.highlight_to_note_ratio),
            target_empty_cycle_fraction_at_2s: self
                .target_empty_cycle_fraction_at_2s
                .unwrap_or(d.target_empty_cycle_fraction_at_2s),
            item_size_profile: self.item_size_profile.unwrap_or(d.item_size_profile),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub delivery_latency_s: f64,
    pub min_reliable_gap_s: f64,
    pub unreliable_drop_prob: f64,
    pub unreliable_reorder: bool,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        let c = PushChannelConfig::default();
        Self {
            delivery_latency_s: c.delivery_latency.as_secs_f64(),
            min_reliable_gap_s: c.min_reliable_gap.as_secs_f64(),
            unreliable_drop_prob: c.unreliable_drop_prob,
            unreliable_reorder: c.unreliable_reorder,
        }
    }
}

impl ChannelSpec {
    fn to_config(self) -> PushChannelConfig {
        PushChannelConfig {
            delivery_latency: SimTime::from_secs_f64(self.delivery_latency_s),
            min_reliable_gap: SimTime::from_secs_f64(self.min_reliable_gap_s),
            unreliable_drop_prob: self.unreliable_drop_prob,
            unreliable_reorder: self.unreliable_reorder,
        }
    }
}

fn default_rtt_ms() -> f64 {
    50.0
}

fn is_default_rtt(v: &f64) -> bool {
    *v == default_rtt_ms()
}

fn default_n_clients() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub link: LinkKind,
    pub policy: PolicySpec,
    pub preset: String,
    pub workload: WorkloadSpec,
    #[serde(default = "default_n_clients")]
    pub n_clients: usize,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelSpec>,
    #[serde(default = "default_rtt_ms", skip_serializing_if = "is_default_rtt")]
    pub rtt_ms: f64,
    /// Default interval list for `sweep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_intervals_s: Option<Vec<f64>>,
}

/// Command-line replacements for scenario fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub duration_s: Option<f64>,
    pub seed: Option<u64>,
    pub link: Option<LinkKind>,
    pub n_clients: Option<usize>,
    pub preset: Option<String>,
    pub interval_s: Option<f64>,
}

/// Bundled scenario files, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("mendeley_7min_fixed2s_3g", include_str!("../scenarios/mendeley_7min_fixed2s_3g.json")),
    ("mendeley_7min_push_3g", include_str!("../scenarios/mendeley_7min_push_3g.json")),
    ("mendeley_33min_fixed2s_3g", include_str!("../scenarios/mendeley_33min_fixed2s_3g.json")),
    ("mendeley_33min_push_3g", include_str!("../scenarios/mendeley_33min_push_3g.json")),
    ("complexity_empty_6s_3g", include_str!("../scenarios/complexity_empty_6s_3g.json")),
    ("complexity_worst_7000_6s_3g", include_str!("../scenarios/complexity_worst_7000_6s_3g.json")),
    ("complexity_worst_700_6s_3g", include_str!("../scenarios/complexity_worst_700_6s_3g.json")),
    ("complexity_simple_7000_6s_3g", include_str!("../scenarios/complexity_simple_7000_6s_3g.json")),
    ("push_small_item_6s_3g", include_str!("../scenarios/push_small_item_6s_3g.json")),
    ("polling_idle_3g", include_str!("../scenarios/polling_idle_3g.json")),
    ("interval_sweep_3g", include_str!("../scenarios/interval_sweep_3g.json")),
    ("interval_sweep_gsm", include_str!("../scenarios/interval_sweep_gsm.json")),
    ("interval_sweep_wlan", include_str!("../scenarios/interval_sweep_wlan.json")),
    ("generated_push_4clients_3g", include_str!("../scenarios/generated_push_4clients_3g.json")),
];

/// A loaded scenario and the directory relative paths resolve against.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: Scenario,
    pub base_dir: PathBuf,
}

pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario, ConfigError> {
    serde_json::from_str(text).map_err(|source| ConfigError::Parse {
        origin: origin.to_string(),
        source,
    })
}

/// Loads `arg` as a file path, falling back to a bundled scenario name.
pub fn load(arg: &str) -> Result<Loaded, ConfigError> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let scenario = parse_scenario(&text, arg)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        return Ok(Loaded { scenario, base_dir });
    }
    let name = arg.trim_end_matches(".json");
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ConfigError::UnknownScenario(arg.to_string()))?;
    Ok(Loaded {
        scenario: parse_scenario(text, name)?,
        base_dir: PathBuf::from("."),
    })
}

impl Scenario {
    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(d) = o.duration_s {
            self.duration_s = d;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(l) = o.link {
            self.link = l;
        }
        if let Some(n) = o.n_clients {
            self.n_clients = n;
        }
        if let Some(p) = &o.preset {
            self.preset = p.clone();
        }
        if let Some(i) = o.interval_s {
            match self.policy {
                PolicySpec::FixedInterval { .. } | PolicySpec::BackToBack => {
                    self.policy = PolicySpec::FixedInterval { interval_s: i };
                }
                PolicySpec::Push { .. } => {
                    return Err(ConfigError::Override(String::from("--interval needs a fixed-interval policy")));
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.is_empty() {
            return Err(ConfigError::Invalid(String::from("name is empty")));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(ConfigError::Invalid(format!("duration_s must be > 0, got {}", self.duration_s)));
        }
        if self.n_clients == 0 {
            return Err(ConfigError::Invalid(String::from("n_clients must be ≥ 1")));
        }
        if !(self.rtt_ms.is_finite() && self.rtt_ms >= 0.0) {
            return Err(ConfigError::Invalid(String::from("rtt_ms must be ≥ 0")));
        }
        self.policy.to_policy()?;
        match &self.workload {
            WorkloadSpec::ExpectedRate { params } | WorkloadSpec::Generated { params } => {
                params.resolve().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            }
            WorkloadSpec::Micro { period_s, .. } => {
                if !(period_s.is_finite() && *period_s > 0.0) {
                    return Err(ConfigError::Invalid(String::from("period_s must be > 0")));
                }
            }
            WorkloadSpec::RandomText { horizon_s, quiet_s, .. } => {
                if !(horizon_s.is_finite() && *horizon_s >= 0.0 && quiet_s.is_finite() && *quiet_s >= 0.0) {
                    return Err(ConfigError::Invalid(String::from("horizon_s and quiet_s must be ≥ 0")));
                }
            }
            WorkloadSpec::File { .. } => {}
        }
        let single = matches!(self.workload, WorkloadSpec::ExpectedRate { .. } | WorkloadSpec::Micro { .. });
        if single && self.n_clients != 1 {
            return Err(ConfigError::Invalid(String::from("this workload drives exactly one client")));
        }
        if let Some(c) = &self.channel {
            if !(0.0..=1.0).contains(&c.unreliable_drop_prob) {
                return Err(ConfigError::Invalid(String::from("unreliable_drop_prob must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    fn duration(&self) -> SimTime {
        SimTime::from_secs_f64(self.duration_s)
    }

    pub fn trace(&self, base_dir: &Path) -> Result<EditTrace, ConfigError> {
        let duration = self.duration();
        let invalid = |e: diffsync_core::workload::WorkloadError| ConfigError::Invalid(e.to_string());
        let trace = match &self.workload {
            WorkloadSpec::ExpectedRate { params } => expected_rate_trace(&params.resolve(), duration).map_err(invalid)?,
            WorkloadSpec::Generated { params } => generate_trace(&params.resolve(), self.n_clients, self.seed).map_err(invalid)?,
            WorkloadSpec::Micro { kind, origin, period_s } => {
                micro_trace(*kind, *origin, SimTime::from_secs_f64(*period_s), duration)
            }
            WorkloadSpec::RandomText { edits, horizon_s, quiet_s } => random_text_trace(
                self.n_clients,
                *edits,
                SimTime::from_secs_f64(*horizon_s),
                SimTime::from_secs_f64(*quiet_s),
                self.seed,
            ),
            WorkloadSpec::File { path } => {
                let trace = output::read_trace_jsonl(&base_dir.join(path))?;
                if trace.sessions.len() != self.n_clients {
                    return Err(ConfigError::Invalid(format!(
                        "trace has {} clients but n_clients is {}",
                        trace.sessions.len(),
                        self.n_clients
                    )));
                }
                trace
            }
        };
        Ok(trace)
    }

    pub fn resolve_preset(&self, base_dir: &Path) -> Result<EnergyPreset, ConfigError> {
        presets::lookup(&self.preset, base_dir)
    }

    /// Validates and turns the scenario into a runnable setup.
    pub fn resolve(&self, base_dir: &Path) -> Result<SimSetup, ConfigError> {
        self.validate()?;
        let preset = self.resolve_preset(base_dir)?;
        let trace = self.trace(base_dir)?;
        let mut setup = SimSetup::new(
            self.name.clone(),
            self.link,
            self.policy.to_policy()?,
            preset,
            trace,
            self.duration(),
        );
        setup.channel = self.channel.unwrap_or_default().to_config();
        setup.rtt = SimTime::from_secs_f64(self.rtt_ms / 1000.0);
        setup
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(setup)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }
}

/// Parses `3g`, `gsm` or `wlan`.
pub fn parse_link(s: &str) -> Result<LinkKind, String> {
    s.parse::<LinkKind>().map_err(str::to_string)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse_and_validate() {
        for (name, text) in BUNDLED {
            let s = parse_scenario(text, name).unwrap();
            assert_eq!(&s.name, name);
            s.validate().unwrap();
        }
    }

    #[test]
    fn round_trip_is_idempotent() {
        for (name, text) in BUNDLED {
            let s = parse_scenario(text, name).unwrap();
            let again = parse_scenario(&s.to_json(), name).unwrap();
            assert_eq!(s, again);
            assert_eq!(s.to_json(), again.to_json());
        }
    }

    #[test]
    fn zero_duration_is_invalid() {
        let mut s = load("mendeley_7min_push_3g").unwrap().scenario;
        s.apply(&Overrides {
            duration_s: Some(0.0),
            ..Overrides::default()
        })
        .unwrap();
        assert!(matches!(s.validate(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn interval_override_on_push_is_refused() {
        let mut s = load("mendeley_7min_push_3g").unwrap().scenario;
        let o = Overrides {
            interval_s: Some(5.0),
            ..Overrides::default()
        };
        assert!(s.apply(&o).is_err());
    }
}
