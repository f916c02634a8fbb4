use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::fit::FitReport;
use super::link::{LinkKind, LinkProfile};
use crate::SimTime;

/// GSM radio powers relative to the fitted 3G ones.
pub const GSM_POWER_SCALE: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSet {
    pub gsm: LinkProfile,
    #[serde(rename = "3g")]
    pub three_g: LinkProfile,
    pub wlan: LinkProfile,
}

impl Default for LinkSet {
    fn default() -> Self {
        Self {
            gsm: LinkProfile::gsm(),
            three_g: LinkProfile::three_g(),
            wlan: LinkProfile::wlan(),
        }
    }
}

impl LinkSet {
    pub fn get(&self, kind: LinkKind) -> &LinkProfile {
        match kind {
            LinkKind::Gsm => &self.gsm,
            LinkKind::ThreeG => &self.three_g,
            LinkKind::Wlan => &self.wlan,
        }
    }

    pub fn get_mut(&mut self, kind: LinkKind) -> &mut LinkProfile {
        match kind {
            LinkKind::Gsm => &mut self.gsm,
            LinkKind::ThreeG => &mut self.three_g,
            LinkKind::Wlan => &mut self.wlan,
        }
    }
}

/// Device energy constants. All rates are in %-battery per minute, CPU cost
/// in %-battery per work unit and notification cost in %-battery each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyPreset {
    pub name: String,
    pub baseline: f64,
    /// Keeping the push channel open, paid only by push-based devices.
    pub idle_polling: f64,
    pub per_notification: f64,
    pub cpu_per_workunit: f64,
    pub links: LinkSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_report: Option<FitReport>,
}

impl EnergyPreset {
    /// Unfitted starting point; the shipped preset is produced by fitting it.
    pub fn prior() -> Self {
        Self {
            name: String::from("prior"),
            baseline: 0.108,
            idle_polling: 0.02,
            per_notification: 0.011,
            cpu_per_workunit: 1e-8,
            links: LinkSet::default(),
            fit_report: None,
        }
    }

    pub fn link(&self, kind: LinkKind) -> &LinkProfile {
        self.links.get(kind)
    }

    pub fn cpu_energy(&self, work_units: u64) -> f64 {
        self.cpu_per_workunit * work_units as f64
    }

    /// Push-channel upkeep over `online` plus the per-notification wake-ups.
    pub fn polling_energy(&self, uses_push: bool, online: SimTime, notifications: u64) -> f64 {
        if !uses_push {
            return 0.0;
        }
        self.idle_polling * online.as_mins_f64() + self.per_notification * notifications as f64
    }

    /// Names of fields that are negative or not finite.
    pub fn invalid_fields(&self) -> Vec<&'static str> {
        let mut bad = Vec::new();
        for (name, v) in [
            ("baseline", self.baseline),
            ("idle_polling", self.idle_polling),
            ("per_notification", self.per_notification),
            ("cpu_per_workunit", self.cpu_per_workunit),
        ] {
            if !v.is_finite() || v < 0.0 {
                bad.push(name);
            }
        }
        for kind in LinkKind::ALL {
            if !self.link(kind).is_valid() {
                bad.push(match kind {
                    LinkKind::Gsm => "links.gsm",
                    LinkKind::ThreeG => "links.3g",
                    LinkKind::Wlan => "links.wlan",
                });
            }
        }
        bad
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polling_only_for_push() {
        let p = EnergyPreset::prior();
        assert_eq!(p.polling_energy(false, SimTime::from_secs(600), 5), 0.0);
        let e = p.polling_energy(true, SimTime::from_secs(60), 0);
        assert!((e - 0.02).abs() < 1e-12);
    }

    #[test]
    fn prior_is_valid() {
        assert!(EnergyPreset::prior().invalid_fields().is_empty());
    }
}
