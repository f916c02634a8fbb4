use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LinkKind {
    #[serde(rename = "gsm")]
    Gsm,
    #[serde(rename = "3g")]
    ThreeG,
    #[serde(rename = "wlan")]
    Wlan,
}

impl LinkKind {
    pub const ALL: [LinkKind; 3] = [LinkKind::Gsm, LinkKind::ThreeG, LinkKind::Wlan];

    pub fn as_str(self) -> &'static str {
        match self {
            LinkKind::Gsm => "gsm",
            LinkKind::ThreeG => "3g",
            LinkKind::Wlan => "wlan",
        }
    }

    pub fn index(self) -> usize {
        match self {
            LinkKind::Gsm => 0,
            LinkKind::ThreeG => 1,
            LinkKind::Wlan => 2,
        }
    }
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LinkKind {
    type Err = &'static str;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gsm" => Ok(LinkKind::Gsm),
            "3g" | "threeg" | "umts" => Ok(LinkKind::ThreeG),
            "wlan" | "wifi" => Ok(LinkKind::Wlan),
            _ => Err("unknown link kind (expected gsm, 3g or wlan)"),
        }
    }
}

/// Radio power per state, in %-battery per minute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatePower {
    pub promo: f64,
    pub active: f64,
    pub tail: f64,
}

impl StatePower {
    pub fn scaled(self, k: f64) -> Self {
        Self {
            promo: self.promo * k,
            active: self.active * k,
            tail: self.tail * k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkProfile {
    pub kind: LinkKind,
    pub downlink_bps: u64,
    pub tail_duration: SimTime,
    pub promo_duration: SimTime,
    pub power: StatePower,
    /// Extra bytes every transfer pays (connection setup and framing).
    pub per_transfer_overhead_bytes: u64,
}

impl LinkProfile {
    pub fn gsm() -> Self {
        Self {
            kind: LinkKind::Gsm,
            downlink_bps: 168_200,
            tail_duration: SimTime::from_secs(6),
            promo_duration: SimTime::from_secs(1),
            power: StatePower { promo: 0.03, active: 3.0, tail: 0.03 },
            per_transfer_overhead_bytes: 4096,
        }
    }

    pub fn three_g() -> Self {
        Self {
            kind: LinkKind::ThreeG,
            downlink_bps: 2_400_000,
            tail_duration: SimTime::from_secs(12),
            promo_duration: SimTime::from_secs(2),
            power: StatePower { promo: 0.05, active: 5.0, tail: 0.05 },
            per_transfer_overhead_bytes: 4096,
        }
    }

    pub fn wlan() -> Self {
        Self {
            kind: LinkKind::Wlan,
            downlink_bps: 2_800_000,
            tail_duration: SimTime::ZERO,
            promo_duration: SimTime::ZERO,
            power: StatePower { promo: 0.0, active: 2.0, tail: 0.0 },
            per_transfer_overhead_bytes: 0,
        }
    }

    pub fn default_for(kind: LinkKind) -> Self {
        match kind {
            LinkKind::Gsm => Self::gsm(),
            LinkKind::ThreeG => Self::three_g(),
            LinkKind::Wlan => Self::wlan(),
        }
    }

    /// Time the radio is busy moving `bytes`, rounded up to the microsecond.
    pub fn transfer_time(&self, bytes: usize) -> SimTime {
        let bits = (bytes as u64 + self.per_transfer_overhead_bytes) * 8;
        SimTime::from_micros((bits * 1_000_000).div_ceil(self.downlink_bps.max(1)))
    }

    pub fn is_valid(&self) -> bool {
        let p = self.power;
        self.downlink_bps > 0
            && [p.promo, p.active, p.tail].iter().all(|v| v.is_finite() && *v >= 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        assert_eq!(LinkProfile::wlan().tail_duration, SimTime::ZERO);
        assert_eq!(LinkProfile::three_g().tail_duration, SimTime::from_secs(12));
        assert_eq!(LinkProfile::gsm().tail_duration, SimTime::from_secs(6));
        assert_eq!(LinkProfile::gsm().downlink_bps, 168_200);
        assert_eq!(LinkProfile::three_g().downlink_bps, 2_400_000);
        assert_eq!(LinkProfile::wlan().downlink_bps, 2_800_000);
    }

    #[test]
    fn wlan_small_packet_is_sub_millisecond() {
        // 124 B · 8 / 2.8 Mbit/s = 354.3 µs
        assert_eq!(LinkProfile::wlan().transfer_time(124), SimTime::from_micros(355));
    }

    #[test]
    fn parse_kinds() {
        assert_eq!("3G".parse::<LinkKind>().unwrap(), LinkKind::ThreeG);
        assert!("lte".parse::<LinkKind>().is_err());
    }
}
