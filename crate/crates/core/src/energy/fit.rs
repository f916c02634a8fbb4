//! Calibration of an [`EnergyPreset`] against measured rates.
//!
//! Every energy figure the simulator reports is linear in the preset
//! constants once the state timeline and counters of a run are known. A run
//! is therefore summarised as an [`Exposure`] and fitting reduces to a
//! bounded weighted least-squares problem on relative errors, solved exactly
//! by enumerating active sets.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::link::LinkKind;
use super::preset::{EnergyPreset, GSM_POWER_SCALE};

pub const N_PARAMS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Baseline,
    IdlePolling,
    PerNotification,
    CpuPerWorkunit,
    /// 3G promotion power; GSM follows at a fixed ratio.
    PromoPower,
    ActivePower,
    TailPower,
}

impl Param {
    pub const ALL: [Param; N_PARAMS] = [
        Param::Baseline,
        Param::IdlePolling,
        Param::PerNotification,
        Param::CpuPerWorkunit,
        Param::PromoPower,
        Param::ActivePower,
        Param::TailPower,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::Baseline => "baseline",
            Param::IdlePolling => "idle_polling",
            Param::PerNotification => "per_notification",
            Param::CpuPerWorkunit => "cpu_per_workunit",
            Param::PromoPower => "3g.promo",
            Param::ActivePower => "3g.active",
            Param::TailPower => "3g.tail",
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    pub fn get(self, p: &EnergyPreset) -> f64 {
        match self {
            Param::Baseline => p.baseline,
            Param::IdlePolling => p.idle_polling,
            Param::PerNotification => p.per_notification,
            Param::CpuPerWorkunit => p.cpu_per_workunit,
            Param::PromoPower => p.links.three_g.power.promo,
            Param::ActivePower => p.links.three_g.power.active,
            Param::TailPower => p.links.three_g.power.tail,
        }
    }

    fn set(self, p: &mut EnergyPreset, v: f64) {
        match self {
            Param::Baseline => p.baseline = v,
            Param::IdlePolling => p.idle_polling = v,
            Param::PerNotification => p.per_notification = v,
            Param::CpuPerWorkunit => p.cpu_per_workunit = v,
            Param::PromoPower => p.links.three_g.power.promo = v,
            Param::ActivePower => p.links.three_g.power.active = v,
            Param::TailPower => p.links.three_g.power.tail = v,
        }
    }
}

/// Which slice of a device's energy a measurement refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// Everything, per minute.
    Rate,
    /// Radio, CPU and notification energy in %; baseline and idle polling excluded.
    Attributable,
    /// Idle polling plus notifications, per minute.
    PollingRate,
    BaselineRate,
}

/// Linear summary of one device over one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exposure {
    pub link: LinkKind,
    pub minutes: f64,
    /// Minutes the push channel was held open.
    pub polling_minutes: f64,
    pub notifications: f64,
    pub work_units: f64,
    pub promo_minutes: f64,
    pub active_minutes: f64,
    pub tail_minutes: f64,
}

impl Exposure {
    /// Coefficients on the fitted parameters plus a constant from fixed ones.
    fn features(&self, measure: Measure, fixed: &EnergyPreset) -> ([f64; N_PARAMS], f64) {
        let mut f = [0.0; N_PARAMS];
        let mut offset = 0.0;
        let include_baseline = matches!(measure, Measure::Rate | Measure::BaselineRate);
        let include_idle = matches!(measure, Measure::Rate | Measure::PollingRate);
        let include_notif = !matches!(measure, Measure::BaselineRate);
        let include_radio = matches!(measure, Measure::Rate | Measure::Attributable);
        if include_baseline {
            f[Param::Baseline.index()] = self.minutes;
        }
        if include_idle {
            f[Param::IdlePolling.index()] = self.polling_minutes;
        }
        if include_notif {
            f[Param::PerNotification.index()] = self.notifications;
        }
        if include_radio {
            f[Param::CpuPerWorkunit.index()] = self.work_units;
            let k = match self.link {
                LinkKind::ThreeG => 1.0,
                LinkKind::Gsm => GSM_POWER_SCALE,
                LinkKind::Wlan => 0.0,
            };
            f[Param::PromoPower.index()] = k * self.promo_minutes;
            f[Param::ActivePower.index()] = k * self.active_minutes;
            f[Param::TailPower.index()] = k * self.tail_minutes;
            if self.link == LinkKind::Wlan {
                let p = fixed.links.wlan.power;
                offset += p.promo * self.promo_minutes + p.active * self.active_minutes + p.tail * self.tail_minutes;
            }
        }
        let per_minute = !matches!(measure, Measure::Attributable);
        if per_minute && self.minutes > 0.0 {
            for x in &mut f {
                *x /= self.minutes;
            }
            offset /= self.minutes;
        }
        (f, offset)
    }

    /// Value of `measure` under `preset`.
    pub fn predict(&self, measure: Measure, preset: &EnergyPreset) -> f64 {
        let (f, offset) = self.features(measure, preset);
        let theta = params_of(preset);
        // features fold GSM into the 3G powers; correct for presets that do not tie them
        let mut v = offset + dot(&f, &theta);
        if self.link == LinkKind::Gsm && matches!(measure, Measure::Rate | Measure::Attributable) {
            let g = preset.links.gsm.power;
            let t = preset.links.three_g.power;
            let scale = if measure == Measure::Attributable || self.minutes <= 0.0 { 1.0 } else { 1.0 / self.minutes };
            v += scale
                * ((g.promo - GSM_POWER_SCALE * t.promo) * self.promo_minutes
                    + (g.active - GSM_POWER_SCALE * t.active) * self.active_minutes
                    + (g.tail - GSM_POWER_SCALE * t.tail) * self.tail_minutes);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub name: String,
    pub exposure: Exposure,
    pub measure: Measure,
    pub target: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FitConstraint {
    /// The rate of `scenario` may exceed the rate of `reference` by at most
    /// `max_share` of its own value. Enforced through an upper bound on the
    /// CPU cost per work unit, shrunk by `headroom`.
    RateFloor {
        name: String,
        scenario: Exposure,
        reference: Exposure,
        max_share: f64,
        headroom: f64,
    },
    /// 3G promotion power at most `max_ratio` times the tail power.
    PromoTailRatio { max_ratio: f64 },
    /// Keep a parameter at its prior value.
    Hold { param: Param },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorResidual {
    pub name: String,
    pub target: f64,
    pub fitted: f64,
    pub relative_error: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub interpretation: String,
    pub params: Vec<(String, f64)>,
    pub residuals: Vec<AnchorResidual>,
    pub active_constraints: Vec<String>,
    /// Parameters no anchor touches; left at their prior values.
    pub unconstrained: Vec<String>,
}

impl FitReport {
    pub fn residual(&self, name: &str) -> Option<&AnchorResidual> {
        self.residuals.iter().find(|r| r.name == name)
    }

    pub fn max_abs_error(&self) -> f64 {
        self.residuals.iter().map(|r| r.relative_error.abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("anchor `{0}` has a non-positive or non-finite target")]
    BadTarget(String),
    #[error("anchor `{0}` has a non-positive or non-finite weight")]
    BadWeight(String),
    #[error("no anchors given")]
    NoAnchors,
    #[error("the anchors leave the problem singular for every bound configuration")]
    Singular,
    #[error("constraint `{0}` cannot be met with non-negative parameters")]
    Infeasible(String),
}

pub const INTERPRETATION: &str = "Run rates (%/min) include the idle baseline. Headline 7- and 33-minute \
figures are attributable drainage: radio, CPU and notification energy above the baseline and the \
idle push-channel upkeep. GSM powers follow 3G at a fixed ratio; WLAN powers are not fitted.";

fn params_of(p: &EnergyPreset) -> [f64; N_PARAMS] {
    let mut t = [0.0; N_PARAMS];
    for param in Param::ALL {
        t[param.index()] = param.get(p);
    }
    t
}

fn dot(a: &[f64; N_PARAMS], b: &[f64; N_PARAMS]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `m x = r` in place by Gaussian elimination; None if singular.
fn solve(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        let (upper, lower) = m.split_at_mut(col + 1);
        let pivot = &upper[col];
        for (i, row) in lower.iter_mut().enumerate() {
            let k = row[col] / pivot[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot[col..]) {
                *x -= k * p;
            }
            r[col + 1 + i] -= k * r[col];
        }
    }
    let mut x = alloc::vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| m[row][c] * x[c]).sum();
        x[row] = (r[row] - s) / m[row][row];
    }
    Some(x)
}

#[derive(Clone, Copy, PartialEq)]
enum Slot {
    Free,
    Lower,
    Upper,
}

/// min ‖A θ − b‖² subject to lo ≤ θ ≤ hi over the `free` parameters.
fn bounded_lsq(
    rows: &[([f64; N_PARAMS], f64)],
    free: &[usize],
    fixed: &[f64; N_PARAMS],
    hi: &[f64; N_PARAMS],
) -> Option<[f64; N_PARAMS]> {
    // column scaling keeps the normal equations well conditioned
    let mut scale = [1.0; N_PARAMS];
    for &j in free {
        let n: f64 = rows.iter().map(|(a, _)| a[j] * a[j]).sum::<f64>();
        scale[j] = if n > 0.0 { 1.0 / libm::sqrt(n) } else { 1.0 };
    }
    let objective = |theta: &[f64; N_PARAMS]| -> f64 {
        rows.iter()
            .map(|(a, b)| {
                let e = dot(a, theta) - b;
                e * e
            })
            .sum()
    };
    let mut best: Option<([f64; N_PARAMS], f64)> = None;
    let mut slots = alloc::vec![Slot::Free; free.len()];
    loop {
        let mut theta = *fixed;
        for (k, &j) in free.iter().enumerate() {
            theta[j] = match slots[k] {
                Slot::Lower => 0.0,
                Slot::Upper => hi[j],
                Slot::Free => 0.0,
            };
        }
        let vars: Vec<usize> = free
            .iter()
            .zip(&slots)
            .filter(|(_, s)| **s == Slot::Free)
            .map(|(&j, _)| j)
            .collect();
        let mut ok = true;
        if !vars.is_empty() {
            let n = vars.len();
            let mut m = alloc::vec![alloc::vec![0.0; n]; n];
            let mut r = alloc::vec![0.0; n];
            for (a, b) in rows {
                let resid = b - dot(a, &theta);
                for (p, &jp) in vars.iter().enumerate() {
                    let ap = a[jp] * scale[jp];
                    r[p] += ap * resid;
                    for (q, &jq) in vars.iter().enumerate() {
                        m[p][q] += ap * a[jq] * scale[jq];
                    }
                }
            }
            match solve(m, r) {
                Some(x) => {
                    for (p, &j) in vars.iter().enumerate() {
                        let v = x[p] * scale[j];
                        if v < 0.0 || v > hi[j] {
                            ok = false;
                        }
                        theta[j] = v;
                    }
                }
                None => ok = false,
            }
        }
        if ok {
            let obj = objective(&theta);
            if best.is_none_or(|(_, o)| obj < o - 1e-15 * o.abs()) {
                best = Some((theta, obj));
            }
        }
        // next slot configuration
        let mut k = 0;
        loop {
            if k == slots.len() {
                return best.map(|(t, _)| t);
            }
            let j = free[k];
            slots[k] = match slots[k] {
                Slot::Free => Slot::Lower,
                Slot::Lower if hi[j].is_finite() => Slot::Upper,
                _ => Slot::Free,
            };
            if slots[k] != Slot::Free {
                break;
            }
            k += 1;
        }
    }
}

fn apply(prior: &EnergyPreset, theta: &[f64; N_PARAMS]) -> EnergyPreset {
    let mut p = prior.clone();
    for param in Param::ALL {
        param.set(&mut p, theta[param.index()]);
    }
    p.links.gsm.power = p.links.three_g.power.scaled(GSM_POWER_SCALE);
    p
}

/// Fits the preset constants to `anchors`, starting from `prior`.
pub fn fit_preset(prior: &EnergyPreset, anchors: &[Anchor], constraints: &[FitConstraint]) -> Result<EnergyPreset, FitError> {
    if anchors.is_empty() {
        return Err(FitError::NoAnchors);
    }
    for a in anchors {
        if !(a.target.is_finite() && a.target > 0.0) {
            return Err(FitError::BadTarget(a.name.clone()));
        }
        if !(a.weight.is_finite() && a.weight > 0.0) {
            return Err(FitError::BadWeight(a.name.clone()));
        }
    }

    let feats: Vec<([f64; N_PARAMS], f64)> = anchors.iter().map(|a| a.exposure.features(a.measure, prior)).collect();
    let held: Vec<usize> = constraints
        .iter()
        .filter_map(|c| match c {
            FitConstraint::Hold { param } => Some(param.index()),
            _ => None,
        })
        .collect();
    let touched = |j: usize| feats.iter().any(|(f, _)| f[j] != 0.0);
    let free: Vec<usize> = (0..N_PARAMS).filter(|&j| touched(j) && !held.contains(&j)).collect();
    let unconstrained: Vec<String> = Param::ALL
        .iter()
        .filter(|p| !touched(p.index()))
        .map(|p| String::from(p.name()))
        .collect();
    let fixed = params_of(prior);
    let rows: Vec<([f64; N_PARAMS], f64)> = anchors
        .iter()
        .zip(&feats)
        .map(|(a, (f, off))| {
            let s = libm::sqrt(a.weight) / a.target;
            let mut row = *f;
            for x in &mut row {
                *x *= s;
            }
            (row, s * (a.target - off))
        })
        .collect();

    let mut hi = [f64::INFINITY; N_PARAMS];
    let mut theta = bounded_lsq(&rows, &free, &fixed, &hi).ok_or(FitError::Singular)?;
    let mut active = Vec::new();
    if !constraints.is_empty() {
        for _ in 0..200 {
            let mut new_hi = [f64::INFINITY; N_PARAMS];
            active.clear();
            let current = apply(prior, &theta);
            for c in constraints {
                match c {
                    FitConstraint::RateFloor {
                        name,
                        scenario,
                        reference,
                        max_share,
                        headroom,
                    } => {
                        // (1 − s)·rate(scenario) ≤ rate(reference), solved for the CPU cost
                        let j = Param::CpuPerWorkunit.index();
                        let (fs, os) = scenario.features(Measure::Rate, &current);
                        let (fr, or) = reference.features(Measure::Rate, &current);
                        let keep = 1.0 - max_share * headroom;
                        let coef = keep * fs[j] - fr[j];
                        let mut rest_theta = theta;
                        rest_theta[j] = 0.0;
                        let rest = keep * (dot(&fs, &rest_theta) + os) - (dot(&fr, &rest_theta) + or);
                        if coef > 0.0 {
                            let bound = -rest / coef;
                            if bound < 0.0 {
                                return Err(FitError::Infeasible(name.clone()));
                            }
                            new_hi[j] = new_hi[j].min(bound);
                            if theta[j] >= bound * (1.0 - 1e-9) {
                                active.push(format!("{name}: cpu_per_workunit ≤ {bound:.6e}"));
                            }
                        }
                    }
                    FitConstraint::Hold { .. } => {}
                    FitConstraint::PromoTailRatio { max_ratio } => {
                        let bound = max_ratio * theta[Param::TailPower.index()];
                        let j = Param::PromoPower.index();
                        new_hi[j] = new_hi[j].min(bound);
                        if theta[j] >= bound * (1.0 - 1e-9) {
                            active.push(format!("3g.promo ≤ {max_ratio} · 3g.tail"));
                        }
                    }
                }
            }
            let converged = (0..N_PARAMS).all(|j| {
                let (a, b) = (hi[j], new_hi[j]);
                a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
            });
            hi = new_hi;
            theta = bounded_lsq(&rows, &free, &fixed, &hi).ok_or(FitError::Singular)?;
            if converged {
                break;
            }
        }
    }
    for &j in &held {
        active.push(format!("{} held at {}", Param::ALL[j].name(), theta[j]));
    }
    for &j in &free {
        if theta[j] == 0.0 {
            active.push(format!("{} ≥ 0", Param::ALL[j].name()));
        }
    }

    let mut preset = apply(prior, &theta);
    let residuals = anchors
        .iter()
        .map(|a| {
            let fitted = a.exposure.predict(a.measure, &preset);
            AnchorResidual {
                name: a.name.clone(),
                target: a.target,
                fitted,
                relative_error: (fitted - a.target) / a.target,
                weight: a.weight,
            }
        })
        .collect();
    preset.fit_report = Some(FitReport {
        interpretation: String::from(INTERPRETATION),
        params: Param::ALL.iter().map(|p| (String::from(p.name()), theta[p.index()])).collect(),
        residuals,
        active_constraints: active,
        unconstrained,
    });
    Ok(preset)
}
