//! Energy preset registry.

use std::path::Path;

use diffsync_core::energy::EnergyPreset;

use crate::config::ConfigError;

pub const DEFAULT_PRESET: &str = "iphone5s-mendeley-2014";
pub const PRIOR_PRESET: &str = "prior";

const BUNDLED_DEFAULT: &str = include_str!("../presets/iphone5s-mendeley-2014.json");

pub fn bundled_names() -> [&'static str; 2] {
    [DEFAULT_PRESET, PRIOR_PRESET]
}

pub fn parse(text: &str, origin: &str) -> Result<EnergyPreset, ConfigError> {
    let preset: EnergyPreset = serde_json::from_str(text).map_err(|source| ConfigError::Parse {
        origin: origin.to_string(),
        source,
    })?;
    let bad = preset.invalid_fields();
    if !bad.is_empty() {
        return Err(ConfigError::Invalid(format!("preset {origin}: invalid {}", bad.join(", "))));
    }
    Ok(preset)
}

pub fn bundled_default() -> Result<EnergyPreset, ConfigError> {
    parse(BUNDLED_DEFAULT, DEFAULT_PRESET)
}

/// Resolves a bundled name, or else a JSON file relative to `base_dir`.
pub fn lookup(name: &str, base_dir: &Path) -> Result<EnergyPreset, ConfigError> {
    match name {
        DEFAULT_PRESET => bundled_default(),
        PRIOR_PRESET => Ok(EnergyPreset::prior()),
        _ => {
            let path = base_dir.join(name);
            if !path.is_file() {
                return Err(ConfigError::UnknownPreset(name.to_string()));
            }
            let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Read { path: path.clone(), source })?;
            parse(&text, &path.display().to_string())
        }
    }
}

pub fn to_json(preset: &EnergyPreset) -> String {
    let mut s = serde_json::to_string_pretty(preset).expect("preset serialises");
    s.push('\n');
    s
}
