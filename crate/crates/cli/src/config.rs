//! Flat `key = value` config files and inline `key=value` overrides for the
//! sweep harness. Keys are the experiment-config field names in kebab-case;
//! `#` starts a comment; overrides win over the file.

use cs_lab_core::bounds::default_zeta;
use cs_lab_core::{DecodePolicy, ExperimentConfig, MagnitudeProfile, Metric, Regime};
use std::collections::BTreeMap;
use std::path::Path;

pub const CONFIG_KEYS: &[&str] = &[
    "master-seed",
    "trials",
    "metric",
    "alpha",
    "gamma",
    "zeta",
    "regime",
    "m-list",
    "l-list",
    "n-list",
    "nu",
    "power",
    "profile",
    "decoder-policy",
    "scan-budget",
    "fixed-matrix",
];

/// A configuration problem: exit code 1, message names the offending key.
#[derive(Debug)]
pub struct ConfigError {
    pub key: String,
    pub detail: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            detail: detail.into(),
        }
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error for key `{}`: {}", self.key, self.detail)
    }
}

impl std::error::Error for ConfigError {}

/// Parse a config file into key/value pairs, rejecting unknown keys.
pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::new(
                "config",
                format!("line {} is not `key = value`: {raw}", lineno + 1),
            ));
        };
        let key = key.trim().to_string();
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::new(key, "unknown config key"));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

/// Parse inline `key=value` overrides.
pub fn parse_overrides(items: &[String]) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for item in items {
        let Some((key, value)) = item.split_once('=') else {
            return Err(ConfigError::new(
                item.clone(),
                "override must look like key=value",
            ));
        };
        let key = key.trim().to_string();
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::new(key, "unknown config key"));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T, ConfigError> {
    match map.get(key) {
        None => Ok(default),
        Some(raw) => raw
            .parse::<T>()
            .map_err(|_| ConfigError::new(key, format!("cannot parse `{raw}`"))),
    }
}

fn parse_list(map: &BTreeMap<String, String>, key: &str, default: &[usize]) -> Result<Vec<usize>, ConfigError> {
    match map.get(key) {
        None => Ok(default.to_vec()),
        Some(raw) => raw
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<usize>()
                    .map_err(|_| ConfigError::new(key, format!("bad list entry `{tok}`")))
            })
            .collect(),
    }
}

fn parse_profile(raw: &str) -> Result<MagnitudeProfile, ConfigError> {
    let parts: Vec<&str> = raw.split(':').collect();
    match parts[0] {
        "flat" => Ok(MagnitudeProfile::Flat),
        "two-level" => {
            if parts.len() != 3 {
                return Err(ConfigError::new(
                    "profile",
                    "two-level profile wants two-level:<heavy-count>:<heavy-energy-fraction>",
                ));
            }
            let heavy_count = parts[1]
                .parse()
                .map_err(|_| ConfigError::new("profile", format!("bad heavy count `{}`", parts[1])))?;
            let heavy_energy_fraction = parts[2]
                .parse()
                .map_err(|_| ConfigError::new("profile", format!("bad fraction `{}`", parts[2])))?;
            Ok(MagnitudeProfile::TwoLevel {
                heavy_count,
                heavy_energy_fraction,
            })
        }
        "custom" => {
            let weights: Result<Vec<f64>, _> = parts[1..]
                .iter()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|_| ConfigError::new("profile", format!("bad weight `{tok}`")))
                })
                .collect();
            Ok(MagnitudeProfile::Custom(weights?))
        }
        other => Err(ConfigError::new(
            "profile",
            format!("unknown profile `{other}` (flat | two-level:k:f | custom:w1:w2:...)"),
        )),
    }
}

/// Assemble the experiment config from an optional file plus overrides.
/// Unset keys fall back to the desk-scale defaults.
pub fn build_experiment_config(
    file: Option<&Path>,
    overrides: &[String],
) -> Result<ExperimentConfig, ConfigError> {
    let mut map = match file {
        Some(path) => parse_config_file(path)?,
        None => BTreeMap::new(),
    };
    map.extend(parse_overrides(overrides)?);

    let metric: Metric = match map.get("metric") {
        None => Metric::Two,
        Some(raw) => raw
            .parse()
            .map_err(|e: String| ConfigError::new("metric", e))?,
    };
    let regime: Regime = match map.get("regime") {
        None => Regime::Linear,
        Some(raw) => raw
            .parse()
            .map_err(|e: String| ConfigError::new("regime", e))?,
    };
    let policy: DecodePolicy = match map.get("decoder-policy") {
        None => DecodePolicy::MinDeviation,
        Some(raw) => raw
            .parse()
            .map_err(|e: String| ConfigError::new("decoder-policy", e))?,
    };
    let profile = match map.get("profile") {
        None => MagnitudeProfile::Flat,
        Some(raw) => parse_profile(raw)?,
    };
    let fixed_matrix = match map.get("fixed-matrix").map(String::as_str) {
        None => false,
        Some("true") => true,
        Some("false") => false,
        Some(other) => {
            return Err(ConfigError::new(
                "fixed-matrix",
                format!("expected true or false, got `{other}`"),
            ))
        }
    };

    let cfg = ExperimentConfig {
        master_seed: parse_num(&map, "master-seed", 1u64)?,
        trials: parse_num(&map, "trials", 200usize)?,
        metric,
        alpha: parse_num(&map, "alpha", 0.4f64)?,
        gamma: parse_num(&map, "gamma", 0.5f64)?,
        zeta: parse_num(&map, "zeta", default_zeta(metric))?,
        regime,
        m_list: parse_list(&map, "m-list", &[16, 20, 24])?,
        l_list: parse_list(&map, "l-list", &[4, 5, 6])?,
        n_list: parse_list(&map, "n-list", &[10, 20, 40, 80, 160])?,
        nu: parse_num(&map, "nu", 0.1f64)?,
        power: parse_num(&map, "power", 1.0f64)?,
        profile,
        policy,
        scan_budget: parse_num(&map, "scan-budget", 10_000_000u64)?,
        fixed_matrix,
    };
    cfg.validate()
        .map_err(|e| ConfigError::new("config", e.to_string()))?;
    Ok(cfg)
}
