//! Flat `key = value` configuration files and unit-aware value parsing.
//!
//! ```text
//! # comments start with '#'
//! device = AIOT-BL
//! depth = 2.5cm
//! vwc = 15%
//! ```
//!
//! Keys are case-insensitive and `-` / `_` are interchangeable. Values given
//! on the command line take precedence over the file.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{path}:{line}: expected 'key = value'")]
    Syntax { path: String, line: usize },
    #[error("{path}:{line}: duplicate key '{key}'")]
    Duplicate { path: String, line: usize, key: String },
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("unknown config key(s): {0}")]
    UnknownKeys(String),
    #[error("invalid value for {key}: {message}")]
    Value { key: String, message: String },
}

fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

/// Parsed key-value pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| ConfigError::Syntax { path: origin.to_string(), line: idx + 1 })?;
            let key = normalize_key(key);
            if key.is_empty() {
                return Err(ConfigError::Syntax { path: origin.to_string(), line: idx + 1 });
            }
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(ConfigError::Duplicate { path: origin.to_string(), line: idx + 1, key });
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(&normalize_key(key)).map(String::as_str)
    }

    /// Fails if the file holds keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        let allowed: Vec<String> = allowed.iter().map(|k| normalize_key(k)).collect();
        let unknown: Vec<&str> = self.entries.keys().filter(|k| !allowed.contains(k)).map(String::as_str).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::UnknownKeys(unknown.join(", ")))
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn split_unit(s: &str) -> (&str, &str) {
    let s = s.trim();
    // 'e' is left to the number so exponents parse; no supported unit starts with it.
    let split = s
        .char_indices()
        .find(|&(i, c)| (c.is_ascii_alphabetic() && c != 'e' && c != 'E') || (c == '%' && i > 0))
        .map_or(s.len(), |(i, _)| i);
    (s[..split].trim(), s[split..].trim())
}

fn number(text: &str) -> Result<f64, String> {
    let v: f64 = text.parse().map_err(|_| format!("'{text}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{text}' is not finite"))
    }
}

/// Length in metres. Accepts a bare number (metres) or an `m`, `cm`, `mm`,
/// `km` suffix.
pub fn parse_length(text: &str) -> Result<f64, String> {
    let (value, unit) = split_unit(text);
    let v = number(value)?;
    match unit.to_ascii_lowercase().as_str() {
        "" | "m" => Ok(v),
        "cm" => Ok(v / 100.0),
        "mm" => Ok(v / 1000.0),
        "km" => Ok(v * 1000.0),
        other => Err(format!("unknown length unit '{other}'")),
    }
}

/// Volumetric water content as a fraction. Accepts `0.15` or `15%`; a bare
/// number above 1 is rejected rather than guessed to be a percentage.
pub fn parse_vwc(text: &str) -> Result<f64, String> {
    let (value, unit) = split_unit(text);
    let v = match unit {
        "" => number(value)?,
        "%" => number(value)? / 100.0,
        other => return Err(format!("unknown moisture unit '{other}'")),
    };
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("VWC {v} is not a fraction in [0, 1] (use e.g. 0.15 or 15%)"));
    }
    Ok(v)
}

/// Frequency in Hz. Accepts `Hz`, `kHz`, `MHz`, `GHz` suffixes.
pub fn parse_frequency(text: &str) -> Result<f64, String> {
    let (value, unit) = split_unit(text);
    let scale = match unit.to_ascii_lowercase().as_str() {
        "" | "hz" => 1.0,
        "khz" => 1e3,
        "mhz" => 1e6,
        "ghz" => 1e9,
        other => return Err(format!("unknown frequency unit '{other}'")),
    };
    Ok(number(value)? * scale)
}

/// Power or gain in dB units (`dBm`, `dBi`, `dB` suffixes are accepted and
/// not converted).
pub fn parse_db(text: &str) -> Result<f64, String> {
    let (value, unit) = split_unit(text);
    match unit.to_ascii_lowercase().as_str() {
        "" | "db" | "dbm" | "dbi" => number(value),
        other => Err(format!("unknown dB unit '{other}'")),
    }
}

/// `lo:hi:steps` moisture sweep.
pub fn parse_vwc_range(text: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected lo:hi:steps, got '{text}'"));
    }
    let lo = parse_vwc(parts[0])?;
    let hi = parse_vwc(parts[1])?;
    let steps: usize = parts[2].trim().parse().map_err(|_| format!("bad step count '{}'", parts[2]))?;
    Ok((lo, hi, steps))
}

/// `1-4:0.05,5-8:15%` moisture zones over 1-based rows.
pub fn parse_zones(text: &str) -> Result<Vec<(std::ops::RangeInclusive<usize>, f64)>, String> {
    text.split(',')
        .map(|zone| {
            let (rows, vwc) = zone.split_once(':').ok_or_else(|| format!("zone '{zone}' is not rows:vwc"))?;
            let (a, b) = rows.split_once('-').unwrap_or((rows, rows));
            let a: usize = a.trim().parse().map_err(|_| format!("bad row '{a}'"))?;
            let b: usize = b.trim().parse().map_err(|_| format!("bad row '{b}'"))?;
            Ok((a..=b, parse_vwc(vwc)?))
        })
        .collect()
}
