use std::collections::BTreeMap;
use std::fmt;

/// Parse failure pointing at a line (1-based, 0 when the key is missing) and key.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub line: usize,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: `{}`: {}", self.line, self.field, self.message)
        } else {
            write!(f, "`{}`: {}", self.field, self.message)
        }
    }
}

impl ConfigError {
    pub fn new(line: usize, field: &str, message: impl Into<String>) -> Self {
        ConfigError {
            line,
            field: field.to_string(),
            message: message.into(),
        }
    }
}

/// Physical dimension of a value, selecting the accepted unit suffixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    None,
    /// Meters.
    Length,
    /// Decibels.
    Decibel,
    /// Decibels per kilometer.
    DecibelPerKm,
}

fn unit_scale(dim: Dim, unit: &str) -> Option<f64> {
    match (dim, unit) {
        (Dim::None, "") => Some(1.0),
        (Dim::Length, "m") => Some(1.0),
        (Dim::Length, "km") => Some(1e3),
        (Dim::Length, "cm") => Some(1e-2),
        (Dim::Length, "mm") => Some(1e-3),
        (Dim::Length, "um") => Some(1e-6),
        (Dim::Length, "nm") => Some(1e-9),
        (Dim::Decibel, "dB") => Some(1.0),
        (Dim::DecibelPerKm, "dB/km") => Some(1.0),
        _ => None,
    }
}

/// A number with optional unit suffix: `800 nm`, `4e-14`, `2^20`.
pub fn parse_quantity(text: &str, dim: Dim) -> Result<f64, String> {
    let t = text.trim();
    let split = t
        .find(|c: char| c.is_whitespace() || (c.is_ascii_alphabetic() && c != 'e' && c != 'E'))
        .unwrap_or(t.len());
    let (num, unit) = (t[..split].trim(), t[split..].trim());
    let value = match num.split_once('^') {
        Some((b, e)) => {
            let b: f64 = b.parse().map_err(|_| format!("bad number `{num}`"))?;
            let e: i32 = e.parse().map_err(|_| format!("bad exponent in `{num}`"))?;
            b.powi(e)
        }
        None => num.parse::<f64>().map_err(|_| format!("bad number `{num}`"))?,
    };
    if !value.is_finite() {
        return Err(format!("`{num}` is not finite"));
    }
    let scale = unit_scale(dim, unit).ok_or_else(|| match dim {
        Dim::None => format!("unexpected unit `{unit}`"),
        Dim::Length => format!("length needs a unit of nm, um, mm, cm, m or km, got `{unit}`"),
        Dim::Decibel => format!("expected unit dB, got `{unit}`"),
        Dim::DecibelPerKm => format!("expected unit dB/km, got `{unit}`"),
    })?;
    Ok(value * scale)
}

/// Flat `key = value` entries. `[section]` lines prefix following keys with
/// `section.`; `#` starts a comment.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(name) = body.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
                let name = name.trim();
                if !valid_key(name) {
                    return Err(ConfigError::new(line, name, "bad section name"));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| ConfigError::new(line, body, "expected `key = value`"))?;
            let k = k.trim();
            if !valid_key(k) {
                return Err(ConfigError::new(line, k, "bad key"));
            }
            let key = if section.is_empty() {
                k.to_string()
            } else {
                format!("{section}.{k}")
            };
            if let Some((first, _)) = entries.get(&key) {
                return Err(ConfigError::new(line, &key, format!("duplicate key, first set on line {first}")));
            }
            entries.insert(key, (line, v.trim().to_string()));
        }
        Ok(RawConfig { entries })
    }

    pub fn keys(&self) -> impl Iterator<Item = (&str, usize)> {
        self.entries.iter().map(|(k, (l, _))| (k.as_str(), *l))
    }

    pub fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.0)
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.1.as_str())
    }

    pub fn quantity(&self, key: &str, dim: Dim) -> Result<Option<f64>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => parse_quantity(v, dim)
                .map(Some)
                .map_err(|m| ConfigError::new(*line, key, m)),
        }
    }

    pub fn required(&self, key: &str, dim: Dim) -> Result<f64, ConfigError> {
        self.quantity(key, dim)?
            .ok_or_else(|| ConfigError::new(0, key, "missing required key"))
    }

    pub fn list(&self, key: &str, dim: Dim) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|s| parse_quantity(s, dim).map_err(|m| ConfigError::new(*line, key, m)))
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    pub fn integer(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.quantity(key, Dim::None)? {
            None => Ok(None),
            Some(v) if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 => Ok(Some(v as u64)),
            Some(v) => Err(ConfigError::new(self.line(key), key, format!("expected a non-negative integer, got {v}"))),
        }
    }
}

fn valid_key(k: &str) -> bool {
    !k.is_empty()
        && k.split('.')
            .all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
}
