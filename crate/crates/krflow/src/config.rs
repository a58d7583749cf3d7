//! Flat key-value run configuration files.
//!
//! Lines are `key = value`; `#` starts a comment. Unknown keys are rejected
//! with their line number.

use crate::flow::{FlowConfig, PerturbationFamily};
use crate::geometry::BackgroundId;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: malformed entry `{text}` (expected key = value)")]
    Malformed { line: usize, text: String },
    #[error("line {line}: invalid value for `{key}`: {reason}")]
    BadValue { line: usize, key: String, reason: String },
    #[error("missing required key `background`")]
    MissingBackground,
    #[error("configuration rejected: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn parse_config_str(text: &str) -> Result<FlowConfig, ConfigError> {
    let mut background = None;
    let mut config = FlowConfig::new(BackgroundId::Cp1);
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if stripped.is_empty() {
            continue;
        }
        let (key, value) = stripped
            .split_once('=')
            .ok_or_else(|| ConfigError::Malformed { line, text: stripped.to_string() })?;
        let key = key.trim();
        let value = value.trim();
        let bad = |reason: &str| ConfigError::BadValue {
            line,
            key: key.to_string(),
            reason: reason.to_string(),
        };
        let parse_f64 = |v: &str| -> Result<f64, ConfigError> {
            let x: f64 = v.parse().map_err(|_| bad("not a number"))?;
            if !x.is_finite() {
                return Err(bad("must be finite"));
            }
            Ok(x)
        };
        match key {
            "background" => {
                background =
                    Some(BackgroundId::parse(value).ok_or_else(|| bad("expected cp1 or f1"))?);
            }
            "c" => config.c = parse_f64(value)?,
            "family" => {
                config.family = PerturbationFamily::parse(value)
                    .ok_or_else(|| bad("expected none|mode2|mode3|bump|slide|random"))?;
            }
            "amplitude" => config.amplitude = parse_f64(value)?,
            "grid" => {
                config.grid = value.parse().map_err(|_| bad("not an integer"))?;
            }
            "t_max" => config.t_max = parse_f64(value)?,
            "dt_init" => config.dt_init = parse_f64(value)?,
            "dt_min" => config.dt_min = parse_f64(value)?,
            "safety" => config.safety = parse_f64(value)?,
            "sample_dt" => config.sample_dt = parse_f64(value)?,
            "snapshot_dt" => config.snapshot_dt = parse_f64(value)?,
            "seed" => {
                config.seed = value.parse().map_err(|_| bad("not an integer"))?;
            }
            "guard" => config.guard = parse_f64(value)?,
            other => {
                return Err(ConfigError::UnknownKey { line, key: other.to_string() });
            }
        }
    }
    config.background = background.ok_or(ConfigError::MissingBackground)?;
    validate(&config)?;
    Ok(config)
}

pub fn parse_config(path: &std::path::Path) -> Result<FlowConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

fn validate(config: &FlowConfig) -> Result<(), ConfigError> {
    if config.grid < 16 {
        return Err(ConfigError::Invalid(format!(
            "grid = {} is below the substrate minimum of 16",
            config.grid
        )));
    }
    if !(config.t_max > 0.0) {
        return Err(ConfigError::Invalid("t_max must be positive".into()));
    }
    if !(config.dt_min > 0.0) || !(config.dt_init > 0.0) {
        return Err(ConfigError::Invalid("step sizes must be positive".into()));
    }
    if !(config.safety > 0.0 && config.safety <= 1.0) {
        return Err(ConfigError::Invalid("safety must lie in (0, 1]".into()));
    }
    if !(config.sample_dt > 0.0 && config.snapshot_dt > 0.0) {
        return Err(ConfigError::Invalid("cadences must be positive".into()));
    }
    if config.amplitude.abs() > 0.0 && config.family == PerturbationFamily::None {
        return Err(ConfigError::Invalid(
            "amplitude set but family = none".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config_str("background = cp1\nc = 0\nt_max = 10\n").unwrap();
        assert_eq!(c.background, BackgroundId::Cp1);
        assert_eq!(c.grid, 129);
        assert_eq!(c.sample_dt, 0.05);
        assert_eq!(c.seed, 42);
    }

    #[test]
    fn rejects_nan_and_coarse_grid() {
        let err = parse_config_str("background = cp1\nc = NaN\n").unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { line: 2, .. }), "{err}");
        let err = parse_config_str("background = cp1\ngrid = 8\n").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)), "{err}");
    }

    #[test]
    fn rejects_unknown_key_with_line_number() {
        let err = parse_config_str("background = cp1\n# fine\nwibble = 3\n").unwrap_err();
        match err {
            ConfigError::UnknownKey { line, key } => {
                assert_eq!(line, 3);
                assert_eq!(key, "wibble");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn requires_background() {
        assert!(matches!(
            parse_config_str("c = 0.3\n"),
            Err(ConfigError::MissingBackground)
        ));
    }
}
