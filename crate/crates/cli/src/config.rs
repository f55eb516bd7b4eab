//! Flag/config-file resolution: a JSON config file supplies values, explicit
//! flags override them, and built-in defaults fill the rest. The resolved
//! result is echoed next to the outputs so any run can be reproduced from its
//! echo alone.

use std::path::{Path, PathBuf};

use aggloseg::{PipelineConfig, Policy};
use serde::Deserialize;

use crate::errors::{CliError, CliResult};

/// Comma-separated dimension list; a newtype so clap treats it as one value.
#[derive(Debug, Clone)]
pub struct DimsArg(pub Vec<usize>);

/// Parses "a,b" or "a,b,c" dimension lists.
pub fn parse_dims(s: &str) -> Result<DimsArg, String> {
    let dims: Result<Vec<usize>, _> = s.split(',').map(|p| p.trim().parse::<usize>()).collect();
    match dims {
        Ok(d) if d.len() == 2 || d.len() == 3 => Ok(DimsArg(d)),
        _ => Err(format!("expected 2 or 3 comma-separated extents, got {s:?}")),
    }
}

/// Parses "lo,hi" ranges.
pub fn parse_range_usize(s: &str) -> Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected lo,hi, got {s:?}"));
    }
    let lo = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
    let hi = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
    Ok((lo, hi))
}

pub fn parse_range_f64(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected lo,hi, got {s:?}"));
    }
    let lo = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
    let hi = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
    Ok((lo, hi))
}

/// Parses "start:end:step" sweeps.
pub fn parse_sweep(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected start:end:step, got {s:?}"));
    }
    let v: Result<Vec<f64>, _> = parts.iter().map(|p| p.trim().parse::<f64>()).collect();
    let v = v.map_err(|e| format!("{e}"))?;
    if v[2] <= 0.0 {
        return Err("step must be positive".into());
    }
    Ok((v[0], v[1], v[2]))
}

pub fn parse_policy(s: &str) -> Result<Policy, String> {
    match s {
        "standard" => Ok(Policy::Standard),
        "delayed" => Ok(Policy::Delayed),
        other => Err(format!("expected standard|delayed, got {other:?}")),
    }
}

pub fn parse_on_off(s: &str) -> Result<bool, String> {
    match s {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(format!("expected on|off, got {other:?}")),
    }
}

/// Partial pipeline config as it appears in a JSON config file; absent fields
/// fall through to flags and then defaults.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfigFile {
    pub theta_mito: Option<f64>,
    pub delta_c: Option<f64>,
    pub delta_m: Option<f64>,
    pub policy: Option<Policy>,
    pub context: Option<bool>,
    pub lazy: Option<bool>,
    pub seed: Option<u64>,
    pub channels: Option<Vec<String>>,
}

pub fn load_config_file(path: &Path) -> CliResult<PipelineConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io_at(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Flags that override the pipeline config file.
#[derive(Debug, Clone, clap::Args)]
pub struct PipelineFlags {
    /// JSON config file; explicit flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Mitochondria partition threshold.
    #[arg(long)]
    pub theta_mito: Option<f64>,
    /// Phase-1 (cytoplasm) stopping threshold.
    #[arg(long)]
    pub delta_c: Option<f64>,
    /// Phase-2 (mitochondria) stopping threshold.
    #[arg(long)]
    pub delta_m: Option<f64>,
    /// Clustering policy: standard|delayed.
    #[arg(long, value_parser = parse_policy)]
    pub policy: Option<Policy>,
    /// Two-phase context-aware mode: on|off.
    #[arg(long, value_parser = parse_on_off)]
    pub context: Option<bool>,
    /// Lazy queue updates: on|off.
    #[arg(long, value_parser = parse_on_off)]
    pub lazy: Option<bool>,
    /// Seed recorded in the run configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl PipelineFlags {
    /// Resolution order: explicit flag, then config file, then default.
    pub fn resolve(&self) -> CliResult<PipelineConfig> {
        let file = match &self.config {
            Some(path) => load_config_file(path)?,
            None => PipelineConfigFile::default(),
        };
        let defaults = PipelineConfig::default();
        Ok(PipelineConfig {
            theta_mito: self
                .theta_mito
                .or(file.theta_mito)
                .unwrap_or(defaults.theta_mito),
            delta_c: self.delta_c.or(file.delta_c).unwrap_or(defaults.delta_c),
            delta_m: self.delta_m.or(file.delta_m).unwrap_or(defaults.delta_m),
            policy: self.policy.or(file.policy).unwrap_or(defaults.policy),
            context: self.context.or(file.context).unwrap_or(defaults.context),
            lazy: self.lazy.or(file.lazy).unwrap_or(defaults.lazy),
            seed: self.seed.or(file.seed).unwrap_or(defaults.seed),
            channels: file.channels.unwrap_or(defaults.channels),
        })
    }
}

/// Writes a serializable config echo as pretty JSON.
pub fn echo_config<T: serde::Serialize>(dir: &Path, name: &str, cfg: &T) -> CliResult<()> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(cfg).map_err(|e| CliError::Model(e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| CliError::io_at(&path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_parsing() {
        assert_eq!(parse_dims("128,128").unwrap().0, vec![128, 128]);
        assert_eq!(parse_dims("4, 5, 6").unwrap().0, vec![4, 5, 6]);
        assert!(parse_dims("4").is_err());
        assert!(parse_dims("a,b").is_err());
    }

    #[test]
    fn sweep_parsing() {
        assert_eq!(parse_sweep("0.1:0.2:0.02").unwrap(), (0.1, 0.2, 0.02));
        assert!(parse_sweep("0.1:0.2:0").is_err());
        assert!(parse_sweep("1:2").is_err());
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"delta_c": 0.15, "seed": 9}"#).unwrap();
        let flags = PipelineFlags {
            config: Some(path),
            theta_mito: None,
            delta_c: Some(0.18),
            delta_m: None,
            policy: None,
            context: None,
            lazy: None,
            seed: None,
        };
        let cfg = flags.resolve().unwrap();
        assert_eq!(cfg.delta_c, 0.18); // flag wins
        assert_eq!(cfg.seed, 9); // file fills the gap
        assert_eq!(cfg.delta_m, 0.8); // default
    }
}
