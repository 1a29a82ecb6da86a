use std::fmt;
use std::path::{Path, PathBuf};

use amod_core::experiment::{NetworkSource, RunConfig};

/// An error caused by the user's input rather than by a run; maps to
/// exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Parses a configuration file. Missing keys take their defaults, and
/// relative paths inside the file are resolved against its directory.
pub fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    resolve_paths(&mut cfg, path.parent().unwrap_or(Path::new(".")));
    Ok(cfg)
}

pub fn parse_config(text: &str) -> Result<RunConfig, toml::de::Error> {
    toml::from_str(text)
}

/// Serializes every field, defaults included.
pub fn render_config(cfg: &RunConfig) -> String {
    toml::to_string_pretty(cfg).expect("configuration is always representable")
}

/// The configuration named on the command line, or the defaults.
pub fn config_or_default(path: Option<&Path>) -> anyhow::Result<RunConfig> {
    match path {
        Some(p) => load_config(p),
        None => Ok(RunConfig::default()),
    }
}

fn resolve_paths(cfg: &mut RunConfig, base: &Path) {
    let fix = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    if let NetworkSource::Files { nodes, links } = &mut cfg.network.source {
        fix(nodes);
        fix(links);
    }
    if let Some(p) = cfg.controller.data.as_mut() {
        fix(p);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
    }

    #[test]
    fn rendered_defaults_parse_back() {
        let cfg = RunConfig::default();
        assert_eq!(parse_config(&render_config(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_config("[scenario]\nfleet = 3\n").is_err());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg = parse_config("policy = \"lower_only\"\n[scenario]\nfleet_size = 7\n").unwrap();
        assert_eq!(cfg.scenario.fleet_size, 7);
        assert_eq!(cfg.scenario.t_upper_s, RunConfig::default().scenario.t_upper_s);
        assert_eq!(cfg.policy.name(), "lower_only");
    }
}
