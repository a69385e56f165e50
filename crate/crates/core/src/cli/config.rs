use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CliError, CliResult, TuningArgs};
use crate::completion::CompletionConfig;

/// Settings loaded from a TOML file, then overridden by flags.
///
/// ```toml
/// jobs = 4
///
/// [completion]
/// skip_threshold = 2.5
/// passes = 2
///
/// [completion.normal_params]
/// neighbor_count = 20
/// orientation = "centroid"
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub jobs: Option<usize>,
    pub completion: CompletionConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Config file (if any) with flag overrides applied, validated.
    pub fn resolve(flags: TuningArgs, jobs: Option<usize>) -> CliResult<Self> {
        let mut cfg = match &flags.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(&flags);
        if jobs.is_some() {
            cfg.jobs = jobs;
        }
        cfg.completion.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, flags: &TuningArgs) {
        let c = &mut self.completion;
        if let Some(s) = flags.seed {
            c.seed = s;
        }
        if let Some(t) = flags.skip_threshold {
            c.skip_threshold = t;
        }
        if flags.no_skip {
            c.skip_validation = false;
        }
        if let Some(p) = flags.passes {
            c.passes = p;
        }
        if let Some(e) = flags.epsilon {
            c.epsilon = e;
        }
        if flags.cube_side.is_some() {
            c.cube_side = flags.cube_side;
        }
        if let Some(k) = flags.neighbors {
            c.normal_params.neighbor_count = k;
        }
    }
}
