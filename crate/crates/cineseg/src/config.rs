//! Pipeline configuration file (TOML).
//!
//! Every key is optional; missing keys take their defaults. Unknown keys are
//! rejected, all of them listed by dotted path.

use std::path::Path;

use cineseg_core::foundation::CorruptionConfig;
use cineseg_core::phantom::PhantomConfig;
use cineseg_core::selftrain::SelfTrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{io, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Number of phantom studies to generate.
    pub studies: usize,
    /// How many of them (the last ones) are marked as manually labelled.
    pub manual_studies: usize,
    pub phantom: PhantomConfig,
    pub corruption: CorruptionConfig,
    pub selftrain: SelfTrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            studies: 8,
            manual_studies: 0,
            phantom: PhantomConfig::default(),
            corruption: CorruptionConfig::default(),
            selftrain: SelfTrainConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.studies == 0 {
            return Err(Error::Config("studies must be at least 1".into()));
        }
        if self.manual_studies > self.studies {
            return Err(Error::Config(format!(
                "manual_studies ({}) exceeds studies ({})",
                self.manual_studies, self.studies
            )));
        }
        self.phantom.validate()?;
        self.corruption.validate()?;
        self.selftrain.validate()?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let known = toml::Table::try_from(Self::default()).expect("defaults serialize");
        let mut unknown = Vec::new();
        unknown_keys(&table, &known, "", &mut unknown);
        if !unknown.is_empty() {
            return Err(Error::UnknownKeys(unknown));
        }
        let cfg: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io(path))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn unknown_keys(user: &toml::Table, known: &toml::Table, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in user {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match (known.get(k), v) {
            (None, _) => out.push(path),
            (Some(toml::Value::Table(kt)), toml::Value::Table(ut)) => {
                unknown_keys(ut, kt, &path, out)
            }
            _ => {}
        }
    }
}
