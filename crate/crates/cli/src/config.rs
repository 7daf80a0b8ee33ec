//! Fixture paths and defaults, from an optional JSON config file.

use std::path::{Path, PathBuf};

use maccesec::adversary::CampaignContext;
use maccesec::codec::LcidRegistry;
use maccesec::geo::CellDb;
use maccesec::policy::{CeFieldMap, PolicyRegistry};
use maccesec::protection::KeyRing;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    #[default]
    Text,
}

/// Every path is optional; absent ones fall back to the shipped fixtures.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub registry_path: Option<PathBuf>,
    pub policy_path: Option<PathBuf>,
    pub ce_field_map_path: Option<PathBuf>,
    pub key_file: Option<PathBuf>,
    pub cell_db_path: Option<PathBuf>,
    pub beam_map_path: Option<PathBuf>,
    pub seed: Option<u64>,
    pub output_format: Option<OutputFormat>,
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

impl CliConfig {
    /// Loads a config file; relative paths inside it resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let mut cfg: CliConfig = serde_json::from_str(&read_text(path)?)
            .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.registry_path,
            &mut cfg.policy_path,
            &mut cfg.ce_field_map_path,
            &mut cfg.key_file,
            &mut cfg.cell_db_path,
            &mut cfg.beam_map_path,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// `other` wins wherever it is set.
    pub fn overlay(self, other: CliConfig) -> CliConfig {
        CliConfig {
            registry_path: other.registry_path.or(self.registry_path),
            policy_path: other.policy_path.or(self.policy_path),
            ce_field_map_path: other.ce_field_map_path.or(self.ce_field_map_path),
            key_file: other.key_file.or(self.key_file),
            cell_db_path: other.cell_db_path.or(self.cell_db_path),
            beam_map_path: other.beam_map_path.or(self.beam_map_path),
            seed: other.seed.or(self.seed),
            output_format: other.output_format.or(self.output_format),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn format(&self) -> OutputFormat {
        self.output_format.unwrap_or_default()
    }

    pub fn registry(&self) -> Result<LcidRegistry, CliError> {
        match &self.registry_path {
            Some(p) => Ok(LcidRegistry::load(p)?),
            None => Ok(LcidRegistry::default()),
        }
    }

    pub fn policy(&self) -> Result<PolicyRegistry, CliError> {
        match &self.policy_path {
            Some(p) => Ok(PolicyRegistry::load(p)?),
            None => Ok(PolicyRegistry::default()),
        }
    }

    pub fn ce_field_map(&self, policy: &PolicyRegistry) -> Result<CeFieldMap, CliError> {
        match &self.ce_field_map_path {
            Some(p) => Ok(CeFieldMap::load(p, policy)?),
            None => Ok(CeFieldMap::default()),
        }
    }

    pub fn keys(&self) -> Result<KeyRing, CliError> {
        match &self.key_file {
            Some(p) => Ok(KeyRing::load(p)?),
            None => Ok(KeyRing::default()),
        }
    }

    pub fn cell_db(&self) -> Result<CellDb, CliError> {
        let db = match &self.cell_db_path {
            Some(p) => CellDb::load_csv(p)?,
            None if self.beam_map_path.is_some() => {
                CellDb::from_csv(maccesec::fixtures::CELLS_DEFAULT_CSV)?
            }
            None => return Ok(CellDb::default()),
        };
        match &self.beam_map_path {
            Some(p) => Ok(db.with_beam_json(&read_text(p)?)?),
            None => Ok(db),
        }
    }

    pub fn campaign_context(&self) -> Result<CampaignContext, CliError> {
        let policy = self.policy()?;
        Ok(CampaignContext {
            registry: self.registry()?,
            map: self.ce_field_map(&policy)?,
            keys: self.keys()?,
            policy,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_prefers_flags() {
        let file = CliConfig {
            seed: Some(3),
            key_file: Some("a".into()),
            ..Default::default()
        };
        let flags = CliConfig {
            seed: Some(9),
            ..Default::default()
        };
        let merged = file.overlay(flags);
        assert_eq!(merged.seed(), 9);
        assert_eq!(merged.key_file, Some(PathBuf::from("a")));
        assert_eq!(CliConfig::default().seed(), 0);
        assert_eq!(CliConfig::default().format(), OutputFormat::Text);
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(
            &path,
            r#"{"key_file":"keys.json","seed":4,"output_format":"json"}"#,
        )
        .unwrap();
        let cfg = CliConfig::load(&path).unwrap();
        assert_eq!(cfg.key_file, Some(dir.path().join("keys.json")));
        assert_eq!(cfg.format(), OutputFormat::Json);
        std::fs::write(&path, r#"{"bogus":1}"#).unwrap();
        assert!(CliConfig::load(&path).is_err());
    }
}
