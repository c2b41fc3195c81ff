//! JSON configuration files.
//!
//! Settings are layered: the `--config` file is the base, `TABLEREADER_*`
//! environment variables override it and command-line flags override both.
//! The last two layers are resolved by the argument parser, so this module
//! only loads the file and applies overrides it is handed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use tablereader_core::decode::DecodeParams;
use tablereader_core::train::{Precision, TrainConfig};
use tablereader_core::FieldType;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldDecodeConfig {
    /// Checkpoints of the committee members.
    pub committee: Vec<PathBuf>,
    pub dict: Option<PathBuf>,
    /// NAME only: dictionary of given names; `dict` then holds family names.
    pub given_dict: Option<PathBuf>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub given_alpha: Option<f64>,
    pub given_beta: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub seed: Option<u64>,
    pub precision: Option<Precision>,
    pub train: TrainConfig,
    pub fields: BTreeMap<FieldType, FieldDecodeConfig>,
    pub rules: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
}

impl AppConfig {
    /// Parses a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::io::read_text(path)?;
        let mut cfg: AppConfig = serde_json::from_str(&text).with_context(|| format!("config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for f in cfg.fields.values_mut() {
            f.committee.iter_mut().for_each(fix);
            f.dict.iter_mut().for_each(fix);
            f.given_dict.iter_mut().for_each(fix);
        }
        cfg.rules.iter_mut().for_each(fix);
        cfg.lexicon.iter_mut().for_each(fix);
        Ok(cfg)
    }

    /// Folds the top-level seed and precision into the training section.
    pub fn effective_train(&self) -> TrainConfig {
        let mut t = self.train.clone();
        if let Some(s) = self.seed {
            t.seed = s;
        }
        if let Some(p) = self.precision {
            t.precision = p;
        }
        t
    }
}

/// Shipped per-field setup: which networks form the committee and the
/// decoding weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSetup {
    pub field: FieldType,
    pub networks: Vec<String>,
    /// Whole-field weights, or the family-name weights for NAME.
    pub decoding: DecodeParams,
    /// NAME only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub given_decoding: Option<DecodeParams>,
}

impl FieldSetup {
    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::io::read_text(path)?;
        serde_json::from_str(&text).with_context(|| format!("field setup {}", path.display()))
    }
}

/// Directory holding the shipped `networks/` and `fields/` descriptors.
pub fn shipped_config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}
