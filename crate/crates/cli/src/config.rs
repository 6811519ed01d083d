use std::path::Path;

use expanse_core::construct::{FilterConfig, PretrainConfig, SamplerConfig};
use expanse_core::treebank::DEFAULT_MAX_PRUNABLE_LEAVES;
use expanse_core::{Error, Language, MaskFormat, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Scorer endpoints: `builtin`, `builtin:MODEL`, `none`, `tcp://host:port`, or a shell command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub lm: String,
    pub nli: String,
    pub infill: String,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            lm: "builtin".into(),
            nli: "builtin".into(),
            infill: "builtin".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub language: Language,
    pub mask_format: String,
    pub null_token: String,
    pub seed: u64,
    pub max_prunable_leaves: usize,
    pub filter: FilterConfig,
    pub sampler: SamplerConfig,
    pub pretrain: PretrainConfig,
    pub oracles: OracleConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            language: Language::En,
            mask_format: MaskFormat::default().as_str().to_owned(),
            null_token: expanse_core::align::DEFAULT_NULL_TOKEN.to_owned(),
            seed: 0,
            max_prunable_leaves: DEFAULT_MAX_PRUNABLE_LEAVES,
            filter: FilterConfig::default(),
            sampler: SamplerConfig::default(),
            pretrain: PretrainConfig::default(),
            oracles: OracleConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            line: source.line(),
            source,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.mask()?;
        if self.null_token.is_empty() || self.null_token.chars().any(char::is_whitespace) {
            return Err(Error::validation("null_token", "must be a single non-empty token"));
        }
        self.filter.validate()?;
        self.sampler.validate()?;
        self.pretrain.validate()
    }

    pub fn mask(&self) -> Result<MaskFormat> {
        MaskFormat::new(self.mask_format.clone())
    }

    /// Hex SHA-256 of the effective configuration's JSON form.
    pub fn sha256(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(bytes))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
