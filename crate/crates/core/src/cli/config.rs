use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backends::{Backend, Gateway, GenerationParams, HttpBackend, MockBackend, ScriptedBackend};
use crate::curation::{EventGatePolicy, HumanHardDirection, PosMode};
use crate::dataset::sha256_hex;
use crate::eval::PositiveSet;
use crate::genfilter::FilterThresholds;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendConfig {
    /// Seeded hash backend; uses the top-level seed.
    #[default]
    Mock,
    /// Lookup tables; `fixture` falls back to `paths.fixtures`.
    Scripted {
        #[serde(default)]
        fixture: Option<PathBuf>,
    },
    Http { url: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub fixtures: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub backend: BackendConfig,
    pub seed: u64,
    pub retain_k: usize,
    pub challenge_threshold: f64,
    pub contrast_drop_above: f64,
    pub nle_drop_below: f64,
    pub human_hard_threshold: f64,
    pub human_hard_direction: HumanHardDirection,
    pub event_gate_policy: EventGatePolicy,
    pub positive_set: PositiveSet,
    pub pos_mode: PosMode,
    pub concurrency: usize,
    pub shard_by_split: bool,
    pub generation: GenerationParams,
    pub paths: Paths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            backend: BackendConfig::default(),
            seed: 0,
            retain_k: 5,
            challenge_threshold: 0.5,
            contrast_drop_above: 0.5,
            nle_drop_below: 0.6,
            human_hard_threshold: 0.5,
            human_hard_direction: HumanHardDirection::default(),
            event_gate_policy: EventGatePolicy::default(),
            positive_set: PositiveSet::default(),
            pos_mode: PosMode::default(),
            concurrency: Gateway::DEFAULT_CAP,
            shard_by_split: false,
            generation: GenerationParams::default(),
            paths: Paths::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let raw = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&raw).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("challenge_threshold", self.challenge_threshold),
            ("contrast_drop_above", self.contrast_drop_above),
            ("nle_drop_below", self.nle_drop_below),
            ("human_hard_threshold", self.human_hard_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} = {v} is outside [0, 1]"));
            }
        }
        if self.retain_k < 1 {
            return Err("retain_k must be at least 1".into());
        }
        if self.concurrency < 1 {
            return Err("concurrency must be at least 1".into());
        }
        if let BackendConfig::Http { url } = &self.backend {
            if !(url.starts_with("http://") || url.starts_with("https://")) {
                return Err(format!("backend url `{url}` must start with http:// or https://"));
            }
        }
        self.generation.validate().map_err(|e| format!("generation: {e}"))
    }

    pub fn thresholds(&self) -> FilterThresholds {
        FilterThresholds {
            contrast_drop_above: self.contrast_drop_above,
            nle_drop_below: self.nle_drop_below,
        }
    }

    /// Everything except `paths` and `concurrency`, neither of which can
    /// change an output.
    pub fn reproducible_view(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("paths");
            obj.remove("concurrency");
        }
        value
    }

    pub fn checksum(&self) -> String {
        sha256_hex(self.reproducible_view().to_string().as_bytes())
    }

    pub fn build_backend(&self) -> Result<Arc<dyn Backend>, String> {
        Ok(match &self.backend {
            BackendConfig::Mock => Arc::new(MockBackend::new(self.seed)),
            BackendConfig::Scripted { fixture } => {
                let path = fixture
                    .as_ref()
                    .or(self.paths.fixtures.as_ref())
                    .ok_or("scripted backend needs a fixture path")?;
                Arc::new(ScriptedBackend::from_path(path)?)
            }
            BackendConfig::Http { url } => Arc::new(HttpBackend::new(url.clone())),
        })
    }
}
