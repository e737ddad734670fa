use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::wire::{
    AlignRequest, Endpoint, GenerateRequest, JudgeRequest, NleRequest, NliRequest, TextRequest,
    VnliRequest,
};
use super::{Backend, BackendError};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VnliEntry {
    pub frame: String,
    pub text: String,
    pub score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairScoreEntry {
    pub premise: String,
    pub hypothesis: String,
    pub score: f64,
}

/// Either the full prompt or its SHA-256 hex digest identifies the request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_sha256: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignEntry {
    pub video_id: String,
    pub text: String,
    pub s_yes: f64,
    pub s_no: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NleEntry {
    pub video_id: String,
    pub contrast_caption: String,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgeEntry {
    pub premise: String,
    pub hypothesis: String,
    pub entailed: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventsEntry {
    pub text: String,
    pub label: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosEntry {
    pub text: String,
    pub tags: Vec<String>,
}

/// On-disk fixture table, one list per endpoint.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedFixture {
    #[serde(default)]
    pub vnli: Vec<VnliEntry>,
    #[serde(default)]
    pub nli: Vec<PairScoreEntry>,
    #[serde(default)]
    pub generate: Vec<GenerateEntry>,
    #[serde(default)]
    pub align: Vec<AlignEntry>,
    #[serde(default)]
    pub nle: Vec<NleEntry>,
    #[serde(default)]
    pub judge: Vec<JudgeEntry>,
    #[serde(default)]
    pub events: Vec<EventsEntry>,
    #[serde(default)]
    pub pos: Vec<PosEntry>,
}

pub fn prompt_key(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

fn pair_key(a: &str, b: &str) -> String {
    json!([a, b]).to_string()
}

/// Answers only from its fixture table; any unlisted request is an error.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    name: String,
    table: HashMap<(Endpoint, String), Value>,
}

impl ScriptedBackend {
    pub fn from_fixture(name: impl Into<String>, fixture: ScriptedFixture) -> Result<Self, String> {
        let mut table = HashMap::new();
        let mut insert = |endpoint: Endpoint, key: String, value: Value| {
            if table.insert((endpoint, key.clone()), value).is_some() {
                Err(format!("duplicate {endpoint} fixture entry for key {key}"))
            } else {
                Ok(())
            }
        };
        for e in fixture.vnli {
            insert(Endpoint::Vnli, pair_key(&e.frame, &e.text), json!({ "score": e.score }))?;
        }
        for e in fixture.nli {
            insert(Endpoint::Nli, pair_key(&e.premise, &e.hypothesis), json!({ "score": e.score }))?;
        }
        for e in fixture.generate {
            let key = match (e.prompt, e.prompt_sha256) {
                (Some(prompt), None) => prompt_key(&prompt),
                (None, Some(hash)) => hash.to_lowercase(),
                _ => return Err("generate entries need exactly one of prompt / prompt_sha256".into()),
            };
            insert(Endpoint::Generate, key, json!({ "text": e.text }))?;
        }
        for e in fixture.align {
            insert(
                Endpoint::Align,
                pair_key(&e.video_id, &e.text),
                json!({ "s_yes": e.s_yes, "s_no": e.s_no }),
            )?;
        }
        for e in fixture.nle {
            insert(
                Endpoint::Nle,
                pair_key(&e.video_id, &e.contrast_caption),
                json!({ "text": e.text }),
            )?;
        }
        for e in fixture.judge {
            insert(
                Endpoint::Judge,
                pair_key(&e.premise, &e.hypothesis),
                json!({ "entailed": e.entailed }),
            )?;
        }
        for e in fixture.events {
            insert(Endpoint::Events, e.text, json!({ "label": e.label }))?;
        }
        for e in fixture.pos {
            insert(Endpoint::Pos, e.text, json!({ "tags": e.tags }))?;
        }
        Ok(ScriptedBackend {
            name: name.into(),
            table,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, String> {
        let raw = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let fixture: ScriptedFixture =
            serde_json::from_str(&raw).map_err(|e| format!("{}: {e}", path.display()))?;
        let digest = hex::encode(&Sha256::digest(raw.as_bytes())[..8]);
        Self::from_fixture(format!("scripted({digest})"), fixture)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    fn request_key(endpoint: Endpoint, request: &Value) -> Result<String, BackendError> {
        fn parse<T: serde::de::DeserializeOwned>(endpoint: Endpoint, v: &Value) -> Result<T, BackendError> {
            serde_json::from_value(v.clone()).map_err(|e| BackendError::Protocol {
                endpoint,
                reason: e.to_string(),
            })
        }
        Ok(match endpoint {
            Endpoint::Vnli => {
                let r: VnliRequest = parse(endpoint, request)?;
                pair_key(r.frame.as_str(), &r.text)
            }
            Endpoint::Nli => {
                let r: NliRequest = parse(endpoint, request)?;
                pair_key(&r.premise, &r.hypothesis)
            }
            Endpoint::Generate => prompt_key(&parse::<GenerateRequest>(endpoint, request)?.prompt),
            Endpoint::Align => {
                let r: AlignRequest = parse(endpoint, request)?;
                pair_key(&r.video_id, &r.text)
            }
            Endpoint::Nle => {
                let r: NleRequest = parse(endpoint, request)?;
                pair_key(&r.video_id, &r.contrast_caption)
            }
            Endpoint::Judge => {
                let r: JudgeRequest = parse(endpoint, request)?;
                pair_key(&r.premise, &r.hypothesis)
            }
            Endpoint::Events | Endpoint::Pos => parse::<TextRequest>(endpoint, request)?.text,
        })
    }
}

impl Backend for ScriptedBackend {
    fn identity(&self) -> String {
        self.name.clone()
    }

    fn call(&self, endpoint: Endpoint, request: &Value) -> Result<Value, BackendError> {
        let key = Self::request_key(endpoint, request)?;
        match self.table.get(&(endpoint, key.clone())) {
            Some(v) => Ok(v.clone()),
            None if endpoint == Endpoint::Vnli => Err(BackendError::UnknownFrame {
                frame: request["frame"].as_str().unwrap_or_default().to_string(),
                text: request["text"].as_str().unwrap_or_default().to_string(),
            }),
            None => Err(BackendError::MissingFixture { endpoint, key }),
        }
    }
}
