//! Schema and determinism checks shared by every backend implementation,
//! including remote servers reached through [`super::HttpBackend`].

use std::collections::BTreeMap;

use serde_json::{json, Value};

use super::scripted::{
    AlignEntry, EventsEntry, GenerateEntry, JudgeEntry, NleEntry, PairScoreEntry, PosEntry,
    VnliEntry,
};
use super::wire::Endpoint;
use super::{Backend, ScriptedFixture};

#[derive(Debug, Clone, PartialEq)]
pub struct ConformanceCheck {
    pub endpoint: Endpoint,
    pub check: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// One well-formed request per endpoint.
#[derive(Debug, Clone)]
pub struct ConformanceProbes {
    pub requests: BTreeMap<Endpoint, Value>,
}

impl Default for ConformanceProbes {
    fn default() -> Self {
        let frames = json!(["probe/frame0.jpg", "probe/frame1.jpg"]);
        let requests = BTreeMap::from([
            (Endpoint::Vnli, json!({"frame": "probe/frame0.jpg", "text": "a dog runs on the grass"})),
            (Endpoint::Nli, json!({"premise": "a dog runs on the grass", "hypothesis": "an animal is outside"})),
            (
                Endpoint::Generate,
                json!({"prompt": "Say something about a dog.", "temperature": 0.5, "max_output_tokens": 256, "top_p": 0.95, "top_k": 40}),
            ),
            (Endpoint::Align, json!({"video_id": "probe", "frames": frames, "text": "a dog runs on the grass"})),
            (Endpoint::Nle, json!({"video_id": "probe", "frames": frames, "contrast_caption": "a cat runs on the grass"})),
            (Endpoint::Judge, json!({"premise": "a dog runs", "hypothesis": "a dog moves"})),
            (Endpoint::Events, json!({"text": "a girl walks down a hill and eats icecream"})),
            (Endpoint::Pos, json!({"text": "blue car drives"})),
        ]);
        ConformanceProbes { requests }
    }
}

impl ConformanceProbes {
    /// Fixture table answering exactly the default probes.
    pub fn fixture() -> ScriptedFixture {
        ScriptedFixture {
            vnli: vec![VnliEntry {
                frame: "probe/frame0.jpg".into(),
                text: "a dog runs on the grass".into(),
                score: 0.8,
            }],
            nli: vec![PairScoreEntry {
                premise: "a dog runs on the grass".into(),
                hypothesis: "an animal is outside".into(),
                score: 0.9,
            }],
            generate: vec![GenerateEntry {
                prompt: Some("Say something about a dog.".into()),
                prompt_sha256: None,
                text: "dogs like to run".into(),
            }],
            align: vec![AlignEntry {
                video_id: "probe".into(),
                text: "a dog runs on the grass".into(),
                s_yes: 0.7,
                s_no: 0.2,
            }],
            nle: vec![NleEntry {
                video_id: "probe".into(),
                contrast_caption: "a cat runs on the grass".into(),
                text: "a dog runs, not a cat".into(),
            }],
            judge: vec![JudgeEntry {
                premise: "a dog runs".into(),
                hypothesis: "a dog moves".into(),
                entailed: json!(true),
            }],
            events: vec![EventsEntry {
                text: "a girl walks down a hill and eats icecream".into(),
                label: "multiple".into(),
            }],
            pos: vec![PosEntry {
                text: "blue car drives".into(),
                tags: vec!["ADJ".into(), "NOUN".into(), "VERB".into()],
            }],
        }
    }
}

fn unit(v: &Value) -> bool {
    v.as_f64().is_some_and(|x| (0.0..=1.0).contains(&x))
}

fn nonneg(v: &Value) -> bool {
    v.as_f64().is_some_and(|x| x >= 0.0 && x.is_finite())
}

fn non_empty_text(v: &Value) -> bool {
    v.as_str().is_some_and(|s| !s.trim().is_empty())
}

/// Returns `None` when the body matches the endpoint's response schema.
fn schema_violation(endpoint: Endpoint, body: &Value) -> Option<String> {
    let Some(obj) = body.as_object() else {
        return Some("response is not a JSON object".into());
    };
    let expected: &[&str] = match endpoint {
        Endpoint::Vnli | Endpoint::Nli => &["score"],
        Endpoint::Generate | Endpoint::Nle => &["text"],
        Endpoint::Align => &["s_no", "s_yes"],
        Endpoint::Judge => &["entailed"],
        Endpoint::Events => &["label"],
        Endpoint::Pos => &["tags"],
    };
    let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    if keys != expected {
        return Some(format!("keys {keys:?}, expected {expected:?}"));
    }
    let ok = match endpoint {
        Endpoint::Vnli | Endpoint::Nli => unit(&body["score"]),
        Endpoint::Generate | Endpoint::Nle => non_empty_text(&body["text"]),
        Endpoint::Align => {
            nonneg(&body["s_yes"])
                && nonneg(&body["s_no"])
                && body["s_yes"].as_f64().unwrap_or(0.0) + body["s_no"].as_f64().unwrap_or(0.0) > 0.0
        }
        Endpoint::Judge => body["entailed"].is_boolean(),
        Endpoint::Events => matches!(body["label"].as_str(), Some("single" | "multiple")),
        Endpoint::Pos => body["tags"].as_array().is_some_and(|tags| {
            tags.iter()
                .all(|t| matches!(t.as_str(), Some("NOUN" | "VERB" | "ADJ")))
        }),
    };
    (!ok).then(|| format!("value out of contract: {body}"))
}

/// Runs schema, determinism and malformed-request checks for every probe.
pub fn run_conformance(backend: &dyn Backend, probes: &ConformanceProbes) -> Vec<ConformanceCheck> {
    let mut checks = Vec::new();
    for (&endpoint, request) in &probes.requests {
        let first = backend.call(endpoint, request);
        let (passed, detail) = match &first {
            Ok(body) => match schema_violation(endpoint, body) {
                None => (true, String::new()),
                Some(reason) => (false, reason),
            },
            Err(e) => (false, e.to_string()),
        };
        checks.push(ConformanceCheck {
            endpoint,
            check: "schema",
            passed,
            detail,
        });

        let second = backend.call(endpoint, request);
        let deterministic = matches!((&first, &second), (Ok(a), Ok(b)) if a == b);
        checks.push(ConformanceCheck {
            endpoint,
            check: "determinism",
            passed: deterministic,
            detail: if deterministic {
                String::new()
            } else {
                format!("{first:?} vs {second:?}")
            },
        });

        let malformed = backend.call(endpoint, &json!({"unexpected": true}));
        checks.push(ConformanceCheck {
            endpoint,
            check: "rejects-malformed",
            passed: malformed.is_err(),
            detail: match malformed {
                Ok(body) => format!("accepted malformed request with {body}"),
                Err(_) => String::new(),
            },
        });
    }
    checks
}
