use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::lexicon;
use super::wire::{
    AlignRequest, Endpoint, GenerateRequest, JudgeRequest, NleRequest, NliRequest, TextRequest,
    VnliRequest,
};
use super::{Backend, BackendError};

/// Seeded pseudo-model: every answer is a pure function of
/// (seed, endpoint, canonical request JSON).
#[derive(Debug, Clone)]
pub struct MockBackend {
    seed: u64,
}

const REPLACEMENTS: &[&str] = &[
    "cello", "bicycle", "umbrella", "kitten", "lantern", "guitar", "yelling", "sleeping",
    "purple", "tiny", "beneath", "seven",
];

const ADDITIONS: &[&str] = &["a frisbee", "a red balloon", "a surfboard", "a small drone"];

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        MockBackend { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn digest(&self, salt: &str, request: &Value) -> u64 {
        // serde_json's default map is ordered, so to_string is canonical.
        let canonical = request.to_string();
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(salt.as_bytes());
        hasher.update([0x1f]);
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        u64::from_be_bytes(bytes)
    }

    /// `digest / 2^64`, in `[0, 1)`.
    pub fn unit_score(&self, salt: &str, request: &Value) -> f64 {
        self.digest(salt, request) as f64 / 18_446_744_073_709_551_616.0
    }

    fn pick<'a>(&self, salt: &str, request: &Value, options: &[&'a str]) -> &'a str {
        options[(self.digest(salt, request) % options.len() as u64) as usize]
    }

    fn completion(&self, req: &GenerateRequest, raw: &Value) -> String {
        if req.prompt.trim_end().ends_with("Imperative Statements for every option:") {
            return recast_completion(&req.prompt);
        }
        if let Some((caption, label)) = generation_slot(&req.prompt) {
            return self.contrast_completion(&caption, &label, raw);
        }
        format!("mock completion {:016x}", self.digest("generate/free", raw))
    }

    fn contrast_completion(&self, caption: &str, label: &str, raw: &Value) -> String {
        let lower = label.to_lowercase();
        if lower.contains("event") {
            let contrast = match caption.split_once(" and ") {
                Some((first, second)) => format!("{} and then {}", second.trim(), first.trim()),
                None => format!("after that, {caption}"),
            };
            return format!(
                "{label}: {contrast}\nCorrect Misalignment: the events happen in the order \"{caption}\" not \"{contrast}\""
            );
        }
        if lower.contains("hallucination") {
            let addition = self.pick("generate/addition", raw, ADDITIONS);
            let last = caption.split_whitespace().last().unwrap_or(caption);
            let contrast = format!("{caption} with {addition}");
            return format!(
                "{label}: {contrast}\nSource: \"{last}\"\nTarget: \"{last} with {addition}\"\nCorrect Misalignment: there is no {addition}"
            );
        }
        let words: Vec<&str> = caption.split_whitespace().collect();
        let index = (self.digest("generate/position", raw) % words.len().max(1) as u64) as usize;
        let source = words.get(index).copied().unwrap_or(caption);
        let mut target = self.pick("generate/replacement", raw, REPLACEMENTS);
        if target.eq_ignore_ascii_case(source) {
            target = "something else";
        }
        let contrast = words
            .iter()
            .enumerate()
            .map(|(i, w)| if i == index { target } else { w })
            .collect::<Vec<_>>()
            .join(" ");
        format!(
            "{label}: {contrast}\nSource: \"{source}\"\nTarget: \"{target}\"\nCorrect Misalignment: {caption} instead of {target}"
        )
    }
}

fn parse<T: DeserializeOwned>(endpoint: Endpoint, request: &Value) -> Result<T, BackendError> {
    serde_json::from_value(request.clone()).map_err(|e| BackendError::Protocol {
        endpoint,
        reason: e.to_string(),
    })
}

/// Finds the final `Input Sentence:` block of a contrast-generation prompt and
/// returns its caption together with the contrast-caption label that follows.
fn generation_slot(prompt: &str) -> Option<(String, String)> {
    let lines: Vec<&str> = prompt.lines().collect();
    let pos = lines.iter().rposition(|l| l.starts_with("Input Sentence:"))?;
    let caption = lines[pos]["Input Sentence:".len()..].trim().to_string();
    let label = lines.get(pos + 1)?.trim().trim_end_matches(':').to_string();
    if caption.is_empty() || !label.starts_with("Sentence +") {
        return None;
    }
    Some((caption, label))
}

fn recast_completion(prompt: &str) -> String {
    let tail = prompt
        .rsplit_once("Now it's your turn.")
        .map(|(_, t)| t)
        .unwrap_or(prompt);
    let question = tail
        .lines()
        .find_map(|l| l.strip_prefix("Question:"))
        .unwrap_or("")
        .trim();
    tail.lines()
        .filter_map(|l| {
            let l = l.trim();
            let letter = l.strip_prefix('(')?.chars().next()?;
            let choice = l.get(3..)?.trim();
            ('A'..='E')
                .contains(&letter)
                .then(|| format!("({letter}) {question} by {choice}"))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

impl Backend for MockBackend {
    fn identity(&self) -> String {
        format!("mock(seed={})", self.seed)
    }

    fn call(&self, endpoint: Endpoint, request: &Value) -> Result<Value, BackendError> {
        let salt = endpoint.name();
        Ok(match endpoint {
            Endpoint::Vnli => {
                parse::<VnliRequest>(endpoint, request)?;
                json!({ "score": self.unit_score(salt, request) })
            }
            Endpoint::Nli => {
                parse::<NliRequest>(endpoint, request)?;
                json!({ "score": self.unit_score(salt, request) })
            }
            Endpoint::Generate => {
                let req: GenerateRequest = parse(endpoint, request)?;
                json!({ "text": self.completion(&req, request) })
            }
            Endpoint::Align => {
                parse::<AlignRequest>(endpoint, request)?;
                // offset keeps s_yes + s_no strictly positive
                let s_yes = self.unit_score("align/yes", request) + 1e-6;
                let s_no = self.unit_score("align/no", request) + 1e-6;
                json!({ "s_yes": s_yes.min(1.0), "s_no": s_no.min(1.0) })
            }
            Endpoint::Nle => {
                let req: NleRequest = parse(endpoint, request)?;
                json!({
                    "text": format!(
                        "the video does not show that {} ({:04x})",
                        req.contrast_caption,
                        self.digest(salt, request) & 0xffff
                    )
                })
            }
            Endpoint::Judge => {
                parse::<JudgeRequest>(endpoint, request)?;
                json!({ "entailed": self.unit_score(salt, request) >= 0.5 })
            }
            Endpoint::Events => {
                let req: TextRequest = parse(endpoint, request)?;
                json!({ "label": lexicon::classify_events(&req.text).to_string() })
            }
            Endpoint::Pos => {
                let req: TextRequest = parse(endpoint, request)?;
                let tags: Vec<&str> = lexicon::tag(&req.text).into_iter().map(|t| t.token()).collect();
                json!({ "tags": tags })
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_are_deterministic_and_seed_dependent() {
        let req = json!({"frame": "f1", "text": "cat"});
        let a = MockBackend::new(7).call(Endpoint::Vnli, &req).unwrap();
        let b = MockBackend::new(7).call(Endpoint::Vnli, &req).unwrap();
        assert_eq!(a, b);
        let score = a["score"].as_f64().unwrap();
        assert!((0.0..1.0).contains(&score));
        let c = MockBackend::new(8).call(Endpoint::Vnli, &req).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn key_order_does_not_change_the_score() {
        let mock = MockBackend::new(3);
        let a: Value = serde_json::from_str(r#"{"premise":"a","hypothesis":"b"}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"hypothesis":"b","premise":"a"}"#).unwrap();
        assert_eq!(mock.call(Endpoint::Nli, &a).unwrap(), mock.call(Endpoint::Nli, &b).unwrap());
    }

    #[test]
    fn malformed_requests_are_protocol_errors() {
        let err = MockBackend::new(1).call(Endpoint::Nli, &json!({"premise": "a"})).unwrap_err();
        assert!(matches!(err, BackendError::Protocol { .. }));
    }

    #[test]
    fn recast_completion_has_five_lines() {
        let prompt = "Now it's your turn.\n\nQuestion: why\nChoices:\n(A) a\n(B) b\n(C) c\n(D) d\n(E) e\nImperative Statements for every option:\n";
        let out = recast_completion(prompt);
        assert_eq!(out.lines().count(), 5);
        assert!(out.starts_with("(A) why by a"));
    }
}
