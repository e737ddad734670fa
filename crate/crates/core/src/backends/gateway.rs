use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use super::wire::{
    AlignRequest, AlignResponse, Endpoint, EventsResponse, GenerateRequest, JudgeRequest,
    JudgeResponse, NleRequest, NliRequest, PosResponse, ScoreResponse, TextRequest, TextResponse,
    VnliRequest,
};
use super::{AlignmentLogits, Backend, BackendError, EventClass, GenerationParams, PosTags};
use crate::types::{FrameRef, VideoRef};

struct Limiter {
    cap: usize,
    in_flight: Mutex<usize>,
    released: Condvar,
    peak: AtomicUsize,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().unwrap();
        while *n >= self.cap {
            n = self.released.wait(n).unwrap();
        }
        *n += 1;
        self.peak.fetch_max(*n, Ordering::SeqCst);
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().unwrap() -= 1;
        self.0.released.notify_one();
    }
}

/// Typed, validating front end over a [`Backend`] with a global in-flight
/// request cap. Cloning shares the backend and the cap.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn Backend>,
    limiter: Arc<Limiter>,
}

fn require_text(endpoint: Endpoint, field: &str, text: &str) -> Result<(), BackendError> {
    if text.trim().is_empty() {
        Err(BackendError::Precondition {
            endpoint,
            reason: format!("`{field}` must be non-empty"),
        })
    } else {
        Ok(())
    }
}

fn require_unit(endpoint: Endpoint, field: &'static str, value: f64) -> Result<f64, BackendError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(BackendError::OutOfRange {
            endpoint,
            field,
            value,
        })
    }
}

impl Gateway {
    pub const DEFAULT_CAP: usize = 8;

    pub fn new(backend: Arc<dyn Backend>, cap: usize) -> Self {
        Gateway {
            backend,
            limiter: Arc::new(Limiter {
                cap: cap.max(1),
                in_flight: Mutex::new(0),
                released: Condvar::new(),
                peak: AtomicUsize::new(0),
            }),
        }
    }

    pub fn cap(&self) -> usize {
        self.limiter.cap
    }

    /// Highest number of simultaneous backend calls observed so far.
    pub fn peak_in_flight(&self) -> usize {
        self.limiter.peak.load(Ordering::SeqCst)
    }

    pub fn identity(&self) -> String {
        self.backend.identity()
    }

    /// Raw protocol call, subject to the in-flight cap.
    pub fn call(&self, endpoint: Endpoint, request: &Value) -> Result<Value, BackendError> {
        let _permit = self.limiter.acquire();
        self.backend.call(endpoint, request)
    }

    fn exchange<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        endpoint: Endpoint,
        request: &Req,
    ) -> Result<Resp, BackendError> {
        let body = serde_json::to_value(request).map_err(|e| BackendError::Protocol {
            endpoint,
            reason: e.to_string(),
        })?;
        let response = self.call(endpoint, &body)?;
        serde_json::from_value(response).map_err(|e| BackendError::Protocol {
            endpoint,
            reason: format!("response schema: {e}"),
        })
    }

    /// Applies `f` to every item using at most `cap` worker threads.
    /// Results keep the input order regardless of completion order.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync,
    {
        let workers = self.cap().min(items.len());
        if workers <= 1 {
            return items.iter().map(&f).collect();
        }
        let next = AtomicUsize::new(0);
        let mut slots: Vec<Option<R>> = std::iter::repeat_with(|| None).take(items.len()).collect();
        let results: Vec<Vec<(usize, R)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    scope.spawn(|| {
                        let mut local = Vec::new();
                        loop {
                            let i = next.fetch_add(1, Ordering::SeqCst);
                            if i >= items.len() {
                                break;
                            }
                            local.push((i, f(&items[i])));
                        }
                        local
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        for (i, r) in results.into_iter().flatten() {
            slots[i] = Some(r);
        }
        slots.into_iter().map(|r| r.expect("every slot filled")).collect()
    }

    pub fn score_frame_entailment(&self, frame: &FrameRef, text: &str) -> Result<f64, BackendError> {
        let endpoint = Endpoint::Vnli;
        require_text(endpoint, "frame", frame.as_str())?;
        require_text(endpoint, "text", text)?;
        let resp: ScoreResponse = self.exchange(
            endpoint,
            &VnliRequest {
                frame: frame.clone(),
                text: text.to_string(),
            },
        )?;
        require_unit(endpoint, "score", resp.score)
    }

    pub fn score_nli(&self, premise: &str, hypothesis: &str) -> Result<f64, BackendError> {
        let endpoint = Endpoint::Nli;
        require_text(endpoint, "premise", premise)?;
        require_text(endpoint, "hypothesis", hypothesis)?;
        let resp: ScoreResponse = self.exchange(
            endpoint,
            &NliRequest {
                premise: premise.to_string(),
                hypothesis: hypothesis.to_string(),
            },
        )?;
        require_unit(endpoint, "score", resp.score)
    }

    pub fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError> {
        let endpoint = Endpoint::Generate;
        require_text(endpoint, "prompt", prompt)?;
        params.validate().map_err(|reason| BackendError::Precondition { endpoint, reason })?;
        let resp: TextResponse = self.exchange(
            endpoint,
            &GenerateRequest {
                prompt: prompt.to_string(),
                temperature: params.temperature,
                max_output_tokens: params.max_output_tokens,
                top_p: params.top_p,
                top_k: params.top_k,
            },
        )?;
        if resp.text.trim().is_empty() {
            return Err(BackendError::EmptyCompletion { endpoint });
        }
        Ok(resp.text)
    }

    pub fn score_alignment(&self, video: &VideoRef, text: &str) -> Result<AlignmentLogits, BackendError> {
        let endpoint = Endpoint::Align;
        if video.frames.is_empty() {
            return Err(BackendError::Precondition {
                endpoint,
                reason: format!("video {} has no frames", video.video_id),
            });
        }
        require_text(endpoint, "text", text)?;
        let resp: AlignResponse = self.exchange(
            endpoint,
            &AlignRequest {
                video_id: video.video_id.clone(),
                frames: video.frames.clone(),
                text: text.to_string(),
            },
        )?;
        for (field, v) in [("s_yes", resp.s_yes), ("s_no", resp.s_no)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(BackendError::OutOfRange {
                    endpoint,
                    field,
                    value: v,
                });
            }
        }
        if resp.s_yes + resp.s_no <= 0.0 {
            return Err(BackendError::OutOfRange {
                endpoint,
                field: "s_yes + s_no",
                value: 0.0,
            });
        }
        Ok(AlignmentLogits {
            s_yes: resp.s_yes,
            s_no: resp.s_no,
        })
    }

    pub fn generate_nle(&self, video: &VideoRef, contrast_caption: &str) -> Result<String, BackendError> {
        let endpoint = Endpoint::Nle;
        if video.frames.is_empty() {
            return Err(BackendError::Precondition {
                endpoint,
                reason: format!("video {} has no frames", video.video_id),
            });
        }
        require_text(endpoint, "contrast_caption", contrast_caption)?;
        let resp: TextResponse = self.exchange(
            endpoint,
            &NleRequest {
                video_id: video.video_id.clone(),
                frames: video.frames.clone(),
                contrast_caption: contrast_caption.to_string(),
            },
        )?;
        if resp.text.trim().is_empty() {
            return Err(BackendError::EmptyCompletion { endpoint });
        }
        Ok(resp.text)
    }

    pub fn judge_entailment(&self, premise: &str, hypothesis: &str) -> Result<bool, BackendError> {
        let endpoint = Endpoint::Judge;
        require_text(endpoint, "premise", premise)?;
        require_text(endpoint, "hypothesis", hypothesis)?;
        let resp: JudgeResponse = self.exchange(
            endpoint,
            &JudgeRequest {
                premise: premise.to_string(),
                hypothesis: hypothesis.to_string(),
            },
        )?;
        match &resp.entailed {
            Value::Bool(b) => Ok(*b),
            Value::String(s) => match s.trim().to_lowercase().as_str() {
                "yes" | "true" | "entailed" => Ok(true),
                "no" | "false" | "not entailed" => Ok(false),
                _ => Err(BackendError::UnparseableVerdict(s.clone())),
            },
            other => Err(BackendError::UnparseableVerdict(other.to_string())),
        }
    }

    pub fn classify_event_count(&self, text: &str) -> Result<EventClass, BackendError> {
        let endpoint = Endpoint::Events;
        require_text(endpoint, "text", text)?;
        let resp: EventsResponse = self.exchange(endpoint, &TextRequest { text: text.to_string() })?;
        resp.label
            .parse()
            .map_err(|reason| BackendError::Protocol { endpoint, reason })
    }

    pub fn tag_pos(&self, text: &str) -> Result<PosTags, BackendError> {
        let endpoint = Endpoint::Pos;
        require_text(endpoint, "text", text)?;
        let resp: PosResponse = self.exchange(endpoint, &TextRequest { text: text.to_string() })?;
        resp.tags
            .iter()
            .map(|t| t.parse())
            .collect::<Result<PosTags, String>>()
            .map_err(|reason| BackendError::Protocol { endpoint, reason })
    }
}
