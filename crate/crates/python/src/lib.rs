//! Python bindings: JSON-shaped records cross the boundary as dicts.

use std::collections::BTreeSet;
use std::sync::Arc;

use concap::backends::{Endpoint, Gateway, HttpBackend, MockBackend, ScriptedBackend};
use concap::dataset::{to_entailment_examples, DatasetRecord};
use concap::eval::{self, PositiveSet, RunMetadata};
use concap::genfilter::{self, prompts};
use concap::types::{ContrastRecord, EntailmentExample, MisalignmentType, VideoRef};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(value_err)
}

fn misalignment(token: &str) -> PyResult<MisalignmentType> {
    token.parse().map_err(value_err)
}

/// Model backend handle: `Backend.mock(seed)`, `Backend.scripted(path)`
/// or `Backend.http(url)`.
#[pyclass(frozen)]
struct Backend {
    gateway: Gateway,
}

#[pymethods]
impl Backend {
    #[staticmethod]
    #[pyo3(signature = (seed=0, concurrency=8))]
    fn mock(seed: u64, concurrency: usize) -> Self {
        Backend {
            gateway: Gateway::new(Arc::new(MockBackend::new(seed)), concurrency),
        }
    }

    #[staticmethod]
    #[pyo3(signature = (path, concurrency=8))]
    fn scripted(path: &str, concurrency: usize) -> PyResult<Self> {
        let backend = ScriptedBackend::from_path(std::path::Path::new(path)).map_err(value_err)?;
        Ok(Backend {
            gateway: Gateway::new(Arc::new(backend), concurrency),
        })
    }

    #[staticmethod]
    #[pyo3(signature = (url, concurrency=8))]
    fn http(url: &str, concurrency: usize) -> Self {
        Backend {
            gateway: Gateway::new(Arc::new(HttpBackend::new(url)), concurrency),
        }
    }

    fn identity(&self) -> String {
        self.gateway.identity()
    }

    /// Raw call of one endpoint by name, e.g. `call("nli", {...})`.
    fn call(&self, py: Python<'_>, endpoint: &str, request: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
        let endpoint: Endpoint = endpoint.parse().map_err(PyValueError::new_err)?;
        let request: serde_json::Value = from_py(request)?;
        let reply = py
            .detach(|| self.gateway.call(endpoint, &request))
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        to_py(py, &reply)
    }

    /// p_yes of `text` against `video` (a dict with video_id, source, frames).
    fn alignment_score(&self, py: Python<'_>, video: &Bound<'_, PyAny>, text: &str) -> PyResult<f64> {
        let video: VideoRef = from_py(video)?;
        let logits = py
            .detach(|| self.gateway.score_alignment(&video, text))
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        eval::p_yes(logits).map_err(value_err)
    }

    /// Entailment evaluation report for a list of example dicts.
    #[pyo3(signature = (examples, positive_set="same-tuple"))]
    fn eval_entailment(
        &self,
        py: Python<'_>,
        examples: &Bound<'_, PyAny>,
        positive_set: &str,
    ) -> PyResult<Py<PyAny>> {
        let examples: Vec<EntailmentExample> = from_py(examples)?;
        let positives: PositiveSet =
            serde_json::from_value(serde_json::Value::String(positive_set.into())).map_err(value_err)?;
        let metadata = RunMetadata {
            backend: self.identity(),
            ..RunMetadata::default()
        };
        let report = py
            .detach(|| eval::eval_entailment(&self.gateway, &examples, positives, metadata))
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        to_py(py, &report)
    }
}

#[pyfunction]
fn make_instance_id(video_id: &str, caption: &str, misalignment_type: &str) -> PyResult<String> {
    Ok(concap::types::make_instance_id(video_id, caption, misalignment(misalignment_type)?))
}

#[pyfunction]
fn render_prompt(misalignment_type: &str, caption: &str) -> PyResult<String> {
    Ok(genfilter::render_prompt(misalignment(misalignment_type)?, caption))
}

/// Parsed completion as a dict; raises ValueError when unparseable.
#[pyfunction]
fn parse_generation(py: Python<'_>, misalignment_type: &str, raw: &str) -> PyResult<Py<PyAny>> {
    let parsed = genfilter::parse_generation(misalignment(misalignment_type)?, raw).map_err(value_err)?;
    to_py(py, &parsed)
}

#[pyfunction]
fn parse_recast(raw: &str) -> PyResult<Vec<String>> {
    Ok(eval::parse_recast(raw).map_err(value_err)?.to_vec())
}

#[pyfunction]
fn templates_checksum() -> String {
    prompts::templates_checksum()
}

#[pyfunction]
fn p_yes(s_yes: f64, s_no: f64) -> PyResult<f64> {
    eval::p_yes(concap::backends::AlignmentLogits { s_yes, s_no }).map_err(value_err)
}

#[pyfunction]
fn roc_auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    if scores.len() != labels.len() {
        return Err(PyValueError::new_err("scores and labels differ in length"));
    }
    let scored: Vec<(f64, bool)> = scores.into_iter().zip(labels).collect();
    eval::roc_auc(&scored).map_err(value_err)
}

#[pyfunction]
fn average_precision(ranking: Vec<String>, relevant: Vec<String>) -> PyResult<f64> {
    let relevant: BTreeSet<String> = relevant.into_iter().collect();
    eval::average_precision(&ranking, &relevant).map_err(value_err)
}

/// The positive and negative entailment examples of one contrast record.
#[pyfunction]
fn entailment_examples(py: Python<'_>, record: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
    let record: ContrastRecord = from_py(record)?;
    record.check().map_err(value_err)?;
    to_py(py, &to_entailment_examples(&record))
}

/// Runs the command-line tool in-process and returns its exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let mut argv = vec!["concap".to_string()];
    argv.extend(args);
    py.detach(|| concap::cli::run(argv))
}

#[pymodule]
fn concap_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Backend>()?;
    m.add_function(wrap_pyfunction!(make_instance_id, m)?)?;
    m.add_function(wrap_pyfunction!(render_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(parse_generation, m)?)?;
    m.add_function(wrap_pyfunction!(parse_recast, m)?)?;
    m.add_function(wrap_pyfunction!(templates_checksum, m)?)?;
    m.add_function(wrap_pyfunction!(p_yes, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(entailment_examples, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    let types: Vec<&str> = MisalignmentType::ALL.iter().map(|t| t.token()).collect();
    m.add("MISALIGNMENT_TYPES", types)?;
    Ok(())
}
