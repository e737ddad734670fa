//! Entailment conversion, canonical JSONL persistence and dataset statistics.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::curation::AssignedCaption;
use crate::types::{CaptionInstance, ContrastRecord, CoreError, EntailmentExample, MisalignmentType, Source, Split};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Schema {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("serializing record: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl DatasetError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// A record that can live in a canonical dataset file.
pub trait DatasetRecord: Serialize + DeserializeOwned {
    fn instance_id(&self) -> &str;
    fn check(&self) -> Result<(), CoreError>;
}

impl DatasetRecord for ContrastRecord {
    fn instance_id(&self) -> &str {
        &self.instance_id
    }
    fn check(&self) -> Result<(), CoreError> {
        self.validate()
    }
}

impl DatasetRecord for EntailmentExample {
    fn instance_id(&self) -> &str {
        &self.instance_id
    }
    fn check(&self) -> Result<(), CoreError> {
        self.validate()
    }
}

impl DatasetRecord for AssignedCaption {
    fn instance_id(&self) -> &str {
        &self.instance_id
    }
    fn check(&self) -> Result<(), CoreError> {
        self.instance.validate()
    }
}

/// The positive (caption) and negative (contrast caption) examples of one
/// record. Both share the record's instance id.
pub fn to_entailment_examples(r: &ContrastRecord) -> [EntailmentExample; 2] {
    [
        EntailmentExample {
            instance_id: r.instance_id.clone(),
            video: r.video.clone(),
            text: r.caption.clone(),
            label: 1,
            misalignment: None,
        },
        EntailmentExample {
            instance_id: r.instance_id.clone(),
            video: r.video.clone(),
            text: r.contrast_caption.clone(),
            label: 0,
            misalignment: Some(r.misalignment),
        },
    ]
}

pub fn entailment_dataset(records: &[ContrastRecord]) -> Vec<EntailmentExample> {
    records.iter().flat_map(to_entailment_examples).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub record_count: usize,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` through a temporary file in the destination directory so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| DatasetError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| DatasetError::io(path, e))?;
    tmp.persist(path).map_err(|e| DatasetError::io(path, e.error))?;
    Ok(())
}

/// Serializes records one per line, in the given order.
pub fn encode_jsonl<T: Serialize>(records: &[T]) -> Result<String, DatasetError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Writes records in the given order. Used for intermediate stage files
/// whose order is already deterministic.
pub fn write_jsonl<T: Serialize>(records: &[T], path: &Path) -> Result<DatasetManifest, DatasetError> {
    let body = encode_jsonl(records)?;
    write_atomic(path, body.as_bytes())?;
    Ok(DatasetManifest {
        record_count: records.len(),
        sha256: sha256_hex(body.as_bytes()),
    })
}

/// Reads one JSON object per line. Blank lines are skipped; errors name the
/// 1-based line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    parse_jsonl(&text, path)
}

fn parse_jsonl<T: DeserializeOwned>(text: &str, path: &Path) -> Result<Vec<T>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| DatasetError::Schema {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Canonical encoding: records sorted by instance id, then by their
/// serialized form.
pub fn encode_dataset<T: DatasetRecord>(records: &[T]) -> Result<String, DatasetError> {
    let mut lines = records
        .iter()
        .map(|r| Ok((r.instance_id().to_string(), serde_json::to_string(r)?)))
        .collect::<Result<Vec<_>, DatasetError>>()?;
    lines.sort();
    let mut out = String::new();
    for (_, line) in lines {
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_dataset<T: DatasetRecord>(records: &[T], path: &Path) -> Result<DatasetManifest, DatasetError> {
    let body = encode_dataset(records)?;
    write_atomic(path, body.as_bytes())?;
    Ok(DatasetManifest {
        record_count: records.len(),
        sha256: sha256_hex(body.as_bytes()),
    })
}

/// Reads and validates a dataset file.
pub fn read_dataset<T: DatasetRecord>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    let records: Vec<T> = parse_jsonl(&text, path)?;
    let mut line = 0;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    for r in &records {
        line = lines.next().map_or(line, |(i, _)| i + 1);
        r.check().map_err(|e| DatasetError::Schema {
            path: path.to_path_buf(),
            line,
            reason: e.to_string(),
        })?;
    }
    Ok(records)
}

/// `base.jsonl` becomes `base.train.jsonl` and so on.
pub fn shard_path(path: &Path, split: Split) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("jsonl");
    path.with_file_name(format!("{stem}.{}.{ext}", split.token()))
}

/// Writes one canonical file per split; splits without records still get an
/// empty file.
pub fn write_sharded<T: DatasetRecord + Clone>(
    records: &[T],
    path: &Path,
    split_of: impl Fn(&T) -> Split,
) -> Result<Vec<(Split, PathBuf, DatasetManifest)>, DatasetError> {
    let mut out = Vec::new();
    for split in Split::ALL {
        let part: Vec<T> = records.iter().filter(|r| split_of(r) == split).cloned().collect();
        let shard = shard_path(path, split);
        let manifest = write_dataset(&part, &shard)?;
        out.push((split, shard, manifest));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSplitCount {
    pub source: Source,
    pub split: Split,
    pub entailment: usize,
    pub nle: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeShare {
    pub misalignment: MisalignmentType,
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attrition {
    pub parsed: usize,
    pub contradiction_dropped: usize,
    pub nle_dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub records: usize,
    pub entailment_total: usize,
    pub nle_total: usize,
    /// Every source × split cell, in declaration order.
    pub counts: Vec<SourceSplitCount>,
    /// Empty when there are no records.
    pub distribution: Vec<TypeShare>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attrition: Option<Attrition>,
}

/// Counts over records that passed both filters. Each record contributes
/// two entailment examples and one NLE example.
pub fn dataset_stats(records: &[ContrastRecord], attrition: Option<Attrition>) -> StatsReport {
    let mut counts = Vec::new();
    for source in Source::ALL {
        for split in Split::ALL {
            let n = records
                .iter()
                .filter(|r| r.video.source == source && r.split == split)
                .count();
            counts.push(SourceSplitCount {
                source,
                split,
                entailment: 2 * n,
                nle: n,
            });
        }
    }
    let distribution = if records.is_empty() {
        Vec::new()
    } else {
        MisalignmentType::ALL
            .iter()
            .map(|&m| {
                let count = records.iter().filter(|r| r.misalignment == m).count();
                TypeShare {
                    misalignment: m,
                    count,
                    fraction: count as f64 / records.len() as f64,
                }
            })
            .collect()
    };
    StatsReport {
        records: records.len(),
        entailment_total: 2 * records.len(),
        nle_total: records.len(),
        counts,
        distribution,
        attrition,
    }
}

impl StatsReport {
    /// Source × split table for both tasks, followed by the type
    /// distribution and attrition counters.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:<11} {:>8} {:>8} {:>8} {:>8}", "source", "task", "train", "val", "test", "total");
        for source in Source::ALL {
            let cells: Vec<&SourceSplitCount> = self.counts.iter().filter(|c| c.source == source).collect();
            for (task, pick) in [("entailment", 0usize), ("nle", 1)] {
                let vals: Vec<usize> = Split::ALL
                    .iter()
                    .map(|s| {
                        cells
                            .iter()
                            .find(|c| c.split == *s)
                            .map_or(0, |c| if pick == 0 { c.entailment } else { c.nle })
                    })
                    .collect();
                let _ = writeln!(
                    out,
                    "{:<10} {:<11} {:>8} {:>8} {:>8} {:>8}",
                    source.token(),
                    task,
                    vals[0],
                    vals[1],
                    vals[2],
                    vals.iter().sum::<usize>()
                );
            }
        }
        let _ = writeln!(out, "total      entailment  {:>35}", self.entailment_total);
        let _ = writeln!(out, "total      nle         {:>35}", self.nle_total);
        if !self.distribution.is_empty() {
            let _ = writeln!(out);
            let _ = writeln!(out, "{:<14} {:>8} {:>9}", "misalignment", "count", "percent");
            for share in &self.distribution {
                let _ = writeln!(
                    out,
                    "{:<14} {:>8} {:>8.1}%",
                    share.misalignment.token(),
                    share.count,
                    100.0 * share.fraction
                );
            }
        }
        if let Some(a) = &self.attrition {
            let _ = writeln!(out);
            let _ = writeln!(out, "parsed                {:>8}", a.parsed);
            let _ = writeln!(out, "contradiction-dropped {:>8}", a.contradiction_dropped);
            let _ = writeln!(out, "nle-dropped           {:>8}", a.nle_dropped);
        }
        out
    }
}

/// Caption instances keep the order they were given in; they carry no id.
pub fn write_captions(captions: &[CaptionInstance], path: &Path) -> Result<DatasetManifest, DatasetError> {
    write_jsonl(captions, path)
}

pub fn read_captions(path: &Path) -> Result<Vec<CaptionInstance>, DatasetError> {
    let captions: Vec<CaptionInstance> = read_jsonl(path)?;
    for (i, c) in captions.iter().enumerate() {
        c.validate().map_err(|e| DatasetError::Schema {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
    }
    Ok(captions)
}
