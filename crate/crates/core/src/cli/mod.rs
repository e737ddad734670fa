//! Command-line front end. Each subcommand runs one stage, writes its
//! outputs atomically and leaves a `.manifest.json` beside them.

mod config;

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::backends::{BackendError, Gateway};
use crate::curation::{
    assign_corpus, filter_human_hard, score_corpus, select_hard_corpus, AssignedCaption, StageError,
};
use crate::dataset::{
    dataset_stats, entailment_dataset, read_captions, read_dataset, read_jsonl, sha256_hex, write_atomic,
    write_captions, write_dataset, write_sharded, Attrition, DatasetError, DatasetManifest,
};
use crate::eval::{
    eval_entailment, eval_nle, eval_retrieval, eval_vqa, EvalError, EvalReport, RetrievalQuery, RunMetadata,
    VqaInstance,
};
use crate::genfilter::prompts::templates_checksum;
use crate::genfilter::{apply_filters, generate_contrasts};
use crate::types::{ContrastRecord, EntailmentExample, VideoRef};

pub use config::{BackendConfig, Paths, PipelineConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{stage}: {message}")]
    Data { stage: &'static str, message: String },
    #[error("{stage}: backend: {message}")]
    Backend { stage: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Data { .. } => 2,
            CliError::Backend { .. } => 3,
        }
    }
}

trait StageContext<T> {
    fn in_stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageContext<T> for Result<T, DatasetError> {
    fn in_stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|e| CliError::Data {
            stage,
            message: e.to_string(),
        })
    }
}

impl<T> StageContext<T> for Result<T, BackendError> {
    fn in_stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|e| CliError::Backend {
            stage,
            message: e.to_string(),
        })
    }
}

impl<T> StageContext<T> for Result<T, StageError> {
    fn in_stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|e| match e {
            StageError::Backend(e) => CliError::Backend {
                stage,
                message: e.to_string(),
            },
            StageError::Curation(e) => CliError::Data {
                stage,
                message: e.to_string(),
            },
        })
    }
}

impl<T> StageContext<T> for Result<T, EvalError> {
    fn in_stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|e| match e {
            EvalError::Backend(e) => CliError::Backend {
                stage,
                message: e.to_string(),
            },
            other => CliError::Data {
                stage,
                message: other.to_string(),
            },
        })
    }
}

fn parse_token<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BackendMode {
    Mock,
    Scripted,
    Http,
}

/// Flags that override keys of the JSON config.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// JSON config file; flags below override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendMode>,
    /// Scripted backend fixture.
    #[arg(long, global = true)]
    pub fixture: Option<PathBuf>,
    /// Base URL of an HTTP backend.
    #[arg(long, global = true)]
    pub url: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub retain_k: Option<usize>,
    #[arg(long, global = true)]
    pub challenge_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub contrast_drop_above: Option<f64>,
    #[arg(long, global = true)]
    pub nle_drop_below: Option<f64>,
    #[arg(long, global = true)]
    pub human_hard_threshold: Option<f64>,
    /// retain-below or retain-at-or-above
    #[arg(long, global = true, value_parser = parse_token::<crate::curation::HumanHardDirection>)]
    pub human_hard_direction: Option<crate::curation::HumanHardDirection>,
    /// multiple-only or all-challenging
    #[arg(long, global = true, value_parser = parse_token::<crate::curation::EventGatePolicy>)]
    pub event_gate_policy: Option<crate::curation::EventGatePolicy>,
    /// same-tuple or all-positives
    #[arg(long, global = true, value_parser = parse_token::<crate::eval::PositiveSet>)]
    pub positive_set: Option<crate::eval::PositiveSet>,
    /// lexicon or backend
    #[arg(long, global = true, value_parser = parse_token::<crate::curation::PosMode>)]
    pub pos_mode: Option<crate::curation::PosMode>,
    /// Maximum in-flight backend requests.
    #[arg(long, global = true)]
    pub concurrency: Option<usize>,
    /// Also write one file per split.
    #[arg(long, global = true)]
    pub shard_by_split: bool,
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    #[arg(long, global = true)]
    pub max_output_tokens: Option<u32>,
    #[arg(long, global = true)]
    pub top_p: Option<f64>,
    #[arg(long, global = true)]
    pub top_k: Option<u32>,
    /// Directory for outputs whose path is not given explicitly.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => PipelineConfig::load(path).map_err(CliError::Config)?,
            None => PipelineConfig::default(),
        };
        match self.backend {
            Some(BackendMode::Mock) => c.backend = BackendConfig::Mock,
            Some(BackendMode::Scripted) => {
                c.backend = BackendConfig::Scripted {
                    fixture: self.fixture.clone(),
                }
            }
            Some(BackendMode::Http) => {
                let url = self
                    .url
                    .clone()
                    .ok_or_else(|| CliError::Usage("--backend http needs --url".into()))?;
                c.backend = BackendConfig::Http { url };
            }
            None => {
                if let (Some(f), BackendConfig::Scripted { fixture }) = (&self.fixture, &mut c.backend) {
                    *fixture = Some(f.clone());
                }
                if let (Some(u), BackendConfig::Http { url }) = (&self.url, &mut c.backend) {
                    *url = u.clone();
                }
            }
        }
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { c.$field = v; } )* };
        }
        set!(
            seed,
            retain_k,
            challenge_threshold,
            contrast_drop_above,
            nle_drop_below,
            human_hard_threshold,
            human_hard_direction,
            event_gate_policy,
            positive_set,
            pos_mode,
            concurrency
        );
        if self.shard_by_split {
            c.shard_by_split = true;
        }
        if let Some(v) = self.temperature {
            c.generation.temperature = v;
        }
        if let Some(v) = self.max_output_tokens {
            c.generation.max_output_tokens = v;
        }
        if let Some(v) = self.top_p {
            c.generation.top_p = v;
        }
        if let Some(v) = self.top_k {
            c.generation.top_k = v;
        }
        if let Some(dir) = &self.output_dir {
            c.paths.output = Some(dir.clone());
        }
        c.validate().map_err(CliError::Config)?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct Io {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score each caption by its best frame and flag challenging ones.
    ScoreTemporal(Io),
    /// Keep the retain_k lowest-scored captions per video.
    SelectHard(Io),
    /// Split scored captions at the human-hard threshold.
    HumanHard(Io),
    /// Assign a misalignment type to every caption.
    Assign(Io),
    /// Prompt the generator and parse contrast records.
    Generate(Io),
    /// Apply the contradiction and explanation filters.
    Filter(Io),
    /// Write the entailment and NLE datasets plus statistics.
    Build {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Directory receiving entailment.jsonl, nle.jsonl and stats.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Manifest of the filter stage, for attrition counts.
        #[arg(long)]
        attrition: Option<PathBuf>,
    },
    /// Statistics report for an NLE dataset file.
    Stats {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        attrition: Option<PathBuf>,
    },
    EvalEntailment(Io),
    EvalNle(Io),
    EvalRetrieval {
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        videos: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    EvalVqa {
        #[arg(long)]
        questions: PathBuf,
        #[arg(long)]
        videos: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Parser)]
#[command(name = "concap", version, about = "Contrast-caption dataset pipeline and evaluation")]
pub struct Cli {
    /// Do not print report tables.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct OutputDigest {
    path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    record_count: Option<usize>,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct RunManifest {
    stage: &'static str,
    config_checksum: String,
    config: Value,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    backend: Option<String>,
    templates_checksum: String,
    inputs: Vec<FileDigest>,
    outputs: Vec<OutputDigest>,
    counts: Value,
}

struct Run {
    stage: &'static str,
    quiet: bool,
    config: PipelineConfig,
    gateway: Option<Gateway>,
    inputs: Vec<FileDigest>,
    outputs: Vec<OutputDigest>,
}

fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

impl Run {
    fn new(stage: &'static str, config: PipelineConfig, quiet: bool) -> Self {
        Run {
            stage,
            quiet,
            config,
            gateway: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn show(&self, text: &str) {
        if !self.quiet {
            print!("{text}");
        }
    }

    fn gateway(&mut self) -> Result<Gateway, CliError> {
        if self.gateway.is_none() {
            let backend = self.config.build_backend().map_err(CliError::Config)?;
            self.gateway = Some(Gateway::new(backend, self.config.concurrency));
        }
        Ok(self.gateway.clone().unwrap())
    }

    fn metadata(&self) -> RunMetadata {
        RunMetadata {
            backend: self.gateway.as_ref().map(Gateway::identity).unwrap_or_default(),
            seed: Some(self.config.seed),
            config_checksum: Some(self.config.checksum()),
        }
    }

    /// Records the input's checksum and returns it unchanged.
    fn input(&mut self, path: Option<PathBuf>, fallback: Option<&PathBuf>) -> Result<PathBuf, CliError> {
        let path = path
            .or_else(|| fallback.cloned())
            .ok_or_else(|| CliError::Usage(format!("{}: --input is required", self.stage)))?;
        let bytes = fs::read(&path).map_err(|e| CliError::Data {
            stage: self.stage,
            message: format!("{}: {e}", path.display()),
        })?;
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(path)
    }

    fn output(&self, path: Option<PathBuf>, default_name: &str) -> Result<PathBuf, CliError> {
        path.or_else(|| self.config.paths.output.as_ref().map(|d| d.join(default_name)))
            .ok_or_else(|| CliError::Usage(format!("{}: --output or --output-dir is required", self.stage)))
    }

    fn wrote(&mut self, path: &Path, manifest: DatasetManifest) {
        self.outputs.push(OutputDigest {
            path: path.display().to_string(),
            record_count: Some(manifest.record_count),
            sha256: manifest.sha256,
        });
    }

    fn write_text(&mut self, path: &Path, text: &str) -> Result<(), CliError> {
        write_atomic(path, text.as_bytes()).in_stage(self.stage)?;
        self.outputs.push(OutputDigest {
            path: path.display().to_string(),
            record_count: None,
            sha256: sha256_hex(text.as_bytes()),
        });
        Ok(())
    }

    fn finish(self, manifest_path: &Path, counts: Value) -> Result<(), CliError> {
        let manifest = RunManifest {
            stage: self.stage,
            config_checksum: self.config.checksum(),
            config: self.config.reproducible_view(),
            seed: self.config.seed,
            backend: self.gateway.as_ref().map(Gateway::identity),
            templates_checksum: templates_checksum(),
            inputs: self.inputs,
            outputs: self.outputs,
            counts,
        };
        write_atomic(manifest_path, to_pretty_json(&manifest).as_bytes()).in_stage(self.stage)
    }
}

/// `out.jsonl` gets `out.jsonl.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn read_attrition(path: &Path, stage: &'static str) -> Result<Attrition, CliError> {
    let data_err = |message: String| CliError::Data { stage, message };
    let raw = fs::read_to_string(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    let manifest: Value = serde_json::from_str(&raw).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    let count = |key: &str| {
        manifest["counts"][key]
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| data_err(format!("{}: counts.{key} missing", path.display())))
    };
    Ok(Attrition {
        parsed: count("input")?,
        contradiction_dropped: count("contrast_dropped")?,
        nle_dropped: count("nle_dropped")?,
    })
}

fn report_output(run: &mut Run, report: &EvalReport, output: &Path) -> Result<(), CliError> {
    run.write_text(output, &to_pretty_json(report))?;
    run.show(&report.render_table());
    Ok(())
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let config = cli.overrides.resolve()?;
    let quiet = cli.quiet;
    match cli.command {
        Command::ScoreTemporal(io) => {
            let mut run = Run::new("score-temporal", config, quiet);
            let corpus = run.config.paths.corpus.clone();
            let input = run.input(io.input, corpus.as_ref())?;
            let output = run.output(io.output, "scored.jsonl")?;
            let captions = read_captions(&input).in_stage(run.stage)?;
            let gw = run.gateway()?;
            let scored = score_corpus(&gw, &captions, run.config.challenge_threshold).in_stage(run.stage)?;
            let challenging = scored.iter().filter(|c| c.challenge_flag == Some(true)).count();
            let m = write_captions(&scored, &output).in_stage(run.stage)?;
            run.wrote(&output, m);
            run.finish(
                &manifest_path(&output),
                json!({"input": captions.len(), "scored": scored.len(), "challenging": challenging}),
            )
        }
        Command::SelectHard(io) => {
            let mut run = Run::new("select-hard", config, quiet);
            let input = run.input(io.input, None)?;
            let output = run.output(io.output, "hard.jsonl")?;
            let captions = read_captions(&input).in_stage(run.stage)?;
            let hard = select_hard_corpus(&captions, run.config.retain_k)
                .map_err(StageError::from)
                .in_stage(run.stage)?;
            let m = write_captions(&hard, &output).in_stage(run.stage)?;
            run.wrote(&output, m);
            run.finish(&manifest_path(&output), json!({"input": captions.len(), "retained": hard.len()}))
        }
        Command::HumanHard(io) => {
            let mut run = Run::new("human-hard", config, quiet);
            let input = run.input(io.input, None)?;
            let output = run.output(io.output, "human_hard.jsonl")?;
            let captions = read_captions(&input).in_stage(run.stage)?;
            let split = filter_human_hard(&captions, run.config.human_hard_threshold, run.config.human_hard_direction)
                .map_err(StageError::from)
                .in_stage(run.stage)?;
            let m = write_captions(&split.retained, &output).in_stage(run.stage)?;
            run.wrote(&output, m);
            run.finish(
                &manifest_path(&output),
                json!({"input": captions.len(), "retained": split.retained.len(), "discarded": split.discarded}),
            )
        }
        Command::Assign(io) => {
            let mut run = Run::new("assign", config, quiet);
            let input = run.input(io.input, None)?;
            let output = run.output(io.output, "assigned.jsonl")?;
            let captions = read_captions(&input).in_stage(run.stage)?;
            let gw = run.gateway()?;
            let c = &run.config;
            let assigned = assign_corpus(&gw, &captions, c.seed, c.event_gate_policy, c.pos_mode).in_stage(run.stage)?;
            let mut by_type = serde_json::Map::new();
            for m in crate::types::MisalignmentType::ALL {
                let n = assigned.iter().filter(|a| a.misalignment == m).count();
                by_type.insert(m.token().into(), json!(n));
            }
            let m = write_dataset(&assigned, &output).in_stage(run.stage)?;
            run.wrote(&output, m);
            run.finish(&manifest_path(&output), json!({"input": captions.len(), "by_type": by_type}))
        }
        Command::Generate(io) => {
            let mut run = Run::new("generate", config, quiet);
            let input = run.input(io.input, None)?;
            let output = run.output(io.output, "contrasts.jsonl")?;
            let assigned: Vec<AssignedCaption> = read_dataset(&input).in_stage(run.stage)?;
            let gw = run.gateway()?;
            let (records, report) = generate_contrasts(&gw, &assigned, &run.config.generation).in_stage(run.stage)?;
            let m = write_dataset(&records, &output).in_stage(run.stage)?;
            run.wrote(&output, m);
            run.finish(&manifest_path(&output), serde_json::to_value(&report).unwrap())
        }
        Command::Filter(io) => {
            let mut run = Run::new("filter", config, quiet);
            let input = run.input(io.input, None)?;
            let output = run.output(io.output, "filtered.jsonl")?;
            let records: Vec<ContrastRecord> = read_dataset(&input).in_stage(run.stage)?;
            let gw = run.gateway()?;
            let (kept, report) = apply_filters(&gw, &records, &run.config.thresholds()).in_stage(run.stage)?;
            let m = write_dataset(&kept, &output).in_stage(run.stage)?;
            run.wrote(&output, m);
            run.finish(&manifest_path(&output), serde_json::to_value(&report).unwrap())
        }
        Command::Build {
            input,
            output,
            attrition,
        } => {
            let mut run = Run::new("build", config, quiet);
            let input = run.input(input, None)?;
            let dir = output
                .or_else(|| run.config.paths.output.clone())
                .ok_or_else(|| CliError::Usage("build: --output or --output-dir is required".into()))?;
            let records: Vec<ContrastRecord> = read_dataset(&input).in_stage(run.stage)?;
            if let Some(r) = records
                .iter()
                .find(|r| r.filter_scores.contrast_nli.is_none() || r.filter_scores.nle_nli.is_none())
            {
                return Err(CliError::Data {
                    stage: run.stage,
                    message: format!("record {} has not passed both filters", r.instance_id),
                });
            }
            let attrition = match attrition {
                Some(path) => {
                    run.input(Some(path.clone()), None)?;
                    Some(read_attrition(&path, run.stage)?)
                }
                None => None,
            };
            let examples = entailment_dataset(&records);
            let entailment_path = dir.join("entailment.jsonl");
            let nle_path = dir.join("nle.jsonl");
            let m = write_dataset(&examples, &entailment_path).in_stage(run.stage)?;
            run.wrote(&entailment_path, m);
            let m = write_dataset(&records, &nle_path).in_stage(run.stage)?;
            run.wrote(&nle_path, m);
            if run.config.shard_by_split {
                let split_of: HashMap<&str, crate::types::Split> =
                    records.iter().map(|r| (r.instance_id.as_str(), r.split)).collect();
                let shards = write_sharded(&examples, &entailment_path, |e: &EntailmentExample| {
                    split_of[e.instance_id.as_str()]
                })
                .in_stage(run.stage)?;
                for (_, path, m) in shards {
                    run.wrote(&path, m);
                }
                for (_, path, m) in write_sharded(&records, &nle_path, |r| r.split).in_stage(run.stage)? {
                    run.wrote(&path, m);
                }
            }
            let stats = dataset_stats(&records, attrition);
            run.write_text(&dir.join("stats.json"), &to_pretty_json(&stats))?;
            run.write_text(&dir.join("stats.txt"), &stats.render_table())?;
            run.show(&stats.render_table());
            run.finish(
                &dir.join("build.manifest.json"),
                json!({"records": records.len(), "entailment": examples.len(), "nle": records.len()}),
            )
        }
        Command::Stats {
            input,
            output,
            attrition,
        } => {
            let mut run = Run::new("stats", config, quiet);
            let input = run.input(input, None)?;
            let records: Vec<ContrastRecord> = read_dataset(&input).in_stage(run.stage)?;
            let attrition = match attrition {
                Some(path) => {
                    run.input(Some(path.clone()), None)?;
                    Some(read_attrition(&path, run.stage)?)
                }
                None => None,
            };
            let stats = dataset_stats(&records, attrition);
            run.show(&stats.render_table());
            let output = output.or_else(|| run.config.paths.output.as_ref().map(|d| d.join("stats.json")));
            if let Some(output) = output {
                run.write_text(&output, &to_pretty_json(&stats))?;
                run.finish(&manifest_path(&output), json!({"records": records.len()}))?;
            }
            Ok(())
        }
        Command::EvalEntailment(io) => {
            let mut run = Run::new("eval-entailment", config, quiet);
            let input = run.input(io.input, None)?;
            let output = run.output(io.output, "eval_entailment.json")?;
            let examples: Vec<EntailmentExample> = read_dataset(&input).in_stage(run.stage)?;
            let gw = run.gateway()?;
            let report = eval_entailment(&gw, &examples, run.config.positive_set, run.metadata()).in_stage(run.stage)?;
            report_output(&mut run, &report, &output)?;
            run.finish(&manifest_path(&output), json!({"evaluated": report.evaluated}))
        }
        Command::EvalNle(io) => {
            let mut run = Run::new("eval-nle", config, quiet);
            let input = run.input(io.input, None)?;
            let output = run.output(io.output, "eval_nle.json")?;
            let records: Vec<ContrastRecord> = read_dataset(&input).in_stage(run.stage)?;
            let gw = run.gateway()?;
            let report = eval_nle(&gw, &records, run.metadata());
            report_output(&mut run, &report, &output)?;
            run.finish(
                &manifest_path(&output),
                json!({"evaluated": report.evaluated, "excluded": report.excluded}),
            )
        }
        Command::EvalRetrieval {
            queries,
            videos,
            output,
        } => {
            let mut run = Run::new("eval-retrieval", config, quiet);
            let queries_path = run.input(Some(queries), None)?;
            let videos_path = run.input(Some(videos), None)?;
            let output = run.output(output, "eval_retrieval.json")?;
            let queries: Vec<RetrievalQuery> = read_jsonl(&queries_path).in_stage(run.stage)?;
            let videos = read_videos(&videos_path, run.stage)?;
            let gw = run.gateway()?;
            let report = eval_retrieval(&gw, &queries, &videos, run.metadata()).in_stage(run.stage)?;
            report_output(&mut run, &report, &output)?;
            run.finish(
                &manifest_path(&output),
                json!({"queries": queries.len(), "candidates": videos.len()}),
            )
        }
        Command::EvalVqa {
            questions,
            videos,
            output,
        } => {
            let mut run = Run::new("eval-vqa", config, quiet);
            let questions_path = run.input(Some(questions), None)?;
            let videos_path = run.input(Some(videos), None)?;
            let output = run.output(output, "eval_vqa.json")?;
            let instances: Vec<VqaInstance> = read_jsonl(&questions_path).in_stage(run.stage)?;
            let videos = read_videos(&videos_path, run.stage)?;
            let gw = run.gateway()?;
            let params = run.config.generation;
            let report = eval_vqa(&gw, &instances, &videos, &params, run.metadata()).in_stage(run.stage)?;
            report_output(&mut run, &report, &output)?;
            run.finish(
                &manifest_path(&output),
                json!({"evaluated": report.evaluated, "excluded": report.excluded}),
            )
        }
    }
}

fn read_videos(path: &Path, stage: &'static str) -> Result<Vec<VideoRef>, CliError> {
    let videos: Vec<VideoRef> = read_jsonl(path).in_stage(stage)?;
    for (i, v) in videos.iter().enumerate() {
        v.validate().map_err(|e| CliError::Data {
            stage,
            message: format!("{}:{}: {e}", path.display(), i + 1),
        })?;
    }
    Ok(videos)
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
