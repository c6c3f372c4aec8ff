//! Suite runner: deterministic instance streams, a worker pool over
//! episodes, an append-only JSONL record file and offline aggregation.

pub mod mock;
pub mod report;
pub mod summary;

use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::envs::{generate_instance, GenerateError};
use crate::llm::{Gateway, GatewayConfig, HttpBackend, HttpConfig, RetryPolicy, API_KEY_ENV, BASE_URL_ENV};
use crate::model::{DifficultyParams, EnvKind, EpisodeRecord, Method, TaskInstance, DIFFICULTY_BUCKETS, RECORD_SCHEMA_VERSION};
use crate::orchestrator::{run_with_prompts, OrchestratorConfig, OrchestratorError};
use crate::prompt::{PromptError, PromptSet};
use crate::rng::mix_seed;
use crate::sandbox::Sandbox;

pub use summary::{summarize, SuiteSummary};

pub const DEFAULT_SAMPLES_PER_TASK: u32 = 140;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// Scripted offline replies, see [`mock`].
    #[default]
    Mock,
    /// OpenAI-compatible chat completions endpoint.
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSettings {
    pub kind: BackendKind,
    /// Overrides the base URL from the environment.
    pub base_url: Option<String>,
    pub request_timeout_secs: f64,
    pub token_budget: Option<u64>,
    /// Minimum spacing between requests, in milliseconds.
    pub min_interval_ms: u64,
    pub max_retries: u32,
}

impl Default for BackendSettings {
    fn default() -> Self {
        BackendSettings {
            kind: BackendKind::Mock,
            base_url: None,
            request_timeout_secs: 120.0,
            token_budget: None,
            min_interval_ms: 0,
            max_retries: RetryPolicy::default().max_retries,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub tasks: Vec<EnvKind>,
    pub methods: Vec<Method>,
    pub samples_per_task: u32,
    pub base_seed: u64,
    /// Explicit difficulty settings; tasks without an entry use the default
    /// five-bucket sweep. Samples cycle through a task's settings.
    pub difficulty: Vec<DifficultyParams>,
    /// Round caps to run the multi-round method with; empty means only
    /// `orchestrator.max_rounds`.
    pub round_sweep: Vec<u32>,
    /// Parallel episodes; 0 picks the number of CPUs.
    pub workers: usize,
    /// Overrides each instance's execution limit, in seconds.
    pub exec_timeout: Option<f64>,
    /// Directory holding `<version>/<template>.txt`; built-in templates
    /// when absent.
    pub prompts_dir: Option<PathBuf>,
    /// Keep wall-clock times in records. Off makes record files
    /// byte-reproducible.
    pub record_timing: bool,
    pub orchestrator: OrchestratorConfig,
    pub backend: BackendSettings,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            tasks: EnvKind::ALL.to_vec(),
            methods: Method::ALL.to_vec(),
            samples_per_task: DEFAULT_SAMPLES_PER_TASK,
            base_seed: 0,
            difficulty: Vec::new(),
            round_sweep: Vec::new(),
            workers: 0,
            exec_timeout: None,
            prompts_dir: None,
            record_timing: true,
            orchestrator: OrchestratorConfig::default(),
            backend: BackendSettings::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid suite config: {0}")]
    Config(String),
    #[error("cannot read suite config: {0}")]
    ConfigSyntax(#[from] toml::de::Error),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path} line {line}: {msg}")]
    BadRecord { path: PathBuf, line: usize, msg: String },
    #[error("record schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: u64, expected: u32 },
    #[error("instance generation failed for {env} sample {sample}: {source}")]
    Generate {
        env: EnvKind,
        sample: u32,
        source: GenerateError,
    },
    #[error(transparent)]
    Orchestrator(#[from] OrchestratorError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl SuiteConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let cfg: SuiteConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.samples_per_task == 0 {
            return bad("samples_per_task must be at least 1");
        }
        if self.tasks.is_empty() || self.methods.is_empty() {
            return bad("tasks and methods must not be empty");
        }
        if self.round_sweep.contains(&0) {
            return bad("round_sweep entries must be at least 1");
        }
        if let Some(t) = self.exec_timeout {
            if !(t > 0.0 && t.is_finite()) {
                return bad("exec_timeout must be positive");
            }
        }
        for d in &self.difficulty {
            d.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        }
        self.orchestrator.validate()?;
        self.prompt_set()?;
        Ok(())
    }

    fn prompt_set(&self) -> Result<PromptSet, PromptError> {
        match &self.prompts_dir {
            Some(dir) => PromptSet::load(dir, &self.orchestrator.prompts),
            None => PromptSet::builtin(&self.orchestrator.prompts),
        }
    }

    /// Difficulty settings a task's samples cycle through.
    pub fn difficulties(&self, env: EnvKind) -> Vec<DifficultyParams> {
        let explicit: Vec<DifficultyParams> = self
            .difficulty
            .iter()
            .filter(|d| d.env_kind() == env)
            .cloned()
            .collect();
        if explicit.is_empty() {
            (0..DIFFICULTY_BUCKETS).map(|b| DifficultyParams::bucket(env, b)).collect()
        } else {
            explicit
        }
    }

    fn round_caps(&self) -> Vec<u32> {
        if self.round_sweep.is_empty() {
            vec![self.orchestrator.max_rounds]
        } else {
            self.round_sweep.clone()
        }
    }
}

/// Seed of sample `sample` of task `env`; independent of everything else in
/// the config.
pub fn sample_seed(base_seed: u64, env: EnvKind, sample: u32) -> u64 {
    mix_seed(mix_seed(base_seed, env.code() as u64), sample as u64)
}

/// The instance for one (task, sample) pair.
pub fn suite_instance(cfg: &SuiteConfig, env: EnvKind, sample: u32) -> Result<TaskInstance, BenchError> {
    let ds = cfg.difficulties(env);
    let d = &ds[sample as usize % ds.len()];
    let mut inst = generate_instance(env, d, sample_seed(cfg.base_seed, env, sample))
        .map_err(|source| BenchError::Generate { env, sample, source })?;
    if let Some(t) = cfg.exec_timeout {
        inst.exec_timeout = t;
    }
    Ok(inst)
}

/// Identity of an episode within a record file.
pub fn record_key(r: &EpisodeRecord) -> String {
    key(r.instance.env_kind, r.instance.seed, r.method, r.max_rounds)
}

fn key(env: EnvKind, seed: u64, method: Method, max_rounds: u32) -> String {
    format!("{}/{seed}/{}/{max_rounds}", env.as_str(), method.as_str())
}

/// One scheduled episode.
#[derive(Debug, Clone)]
pub struct Job {
    pub env: EnvKind,
    pub sample: u32,
    pub method: Method,
    pub max_rounds: u32,
}

/// All episodes of a suite in their canonical order.
pub fn plan_jobs(cfg: &SuiteConfig) -> Vec<Job> {
    let mut jobs = Vec::new();
    for &env in &cfg.tasks {
        for sample in 0..cfg.samples_per_task {
            for &method in &cfg.methods {
                let caps = if method == Method::CodeSymbolicPlanner {
                    cfg.round_caps()
                } else {
                    vec![1]
                };
                for max_rounds in caps {
                    jobs.push(Job {
                        env,
                        sample,
                        method,
                        max_rounds,
                    });
                }
            }
        }
    }
    jobs
}

/// Where episodes get their LLM.
#[derive(Clone)]
pub enum Backend {
    /// A fresh scripted backend per episode.
    Mock,
    /// One gateway shared by all episodes.
    Shared(Gateway),
}

impl Backend {
    pub fn from_settings(s: &BackendSettings) -> Result<Self, BenchError> {
        match s.kind {
            BackendKind::Mock => Ok(Backend::Mock),
            BackendKind::Http => {
                let mut http = match (&s.base_url, HttpConfig::from_env()) {
                    (None, Some(h)) => h,
                    (Some(url), _) => HttpConfig {
                        base_url: url.clone(),
                        api_key: std::env::var(API_KEY_ENV).ok(),
                        timeout: Duration::ZERO,
                    },
                    (None, None) => {
                        return Err(BenchError::Config(format!(
                            "the http backend needs a base URL (set {BASE_URL_ENV})"
                        )))
                    }
                };
                http.timeout = Duration::from_secs_f64(s.request_timeout_secs);
                let gw = Gateway::new(
                    Arc::new(HttpBackend::new(http)),
                    GatewayConfig {
                        retry: RetryPolicy {
                            max_retries: s.max_retries,
                            ..RetryPolicy::default()
                        },
                        token_budget: s.token_budget,
                        min_interval: Duration::from_millis(s.min_interval_ms),
                    },
                );
                Ok(Backend::Shared(gw))
            }
        }
    }
}

/// Reads every record of a JSONL file. A torn final line (from an
/// interrupted run) is ignored; other bad lines are errors.
pub fn read_records(path: &Path) -> Result<Vec<EpisodeRecord>, BenchError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(io_err(path))?;
    let mut out = Vec::new();
    let last = lines.len();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(_) if i + 1 == last => break,
            Err(e) => {
                return Err(BenchError::BadRecord {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: e.to_string(),
                })
            }
        };
        let version = value.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0);
        if version != RECORD_SCHEMA_VERSION as u64 {
            return Err(BenchError::SchemaVersionMismatch {
                found: version,
                expected: RECORD_SCHEMA_VERSION,
            });
        }
        let record = serde_json::from_value(value).map_err(|e| BenchError::BadRecord {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Cuts a torn final line so appends start on a fresh line.
fn repair_tail(path: &Path) -> Result<(), BenchError> {
    let Ok(bytes) = std::fs::read(path) else { return Ok(()) };
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let f = OpenOptions::new().write(true).open(path).map_err(io_err(path))?;
    f.set_len(keep as u64).map_err(io_err(path))
}

/// Progress notifications from a running suite.
pub trait Progress: Sync {
    fn episode_done(&self, _done: usize, _total: usize, _record: &EpisodeRecord) {}
}

impl Progress for () {}

/// Runs every episode of `cfg` not yet in `out`, appending records in
/// canonical job order, and summarizes the whole file.
pub fn run_suite(
    cfg: &SuiteConfig,
    out: &Path,
    backend: &Backend,
    sandbox: &Sandbox,
    progress: &dyn Progress,
) -> Result<SuiteSummary, BenchError> {
    cfg.validate()?;
    let prompts = cfg.prompt_set()?;
    repair_tail(out)?;
    let done: HashSet<String> = read_records(out)?.iter().map(record_key).collect();

    let mut instances: BTreeMap<(EnvKind, u32), Arc<TaskInstance>> = BTreeMap::new();
    let mut pending = Vec::new();
    for job in plan_jobs(cfg) {
        let inst = match instances.get(&(job.env, job.sample)) {
            Some(i) => i.clone(),
            None => {
                let i = Arc::new(suite_instance(cfg, job.env, job.sample)?);
                instances.insert((job.env, job.sample), i.clone());
                i
            }
        };
        if !done.contains(&key(job.env, inst.seed, job.method, job.max_rounds)) {
            pending.push((job, inst));
        }
    }

    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(out)
        .map_err(io_err(out))?;
    let workers = match cfg.workers {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(pending.len().max(1));
    tracing::info!(episodes = pending.len(), skipped = done.len(), workers, "running suite");

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Result<EpisodeRecord, OrchestratorError>)>();
    let total = pending.len();
    let write_result = std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, pending, prompts) = (&next, &pending, &prompts);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((job, inst)) = pending.get(i) else { break };
                let r = run_job(cfg, job, inst, backend, sandbox, prompts.clone());
                let failed = r.is_err();
                if tx.send((i, r)).is_err() || failed {
                    // Stop taking work; the writer reports the error.
                    next.store(usize::MAX / 2, Ordering::SeqCst);
                    break;
                }
            });
        }
        drop(tx);
        // Single writer: records are buffered until their turn so the file
        // follows job order whatever the completion order.
        let mut held: BTreeMap<usize, EpisodeRecord> = BTreeMap::new();
        let mut cursor = 0;
        let mut written = 0;
        for (i, r) in rx {
            let rec = r?;
            held.insert(i, rec);
            while let Some(rec) = held.remove(&cursor) {
                let mut line = serde_json::to_string(&rec).expect("records serialize");
                line.push('\n');
                file.write_all(line.as_bytes()).map_err(io_err(out))?;
                file.flush().map_err(io_err(out))?;
                written += 1;
                progress.episode_done(written, total, &rec);
                cursor += 1;
            }
        }
        Ok::<(), BenchError>(())
    });
    write_result?;
    let records = read_records(out)?;
    Ok(summarize(&records))
}

fn run_job(
    cfg: &SuiteConfig,
    job: &Job,
    inst: &TaskInstance,
    backend: &Backend,
    sandbox: &Sandbox,
    prompts: PromptSet,
) -> Result<EpisodeRecord, OrchestratorError> {
    let ocfg = OrchestratorConfig {
        method: job.method,
        max_rounds: job.max_rounds,
        record_timing: cfg.record_timing,
        ..cfg.orchestrator.clone()
    };
    let started = Instant::now();
    match backend {
        Backend::Shared(gw) => run_with_prompts(inst, &ocfg, gw, sandbox, prompts, started),
        Backend::Mock => {
            let gw = Gateway::new(
                Arc::new(mock::episode_backend(inst, job.method, job.sample)),
                GatewayConfig {
                    retry: RetryPolicy::no_delay(),
                    ..GatewayConfig::default()
                },
            );
            run_with_prompts(inst, &ocfg, &gw, sandbox, prompts, started)
        }
    }
}
