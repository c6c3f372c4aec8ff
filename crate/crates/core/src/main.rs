use std::fs;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use tampforge::bench::report::report;
use tampforge::bench::{run_suite, Backend, BackendKind, Progress, SuiteConfig};
use tampforge::complexity::{analyze, builtin_table, PatternTable};
use tampforge::envs::generate_instance;
use tampforge::llm::MODEL_ENV;
use tampforge::model::{DifficultyParams, EnvKind, EpisodeRecord, Method, TaskInstance, DIFFICULTY_BUCKETS};
use tampforge::oracles::{oracle_solve, reference_plan, OracleOutcome, DEFAULT_BUDGET};
use tampforge::sandbox::{Sandbox, SandboxConfig, SandboxResult};
use tampforge::verifier::{verify_detailed, VerificationConfig};
use tampforge::wire::serialize_plan;

#[derive(Parser)]
#[command(name = "tampforge", version, about = "Benchmark LLM-written planners on task and motion planning problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate instance files.
    Gen {
        #[arg(long)]
        env: EnvKind,
        /// Default difficulty bucket, 0 (easiest) to 4.
        #[arg(long, default_value_t = 0)]
        bucket: usize,
        /// JSON file with explicit difficulty parameters; overrides --bucket.
        #[arg(long)]
        difficulty: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of instances, with seeds seed, seed+1, ...
        #[arg(long, default_value_t = 1)]
        count: u64,
        /// Output directory; a single instance goes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve an instance with the reference planner and print the plan.
    Oracle {
        instance: PathBuf,
        /// Search node budget.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
    },
    /// Judge a plan file (program output in wire format) against an instance.
    Verify {
        instance: PathBuf,
        plan: PathBuf,
        /// Print the replayed steps.
        #[arg(long)]
        trace: bool,
    },
    /// Complexity report for a guest program.
    Analyze {
        source: PathBuf,
        #[arg(long, default_value = "python")]
        language: String,
        /// Pattern table JSON file replacing the built-in one.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Run a suite and append episode records.
    Run {
        /// Suite config (TOML). Defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Record file (JSONL); existing episodes are skipped.
        #[arg(long, default_value = "records.jsonl")]
        out: PathBuf,
        /// Where to write the summary JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        tasks: Option<Vec<EnvKind>>,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        #[arg(long)]
        samples: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_rounds: Option<u32>,
        #[arg(long, value_delimiter = ',')]
        round_sweep: Option<Vec<u32>>,
        #[arg(long)]
        workers: Option<usize>,
        /// `mock` or `http`.
        #[arg(long)]
        backend: Option<String>,
        /// Model id sent to the backend.
        #[arg(long, env = MODEL_ENV)]
        model: Option<String>,
        /// Leave wall-clock times out of the records.
        #[arg(long)]
        no_timing: bool,
    },
    /// Tables, CSV and SVG charts from a record file.
    Report {
        records: PathBuf,
        /// Directory for the CSV and SVG files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_instance(path: &Path) -> Result<TaskInstance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    TaskInstance::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn gen(
    env: EnvKind,
    bucket: usize,
    difficulty: Option<PathBuf>,
    seed: u64,
    count: u64,
    out: Option<PathBuf>,
) -> Result<()> {
    let d = match difficulty {
        Some(p) => {
            let d: DifficultyParams = serde_json::from_str(&fs::read_to_string(&p)?)
                .with_context(|| format!("parsing {}", p.display()))?;
            if d.env_kind() != env {
                bail!("difficulty file is for {}, not {env}", d.env_kind());
            }
            d
        }
        None => {
            if bucket >= DIFFICULTY_BUCKETS {
                bail!("bucket must be below {DIFFICULTY_BUCKETS}");
            }
            DifficultyParams::bucket(env, bucket)
        }
    };
    match out {
        None if count == 1 => {
            println!("{}", generate_instance(env, &d, seed)?.to_json_pretty());
        }
        None => bail!("--out is required for more than one instance"),
        Some(dir) => {
            fs::create_dir_all(&dir)?;
            for s in seed..seed + count {
                let inst = generate_instance(env, &d, s)?;
                let path = dir.join(format!("{}_{s}.json", env.as_str()));
                fs::write(&path, inst.to_json_pretty())?;
                eprintln!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn oracle(path: &Path, budget: u64) -> Result<ExitCode> {
    let inst = read_instance(path)?;
    match oracle_solve(&inst, budget) {
        OracleOutcome::Solved { plan, length } => {
            eprintln!("optimal length {length}");
            print!("{}", serialize_plan(&plan));
        }
        OracleOutcome::NoSolution => {
            eprintln!("no plan exists");
            return Ok(ExitCode::from(1));
        }
        OracleOutcome::BudgetExceeded => {
            eprintln!("search budget of {budget} nodes exhausted");
            return Ok(ExitCode::from(1));
        }
        OracleOutcome::Unsupported => match reference_plan(&inst, budget) {
            Some(plan) => {
                eprintln!("constructive reference plan (not optimal)");
                print!("{}", serialize_plan(&plan));
            }
            None => {
                eprintln!("no reference plan for this instance");
                return Ok(ExitCode::from(1));
            }
        },
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(instance: &Path, plan: &Path, trace: bool) -> Result<ExitCode> {
    let inst = read_instance(instance)?;
    let raw = fs::read(plan).with_context(|| format!("reading {}", plan.display()))?;
    let cfg = VerificationConfig {
        record_trace: trace,
        ..VerificationConfig::default()
    };
    let run = SandboxResult::not_executed(String::from_utf8_lossy(&raw).into_owned());
    let v = verify_detailed(&inst, &raw, &run, &cfg);
    for line in &v.trace {
        eprintln!("{line}");
    }
    println!("{}", serde_json::to_string_pretty(&v.verdict)?);
    Ok(if v.verdict.is_success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn analyze_cmd(source: &Path, language: &str, table: Option<PathBuf>) -> Result<()> {
    let code = fs::read_to_string(source).with_context(|| format!("reading {}", source.display()))?;
    let report = match table {
        Some(p) => {
            let t = PatternTable::from_json(&fs::read_to_string(&p)?)?.compile()?;
            analyze(&code, &t)
        }
        None => {
            let t = builtin_table(language).with_context(|| format!("no built-in pattern table for `{language}`"))?;
            analyze(&code, t)
        }
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

struct LogProgress;

impl Progress for LogProgress {
    fn episode_done(&self, done: usize, total: usize, r: &EpisodeRecord) {
        tracing::info!(
            "[{done}/{total}] {} seed {} {} (rounds {}): {}",
            r.instance.env_kind,
            r.instance.seed,
            r.method.as_str(),
            r.max_rounds,
            r.final_verdict.failure_reason().as_str()
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn run(
    config: Option<PathBuf>,
    out: PathBuf,
    summary: Option<PathBuf>,
    tasks: Option<Vec<EnvKind>>,
    methods: Option<Vec<Method>>,
    samples: Option<u32>,
    seed: Option<u64>,
    max_rounds: Option<u32>,
    round_sweep: Option<Vec<u32>>,
    workers: Option<usize>,
    backend: Option<String>,
    model: Option<String>,
    no_timing: bool,
) -> Result<()> {
    let mut cfg = match &config {
        Some(p) => SuiteConfig::load(p)?,
        None => SuiteConfig::default(),
    };
    if let Some(t) = tasks {
        cfg.tasks = t;
    }
    if let Some(m) = methods {
        cfg.methods = m;
    }
    if let Some(n) = samples {
        cfg.samples_per_task = n;
    }
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    if let Some(r) = max_rounds {
        cfg.orchestrator.max_rounds = r;
    }
    if let Some(r) = round_sweep {
        cfg.round_sweep = r;
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    if let Some(b) = backend {
        cfg.backend.kind = match b.as_str() {
            "mock" => BackendKind::Mock,
            "http" => BackendKind::Http,
            other => bail!("unknown backend `{other}` (mock or http)"),
        };
    }
    if let Some(m) = model {
        cfg.orchestrator.model_id = m;
    }
    if no_timing {
        cfg.record_timing = false;
    }
    cfg.validate()?;

    let backend = Backend::from_settings(&cfg.backend)?;
    let sandbox = Sandbox::new(SandboxConfig::from_env());
    let s = run_suite(&cfg, &out, &backend, &sandbox, &LogProgress)?;
    let json = serde_json::to_string_pretty(&s)?;
    let summary = summary.unwrap_or_else(|| out.with_extension("summary.json"));
    fs::write(&summary, format!("{json}\n")).with_context(|| format!("writing {}", summary.display()))?;
    print!("{}", tampforge::bench::report::build_report(&s).table);
    eprintln!("{} episodes in {}; summary in {}", s.episodes, out.display(), summary.display());
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen {
            env,
            bucket,
            difficulty,
            seed,
            count,
            out,
        } => gen(env, bucket, difficulty, seed, count, out).map(|_| ExitCode::SUCCESS),
        Command::Oracle { instance, budget } => oracle(&instance, budget),
        Command::Verify { instance, plan, trace } => verify(&instance, &plan, trace),
        Command::Analyze { source, language, table } => analyze_cmd(&source, &language, table).map(|_| ExitCode::SUCCESS),
        Command::Run {
            config,
            out,
            summary,
            tasks,
            methods,
            samples,
            seed,
            max_rounds,
            round_sweep,
            workers,
            backend,
            model,
            no_timing,
        } => run(
            config, out, summary, tasks, methods, samples, seed, max_rounds, round_sweep, workers, backend, model,
            no_timing,
        )
        .map(|_| ExitCode::SUCCESS),
        Command::Report { records, out } => report(&records)
            .map_err(anyhow::Error::from)
            .and_then(|r| {
                print!("{}", r.table);
                if let Some(dir) = out {
                    r.write_to(&dir)?;
                    eprintln!("wrote {} files to {}", tampforge::bench::report::Report::FILES.len(), dir.display());
                }
                Ok(ExitCode::SUCCESS)
            }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
