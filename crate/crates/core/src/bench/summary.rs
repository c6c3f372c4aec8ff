//! Aggregates over a record set. Everything here is a pure function of the
//! records, so summaries can be recomputed offline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{DifficultyParams, EnvKind, EpisodeRecord, FailureReason, Method, DIFFICULTY_BUCKETS};

/// Success rate and failure histogram of one (task, method, round cap) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub env: EnvKind,
    pub method: Method,
    pub max_rounds: u32,
    pub samples: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Final failure reason counts, `none` for successes.
    pub failures: BTreeMap<String, usize>,
    pub method_errors: usize,
    pub mean_rounds: f64,
    pub mean_llm_calls: f64,
    pub mean_wall_clock: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketSummary {
    pub env: EnvKind,
    pub method: Method,
    pub max_rounds: u32,
    /// Index into the default difficulty sweep, or `None` for other settings.
    pub bucket: Option<usize>,
    pub samples: usize,
    pub successes: usize,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundCapSummary {
    pub method: Method,
    pub max_rounds: u32,
    pub samples: usize,
    pub successes: usize,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub episodes: usize,
    pub cells: Vec<CellSummary>,
    pub by_bucket: Vec<BucketSummary>,
    pub by_round_cap: Vec<RoundCapSummary>,
}

/// Position of `d` in its environment's default sweep.
pub fn bucket_of(d: &DifficultyParams) -> Option<usize> {
    let env = d.env_kind();
    (0..DIFFICULTY_BUCKETS).find(|&b| DifficultyParams::bucket(env, b) == *d)
}

fn rate(successes: usize, samples: usize) -> f64 {
    if samples == 0 {
        0.0
    } else {
        successes as f64 / samples as f64
    }
}

fn mean(sum: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[derive(Default)]
struct Acc {
    samples: usize,
    successes: usize,
    failures: BTreeMap<String, usize>,
    method_errors: usize,
    rounds: f64,
    calls: f64,
    wall: f64,
}

impl Acc {
    fn add(&mut self, r: &EpisodeRecord) {
        self.samples += 1;
        self.successes += usize::from(r.success());
        let reason = r.final_verdict.failure_reason();
        *self.failures.entry(reason.as_str().to_string()).or_default() += 1;
        self.method_errors += usize::from(r.method_error.is_some());
        self.rounds += r.round_count() as f64;
        self.calls += r.llm_calls as f64;
        self.wall += r.wall_clock;
    }
}

pub fn summarize(records: &[EpisodeRecord]) -> SuiteSummary {
    let mut cells: BTreeMap<(EnvKind, Method, u32), Acc> = BTreeMap::new();
    let mut buckets: BTreeMap<(EnvKind, Method, u32, Option<usize>), (usize, usize)> = BTreeMap::new();
    let mut caps: BTreeMap<(Method, u32), (usize, usize)> = BTreeMap::new();
    for r in records {
        let env = r.instance.env_kind;
        cells.entry((env, r.method, r.max_rounds)).or_default().add(r);
        let ok = usize::from(r.success());
        let b = buckets
            .entry((env, r.method, r.max_rounds, bucket_of(&r.instance.difficulty)))
            .or_default();
        b.0 += 1;
        b.1 += ok;
        let c = caps.entry((r.method, r.max_rounds)).or_default();
        c.0 += 1;
        c.1 += ok;
    }
    let mut failures_template: BTreeMap<String, usize> = BTreeMap::new();
    for f in FailureReason::ALL {
        failures_template.insert(f.as_str().to_string(), 0);
    }
    SuiteSummary {
        episodes: records.len(),
        cells: cells
            .into_iter()
            .map(|((env, method, max_rounds), a)| {
                let mut failures = failures_template.clone();
                failures.extend(a.failures);
                CellSummary {
                    env,
                    method,
                    max_rounds,
                    samples: a.samples,
                    successes: a.successes,
                    success_rate: rate(a.successes, a.samples),
                    failures,
                    method_errors: a.method_errors,
                    mean_rounds: mean(a.rounds, a.samples),
                    mean_llm_calls: mean(a.calls, a.samples),
                    mean_wall_clock: mean(a.wall, a.samples),
                }
            })
            .collect(),
        by_bucket: buckets
            .into_iter()
            .map(|((env, method, max_rounds, bucket), (n, s))| BucketSummary {
                env,
                method,
                max_rounds,
                bucket,
                samples: n,
                successes: s,
                success_rate: rate(s, n),
            })
            .collect(),
        by_round_cap: caps
            .into_iter()
            .map(|((method, max_rounds), (n, s))| RoundCapSummary {
                method,
                max_rounds,
                samples: n,
                successes: s,
                success_rate: rate(s, n),
            })
            .collect(),
    }
}
