use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{DifficultyParams, EnvKind, Plan, Verdict};
use crate::complexity::ComplexityReport;
use crate::llm::{ChatRequest, ScoredCandidate};
use crate::orchestrator::SteerDecision;
use crate::sandbox::SandboxResult;

pub const RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    CodeSymbolicPlanner,
    OnlyQuestion,
    CodeAnswer,
    #[serde(rename = "saycan")]
    SayCan,
    #[serde(rename = "hmas2")]
    Hmas2,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::CodeSymbolicPlanner,
        Method::OnlyQuestion,
        Method::CodeAnswer,
        Method::SayCan,
        Method::Hmas2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::CodeSymbolicPlanner => "code_symbolic_planner",
            Method::OnlyQuestion => "only_question",
            Method::CodeAnswer => "code_answer",
            Method::SayCan => "saycan",
            Method::Hmas2 => "hmas2",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Method::CodeSymbolicPlanner => "Code-Symbo.-P.",
            Method::OnlyQuestion => "Only Question",
            Method::CodeAnswer => "Code Answer",
            Method::SayCan => "SayCan",
            Method::Hmas2 => "HMAS-2",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace(['-', ' ', '_'], "");
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().replace('_', "") == norm)
            .or(match norm.as_str() {
                "csp" | "codeassymbolicplanner" => Some(Method::CodeSymbolicPlanner),
                _ => None,
            })
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

/// Enough to regenerate the instance an episode ran on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRef {
    pub env_kind: EnvKind,
    pub seed: u64,
    pub difficulty: DifficultyParams,
}

/// One LLM exchange as seen by the gateway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub call_index: u32,
    pub role: String,
    pub request: ChatRequest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub retries: u32,
}

/// CheckLLM's generated checking program and what it reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check_code: String,
    pub sandbox_result: SandboxResult,
    /// Checker stdout, passed verbatim to SteerLLM.
    pub report: String,
    /// `Some(true)` when the report ends with PASS, `Some(false)` for FAIL.
    pub passed: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub task_prompt: String,
    pub generated_code: String,
    pub sandbox_result: Option<SandboxResult>,
    pub check_result: Option<CheckOutcome>,
    pub complexity_report: Option<ComplexityReport>,
    pub steer_decision: Option<SteerDecision>,
    pub guidance_text: String,
    /// Ground-truth verdict of this round's answer. Never shown to any LLM.
    pub verdict: Verdict,
}

/// One decision step of an iterative baseline (SayCan, HMAS-2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<ScoredCandidate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub likelihood_source: Option<String>,
    pub chosen: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub feedback: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub schema_version: u32,
    pub instance: InstanceRef,
    pub method: Method,
    pub max_rounds: u32,
    pub rounds: Vec<RoundRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub steps: Vec<StepTrace>,
    pub final_plan: Option<Plan>,
    pub final_verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method_error: Option<String>,
    pub llm_calls: u32,
    pub transcript: Vec<TranscriptEntry>,
    /// Seconds. Zero when the run records timing-free output.
    pub wall_clock: f64,
}

impl EpisodeRecord {
    pub fn round_count(&self) -> usize {
        self.rounds.len()
    }

    pub fn success(&self) -> bool {
        self.final_verdict.is_success()
    }
}
