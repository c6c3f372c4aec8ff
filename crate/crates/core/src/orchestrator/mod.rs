//! Episode runners: the multi-round TaskLLM / CheckLLM / SteerLLM loop and
//! the four direct-planner baselines.

mod code;
mod direct;
mod hmas;
mod saycan;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::llm::{ChatMessage, ChatRequest, Combine, Gateway, LlmError, Session};
use crate::model::{
    EpisodeRecord, Method, Plan, RoundRecord, StepTrace, TaskInstance, Verdict, RECORD_SCHEMA_VERSION,
};
use crate::prompt::{render_prompt_with, PromptError, PromptSet, DEFAULT_PROMPT_VERSION};
use crate::sandbox::{Sandbox, SandboxError};
use crate::verifier::VerificationConfig;

pub use code::{extract_code, parse_steer_reply, CHECK_OUTPUT_FILE};
pub use saycan::{continuous_affordances, Affordance};

/// Transcript role names, one per LLM component.
pub mod roles {
    pub const TASK: &str = "task";
    pub const CHECK: &str = "check";
    pub const STEER: &str = "steer";
    pub const ONLY_QUESTION: &str = "only_question";
    pub const SAYCAN_RATE: &str = "saycan_rate";
    pub const SAYCAN_SCORE: &str = "saycan_score";
    pub const HMAS_CENTRAL: &str = "hmas_central";
    pub const HMAS_FEEDBACK: &str = "hmas_feedback";
    pub const HMAS_COMMIT: &str = "hmas_commit";
}

pub const DEFAULT_MAX_ROUNDS: u32 = 3;
pub const DEFAULT_SAYCAN_K: usize = 5;
pub const DEFAULT_CALL_BUDGET: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Revise,
    ForceAccept,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteerDecision {
    pub decision: Decision,
    pub guidance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrchestratorConfig {
    pub method: Method,
    pub max_rounds: u32,
    pub saycan_k: usize,
    /// Prompt template version.
    pub prompts: String,
    /// LLM calls allowed per episode for the code-writing methods. The
    /// step-by-step baselines get at least enough for their step cap.
    pub call_budget: u32,
    pub combine: Combine,
    pub temperature: f64,
    pub max_tokens: u32,
    pub model_id: String,
    /// Guest language; selects the complexity pattern table.
    pub language: String,
    /// Characters of program output shown to an LLM.
    pub output_chars: usize,
    /// Characters of round history shown to an LLM before old code is elided.
    pub history_chars: usize,
    pub verification: VerificationConfig,
    /// Record wall-clock time; off for byte-reproducible records.
    pub record_timing: bool,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        OrchestratorConfig {
            method: Method::CodeSymbolicPlanner,
            max_rounds: DEFAULT_MAX_ROUNDS,
            saycan_k: DEFAULT_SAYCAN_K,
            prompts: DEFAULT_PROMPT_VERSION.to_string(),
            call_budget: DEFAULT_CALL_BUDGET,
            combine: Combine::Product,
            temperature: 0.0,
            max_tokens: 4096,
            model_id: "gpt-4o".to_string(),
            language: "python".to_string(),
            output_chars: 4000,
            history_chars: 24_000,
            verification: VerificationConfig::default(),
            record_timing: true,
        }
    }
}

impl OrchestratorConfig {
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if self.max_rounds == 0 {
            return Err(OrchestratorError::Config("max_rounds must be at least 1".into()));
        }
        if self.saycan_k == 0 {
            return Err(OrchestratorError::Config("saycan_k must be at least 1".into()));
        }
        if self.call_budget == 0 {
            return Err(OrchestratorError::Config("call_budget must be at least 1".into()));
        }
        if crate::complexity::builtin_table(&self.language).is_none() {
            return Err(OrchestratorError::Config(format!(
                "no complexity pattern table for `{}`",
                self.language
            )));
        }
        Ok(())
    }

    fn language_name(&self) -> String {
        let mut c = self.language.chars();
        c.next()
            .map(|f| f.to_uppercase().chain(c).collect())
            .unwrap_or_default()
    }
}

/// Errors that make an episode impossible to run at all. LLM failures are
/// not among them; they end the episode with `method_error` set.
#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
}

/// Everything a method produces before the record is assembled.
struct Outcome {
    rounds: Vec<RoundRecord>,
    steps: Vec<StepTrace>,
    final_plan: Option<Plan>,
    final_verdict: Verdict,
    method_error: Option<String>,
}

impl Outcome {
    fn aborted(rounds: Vec<RoundRecord>, steps: Vec<StepTrace>, e: &LlmError) -> Self {
        Outcome {
            rounds,
            steps,
            final_plan: None,
            final_verdict: Verdict::parse_error(format!("episode aborted: {e}")),
            method_error: Some(e.to_string()),
        }
    }
}

/// Shared state of one running episode.
struct Ctx<'a> {
    inst: &'a TaskInstance,
    cfg: &'a OrchestratorConfig,
    prompts: PromptSet,
    task: String,
    session: Session<'a>,
}

impl Ctx<'_> {
    fn request(&self, system: &str, user: String) -> Result<ChatRequest, PromptError> {
        Ok(ChatRequest {
            messages: vec![
                ChatMessage::system(self.prompts.render(system, &[])?),
                ChatMessage::user(user),
            ],
            temperature: self.cfg.temperature,
            max_tokens: self.cfg.max_tokens,
            model_id: self.cfg.model_id.clone(),
        })
    }

    /// Tail of program output as shown to an LLM.
    fn shown_output(&self, text: &str) -> String {
        clip_tail(text, self.cfg.output_chars)
    }
}

/// Keeps the last `max` characters, marking the cut.
pub fn clip_tail(text: &str, max: usize) -> String {
    let n = text.chars().count();
    if n <= max {
        return text.to_string();
    }
    let tail: String = text.chars().skip(n - max).collect();
    format!("[... {} characters omitted ...]\n{tail}", n - max)
}

/// Runs one episode with the configured method.
pub fn run_episode(
    inst: &TaskInstance,
    cfg: &OrchestratorConfig,
    gateway: &Gateway,
    sandbox: &Sandbox,
) -> Result<EpisodeRecord, OrchestratorError> {
    cfg.validate()?;
    let started = Instant::now();
    let prompts = PromptSet::builtin(&cfg.prompts)?;
    run_with_prompts(inst, cfg, gateway, sandbox, prompts, started)
}

/// As `run_episode`, with an explicit template set.
pub fn run_with_prompts(
    inst: &TaskInstance,
    cfg: &OrchestratorConfig,
    gateway: &Gateway,
    sandbox: &Sandbox,
    prompts: PromptSet,
    started: Instant,
) -> Result<EpisodeRecord, OrchestratorError> {
    cfg.validate()?;
    let task = render_prompt_with(inst, &prompts)?;
    let budget = match cfg.method {
        Method::SayCan | Method::Hmas2 => {
            let per_step = match cfg.method {
                Method::Hmas2 if inst.agent_count() > 1 => inst.agent_count() as u32 + 2,
                _ => 1,
            };
            cfg.call_budget.max(step_cap(inst) * per_step)
        }
        _ => cfg.call_budget,
    };
    let mut ctx = Ctx {
        inst,
        cfg,
        prompts,
        task,
        session: gateway.session(budget),
    };
    let (outcome, max_rounds) = match cfg.method {
        Method::CodeSymbolicPlanner => (code::run(&mut ctx, sandbox, cfg.max_rounds)?, cfg.max_rounds),
        Method::CodeAnswer => (code::run(&mut ctx, sandbox, 1)?, 1),
        Method::OnlyQuestion => (direct::run(&mut ctx)?, 1),
        Method::SayCan => (saycan::run(&mut ctx)?, 1),
        Method::Hmas2 => (hmas::run(&mut ctx)?, 1),
    };
    let llm_calls = ctx.session.calls();
    Ok(EpisodeRecord {
        schema_version: RECORD_SCHEMA_VERSION,
        instance: inst.instance_ref(),
        method: cfg.method,
        max_rounds,
        rounds: outcome.rounds,
        steps: outcome.steps,
        final_plan: outcome.final_plan,
        final_verdict: outcome.final_verdict,
        method_error: outcome.method_error,
        llm_calls,
        transcript: ctx.session.into_transcript(),
        wall_clock: if cfg.record_timing {
            started.elapsed().as_secs_f64()
        } else {
            0.0
        },
    })
}

/// Decision steps allowed to the step-by-step baselines.
pub fn step_cap(inst: &TaskInstance) -> u32 {
    match inst.step_limit {
        Some(s) => s,
        None => match &inst.initial_state {
            crate::model::EnvState::ShapeFormation(s) => s.boxes.len() as u32 + 2,
            other => 6 * other.agent_ids().len() as u32,
        },
    }
}

/// A single-round record for methods without steering.
fn single_round(task_prompt: String, verdict: Verdict) -> RoundRecord {
    RoundRecord {
        round: 1,
        task_prompt,
        generated_code: String::new(),
        sandbox_result: None,
        check_result: None,
        complexity_report: None,
        steer_decision: None,
        guidance_text: String::new(),
        verdict,
    }
}

#[cfg(test)]
mod tests;
