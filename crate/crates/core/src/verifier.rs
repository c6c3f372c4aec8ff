//! Ground-truth judgement of an answer: execution, syntax, goal and
//! constraints, in that order of precedence.

use serde::{Deserialize, Serialize};

use crate::continuous;
use crate::envs;
use crate::model::{FailureReason, Plan, TaskInstance, Verdict, DEFAULT_EXEC_TIMEOUT_SECS};
use crate::sandbox::SandboxResult;
use crate::wire::{check_plan_shape, parse_plan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationConfig {
    pub exec_timeout: f64,
    /// Relative slack on the speed limit.
    pub speed_epsilon: f64,
    /// Keep a per-step replay trace.
    pub record_trace: bool,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        VerificationConfig {
            exec_timeout: DEFAULT_EXEC_TIMEOUT_SECS,
            speed_epsilon: continuous::DEFAULT_SPEED_EPSILON,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub verdict: Verdict,
    pub plan: Option<Plan>,
    /// One line per replayed step when tracing is on.
    pub trace: Vec<String>,
}

pub fn verify(inst: &TaskInstance, raw_output: &[u8], sandbox: &SandboxResult, cfg: &VerificationConfig) -> Verdict {
    verify_detailed(inst, raw_output, sandbox, cfg).verdict
}

pub fn verify_detailed(
    inst: &TaskInstance,
    raw_output: &[u8],
    sandbox: &SandboxResult,
    cfg: &VerificationConfig,
) -> Verification {
    if sandbox.timed_out {
        return Verification {
            verdict: Verdict::exec_timeout(format!("killed at the {}s limit", inst.exec_timeout)),
            plan: None,
            trace: Vec::new(),
        };
    }
    match parse_plan(raw_output, inst) {
        Err(e) => Verification {
            verdict: Verdict::parse_error(e.to_string()),
            plan: None,
            trace: Vec::new(),
        },
        Ok(plan) => {
            let (verdict, trace) = judge(inst, &plan, cfg);
            Verification {
                verdict,
                plan: Some(plan),
                trace,
            }
        }
    }
}

/// Verdict of an already-parsed plan.
pub fn verify_plan(inst: &TaskInstance, plan: &Plan, cfg: &VerificationConfig) -> Verdict {
    if let Err(e) = check_plan_shape(plan, inst) {
        return Verdict::parse_error(e.to_string());
    }
    judge(inst, plan, cfg).0
}

fn judge(inst: &TaskInstance, plan: &Plan, cfg: &VerificationConfig) -> (Verdict, Vec<String>) {
    match plan {
        Plan::Waypoints { .. } => (continuous::evaluate(inst, plan, cfg.speed_epsilon), Vec::new()),
        Plan::Actions { steps } => replay_discrete(inst, steps, cfg.record_trace),
    }
}

fn replay_discrete(inst: &TaskInstance, steps: &[Vec<crate::model::Action>], trace_on: bool) -> (Verdict, Vec<String>) {
    let mut trace = Vec::new();
    let mut state = inst.initial_state.clone();
    for (i, step) in steps.iter().enumerate() {
        match envs::apply_action(&state, step) {
            Ok(next) => state = next,
            Err(e) => return (Verdict::illegal_action(format!("step {}: {}", i + 1, e.0)), trace),
        }
        if trace_on {
            let acts: Vec<String> = step.iter().map(ToString::to_string).collect();
            trace.push(format!("{}: {}", i + 1, acts.join(" ")));
        }
    }
    let goal = envs::is_goal(&state, &inst.goal);
    let limit = inst.step_limit.unwrap_or(u32::MAX) as usize;
    let verdict = if steps.len() > limit {
        Verdict::constraint_violation(
            FailureReason::TimeLimitViolation,
            goal,
            format!("{} steps exceed the limit of {limit}", steps.len()),
        )
    } else if !goal {
        Verdict::goal_not_reached(format!("goal not reached after {} steps", steps.len()))
    } else {
        Verdict::success()
    };
    (verdict, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::generate_instance;
    use crate::model::{DifficultyParams, EnvKind};
    use crate::oracles::{reference_plan, DEFAULT_BUDGET};
    use crate::wire::serialize_plan;

    fn ok_run(stdout: &str) -> SandboxResult {
        SandboxResult::not_executed(stdout)
    }

    #[test]
    fn timeout_wins() {
        let inst = generate_instance(EnvKind::Gridworld, &DifficultyParams::small(EnvKind::Gridworld), 1).unwrap();
        let mut sb = ok_run("");
        sb.timed_out = true;
        let v = verify(&inst, b"", &sb, &VerificationConfig::default());
        assert_eq!(v.failure_reason(), FailureReason::ExecTimeout);
    }

    #[test]
    fn empty_output_is_parse_error() {
        let inst = generate_instance(EnvKind::Blocksworld, &DifficultyParams::small(EnvKind::Blocksworld), 2).unwrap();
        let v = verify(&inst, b"", &ok_run(""), &VerificationConfig::default());
        assert_eq!(v.failure_reason(), FailureReason::ParseError);
        assert!(!v.syntax_ok());
    }

    #[test]
    fn reference_plans_pass_everywhere() {
        for env in EnvKind::ALL {
            for seed in 0..3 {
                let inst = generate_instance(env, &DifficultyParams::small(env), seed).unwrap();
                let plan = reference_plan(&inst, DEFAULT_BUDGET).unwrap();
                let text = serialize_plan(&plan);
                let v = verify(&inst, text.as_bytes(), &ok_run(&text), &VerificationConfig::default());
                assert!(v.is_success(), "{env} seed {seed}: {v:?}");
            }
        }
    }

    #[test]
    fn too_many_steps_is_time_limit() {
        let inst = generate_instance(EnvKind::Gridworld, &DifficultyParams::small(EnvKind::Gridworld), 4).unwrap();
        let plan = reference_plan(&inst, DEFAULT_BUDGET).unwrap();
        let mut steps = plan.steps().unwrap().to_vec();
        let visit = steps.last().unwrap().clone();
        while steps.len() <= inst.step_limit.unwrap() as usize {
            steps.push(visit.clone());
        }
        let v = verify_plan(&inst, &Plan::Actions { steps }, &VerificationConfig::default());
        assert_eq!(v.failure_reason(), FailureReason::TimeLimitViolation);
        assert!(v.goal_reached());
    }

    #[test]
    fn crash_after_printing_still_parses() {
        let inst = generate_instance(EnvKind::Blocksworld, &DifficultyParams::small(EnvKind::Blocksworld), 3).unwrap();
        let text = serialize_plan(&reference_plan(&inst, DEFAULT_BUDGET).unwrap());
        let mut sb = ok_run(&text);
        sb.exit_status = crate::sandbox::ExitStatus::Exited { code: 1 };
        assert!(verify(&inst, text.as_bytes(), &sb, &VerificationConfig::default()).is_success());
    }

    #[test]
    fn trace_has_one_line_per_step() {
        let inst = generate_instance(EnvKind::Blocksworld, &DifficultyParams::small(EnvKind::Blocksworld), 5).unwrap();
        let text = serialize_plan(&reference_plan(&inst, DEFAULT_BUDGET).unwrap());
        let cfg = VerificationConfig {
            record_trace: true,
            ..VerificationConfig::default()
        };
        let out = verify_detailed(&inst, text.as_bytes(), &ok_run(&text), &cfg);
        assert_eq!(out.trace.len(), out.plan.unwrap().steps().unwrap().len());
    }
}
