//! Code-writing methods: the TaskLLM / CheckLLM / SteerLLM round loop, and
//! its single-round special case.

use std::sync::OnceLock;

use regex::Regex;

use super::{roles, Ctx, Decision, Outcome, OrchestratorError, SteerDecision};
use crate::complexity::{analyze, builtin_table};
use crate::model::{CheckOutcome, RoundRecord};
use crate::prompt::num;
use crate::sandbox::{Sandbox, SandboxResult};
use crate::verifier::verify_detailed;

/// File name under which the candidate output is handed to the checker.
pub const CHECK_OUTPUT_FILE: &str = "candidate_output.txt";

const CODE_OMITTED: &str = "[program omitted to save space]";

/// Body of the last fenced code block, or the whole reply when there is none.
/// An unterminated final fence runs to the end of the reply.
pub fn extract_code(reply: &str) -> String {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in reply.lines() {
        let fence = line.trim_start().starts_with("```");
        match (&mut current, fence) {
            (None, true) => current = Some(Vec::new()),
            (Some(body), true) => {
                blocks.push(body.join("\n"));
                current = None;
            }
            (Some(body), false) => body.push(line),
            (None, false) => {}
        }
    }
    if let Some(body) = current {
        blocks.push(body.join("\n"));
    }
    match blocks.into_iter().rev().find(|b| !b.trim().is_empty()) {
        Some(b) => format!("{}\n", b.trim_end()),
        None => format!("{}\n", reply.trim()),
    }
}

/// Reads `DECISION: ACCEPT|REVISE` and the guidance text from a steering
/// reply. A reply without a decision line counts as a revision request.
pub fn parse_steer_reply(reply: &str) -> SteerDecision {
    static DECISION: OnceLock<Regex> = OnceLock::new();
    static GUIDANCE: OnceLock<Regex> = OnceLock::new();
    let d = DECISION.get_or_init(|| Regex::new(r"(?i)DECISION\W*(ACCEPT|REVISE)").expect("static regex"));
    let g = GUIDANCE.get_or_init(|| Regex::new(r"(?is)GUIDANCE\W*?:\s*(.*)$").expect("static regex"));
    let decision = match d.captures(reply) {
        Some(c) if c[1].eq_ignore_ascii_case("accept") => Decision::Accept,
        _ => Decision::Revise,
    };
    let guidance = match g.captures(reply) {
        Some(c) => c[1].trim().to_string(),
        None => reply
            .lines()
            .filter(|l| !d.is_match(l))
            .collect::<Vec<_>>()
            .join("\n")
            .trim()
            .to_string(),
    };
    SteerDecision { decision, guidance }
}

/// Final `PASS`/`FAIL` line of a checker run.
fn check_passed(stdout: &str) -> Option<bool> {
    match stdout.lines().rev().map(str::trim).find(|l| !l.is_empty()) {
        Some("PASS") => Some(true),
        Some("FAIL") => Some(false),
        _ => None,
    }
}

impl Ctx<'_> {
    /// Program output as the LLMs see it.
    fn describe_run(&self, run: &SandboxResult) -> String {
        if run.timed_out {
            return format!(
                "{}\n[killed: the program exceeded {} seconds]",
                self.shown_output(&run.stdout),
                num(self.inst.exec_timeout)
            );
        }
        let mut out = self.shown_output(&run.stdout);
        if run.stdout_truncated {
            out.push_str("\n[output was truncated]");
        }
        if !run.stderr.trim().is_empty() {
            out.push_str("\n[stderr]\n");
            out.push_str(&self.shown_output(&run.stderr));
        }
        if out.trim().is_empty() {
            out = "[no output]".into();
        }
        out
    }

    /// Earlier rounds rendered for a prompt. Programs of the oldest rounds are
    /// elided first once the text exceeds the history budget.
    fn history(&self, rounds: &[RoundRecord]) -> Result<String, OrchestratorError> {
        let mut elided = 0;
        loop {
            let mut text = String::new();
            for (i, r) in rounds.iter().enumerate() {
                let code = if i < elided { CODE_OMITTED } else { r.generated_code.trim_end() };
                let output = r
                    .sandbox_result
                    .as_ref()
                    .map(|s| self.describe_run(s))
                    .unwrap_or_default();
                let report = r.check_result.as_ref().map(|c| c.report.as_str()).unwrap_or("[none]");
                let guidance = r.steer_decision.as_ref().map(|s| s.guidance.as_str()).unwrap_or("");
                text.push_str(&self.prompts.render(
                    "history_round",
                    &[
                        ("round", &r.round.to_string()),
                        ("code", code),
                        ("output", &output),
                        ("check_report", report),
                        ("guidance", if guidance.is_empty() { "[none]" } else { guidance }),
                    ],
                )?);
                text.push('\n');
            }
            if text.chars().count() <= self.cfg.history_chars || elided >= rounds.len() {
                return Ok(text);
            }
            elided += 1;
        }
    }

    fn check(&mut self, sandbox: &Sandbox, run: &SandboxResult) -> Result<Result<CheckOutcome, crate::llm::LlmError>, OrchestratorError> {
        let user = self.prompts.render(
            "check",
            &[
                ("task", &self.task),
                ("output_file", CHECK_OUTPUT_FILE),
                ("output", &self.describe_run(run)),
                ("language", &self.cfg.language_name()),
            ],
        )?;
        let req = self.request("system_check", user)?;
        let reply = match self.session.complete(roles::CHECK, &req) {
            Ok(r) => r,
            Err(e) => return Ok(Err(e)),
        };
        let check_code = extract_code(&reply);
        let mut result = sandbox.execute_with_files(
            &check_code,
            &[(CHECK_OUTPUT_FILE, run.stdout.as_str())],
            self.inst.exec_timeout,
        )?;
        if !self.cfg.record_timing {
            result.elapsed = 0.0;
        }
        let passed = if result.timed_out { None } else { check_passed(&result.stdout) };
        let report = self.describe_run(&result);
        Ok(Ok(CheckOutcome {
            check_code,
            sandbox_result: result,
            report,
            passed,
        }))
    }
}

pub(super) fn run(ctx: &mut Ctx<'_>, sandbox: &Sandbox, max_rounds: u32) -> Result<Outcome, OrchestratorError> {
    let table = builtin_table(&ctx.cfg.language)
        .ok_or_else(|| OrchestratorError::Config(format!("no pattern table for `{}`", ctx.cfg.language)))?;
    let mut rounds: Vec<RoundRecord> = Vec::new();
    let mut final_plan = None;
    let mut guidance = String::new();
    for r in 1..=max_rounds {
        let history = ctx.history(&rounds)?;
        let mut user = ctx.prompts.render(
            "task_code",
            &[
                ("task", &ctx.task),
                ("language", &ctx.cfg.language_name()),
                ("exec_timeout", &num(ctx.inst.exec_timeout)),
                ("history", &history),
            ],
        )?;
        if !guidance.is_empty() {
            user.push('\n');
            user.push_str(&ctx.prompts.render("guidance", &[("guidance", &guidance)])?);
        }
        let req = ctx.request("system_task", user.clone())?;
        let reply = match ctx.session.complete(roles::TASK, &req) {
            Ok(t) => t,
            Err(e) => return Ok(Outcome::aborted(rounds, Vec::new(), &e)),
        };
        let code = extract_code(&reply);
        let mut run = sandbox.execute(&code, ctx.inst.exec_timeout)?;
        if !ctx.cfg.record_timing {
            run.elapsed = 0.0;
        }
        let verification = verify_detailed(ctx.inst, run.stdout.as_bytes(), &run, &ctx.cfg.verification);
        let complexity = analyze(&code, table);
        let mut round = RoundRecord {
            round: r,
            task_prompt: user,
            generated_code: code,
            sandbox_result: Some(run),
            check_result: None,
            complexity_report: Some(complexity),
            steer_decision: None,
            guidance_text: guidance.clone(),
            verdict: verification.verdict,
        };
        final_plan = verification.plan;

        if r == max_rounds {
            round.steer_decision = Some(SteerDecision {
                decision: Decision::ForceAccept,
                guidance: String::new(),
            });
            rounds.push(round);
            break;
        }

        let run = round.sandbox_result.as_ref().expect("set above");
        match ctx.check(sandbox, run)? {
            Ok(c) => round.check_result = Some(c),
            Err(e) => {
                rounds.push(round);
                return Ok(Outcome::aborted(rounds, Vec::new(), &e));
            }
        }
        let steer_user = ctx.prompts.render(
            "steer",
            &[
                ("task", &ctx.task),
                ("history", &ctx.history(&rounds)?),
                ("round", &r.to_string()),
                ("max_rounds", &max_rounds.to_string()),
                ("code", round.generated_code.trim_end()),
                ("output", &ctx.describe_run(run)),
                ("check_report", &round.check_result.as_ref().expect("set above").report),
                ("complexity", &round.complexity_report.as_ref().expect("set above").summary),
            ],
        )?;
        let req = ctx.request("system_steer", steer_user)?;
        let decision = match ctx.session.complete(roles::STEER, &req) {
            Ok(t) => parse_steer_reply(&t),
            Err(e) => {
                rounds.push(round);
                return Ok(Outcome::aborted(rounds, Vec::new(), &e));
            }
        };
        let accepted = decision.decision == Decision::Accept;
        guidance = decision.guidance.clone();
        round.steer_decision = Some(decision);
        rounds.push(round);
        if accepted {
            break;
        }
    }
    let final_verdict = rounds.last().expect("at least one round").verdict.clone();
    Ok(Outcome {
        rounds,
        steps: Vec::new(),
        final_plan,
        final_verdict,
        method_error: None,
    })
}
