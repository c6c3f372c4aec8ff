//! Direct answering: the LLM writes the plan itself.

use super::{roles, single_round, Ctx, Outcome, OrchestratorError};
use crate::model::Verdict;
use crate::verifier::verify_plan;
use crate::wire::parse_answer;

pub(super) fn run(ctx: &mut Ctx<'_>) -> Result<Outcome, OrchestratorError> {
    let user = ctx.prompts.render("only_question", &[("task", &ctx.task)])?;
    let req = ctx.request("system_planner", user.clone())?;
    let reply = match ctx.session.complete(roles::ONLY_QUESTION, &req) {
        Ok(t) => t,
        Err(e) => return Ok(Outcome::aborted(Vec::new(), Vec::new(), &e)),
    };
    let (plan, verdict) = match parse_answer(&reply, ctx.inst) {
        Ok(plan) => {
            let v = verify_plan(ctx.inst, &plan, &ctx.cfg.verification);
            (Some(plan), v)
        }
        Err(e) => (None, Verdict::parse_error(e.to_string())),
    };
    Ok(Outcome {
        rounds: vec![single_round(user, verdict.clone())],
        steps: Vec::new(),
        final_plan: plan,
        final_verdict: verdict,
        method_error: None,
    })
}
