//! Central planner proposing one step at a time, with per-robot feedback
//! before each step is committed.

use std::collections::BTreeMap;

use serde_json::Value;

use super::{roles, step_cap, Ctx, Outcome, OrchestratorError};
use crate::continuous::check_task_goal;
use crate::envs::{apply_action, check_action_syntax, is_goal};
use crate::llm::LlmError;
use crate::model::{Action, EnvState, Plan, PlanVariant, StepTrace, Waypoint};
use crate::prompt::{describe_state, num};
use crate::verifier::verify_plan;

/// One proposed time step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepProposal {
    Actions(Vec<Action>),
    Waypoints(BTreeMap<String, Waypoint>),
}

impl StepProposal {
    fn text(&self) -> String {
        match self {
            StepProposal::Actions(a) => a.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "),
            StepProposal::Waypoints(w) => w
                .iter()
                .map(|(id, p)| format!("{id} -> ({}, {}) at t = {}", num(p.x), num(p.y), num(p.t)))
                .collect::<Vec<_>>()
                .join(", "),
        }
    }
}

/// JSON values starting at each `open` byte, last decodable one first.
fn json_candidates(text: &str, open: char) -> impl Iterator<Item = Value> + '_ {
    let starts: Vec<usize> = text.match_indices(open).map(|(i, _)| i).collect();
    starts.into_iter().rev().filter_map(move |i| {
        serde_json::Deserializer::from_str(&text[i..])
            .into_iter::<Value>()
            .next()
            .and_then(Result::ok)
    })
}

/// Reads one step from a reply: a JSON list of actions, or a JSON object of
/// `id: [x, y, t]` waypoints. The last decodable document wins.
pub fn parse_step(reply: &str, state: &EnvState) -> Result<StepProposal, String> {
    let env = state.env_kind();
    let ids = state.agent_ids();
    match env.plan_variant() {
        PlanVariant::Actions => {
            let actions = json_candidates(reply, '[')
                .find_map(|v| serde_json::from_value::<Vec<Action>>(v).ok().filter(|a| !a.is_empty()))
                .ok_or("no non-empty JSON list of actions in the reply")?;
            for a in &actions {
                check_action_syntax(env, a)?;
            }
            Ok(StepProposal::Actions(actions))
        }
        PlanVariant::Waypoints => {
            let map = json_candidates(reply, '{')
                .find_map(|v| serde_json::from_value::<BTreeMap<String, Waypoint>>(v).ok())
                .ok_or("no JSON object of waypoints in the reply")?;
            if map.is_empty() {
                return Err("the step moves nothing".into());
            }
            for (id, w) in &map {
                if !ids.contains(id) {
                    return Err(format!("unknown id `{id}`"));
                }
                if !(w.x.is_finite() && w.y.is_finite() && w.t.is_finite()) {
                    return Err(format!("non-finite waypoint for `{id}`"));
                }
            }
            Ok(StepProposal::Waypoints(map))
        }
    }
}

fn is_done(reply: &str) -> bool {
    reply.trim().trim_matches(|c: char| !c.is_alphanumeric()).eq_ignore_ascii_case("done")
}

struct Progress {
    state: EnvState,
    steps: Vec<Vec<Action>>,
    trajectories: BTreeMap<String, Vec<Waypoint>>,
    history: Vec<String>,
    /// Set once a committed step could not be executed.
    broken: bool,
}

impl Progress {
    fn plan(&self, variant: PlanVariant) -> Plan {
        match variant {
            PlanVariant::Actions => Plan::Actions {
                steps: self.steps.clone(),
            },
            PlanVariant::Waypoints => Plan::Waypoints {
                trajectories: self.trajectories.clone(),
            },
        }
    }

    fn goal_reached(&self, ctx: &Ctx<'_>) -> bool {
        match ctx.inst.env_kind.plan_variant() {
            PlanVariant::Actions => is_goal(&self.state, &ctx.inst.goal),
            PlanVariant::Waypoints => {
                let g = check_task_goal(&ctx.inst.initial_state, &ctx.inst.goal, &self.trajectories);
                g.reached && g.violation.is_none()
            }
        }
    }

    fn state_text(&self) -> String {
        let last: BTreeMap<String, Waypoint> = self
            .trajectories
            .iter()
            .filter_map(|(k, t)| t.last().map(|w| (k.clone(), *w)))
            .collect();
        describe_state(&self.state, Some(&last))
    }

    fn commit(&mut self, step: StepProposal) {
        self.history.push(step.text());
        match step {
            StepProposal::Actions(actions) => {
                match apply_action(&self.state, &actions) {
                    Ok(next) => self.state = next,
                    Err(_) => self.broken = true,
                }
                self.steps.push(actions);
            }
            StepProposal::Waypoints(map) => {
                for (id, w) in map {
                    self.trajectories.entry(id).or_default().push(w);
                }
            }
        }
    }
}

fn history_text(h: &[String]) -> String {
    if h.is_empty() {
        return "[none]".into();
    }
    h.iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {s}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

pub(super) fn run(ctx: &mut Ctx<'_>) -> Result<Outcome, OrchestratorError> {
    let variant = ctx.inst.env_kind.plan_variant();
    let step_format = match variant {
        PlanVariant::Actions => ctx.prompts.render("step_actions", &[])?,
        PlanVariant::Waypoints => ctx.prompts.render("step_waypoints", &[])?,
    };
    let agents = ctx.inst.initial_state.agent_ids();
    let with_feedback = ctx.inst.agent_count() > 1;
    let cap = step_cap(ctx.inst) as usize;
    let mut p = Progress {
        state: ctx.inst.initial_state.clone(),
        steps: Vec::new(),
        trajectories: BTreeMap::new(),
        history: Vec::new(),
        broken: false,
    };
    let mut traces = Vec::new();
    let mut err: Option<LlmError> = None;

    'steps: while p.history.len() < cap && !p.broken && !p.goal_reached(ctx) {
        let state_text = p.state_text();
        let history = history_text(&p.history);
        let user = ctx.prompts.render(
            "hmas_central",
            &[
                ("task", &ctx.task),
                ("history", &history),
                ("state", &state_text),
                ("step_format", &step_format),
            ],
        )?;
        let req = ctx.request("system_planner", user)?;
        let reply = match ctx.session.complete(roles::HMAS_CENTRAL, &req) {
            Ok(r) => r,
            Err(e) => {
                err = Some(e);
                break;
            }
        };
        let mut trace = StepTrace {
            step: traces.len() as u32 + 1,
            candidates: Vec::new(),
            likelihood_source: None,
            chosen: None,
            feedback: Vec::new(),
        };
        if is_done(&reply) {
            traces.push(trace);
            break;
        }
        let proposal = match parse_step(&reply, &p.state) {
            Ok(s) => s,
            Err(e) => {
                trace.feedback.push(format!("unparseable proposal: {e}"));
                traces.push(trace);
                break;
            }
        };
        let committed = if with_feedback {
            let proposal_text = proposal.text();
            for robot in &agents {
                let user = ctx.prompts.render(
                    "hmas_feedback",
                    &[
                        ("task", &ctx.task),
                        ("robot", robot),
                        ("proposal", &proposal_text),
                        ("state", &state_text),
                    ],
                )?;
                let req = ctx.request("system_robot", user)?;
                match ctx.session.complete(roles::HMAS_FEEDBACK, &req) {
                    Ok(r) => trace.feedback.push(format!("{robot}: {}", r.trim())),
                    Err(e) => {
                        err = Some(e);
                        traces.push(trace);
                        break 'steps;
                    }
                }
            }
            let user = ctx.prompts.render(
                "hmas_commit",
                &[
                    ("task", &ctx.task),
                    ("history", &history),
                    ("state", &state_text),
                    ("proposal", &proposal_text),
                    ("feedback", &trace.feedback.join("\n")),
                    ("step_format", &step_format),
                ],
            )?;
            let req = ctx.request("system_planner", user)?;
            let reply = match ctx.session.complete(roles::HMAS_COMMIT, &req) {
                Ok(r) => r,
                Err(e) => {
                    err = Some(e);
                    traces.push(trace);
                    break;
                }
            };
            match parse_step(&reply, &p.state) {
                Ok(s) => s,
                Err(e) => {
                    trace.feedback.push(format!("unparseable commit: {e}"));
                    traces.push(trace);
                    break;
                }
            }
        } else {
            proposal
        };
        trace.chosen = Some(committed.text());
        traces.push(trace);
        p.commit(committed);
    }

    if let Some(e) = err {
        return Ok(Outcome::aborted(Vec::new(), traces, &e));
    }
    let plan = p.plan(variant);
    let verdict = verify_plan(ctx.inst, &plan, &ctx.cfg.verification);
    Ok(Outcome {
        rounds: vec![super::single_round(ctx.task.clone(), verdict.clone())],
        steps: traces,
        final_plan: Some(plan),
        final_verdict: verdict,
        method_error: None,
    })
}
