//! Step-by-step selection among afforded next steps, scored by LLM
//! likelihood times feasibility.

use std::collections::BTreeMap;

use super::{step_cap, Ctx, Outcome, OrchestratorError};
use crate::continuous::{ContinuousScene, Hole};
use crate::envs::{apply_action, candidate_steps, is_goal};
use crate::geometry::{point_segment_distance, segment_polygon_clearance, Point};
use crate::llm::{score_candidates, LlmError};
use crate::model::{Action, EnvState, GoalSpec, Plan, StepTrace, Waypoint};
use crate::prompt::{describe_state, num, point};
use crate::verifier::verify_plan;

/// Moves one robot may make before the loop stops offering it.
pub const MAX_MOVES_PER_ROBOT: usize = 6;
/// Fraction of `v_max` used when timing a move.
const CRUISE: f64 = 0.9;
/// Extra clearance added to corner waypoints.
const CORNER_MARGIN: f64 = 0.4;
const HOLE_MARGIN: f64 = 0.5;

/// A named target point a robot can drive to in a straight line.
#[derive(Debug, Clone, PartialEq)]
pub struct Affordance {
    pub label: String,
    pub target: Point,
    pub feasible: bool,
}

fn round3(p: Point) -> Point {
    Point::new((p.x * 1000.0).round() / 1000.0, (p.y * 1000.0).round() / 1000.0)
}

/// Straight-line targets for `robot` at `from`: its goal center, hole
/// approach points and obstacle corners pushed out by the safe distance.
/// A target is feasible when the segment stays in bounds, clear of
/// obstacles and clear of the other robots, which hold still meanwhile.
pub fn continuous_affordances(
    scene: &ContinuousScene,
    hole: Option<&Hole>,
    robot: &str,
    from: Point,
    others: &BTreeMap<String, Point>,
) -> Vec<Affordance> {
    let sd = scene.safe_distance;
    let mut raw: Vec<(String, Point)> = Vec::new();
    if let Some(goal) = scene.robots.get(robot).and_then(|r| r.goal) {
        raw.push(("goal".into(), goal.center()));
    }
    if let Some(h) = hole {
        let mid = h.a.lerp(h.b, 0.5);
        let d = h.b.sub(h.a);
        let n = Point::new(-d.y, d.x).scale(1.0 / d.norm());
        let off = h.thickness / 2.0 + sd + HOLE_MARGIN;
        let near_side = if h.side(from) >= 0.0 { 1.0 } else { -1.0 };
        raw.push(("hole entry".into(), mid.add(n.scale(off * near_side))));
        raw.push(("hole exit".into(), mid.add(n.scale(-off * near_side))));
    }
    for o in &scene.obstacles {
        let verts = o.world_vertices();
        let c = verts.iter().fold(Point::new(0.0, 0.0), |acc, v| acc.add(*v)).scale(1.0 / verts.len() as f64);
        for (k, v) in verts.iter().enumerate() {
            let out = v.sub(c);
            let len = out.norm();
            if len == 0.0 {
                continue;
            }
            raw.push((format!("{} corner {k}", o.name), v.add(out.scale((sd + CORNER_MARGIN) / len))));
        }
    }
    let polygons: Vec<Vec<Point>> = scene.obstacles.iter().map(|o| o.world_vertices()).collect();
    let clear = |d: f64| d >= sd && d > 0.0;
    raw.into_iter()
        .map(|(label, t)| {
            let target = round3(t);
            let feasible = target.dist(from) > 1e-9
                && scene.bounds.contains(target)
                && polygons.iter().all(|p| clear(segment_polygon_clearance(from, target, p)))
                && others
                    .iter()
                    .filter(|(id, _)| id.as_str() != robot)
                    .all(|(_, q)| clear(point_segment_distance(*q, from, target)));
            Affordance { label, target, feasible }
        })
        .collect()
}

fn numbered(items: &[String]) -> String {
    items
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {s}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

fn history_text(chosen: &[String]) -> String {
    if chosen.is_empty() {
        "[none]".into()
    } else {
        numbered(chosen)
    }
}

/// One scoring round: prompt, likelihoods, trace entry. `Ok(None)` means no
/// candidate could be selected.
fn select(
    ctx: &mut Ctx<'_>,
    state_text: &str,
    chosen: &[String],
    texts: &[String],
    feasible: &[bool],
    traces: &mut Vec<StepTrace>,
) -> Result<Result<Option<usize>, LlmError>, OrchestratorError> {
    let user = ctx.prompts.render(
        "saycan_rate",
        &[
            ("task", &ctx.task),
            ("history", &history_text(chosen)),
            ("state", state_text),
            ("candidates", &numbered(texts)),
        ],
    )?;
    let req = ctx.request("system_planner", user)?;
    let scored = match score_candidates(&mut ctx.session, &req, texts, feasible, ctx.cfg.saycan_k, ctx.cfg.combine) {
        Ok(s) => s,
        Err(e) => return Ok(Err(e)),
    };
    let pick = scored.best().map(|b| b.text.clone());
    traces.push(StepTrace {
        step: traces.len() as u32 + 1,
        candidates: scored.top.clone(),
        likelihood_source: Some(scored.source.to_string()),
        chosen: pick.clone(),
        feedback: Vec::new(),
    });
    Ok(Ok(pick.and_then(|p| texts.iter().position(|t| *t == p))))
}

pub(super) fn run(ctx: &mut Ctx<'_>) -> Result<Outcome, OrchestratorError> {
    let inst = ctx.inst;
    match &inst.initial_state {
        EnvState::ShapeFormation(_) => shape(ctx),
        s if s.scene().is_some() => motion(ctx),
        _ => discrete(ctx),
    }
}

fn finish(ctx: &Ctx<'_>, plan: Plan, traces: Vec<StepTrace>, err: Option<LlmError>) -> Outcome {
    if let Some(e) = err {
        return Outcome::aborted(Vec::new(), traces, &e);
    }
    let verdict = verify_plan(ctx.inst, &plan, &ctx.cfg.verification);
    Outcome {
        rounds: vec![super::single_round(ctx.task.clone(), verdict.clone())],
        steps: traces,
        final_plan: Some(plan),
        final_verdict: verdict,
        method_error: None,
    }
}

fn step_text(step: &[Action]) -> String {
    step.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

fn discrete(ctx: &mut Ctx<'_>) -> Result<Outcome, OrchestratorError> {
    let cap = step_cap(ctx.inst) as usize;
    let mut state = ctx.inst.initial_state.clone();
    let mut steps: Vec<Vec<Action>> = Vec::new();
    let mut chosen = Vec::new();
    let mut traces = Vec::new();
    let mut err = None;
    while steps.len() < cap && !is_goal(&state, &ctx.inst.goal) {
        let cands = candidate_steps(&state);
        if cands.is_empty() {
            break;
        }
        let texts: Vec<String> = cands.iter().map(|c| step_text(c)).collect();
        let next: Vec<Option<EnvState>> = cands.iter().map(|c| apply_action(&state, c).ok()).collect();
        let feasible: Vec<bool> = next.iter().map(Option::is_some).collect();
        let state_text = describe_state(&state, None);
        match select(ctx, &state_text, &chosen, &texts, &feasible, &mut traces)? {
            Err(e) => {
                err = Some(e);
                break;
            }
            Ok(None) => break,
            Ok(Some(i)) => {
                state = next[i].clone().expect("selected candidates are feasible");
                chosen.push(texts[i].clone());
                steps.push(cands[i].clone());
            }
        }
    }
    Ok(finish(ctx, Plan::Actions { steps }, traces, err))
}

/// Robots move one at a time, each toward its goal through afforded points.
fn motion(ctx: &mut Ctx<'_>) -> Result<Outcome, OrchestratorError> {
    let scene = ctx.inst.initial_state.scene().expect("continuous").clone();
    let hole = match &ctx.inst.goal {
        GoalSpec::PathDrones { hole } => Some(*hole),
        _ => None,
    };
    let cap = step_cap(ctx.inst) as usize;
    let mut pos: BTreeMap<String, Point> = scene.robots.iter().map(|(id, r)| (id.clone(), r.start)).collect();
    let mut trajectories: BTreeMap<String, Vec<Waypoint>> = BTreeMap::new();
    let mut moves: BTreeMap<String, usize> = BTreeMap::new();
    let mut clock = 0.0;
    let mut chosen = Vec::new();
    let mut traces = Vec::new();
    let mut err = None;
    while chosen.len() < cap {
        let active = scene.robots.iter().find(|(id, r)| {
            let done = r.goal.is_some_and(|g| g.contains(pos[*id]));
            !done && moves.get(*id).copied().unwrap_or(0) < MAX_MOVES_PER_ROBOT
        });
        let Some((id, spec)) = active else { break };
        let id = id.clone();
        let from = pos[&id];
        let affs = continuous_affordances(&scene, hole.as_ref(), &id, from, &pos);
        let texts: Vec<String> = affs
            .iter()
            .map(|a| format!("move {id} to {} {}", a.label, point(a.target)))
            .collect();
        let feasible: Vec<bool> = affs.iter().map(|a| a.feasible).collect();
        let last: BTreeMap<String, Waypoint> = pos.iter().map(|(k, p)| (k.clone(), Waypoint::at(*p, clock))).collect();
        let state_text = format!(
            "{}; current time t = {}",
            describe_state(&ctx.inst.initial_state, Some(&last)),
            num(clock)
        );
        match select(ctx, &state_text, &chosen, &texts, &feasible, &mut traces)? {
            Err(e) => {
                err = Some(e);
                break;
            }
            Ok(None) => break,
            Ok(Some(i)) => {
                let target = affs[i].target;
                let dt = (from.dist(target) / (CRUISE * spec.v_max) * 10.0).ceil() / 10.0;
                let traj = trajectories.entry(id.clone()).or_default();
                if traj.is_empty() {
                    traj.push(Waypoint::at(from, clock));
                }
                clock += dt;
                traj.push(Waypoint::at(target, clock));
                pos.insert(id.clone(), target);
                *moves.entry(id).or_default() += 1;
                chosen.push(texts[i].clone());
            }
        }
    }
    Ok(finish(ctx, Plan::Waypoints { trajectories }, traces, err))
}

/// One box placed per step, into a free target slot.
fn shape(ctx: &mut Ctx<'_>) -> Result<Outcome, OrchestratorError> {
    let (EnvState::ShapeFormation(scene), GoalSpec::ShapeFormation(spec)) = (&ctx.inst.initial_state, &ctx.inst.goal)
    else {
        unreachable!("dispatched on the state kind")
    };
    let cap = step_cap(ctx.inst) as usize;
    let mut trajectories: BTreeMap<String, Vec<Waypoint>> = BTreeMap::new();
    let mut used = vec![false; spec.target_poses.len()];
    let mut chosen = Vec::new();
    let mut traces = Vec::new();
    let mut err = None;
    while chosen.len() < cap && trajectories.len() < scene.boxes.len() {
        let mut cands = Vec::new();
        for id in scene.boxes.keys() {
            for (k, slot) in spec.target_poses.iter().enumerate() {
                cands.push((id.clone(), k, *slot));
            }
        }
        let texts: Vec<String> = cands
            .iter()
            .map(|(id, k, slot)| format!("place {id} at slot {} {}", k + 1, point(*slot)))
            .collect();
        let feasible: Vec<bool> = cands
            .iter()
            .map(|(id, k, _)| !used[*k] && !trajectories.contains_key(id))
            .collect();
        let last: BTreeMap<String, Waypoint> = trajectories
            .iter()
            .filter_map(|(k, t)| t.last().map(|w| (k.clone(), *w)))
            .collect();
        let state_text = describe_state(&ctx.inst.initial_state, Some(&last));
        match select(ctx, &state_text, &chosen, &texts, &feasible, &mut traces)? {
            Err(e) => {
                err = Some(e);
                break;
            }
            Ok(None) => break,
            Ok(Some(i)) => {
                let (id, k, slot) = &cands[i];
                used[*k] = true;
                let t = (trajectories.len() + 1) as f64;
                trajectories.insert(id.clone(), vec![Waypoint::at(*slot, t)]);
                chosen.push(texts[i].clone());
            }
        }
    }
    Ok(finish(ctx, Plan::Waypoints { trajectories }, traces, err))
}
