//! Plan wire format.
//!
//! A guest program reports its plan by printing a line `===PLAN===` followed
//! by one JSON object:
//!
//! ```text
//! ===PLAN===
//! {"variant":"actions","steps":[[{"robot":"arm","action":"pick_up","args":["A"]}]]}
//! ```
//!
//! or
//!
//! ```text
//! ===PLAN===
//! {"variant":"waypoints","trajectories":{"car0":[[1.0,2.0,0.0],[5.0,2.0,4.0]]}}
//! ```
//!
//! Anything else on stdout is ignored. When several documents are printed,
//! the last one that decodes as a plan wins.

use std::collections::BTreeSet;

use serde_json::Value;

use crate::envs;
use crate::model::{EnvKind, Plan, PlanVariant, TaskInstance};

pub const PLAN_MARKER: &str = "===PLAN===";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("no plan document found in output")]
    NoDocument,
    #[error("plan document does not match the schema: {0}")]
    SchemaMismatch(String),
    #[error("{env} expects a `{expected:?}` plan but the document is `{found:?}`")]
    VariantMismatch {
        env: EnvKind,
        expected: PlanVariant,
        found: PlanVariant,
    },
}

/// Renders a plan as a wire document (marker line, JSON, trailing newline).
pub fn serialize_plan(plan: &Plan) -> String {
    format!(
        "{PLAN_MARKER}\n{}\n",
        serde_json::to_string(plan).expect("plans always serialize")
    )
}

/// Byte offsets just past each marker line.
fn marker_offsets(text: &str) -> Vec<usize> {
    let mut out = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if line.trim() == PLAN_MARKER {
            out.push(offset + line.len());
        }
        offset += line.len();
    }
    out
}

/// Extracts the last well-formed plan document from raw program output and
/// checks it against the instance's environment.
pub fn parse_plan(output: &[u8], instance: &TaskInstance) -> Result<Plan, ParseError> {
    let text = String::from_utf8_lossy(output);
    let offsets = marker_offsets(&text);
    if offsets.is_empty() {
        return Err(ParseError::NoDocument);
    }
    let mut last_err = None;
    let mut chosen = None;
    for &off in offsets.iter().rev() {
        let rest = &text[off..];
        let mut stream = serde_json::Deserializer::from_str(rest).into_iter::<Value>();
        match stream.next() {
            Some(Ok(value)) => match serde_json::from_value::<Plan>(value) {
                Ok(plan) => {
                    chosen = Some(plan);
                    break;
                }
                Err(e) => last_err.get_or_insert(ParseError::SchemaMismatch(e.to_string())),
            },
            Some(Err(e)) => {
                last_err.get_or_insert(ParseError::SchemaMismatch(format!("not JSON: {e}")))
            }
            None => last_err.get_or_insert(ParseError::SchemaMismatch(
                "marker not followed by a document".into(),
            )),
        };
    }
    let plan = match chosen {
        Some(p) => p,
        None => return Err(last_err.unwrap_or(ParseError::NoDocument)),
    };
    check_plan_shape(&plan, instance)?;
    Ok(plan)
}

/// Environment-level schema checks: variant, action vocabulary, and
/// trajectory well-formedness.
pub fn check_plan_shape(plan: &Plan, instance: &TaskInstance) -> Result<(), ParseError> {
    let env = instance.env_kind;
    let expected = env.plan_variant();
    if plan.variant() != expected {
        return Err(ParseError::VariantMismatch {
            env,
            expected,
            found: plan.variant(),
        });
    }
    match plan {
        Plan::Actions { steps } => {
            for (i, step) in steps.iter().enumerate() {
                for a in step {
                    envs::check_action_syntax(env, a).map_err(|e| {
                        ParseError::SchemaMismatch(format!("step {i}: {e}"))
                    })?;
                }
            }
        }
        Plan::Waypoints { trajectories } => {
            let expected: BTreeSet<String> = instance.initial_state.agent_ids().into_iter().collect();
            let found: BTreeSet<String> = trajectories.keys().cloned().collect();
            if expected != found {
                let missing: Vec<_> = expected.difference(&found).cloned().collect();
                let extra: Vec<_> = found.difference(&expected).cloned().collect();
                return Err(ParseError::SchemaMismatch(format!(
                    "trajectory keys differ from agents (missing {missing:?}, unknown {extra:?})"
                )));
            }
            for (id, traj) in trajectories {
                if traj.is_empty() {
                    return Err(ParseError::SchemaMismatch(format!("`{id}` has no waypoints")));
                }
                for (k, w) in traj.iter().enumerate() {
                    if !(w.x.is_finite() && w.y.is_finite() && w.t.is_finite()) {
                        return Err(ParseError::SchemaMismatch(format!(
                            "`{id}` waypoint {k} is not finite"
                        )));
                    }
                    if w.t < 0.0 {
                        return Err(ParseError::SchemaMismatch(format!(
                            "`{id}` waypoint {k} has negative time"
                        )));
                    }
                    if k > 0 && w.t <= traj[k - 1].t {
                        return Err(ParseError::SchemaMismatch(format!(
                            "`{id}` waypoint times must strictly increase (index {k})"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Parser for direct LLM answers. Tries, in order: the wire format, a bare
/// plan JSON object anywhere in the text (last one wins), and plain-text
/// lines. In plain text each line holding `robot:action(args)` tokens is one
/// time step, and each line `id: (x, y, t) (x, y, t) ...` extends that
/// agent's trajectory.
pub fn parse_answer(text: &str, instance: &TaskInstance) -> Result<Plan, ParseError> {
    match parse_plan(text.as_bytes(), instance) {
        Err(ParseError::NoDocument) => {}
        other => return other,
    }
    if let Some(plan) = last_bare_plan(text) {
        check_plan_shape(&plan, instance)?;
        return Ok(plan);
    }
    let plan = match instance.env_kind.plan_variant() {
        PlanVariant::Actions => lenient_actions(text, instance),
        PlanVariant::Waypoints => lenient_waypoints(text, instance),
    }
    .ok_or(ParseError::NoDocument)?;
    check_plan_shape(&plan, instance)?;
    Ok(plan)
}

fn last_bare_plan(text: &str) -> Option<Plan> {
    let starts: Vec<usize> = text.match_indices('{').map(|(i, _)| i).collect();
    starts.into_iter().rev().find_map(|i| {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(v)) if v.get("variant").is_some() => serde_json::from_value::<Plan>(v).ok(),
            _ => None,
        }
    })
}

fn lenient_arg(raw: &str) -> Value {
    let t = raw.trim().trim_matches(|c| c == '"' || c == '\'');
    match t.parse::<i64>() {
        Ok(n) => Value::from(n),
        Err(_) => Value::from(t),
    }
}

fn lenient_actions(text: &str, instance: &TaskInstance) -> Option<Plan> {
    use std::sync::OnceLock;
    static TOKEN: OnceLock<regex::Regex> = OnceLock::new();
    let re = TOKEN.get_or_init(|| {
        regex::Regex::new(r"([A-Za-z_][\w]*)\s*[:.]\s*([a-z_]+)\s*\(([^()]*)\)").expect("static regex")
    });
    let agents: BTreeSet<String> = instance.initial_state.agent_ids().into_iter().collect();
    let mut steps = Vec::new();
    for line in text.lines() {
        let step: Vec<crate::model::Action> = re
            .captures_iter(line)
            .filter(|c| agents.contains(&c[1]))
            .map(|c| {
                let args = if c[3].trim().is_empty() {
                    Vec::new()
                } else {
                    c[3].split(',').map(lenient_arg).collect()
                };
                crate::model::Action::new(&c[1], &c[2], args)
            })
            .collect();
        if !step.is_empty() {
            steps.push(step);
        }
    }
    (!steps.is_empty()).then_some(Plan::Actions { steps })
}

fn lenient_waypoints(text: &str, instance: &TaskInstance) -> Option<Plan> {
    use std::sync::OnceLock;
    static TRIPLE: OnceLock<regex::Regex> = OnceLock::new();
    let num = r"\s*(-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)\s*";
    let re = TRIPLE.get_or_init(|| {
        regex::Regex::new(&format!(r"[\[(]{num},{num},{num}[\])]")).expect("static regex")
    });
    let agents = instance.initial_state.agent_ids();
    let mut trajectories: std::collections::BTreeMap<String, Vec<crate::model::Waypoint>> = Default::default();
    for line in text.lines() {
        let head = line.trim_start().trim_start_matches(['-', '*', ' ']);
        let Some(id) = agents.iter().find(|id| {
            head.strip_prefix(id.as_str())
                .is_some_and(|r| r.trim_start().starts_with(':'))
        }) else {
            continue;
        };
        for c in re.captures_iter(line) {
            let v: Vec<f64> = (1..=3).filter_map(|k| c[k].parse().ok()).collect();
            if v.len() == 3 {
                trajectories
                    .entry(id.clone())
                    .or_default()
                    .push(crate::model::Waypoint::new(v[0], v[1], v[2]));
            }
        }
    }
    (!trajectories.is_empty()).then_some(Plan::Waypoints { trajectories })
}
