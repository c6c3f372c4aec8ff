//! Prompt rendering. Wording lives in versioned template files
//! (`prompts/<version>/*.txt`, placeholders written `{{name}}`); this module
//! only fills in instance data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::envs::blocksworld::SCHEMAS;
use crate::envs::boxnet::BoxLocation;
use crate::geometry::{Point, Rect};
use crate::model::{EnvState, GoalSpec, PlanVariant, TaskInstance, Waypoint};

pub const DEFAULT_PROMPT_VERSION: &str = "v1";

macro_rules! builtin {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../prompts/v1/", $name, ".txt")))),*]
    };
}

const V1: &[(&str, &str)] = builtin!(
    "system_task",
    "system_check",
    "system_steer",
    "system_planner",
    "system_robot",
    "env_gridworld",
    "env_blocksworld",
    "env_boxnet",
    "env_boxlift",
    "env_path_racecars",
    "env_path_drones",
    "env_shape_formation",
    "format_actions",
    "format_waypoints",
    "task_code",
    "history_round",
    "guidance",
    "only_question",
    "check",
    "steer",
    "saycan_rate",
    "hmas_central",
    "hmas_feedback",
    "hmas_commit",
    "step_actions",
    "step_waypoints",
);

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("unknown prompt version `{0}`")]
    UnknownVersion(String),
    #[error("prompt set is missing template `{0}`")]
    Missing(String),
    #[error("template `{template}` has no value for `{{{{{key}}}}}`")]
    Unfilled { template: String, key: String },
    #[error("reading prompts: {0}")]
    Io(#[from] std::io::Error),
}

/// A complete, named set of templates.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    pub version: String,
    templates: BTreeMap<String, String>,
}

impl PromptSet {
    pub fn builtin(version: &str) -> Result<Self, PromptError> {
        if version != DEFAULT_PROMPT_VERSION {
            return Err(PromptError::UnknownVersion(version.to_string()));
        }
        Ok(PromptSet {
            version: version.to_string(),
            templates: V1.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        })
    }

    /// Loads `<root>/<version>/*.txt`. Every built-in template name must be present.
    pub fn load(root: &Path, version: &str) -> Result<Self, PromptError> {
        let dir = root.join(version);
        let mut templates = BTreeMap::new();
        for (name, _) in V1 {
            let path = dir.join(format!("{name}.txt"));
            if !path.exists() {
                return Err(PromptError::Missing(name.to_string()));
            }
            templates.insert(name.to_string(), std::fs::read_to_string(path)?);
        }
        Ok(PromptSet {
            version: version.to_string(),
            templates,
        })
    }

    pub fn template(&self, name: &str) -> Result<&str, PromptError> {
        self.templates
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| PromptError::Missing(name.to_string()))
    }

    /// Fills `{{key}}` placeholders. Every placeholder must get a value.
    pub fn render(&self, name: &str, vars: &[(&str, &str)]) -> Result<String, PromptError> {
        fill(name, self.template(name)?, vars)
    }
}

fn fill(name: &str, template: &str, vars: &[(&str, &str)]) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        let Some(close) = rest[open..].find("}}") else {
            break;
        };
        let key = &rest[open + 2..open + close];
        let value = vars
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| PromptError::Unfilled {
                template: name.to_string(),
                key: key.to_string(),
            })?;
        out.push_str(&rest[..open]);
        out.push_str(value);
        rest = &rest[open + close + 2..];
    }
    out.push_str(rest);
    Ok(out.trim_end().to_string())
}

/// Decimal rendering with at most three fractional digits.
pub fn num(v: f64) -> String {
    let r = (v * 1000.0).round() / 1000.0;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

pub fn point(p: Point) -> String {
    format!("({}, {})", num(p.x), num(p.y))
}

fn rect(r: &Rect) -> String {
    format!("x in [{}, {}], y in [{}, {}]", num(r.min.x), num(r.max.x), num(r.min.y), num(r.max.y))
}

fn list(items: impl IntoIterator<Item = String>) -> String {
    let v: Vec<String> = items.into_iter().collect();
    if v.is_empty() {
        "none".into()
    } else {
        v.join("; ")
    }
}

fn towers(t: &[Vec<String>]) -> String {
    list(t.iter().map(|tw| format!("[{}]", tw.join(", "))))
}

/// Task description: environment, capabilities, goal, limits and output format.
pub fn render_prompt(inst: &TaskInstance) -> String {
    let set = PromptSet::builtin(DEFAULT_PROMPT_VERSION).expect("built-in prompts");
    render_prompt_with(inst, &set).expect("built-in templates are complete")
}

pub fn render_prompt_with(inst: &TaskInstance, set: &PromptSet) -> Result<String, PromptError> {
    let step_limit = inst.step_limit.map(|s| s.to_string()).unwrap_or_default();
    let time_limit = inst.time_limit.map(num).unwrap_or_default();
    let env = match (&inst.initial_state, &inst.goal) {
        (EnvState::Gridworld(s), _) => set.render(
            "env_gridworld",
            &[
                ("width", &s.width.to_string()),
                ("height", &s.height.to_string()),
                ("obstacles", &list(s.obstacles.iter().map(|c| c.to_string()))),
                ("robot", &s.robot.to_string()),
                ("goals", &list(s.goals.iter().map(|g| g.cell.to_string()))),
                ("step_limit", &step_limit),
            ],
        )?,
        (EnvState::Blocksworld(s), GoalSpec::Blocksworld { towers: goal }) => {
            let schemas: Vec<String> = SCHEMAS
                .iter()
                .map(|(tok, arity, desc)| {
                    let args = if *arity == 1 { "X" } else { "X, Y" };
                    format!("- {tok}({args}): {desc}")
                })
                .collect();
            set.render(
                "env_blocksworld",
                &[
                    ("blocks", &s.blocks().join(", ")),
                    ("initial", &towers(&s.towers)),
                    ("schemas", &schemas.join("\n")),
                    ("goal", &towers(goal)),
                    ("step_limit", &step_limit),
                ],
            )?
        }
        (EnvState::BoxNet(s), _) => set.render(
            "env_boxnet",
            &[
                ("rows", &s.rows.to_string()),
                ("cols", &s.cols.to_string()),
                (
                    "boxes",
                    &list(s.boxes.iter().map(|(id, b)| match b.location {
                        BoxLocation::Cell(c) => format!("{id}: {}, {c}", b.color),
                        BoxLocation::GoalSlot => format!("{id}: {}, already placed", b.color),
                    })),
                ),
                ("goals", &list(s.goals.iter().map(|(col, c)| format!("{col}: {c}")))),
                ("step_limit", &step_limit),
            ],
        )?,
        (EnvState::BoxLift(s), _) => set.render(
            "env_boxlift",
            &[
                ("robots", &list(s.robots.iter().map(|(id, c)| format!("{id}: {c}")))),
                (
                    "boxes",
                    &list(s.boxes.iter().map(|(id, b)| {
                        if b.lifted {
                            format!("{id}: {} (already lifted)", b.weight)
                        } else {
                            format!("{id}: {}", b.weight)
                        }
                    })),
                ),
                ("step_limit", &step_limit),
            ],
        )?,
        (EnvState::PathRacecars(s), _) | (EnvState::PathDrones(s), _) => {
            let obstacles = list(s.obstacles.iter().map(|o| {
                let v: Vec<String> = o.world_vertices().into_iter().map(point).collect();
                format!("{}: [{}]", o.name, v.join(", "))
            }));
            let robots = list(s.robots.iter().map(|(id, r)| {
                let goal = r.goal.as_ref().map(rect).unwrap_or_else(|| "anywhere".into());
                format!("{id}: start {}, goal {goal}, max speed {} m/s", point(r.start), num(r.v_max))
            }));
            let b = &s.bounds;
            let (xmin, xmax, ymin, ymax) = (num(b.min.x), num(b.max.x), num(b.min.y), num(b.max.y));
            let sd = num(s.safe_distance);
            let mut vars: Vec<(&str, &str)> = vec![
                ("xmin", &xmin),
                ("xmax", &xmax),
                ("ymin", &ymin),
                ("ymax", &ymax),
                ("obstacles", &obstacles),
                ("robots", &robots),
                ("safe_distance", &sd),
                ("time_limit", &time_limit),
            ];
            match &inst.goal {
                GoalSpec::PathDrones { hole } => {
                    let (a, bb, th) = (point(hole.a), point(hole.b), num(hole.thickness));
                    vars.extend([("hole_a", a.as_str()), ("hole_b", bb.as_str()), ("thickness", th.as_str())]);
                    set.render("env_path_drones", &vars)?
                }
                _ => set.render("env_path_racecars", &vars)?,
            }
        }
        (EnvState::ShapeFormation(s), GoalSpec::ShapeFormation(spec)) => {
            let b = &s.bounds;
            let shape = format!("{:?}", spec.shape).to_lowercase();
            set.render(
                "env_shape_formation",
                &[
                    ("xmin", &num(b.min.x)),
                    ("xmax", &num(b.max.x)),
                    ("ymin", &num(b.min.y)),
                    ("ymax", &num(b.max.y)),
                    ("shape", &shape),
                    ("boxes", &list(s.boxes.iter().map(|(id, p)| format!("{id}: {}", point(*p))))),
                    ("slots", &list(spec.target_poses.iter().map(|p| point(*p)))),
                    ("tolerance", &num(spec.tolerance)),
                    (
                        "bowls",
                        &list(spec.bowls.iter().map(|d| format!("center {}, radius {}", point(d.center), num(d.radius)))),
                    ),
                    ("time_limit", &time_limit),
                ],
            )?
        }
        _ => unreachable!("validated instances pair state and goal of one kind"),
    };
    let format = match inst.env_kind.plan_variant() {
        PlanVariant::Actions => set.render("format_actions", &[])?,
        PlanVariant::Waypoints => set.render("format_waypoints", &[])?,
    };
    Ok(format!("{env}\n\n{format}"))
}

/// Short description of an intermediate state for step-by-step planners.
pub fn describe_state(state: &EnvState, positions: Option<&BTreeMap<String, Waypoint>>) -> String {
    let mut out = String::new();
    match state {
        EnvState::Gridworld(s) => {
            let _ = write!(out, "robot at {}; ", s.robot);
            let visited: Vec<String> = s.goals.iter().filter(|g| g.visited).map(|g| g.cell.to_string()).collect();
            let open: Vec<String> = s.goals.iter().filter(|g| !g.visited).map(|g| g.cell.to_string()).collect();
            let _ = write!(out, "visited goals: {}; goals left: {}", list(visited), list(open));
        }
        EnvState::Blocksworld(s) => {
            let held = s.holding.clone().unwrap_or_else(|| "nothing".into());
            let _ = write!(out, "towers: {}; arm holds {held}", towers(&s.towers));
        }
        EnvState::BoxNet(s) => {
            let _ = write!(
                out,
                "{}",
                list(s.boxes.iter().map(|(id, b)| match b.location {
                    BoxLocation::Cell(c) => format!("{id} in {c}"),
                    BoxLocation::GoalSlot => format!("{id} placed"),
                }))
            );
        }
        EnvState::BoxLift(s) => {
            let lifted: Vec<String> = s.boxes.iter().filter(|(_, b)| b.lifted).map(|(k, _)| k.clone()).collect();
            let left: Vec<String> = s.boxes.iter().filter(|(_, b)| !b.lifted).map(|(k, _)| k.clone()).collect();
            let _ = write!(out, "lifted: {}; not lifted: {}", list(lifted), list(left));
        }
        _ => {
            let ids = state.agent_ids();
            let _ = write!(
                out,
                "{}",
                list(ids.iter().map(|id| match positions.and_then(|p| p.get(id)) {
                    Some(w) => format!("{id} at {} since t = {}", point(w.pos()), num(w.t)),
                    None => format!("{id} not moved yet"),
                }))
            );
        }
    }
    out
}
