//! Continuous environments: scenes, piecewise-linear trajectories and the
//! exact constraint and goal checks for Path-Racecars, Shape Formation and
//! Path-Drones.
//!
//! Robots are points. A robot's trajectory starts at its scene start
//! position at t = 0 and moves linearly to its first waypoint; after its
//! last waypoint it holds position until the checking horizon (the later
//! of the time limit and the last waypoint of any robot).

mod generate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{
    clip_segment_halfplanes, min_moving_distance, point_in_polygon, segment_polygon_clearance, Disc,
    Point, PolygonError, PolygonObstacle, Rect,
};
use crate::model::{EnvState, FailureReason, GoalSpec, Plan, ShapeKind, TaskInstance, Verdict, Waypoint};

pub use generate::{generate, witness_plan, DRONE_SAFE_DISTANCE, RACECAR_SAFE_DISTANCE};

/// Relative speed tolerance applied to `v_max`.
pub const DEFAULT_SPEED_EPSILON: f64 = 1e-9;

/// Positions closer than this count as the same point (teleport detection).
const SAME_POINT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub start: Point,
    /// Region the robot must end in, when the task has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<Rect>,
    /// Maximum speed in m/s.
    pub v_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousScene {
    pub bounds: Rect,
    pub obstacles: Vec<PolygonObstacle>,
    pub robots: BTreeMap<String, RobotSpec>,
    pub safe_distance: f64,
    pub time_limit: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error(transparent)]
    Polygon(#[from] PolygonError),
    #[error("scene bounds are empty")]
    EmptyBounds,
    #[error("robot `{0}` starts outside the bounds")]
    StartOutOfBounds(String),
    #[error("robot `{0}` starts inside obstacle `{1}`")]
    StartInObstacle(String, String),
    #[error("robot `{0}` needs a positive finite v_max")]
    BadVmax(String),
    #[error("safe_distance must be finite and non-negative")]
    BadSafeDistance,
    #[error("time_limit must be positive")]
    BadTimeLimit,
}

impl ContinuousScene {
    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.bounds.width() > 0.0 && self.bounds.height() > 0.0) {
            return Err(SceneError::EmptyBounds);
        }
        for o in &self.obstacles {
            o.validate()?;
        }
        if !(self.safe_distance >= 0.0 && self.safe_distance.is_finite()) {
            return Err(SceneError::BadSafeDistance);
        }
        if !(self.time_limit > 0.0 && self.time_limit.is_finite()) {
            return Err(SceneError::BadTimeLimit);
        }
        for (id, r) in &self.robots {
            if !(r.v_max > 0.0 && r.v_max.is_finite()) {
                return Err(SceneError::BadVmax(id.clone()));
            }
            if !self.bounds.contains(r.start) {
                return Err(SceneError::StartOutOfBounds(id.clone()));
            }
            for o in &self.obstacles {
                if point_in_polygon(r.start, &o.world_vertices()) {
                    return Err(SceneError::StartInObstacle(id.clone(), o.name.clone()));
                }
            }
        }
        Ok(())
    }
}

/// Shape Formation workspace: boxes at their initial positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeScene {
    pub bounds: Rect,
    pub boxes: BTreeMap<String, Point>,
    pub time_limit: f64,
}

/// Target shape: slots the boxes must fill and bowls they must avoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub shape: ShapeKind,
    pub target_poses: Vec<Point>,
    /// A box counts as placed in a slot when its center is within this radius.
    pub tolerance: f64,
    pub bowls: Vec<Disc>,
}

/// The gap in the drone wall: the segment `a`–`b` along the wall's center
/// line, and the wall thickness. The passage is the rectangle swept by the
/// segment over the thickness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hole {
    pub a: Point,
    pub b: Point,
    pub thickness: f64,
}

impl Hole {
    fn axis(&self) -> (Point, Point, f64) {
        let d = self.b.sub(self.a);
        let len = d.norm();
        let u = d.scale(1.0 / len);
        (u, Point::new(-u.y, u.x), len)
    }

    /// Signed distance from the hole's line; positive on the left of `a→b`.
    pub fn side(&self, p: Point) -> f64 {
        let (_, n, _) = self.axis();
        p.sub(self.a).dot(n)
    }

    /// Half-planes `n · p <= c` describing the passage rectangle.
    fn passage(&self) -> [(Point, f64); 4] {
        let (u, n, len) = self.axis();
        let h = self.thickness / 2.0;
        [
            (u, u.dot(self.a) + len),
            (u.scale(-1.0), -u.dot(self.a)),
            (n, n.dot(self.a) + h),
            (n.scale(-1.0), -n.dot(self.a) + h),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InterpolateError {
    #[error("empty trajectory")]
    Empty,
    #[error("t = {0} is outside the trajectory's time span")]
    OutOfRange(f64),
}

/// Position on a piecewise-linear trajectory. Exact at waypoint times.
pub fn interpolate(traj: &[Waypoint], t: f64) -> Result<Point, InterpolateError> {
    let (first, last) = match (traj.first(), traj.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(InterpolateError::Empty),
    };
    if !(t >= first.t && t <= last.t) {
        return Err(InterpolateError::OutOfRange(t));
    }
    let idx = traj.partition_point(|w| w.t <= t);
    let prev = &traj[idx - 1];
    if prev.t == t || idx == traj.len() {
        return Ok(prev.pos());
    }
    let next = &traj[idx];
    let s = (t - prev.t) / (next.t - prev.t);
    Ok(prev.pos().lerp(next.pos(), s))
}

/// A robot's full timeline from t = 0 to `horizon`: the start position is
/// prepended when the first waypoint comes later than t = 0, and the final
/// position is held until `horizon`.
pub fn effective_trajectory(start: Point, traj: &[Waypoint], horizon: f64) -> Vec<Waypoint> {
    let mut out = Vec::with_capacity(traj.len() + 2);
    if traj.first().is_none_or(|w| w.t > 0.0) {
        out.push(Waypoint::at(start, 0.0));
    }
    out.extend_from_slice(traj);
    let last = *out.last().expect("nonempty");
    if last.t < horizon {
        out.push(Waypoint::at(last.pos(), horizon));
    }
    out
}

/// A violated constraint class plus a human-readable explanation.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub reason: FailureReason,
    pub detail: String,
}

impl Violation {
    fn new(reason: FailureReason, detail: impl Into<String>) -> Self {
        Violation {
            reason,
            detail: detail.into(),
        }
    }
}

type Trajectories = BTreeMap<String, Vec<Waypoint>>;

fn last_time(trajectories: &Trajectories) -> f64 {
    trajectories
        .values()
        .filter_map(|t| t.last())
        .map(|w| w.t)
        .fold(0.0, f64::max)
}

/// Motion constraints, checked in reporting priority: speed, time limit,
/// obstacle and workspace clearance, robot-robot clearance. Clearance
/// passes only when it is at least `safe_distance` and strictly positive.
pub fn check_motion_constraints(
    scene: &ContinuousScene,
    trajectories: &Trajectories,
    speed_epsilon: f64,
) -> Result<(), Violation> {
    let empty = Vec::new();
    let horizon = scene.time_limit.max(last_time(trajectories));
    let timelines: BTreeMap<&String, Vec<Waypoint>> = scene
        .robots
        .iter()
        .map(|(id, r)| {
            let traj = trajectories.get(id).unwrap_or(&empty);
            (id, effective_trajectory(r.start, traj, horizon))
        })
        .collect();

    for (id, r) in &scene.robots {
        let traj = trajectories.get(id).unwrap_or(&empty);
        if let Some(w) = traj.first() {
            if w.t == 0.0 && w.pos().dist(r.start) > SAME_POINT {
                return Err(Violation::new(
                    FailureReason::VelocityViolation,
                    format!("{id} jumps from its start to ({}, {}) at t = 0", w.x, w.y),
                ));
            }
        }
        let limit = r.v_max * (1.0 + speed_epsilon);
        for seg in timelines[id].windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let dist = a.pos().dist(b.pos());
            if dist > limit * (b.t - a.t) {
                return Err(Violation::new(
                    FailureReason::VelocityViolation,
                    format!(
                        "{id} moves at {:.4} m/s between t = {} and t = {} (v_max {})",
                        dist / (b.t - a.t),
                        a.t,
                        b.t,
                        r.v_max
                    ),
                ));
            }
        }
    }

    let end = last_time(trajectories);
    if end > scene.time_limit {
        return Err(Violation::new(
            FailureReason::TimeLimitViolation,
            format!("plan ends at t = {end}, time limit is {}", scene.time_limit),
        ));
    }

    let polygons: Vec<(&str, Vec<Point>)> = scene
        .obstacles
        .iter()
        .map(|o| (o.name.as_str(), o.world_vertices()))
        .collect();
    for (id, tl) in &timelines {
        for w in tl.iter() {
            if !scene.bounds.contains(w.pos()) {
                return Err(Violation::new(
                    FailureReason::CollisionViolation,
                    format!("{id} leaves the workspace at t = {}", w.t),
                ));
            }
        }
        for seg in tl.windows(2) {
            for (name, poly) in &polygons {
                let c = segment_polygon_clearance(seg[0].pos(), seg[1].pos(), poly);
                if !clearance_ok(c, scene.safe_distance) {
                    return Err(Violation::new(
                        FailureReason::CollisionViolation,
                        format!(
                            "{id} comes within {c:.4} m of obstacle {name} between t = {} and t = {}",
                            seg[0].t, seg[1].t
                        ),
                    ));
                }
            }
        }
    }

    let ids: Vec<&&String> = timelines.keys().collect();
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            let (a, b) = (&timelines[ids[i]], &timelines[ids[j]]);
            let (d, t) = pairwise_min_distance(a, b);
            if !clearance_ok(d, scene.safe_distance) {
                return Err(Violation::new(
                    FailureReason::SafeDistanceViolation,
                    format!("{} and {} are {d:.4} m apart near t = {t:.4}", ids[i], ids[j]),
                ));
            }
        }
    }
    Ok(())
}

fn clearance_ok(clearance: f64, safe_distance: f64) -> bool {
    clearance >= safe_distance && clearance > 0.0
}

/// Closest approach of two timelines that share a time span, with the
/// start time of the interval where it occurs.
pub fn pairwise_min_distance(a: &[Waypoint], b: &[Waypoint]) -> (f64, f64) {
    let lo = a[0].t.max(b[0].t);
    let hi = a[a.len() - 1].t.min(b[b.len() - 1].t);
    let mut times: Vec<f64> = a
        .iter()
        .chain(b)
        .map(|w| w.t)
        .filter(|t| *t >= lo && *t <= hi)
        .collect();
    times.push(lo);
    times.push(hi);
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut best = (f64::INFINITY, lo);
    if times.len() == 1 {
        let pa = interpolate(a, lo).unwrap();
        let pb = interpolate(b, lo).unwrap();
        return (pa.dist(pb), lo);
    }
    for w in times.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let dt = t1 - t0;
        let (a0, a1) = (interpolate(a, t0).unwrap(), interpolate(a, t1).unwrap());
        let (b0, b1) = (interpolate(b, t0).unwrap(), interpolate(b, t1).unwrap());
        let rel0 = a0.sub(b0);
        let rel_vel = a1.sub(a0).sub(b1.sub(b0)).scale(1.0 / dt);
        let d = min_moving_distance(rel0, rel_vel, dt);
        if d < best.0 {
            best = (d, t0);
        }
    }
    best
}

/// One pass of a drone through the hole passage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub t_in: f64,
    pub t_out: f64,
}

/// Time intervals a timeline spends inside the hole passage that take it
/// from one side of the wall to the other. Touching intervals (consecutive
/// segments) merge, so splitting a segment does not change the result.
pub fn hole_crossings(hole: &Hole, timeline: &[Waypoint]) -> Vec<Crossing> {
    let planes = hole.passage();
    // (t_in, t_out, entry point, exit point)
    let mut spans: Vec<(f64, f64, Point, Point)> = Vec::new();
    for seg in timeline.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let Some((s0, s1)) = clip_segment_halfplanes(a.pos(), b.pos(), &planes) else {
            continue;
        };
        let dt = b.t - a.t;
        let (t0, t1) = (a.t + s0 * dt, a.t + s1 * dt);
        let (p0, p1) = (a.pos().lerp(b.pos(), s0), a.pos().lerp(b.pos(), s1));
        match spans.last_mut() {
            Some(last) if t0 <= last.1 => {
                last.1 = t1;
                last.3 = p1;
            }
            _ => spans.push((t0, t1, p0, p1)),
        }
    }
    let quarter = hole.thickness / 4.0;
    spans
        .into_iter()
        .filter(|(_, _, p0, p1)| {
            let (s0, s1) = (hole.side(*p0), hole.side(*p1));
            s0.abs() > quarter && s1.abs() > quarter && s0.signum() != s1.signum()
        })
        .map(|(t_in, t_out, _, _)| Crossing { t_in, t_out })
        .collect()
}

/// Whether the goal was reached, plus any constraint the goal check itself
/// found violated (ordering in the hole, bowls, placement times).
#[derive(Debug, Clone, PartialEq)]
pub struct GoalCheck {
    pub reached: bool,
    pub detail: String,
    pub violation: Option<Violation>,
}

impl GoalCheck {
    fn reached() -> Self {
        GoalCheck {
            reached: true,
            detail: String::new(),
            violation: None,
        }
    }

    fn missed(detail: String) -> Self {
        GoalCheck {
            reached: false,
            detail,
            violation: None,
        }
    }
}

pub fn check_task_goal(state: &EnvState, goal: &GoalSpec, trajectories: &Trajectories) -> GoalCheck {
    match (state, goal) {
        (EnvState::PathRacecars(scene), GoalSpec::PathRacecars) => final_positions_in_goals(scene, trajectories),
        (EnvState::PathDrones(scene), GoalSpec::PathDrones { hole }) => check_drones(scene, hole, trajectories),
        (EnvState::ShapeFormation(scene), GoalSpec::ShapeFormation(spec)) => check_shape(scene, spec, trajectories),
        _ => GoalCheck::missed("goal does not match the environment".into()),
    }
}

fn final_position(start: Point, traj: Option<&Vec<Waypoint>>) -> Point {
    traj.and_then(|t| t.last()).map_or(start, Waypoint::pos)
}

fn final_positions_in_goals(scene: &ContinuousScene, trajectories: &Trajectories) -> GoalCheck {
    for (id, r) in &scene.robots {
        let Some(goal) = r.goal else { continue };
        let p = final_position(r.start, trajectories.get(id));
        if !goal.contains(p) {
            return GoalCheck::missed(format!("{id} ends at ({}, {}), outside its goal region", p.x, p.y));
        }
    }
    GoalCheck::reached()
}

fn check_drones(scene: &ContinuousScene, hole: &Hole, trajectories: &Trajectories) -> GoalCheck {
    let empty = Vec::new();
    let horizon = scene.time_limit.max(last_time(trajectories));
    let mut crossings: Vec<(&String, Vec<Crossing>)> = Vec::new();
    let mut missing = None;
    for (id, r) in &scene.robots {
        let tl = effective_trajectory(r.start, trajectories.get(id).unwrap_or(&empty), horizon);
        let c = hole_crossings(hole, &tl);
        if c.is_empty() && missing.is_none() {
            missing = Some(format!("{id} never passes through the hole"));
        }
        crossings.push((id, c));
    }
    let mut check = match missing {
        Some(m) => GoalCheck::missed(m),
        None => final_positions_in_goals(scene, trajectories),
    };
    'outer: for i in 0..crossings.len() {
        for j in i + 1..crossings.len() {
            for a in &crossings[i].1 {
                for b in &crossings[j].1 {
                    if a.t_in < b.t_out && b.t_in < a.t_out {
                        check.violation = Some(Violation::new(
                            FailureReason::OrderViolation,
                            format!(
                                "{} ([{:.3}, {:.3}]) and {} ([{:.3}, {:.3}]) are in the hole at the same time",
                                crossings[i].0, a.t_in, a.t_out, crossings[j].0, b.t_in, b.t_out
                            ),
                        ));
                        break 'outer;
                    }
                }
            }
        }
    }
    check
}

/// Placement = a box's last waypoint; its time is the pick order.
fn check_shape(scene: &ShapeScene, spec: &ShapeSpec, trajectories: &Trajectories) -> GoalCheck {
    let placements: Vec<(&String, Waypoint)> = scene
        .boxes
        .iter()
        .map(|(id, start)| {
            let w = trajectories
                .get(id)
                .and_then(|t| t.last().copied())
                .unwrap_or(Waypoint::at(*start, 0.0));
            (id, w)
        })
        .collect();

    let mut violation = None;
    let end = placements.iter().map(|(_, w)| w.t).fold(0.0, f64::max);
    if end > scene.time_limit {
        violation = Some(Violation::new(
            FailureReason::TimeLimitViolation,
            format!("last placement at t = {end}, time limit is {}", scene.time_limit),
        ));
    }
    if violation.is_none() {
        'bowl: for (id, w) in &placements {
            for (k, bowl) in spec.bowls.iter().enumerate() {
                if bowl.contains(w.pos()) {
                    violation = Some(Violation::new(
                        FailureReason::CollisionViolation,
                        format!("{id} is placed inside bowl {k}"),
                    ));
                    break 'bowl;
                }
            }
        }
    }
    if violation.is_none() {
        let mut times: Vec<(f64, &String)> = placements.iter().map(|(id, w)| (w.t, *id)).collect();
        times.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(p) = times.windows(2).find(|p| p[0].0 == p[1].0) {
            violation = Some(Violation::new(
                FailureReason::OrderViolation,
                format!("{} and {} are placed at the same time t = {}", p[0].1, p[1].1, p[0].0),
            ));
        }
    }

    let positions: Vec<Point> = placements.iter().map(|(_, w)| w.pos()).collect();
    let matched = max_slot_matching(&positions, &spec.target_poses, spec.tolerance);
    let mut check = if matched == positions.len() && matched == spec.target_poses.len() {
        GoalCheck::reached()
    } else {
        GoalCheck::missed(format!(
            "{matched} of {} slots filled by distinct boxes",
            spec.target_poses.len()
        ))
    };
    check.violation = violation;
    check
}

/// Size of a maximum matching between boxes and slots within tolerance.
fn max_slot_matching(boxes: &[Point], slots: &[Point], tol: f64) -> usize {
    fn augment(
        b: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &s in &adj[b] {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            if owner[s].is_none_or(|o| augment(o, adj, seen, owner)) {
                owner[s] = Some(b);
                return true;
            }
        }
        false
    }
    let adj: Vec<Vec<usize>> = boxes
        .iter()
        .map(|p| (0..slots.len()).filter(|&s| p.dist(slots[s]) <= tol).collect())
        .collect();
    let mut owner = vec![None; slots.len()];
    (0..boxes.len())
        .filter(|&b| augment(b, &adj, &mut vec![false; slots.len()], &mut owner))
        .count()
}

/// Full verdict for a waypoint plan on a continuous instance.
pub fn evaluate(inst: &TaskInstance, plan: &Plan, speed_epsilon: f64) -> Verdict {
    let Some(trajectories) = plan.trajectories() else {
        return Verdict::parse_error("expected a waypoints plan");
    };
    let motion = match inst.initial_state.scene() {
        Some(scene) => check_motion_constraints(scene, trajectories, speed_epsilon).err(),
        None => None,
    };
    let goal = check_task_goal(&inst.initial_state, &inst.goal, trajectories);
    let violation = [motion, goal.violation.clone()]
        .into_iter()
        .flatten()
        .min_by_key(|v| v.reason);
    match violation {
        Some(v) => Verdict::constraint_violation(v.reason, goal.reached, v.detail),
        None if !goal.reached => Verdict::goal_not_reached(goal.detail),
        None => Verdict::success(),
    }
}
