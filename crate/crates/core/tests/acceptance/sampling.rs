//! A second judge for waypoint plans that samples positions on a dense time
//! grid instead of solving segment geometry in closed form. Shape formation
//! has no motion to sample and is re-implemented exactly.

use std::collections::{BTreeMap, BTreeSet};

use tampforge::continuous::{ContinuousScene, ShapeScene, ShapeSpec};
use tampforge::geometry::{Point, Rect};
use tampforge::model::{EnvState, FailureReason, GoalSpec, TaskInstance, Waypoint};

pub type Trajectories = BTreeMap<String, Vec<Waypoint>>;

#[derive(Debug, Clone)]
pub struct Judged {
    pub reason: FailureReason,
    /// Sampling step actually used (0 when nothing was sampled).
    pub gap: f64,
    /// Fastest segment speed in the plan; bounds the sampling error.
    pub top_speed: f64,
}

impl Judged {
    /// Worst-case position error between samples, doubled for two robots.
    pub fn error_bound(&self) -> f64 {
        2.0 * self.top_speed * self.gap
    }
}

pub fn judge(inst: &TaskInstance, traj: &Trajectories, gap: f64, max_samples: usize) -> Judged {
    match (&inst.initial_state, &inst.goal) {
        (EnvState::ShapeFormation(scene), GoalSpec::ShapeFormation(spec)) => Judged {
            reason: judge_shape(scene, spec, traj),
            gap: 0.0,
            top_speed: 0.0,
        },
        (EnvState::PathRacecars(scene), _) => judge_scene(scene, None, traj, gap, max_samples),
        (EnvState::PathDrones(scene), GoalSpec::PathDrones { hole }) => {
            judge_scene(scene, Some((hole.a, hole.b, hole.thickness)), traj, gap, max_samples)
        }
        _ => panic!("not a continuous instance"),
    }
}

/// Step whose error bound is at most `err` meters for this plan.
pub fn gap_for_error(traj: &Trajectories, scene_starts: &BTreeMap<String, Point>, err: f64) -> f64 {
    let v = top_speed(&timelines(scene_starts, traj, 0.0).1).max(1e-6);
    err / (2.0 * v)
}

pub fn starts(inst: &TaskInstance) -> BTreeMap<String, Point> {
    match &inst.initial_state {
        EnvState::PathRacecars(s) | EnvState::PathDrones(s) => {
            s.robots.iter().map(|(k, r)| (k.clone(), r.start)).collect()
        }
        EnvState::ShapeFormation(s) => s.boxes.clone(),
        _ => BTreeMap::new(),
    }
}

fn top_speed(lines: &[Vec<(f64, Point)>]) -> f64 {
    lines
        .iter()
        .flat_map(|l| l.windows(2))
        .filter(|w| w[1].0 > w[0].0)
        .map(|w| dist(w[0].1, w[1].1) / (w[1].0 - w[0].0))
        .fold(0.0, f64::max)
}

fn dist(a: Point, b: Point) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
}

/// Per-robot `(t, position)` lists from t = 0, holding the last position to
/// `horizon`, plus whether any robot jumps away from its start at t = 0.
fn timelines(
    starts: &BTreeMap<String, Point>,
    traj: &Trajectories,
    horizon: f64,
) -> (bool, Vec<Vec<(f64, Point)>>) {
    let mut jump = false;
    let lines = starts
        .iter()
        .map(|(id, start)| {
            let w = traj.get(id).map(Vec::as_slice).unwrap_or(&[]);
            let mut l = Vec::with_capacity(w.len() + 2);
            match w.first() {
                Some(f) if f.t == 0.0 => jump |= dist(f.pos(), *start) > 1e-9,
                _ => l.push((0.0, *start)),
            }
            l.extend(w.iter().map(|p| (p.t, p.pos())));
            let end = *l.last().expect("nonempty");
            if end.0 < horizon {
                l.push((horizon, end.1));
            }
            l
        })
        .collect();
    (jump, lines)
}

fn rect_margin(r: &Rect, p: Point) -> f64 {
    (p.x - r.min.x).min(r.max.x - p.x).min(p.y - r.min.y).min(r.max.y - p.y)
}

fn point_polygon_clearance(p: Point, poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut inside = false;
    let mut best = f64::INFINITY;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let len2 = dx * dx + dy * dy;
        let s = if len2 == 0.0 {
            0.0
        } else {
            (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
        };
        best = best.min(dist(p, Point::new(a.x + s * dx, a.y + s * dy)));
    }
    if inside {
        0.0
    } else {
        best
    }
}

/// Merged sample times: a uniform grid plus every waypoint time.
fn sample_times(lines: &[Vec<(f64, Point)>], horizon: f64, gap: f64) -> Vec<f64> {
    let mut breaks: Vec<f64> = lines.iter().flat_map(|l| l.iter().map(|w| w.0)).collect();
    let steps = (horizon / gap).ceil() as usize;
    breaks.extend((0..=steps).map(|k| (k as f64 * gap).min(horizon)));
    breaks.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(breaks.len());
    for t in breaks {
        if out.last().is_none_or(|l| t - l > 1e-9) {
            out.push(t);
        }
    }
    out
}

struct Cursor<'a> {
    line: &'a [(f64, Point)],
    k: usize,
}

impl Cursor<'_> {
    fn at(&mut self, t: f64) -> Point {
        while self.k + 1 < self.line.len() && self.line[self.k + 1].0 <= t {
            self.k += 1;
        }
        let a = self.line[self.k];
        if self.k + 1 >= self.line.len() || a.0 >= t {
            return a.1;
        }
        let b = self.line[self.k + 1];
        let s = (t - a.0) / (b.0 - a.0);
        Point::new(a.1.x + (b.1.x - a.1.x) * s, a.1.y + (b.1.y - a.1.y) * s)
    }
}

/// A stretch of consecutive samples inside the hole passage.
#[derive(Clone, Copy)]
struct Run {
    t_in: f64,
    t_out: f64,
    side_in: f64,
    side_out: f64,
}

fn judge_scene(
    scene: &ContinuousScene,
    hole: Option<(Point, Point, f64)>,
    traj: &Trajectories,
    gap: f64,
    max_samples: usize,
) -> Judged {
    let starts: BTreeMap<String, Point> = scene.robots.iter().map(|(k, r)| (k.clone(), r.start)).collect();
    let last_t = traj.values().filter_map(|t| t.last()).map(|w| w.t).fold(0.0, f64::max);
    let horizon = scene.time_limit.max(last_t);
    let (jump, lines) = timelines(&starts, traj, horizon);
    let specs: Vec<_> = scene.robots.values().collect();
    let mut reasons = BTreeSet::new();

    if jump {
        reasons.insert(FailureReason::VelocityViolation);
    }
    for (l, r) in lines.iter().zip(&specs) {
        for w in l.windows(2) {
            if dist(w[0].1, w[1].1) > r.v_max * (1.0 + 1e-9) * (w[1].0 - w[0].0) {
                reasons.insert(FailureReason::VelocityViolation);
            }
        }
    }
    if last_t > scene.time_limit {
        reasons.insert(FailureReason::TimeLimitViolation);
    }

    let gap = gap.max(horizon / max_samples as f64);
    let times = sample_times(&lines, horizon, gap);
    let polys: Vec<Vec<Point>> = scene.obstacles.iter().map(|o| o.world_vertices()).collect();
    let sd = scene.safe_distance;
    let mut cursors: Vec<Cursor> = lines.iter().map(|l| Cursor { line: l, k: 0 }).collect();
    let mut pos = vec![Point::new(0.0, 0.0); lines.len()];

    // Hole frame: unit axis u along a→b, normal n, length, half thickness.
    let frame = hole.map(|(a, b, th)| {
        let len = dist(a, b);
        let u = Point::new((b.x - a.x) / len, (b.y - a.y) / len);
        (a, u, Point::new(-u.y, u.x), len, th / 2.0)
    });
    let mut open: Vec<Option<Run>> = vec![None; lines.len()];
    let mut runs: Vec<Vec<Run>> = vec![Vec::new(); lines.len()];

    for &t in &times {
        for (c, p) in cursors.iter_mut().zip(pos.iter_mut()) {
            *p = c.at(t);
        }
        for (i, p) in pos.iter().enumerate() {
            if rect_margin(&scene.bounds, *p) < 0.0 {
                reasons.insert(FailureReason::CollisionViolation);
            }
            for poly in &polys {
                let c = point_polygon_clearance(*p, poly);
                if c < sd || c <= 0.0 {
                    reasons.insert(FailureReason::CollisionViolation);
                }
            }
            for q in &pos[i + 1..] {
                let d = dist(*p, *q);
                if d < sd || d <= 0.0 {
                    reasons.insert(FailureReason::SafeDistanceViolation);
                }
            }
            if let Some((a, u, n, len, half)) = frame {
                let rel = Point::new(p.x - a.x, p.y - a.y);
                let along = rel.x * u.x + rel.y * u.y;
                let side = rel.x * n.x + rel.y * n.y;
                let inside = (0.0..=len).contains(&along) && side.abs() <= half;
                if !inside {
                    if let Some(r) = open[i].take() {
                        runs[i].push(r);
                    }
                } else if let Some(r) = open[i].as_mut() {
                    r.t_out = t;
                    r.side_out = side;
                } else {
                    open[i] = Some(Run {
                        t_in: t,
                        t_out: t,
                        side_in: side,
                        side_out: side,
                    });
                }
            }
        }
    }
    for (i, o) in open.iter_mut().enumerate() {
        if let Some(r) = o.take() {
            runs[i].push(r);
        }
    }

    let finals: Vec<Point> = lines.iter().map(|l| l.last().expect("nonempty").1).collect();
    let mut reached = specs.iter().zip(&finals).all(|(r, p)| r.goal.is_none_or(|g| rect_margin(&g, *p) >= 0.0));
    if let Some((_, _, _, _, half)) = frame {
        let quarter = half / 2.0;
        let crossings: Vec<Vec<Run>> = runs
            .iter()
            .map(|rs| {
                rs.iter()
                    .copied()
                    .filter(|r| {
                        r.side_in.abs() > quarter
                            && r.side_out.abs() > quarter
                            && (r.side_in > 0.0) != (r.side_out > 0.0)
                    })
                    .collect()
            })
            .collect();
        reached &= crossings.iter().all(|c| !c.is_empty());
        for i in 0..crossings.len() {
            for j in i + 1..crossings.len() {
                for a in &crossings[i] {
                    for b in &crossings[j] {
                        if a.t_in < b.t_out && b.t_in < a.t_out {
                            reasons.insert(FailureReason::OrderViolation);
                        }
                    }
                }
            }
        }
    }

    let reason = match reasons.first() {
        Some(r) => *r,
        None if !reached => FailureReason::GoalNotReached,
        None => FailureReason::None,
    };
    Judged {
        reason,
        gap,
        top_speed: top_speed(&lines),
    }
}

fn judge_shape(scene: &ShapeScene, spec: &ShapeSpec, traj: &Trajectories) -> FailureReason {
    let placed: Vec<Waypoint> = scene
        .boxes
        .iter()
        .map(|(id, start)| traj.get(id).and_then(|t| t.last().copied()).unwrap_or(Waypoint::at(*start, 0.0)))
        .collect();
    let mut reasons = BTreeSet::new();
    if placed.iter().any(|w| w.t > scene.time_limit) {
        reasons.insert(FailureReason::TimeLimitViolation);
    }
    for w in &placed {
        if spec.bowls.iter().any(|b| dist(w.pos(), b.center) < b.radius) {
            reasons.insert(FailureReason::CollisionViolation);
        }
    }
    for (i, a) in placed.iter().enumerate() {
        if placed[i + 1..].iter().any(|b| b.t == a.t) {
            reasons.insert(FailureReason::OrderViolation);
        }
    }
    if let Some(r) = reasons.first() {
        return *r;
    }
    // Brute force over slot assignments; instances have at most a handful of boxes.
    fn fill(boxes: &[Point], slots: &[Point], used: &mut Vec<bool>, tol: f64) -> bool {
        let Some((first, rest)) = boxes.split_first() else {
            return true;
        };
        for s in 0..slots.len() {
            if !used[s] && dist(*first, slots[s]) <= tol {
                used[s] = true;
                if fill(rest, slots, used, tol) {
                    return true;
                }
                used[s] = false;
            }
        }
        false
    }
    let boxes: Vec<Point> = placed.iter().map(|w| w.pos()).collect();
    let full = boxes.len() == spec.target_poses.len()
        && fill(&boxes, &spec.target_poses, &mut vec![false; spec.target_poses.len()], spec.tolerance);
    if full {
        FailureReason::None
    } else {
        FailureReason::GoalNotReached
    }
}
