//! Seeded scene generators. Every scene is built together with a witness
//! plan and only accepted when the exact checker passes that witness, so
//! generated instances are solvable by construction.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::{evaluate, ContinuousScene, Hole, RobotSpec, ShapeScene, ShapeSpec, DEFAULT_SPEED_EPSILON};
use crate::envs::boxnet::COLORS;
use crate::envs::{GenerateError, MAX_RESAMPLES};
use crate::geometry::{segment_clearance, Disc, Point, PolygonObstacle, Rect};
use crate::model::{
    DifficultyParams, EnvState, GoalSpec, Plan, ShapeKind, TaskInstance, Waypoint,
    DEFAULT_EXEC_TIMEOUT_SECS, INSTANCE_SCHEMA_VERSION,
};
use crate::rng::SeededRng;

pub const RACECAR_SAFE_DISTANCE: f64 = 0.0;
pub const DRONE_SAFE_DISTANCE: f64 = 0.25;
const RACECAR_VMAX: f64 = 2.0;
const DRONE_VMAX: f64 = 1.0;
/// Witness plans cruise at this fraction of v_max.
const CRUISE: f64 = 0.8;
/// Time limits are this multiple of the witness duration, rounded up.
const TIME_SLACK: f64 = 1.5;
/// Obstacles keep at least this far from the witness route.
const ROUTE_MARGIN: f64 = 0.3;
const SHAPE_TOLERANCE: f64 = 0.2;
const WALL_Y: f64 = 5.0;
const WALL_THICKNESS: f64 = 0.4;

struct Sampled {
    state: EnvState,
    goal: GoalSpec,
    time_limit: f64,
    witness: Plan,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn pt(x: f64, y: f64) -> Point {
    Point::new(round2(x), round2(y))
}

pub fn generate(difficulty: &DifficultyParams, seed: u64) -> Result<TaskInstance, GenerateError> {
    generate_with_witness(difficulty, seed).map(|(inst, _)| inst)
}

/// The generator's witness plan for an instance it produced, or `None` if
/// the instance was not produced by the generator from its recorded seed.
pub fn witness_plan(inst: &TaskInstance) -> Option<Plan> {
    match generate_with_witness(&inst.difficulty, inst.seed) {
        Ok((regen, w)) if regen == *inst => Some(w),
        _ => None,
    }
}

fn generate_with_witness(
    difficulty: &DifficultyParams,
    seed: u64,
) -> Result<(TaskInstance, Plan), GenerateError> {
    let env = difficulty.env_kind();
    let mut rng = SeededRng::new(seed);
    for _ in 0..MAX_RESAMPLES {
        let sampled = match *difficulty {
            DifficultyParams::PathRacecars { cars, obstacles } => racecars(cars, obstacles, &mut rng),
            DifficultyParams::PathDrones { drones, hole_width } => drones_scene(drones, hole_width, &mut rng),
            DifficultyParams::ShapeFormation { boxes, bowls, shape } => shape_scene(boxes, bowls, shape, &mut rng),
            _ => None,
        };
        let Some(s) = sampled else { continue };
        let inst = TaskInstance {
            schema_version: INSTANCE_SCHEMA_VERSION,
            env_kind: env,
            seed,
            difficulty: difficulty.clone(),
            initial_state: s.state,
            goal: s.goal,
            step_limit: None,
            time_limit: Some(s.time_limit),
            exec_timeout: DEFAULT_EXEC_TIMEOUT_SECS,
        };
        if inst.validate().is_ok() && evaluate(&inst, &s.witness, DEFAULT_SPEED_EPSILON).is_success() {
            return Ok((inst, s.witness));
        }
    }
    Err(GenerateError::Unsatisfiable {
        env,
        attempts: MAX_RESAMPLES,
    })
}

/// `n` sorted values in `[lo, hi]` at least `gap` apart.
fn separated(n: usize, lo: f64, hi: f64, gap: f64, rng: &mut SeededRng) -> Option<Vec<f64>> {
    for _ in 0..200 {
        let mut v: Vec<f64> = (0..n).map(|_| round2(rng.range_f64(lo, hi))).collect();
        v.sort_by(f64::total_cmp);
        if v.windows(2).all(|w| w[1] - w[0] >= gap) {
            return Some(v);
        }
    }
    None
}

/// Timestamps a route traversed at `speed`, starting at `t0`.
fn timed(route: &[Point], t0: f64, speed: f64) -> Vec<Waypoint> {
    let mut t = t0;
    let mut out = vec![Waypoint::at(route[0], t0)];
    for w in route.windows(2) {
        t += w[0].dist(w[1]) / speed;
        out.push(Waypoint::at(w[1], t));
    }
    out
}

fn regular_polygon(center: Point, radius: f64, k: usize) -> Vec<Point> {
    (0..k)
        .map(|j| {
            let a = 2.0 * PI * j as f64 / k as f64;
            Point::new(
                ((center.x + radius * a.cos()) * 1000.0).round() / 1000.0,
                ((center.y + radius * a.sin()) * 1000.0).round() / 1000.0,
            )
        })
        .collect()
}

/// Cars cross a 20 x 10 m track from x = 1 to goal boxes near x = 19.
/// Hidden lanes, ordered like the starts and goals so synchronized cars
/// never meet, give the witness; obstacles are kept off the lanes.
fn racecars(cars: u32, n_obstacles: u32, rng: &mut SeededRng) -> Option<Sampled> {
    let n = cars as usize;
    let starts = separated(n, 1.0, 9.0, 1.0, rng)?;
    let lanes = separated(n, 1.0, 9.0, 1.0, rng)?;
    let goals = separated(n, 1.0, 9.0, 1.0, rng)?;
    let speed = CRUISE * RACECAR_VMAX;

    let leg = |a: Point, b: Point| a.dist(b);
    let l1 = (0..n).map(|i| leg(pt(1.0, starts[i]), pt(2.0, lanes[i]))).fold(0.0, f64::max);
    let l3 = (0..n).map(|i| leg(pt(18.0, lanes[i]), pt(19.0, goals[i]))).fold(0.0, f64::max);
    let (t1, t2) = (l1 / speed, l1 / speed + 16.0 / speed);
    let t3 = t2 + l3 / speed;

    let mut robots = BTreeMap::new();
    let mut trajectories = BTreeMap::new();
    let mut route_segments = Vec::new();
    for i in 0..n {
        let id = format!("car{i}");
        let s = pt(1.0, starts[i]);
        let g = pt(19.0, goals[i]);
        robots.insert(
            id.clone(),
            RobotSpec {
                start: s,
                goal: Some(Rect::centered(g, 0.4, 0.4)),
                v_max: RACECAR_VMAX,
            },
        );
        let route = [s, pt(2.0, lanes[i]), pt(18.0, lanes[i]), g];
        route_segments.extend(route.windows(2).map(|w| (w[0], w[1])));
        trajectories.insert(
            id,
            vec![
                Waypoint::at(route[1], t1),
                Waypoint::at(route[2], t2),
                Waypoint::at(route[3], t3),
            ],
        );
    }

    let mut obstacles = Vec::new();
    for k in 0..n_obstacles {
        let placed = (0..200).find_map(|_| {
            let c = Point::new(rng.range_f64(4.0, 16.0), rng.range_f64(0.5, 9.5));
            let radius = rng.range_f64(0.4, 1.0);
            let sides = rng.range_inclusive(3, 6) as usize;
            let orientation = round2(rng.range_f64(0.0, PI));
            let o = PolygonObstacle::new(format!("obstacle{k}"), regular_polygon(c, radius, sides), orientation);
            route_segments
                .iter()
                .all(|(a, b)| segment_clearance(*a, *b, &o) >= ROUTE_MARGIN)
                .then_some(o)
        })?;
        obstacles.push(placed);
    }

    let time_limit = (TIME_SLACK * t3).ceil();
    Some(Sampled {
        state: EnvState::PathRacecars(ContinuousScene {
            bounds: Rect::new(Point::new(0.0, 0.0), Point::new(20.0, 10.0)),
            obstacles,
            robots,
            safe_distance: RACECAR_SAFE_DISTANCE,
            time_limit,
        }),
        goal: GoalSpec::PathRacecars,
        time_limit,
        witness: Plan::Waypoints { trajectories },
    })
}

/// Drones start below a wall across a 10 x 10 m room and must pass one at
/// a time through its single gap to goal boxes above it.
fn drones_scene(drones: u32, hole_width: f64, rng: &mut SeededRng) -> Option<Sampled> {
    let n = drones as usize;
    let half = hole_width / 2.0;
    let hc = round2(rng.range_f64(half + 1.0, 10.0 - half - 1.0));
    let (lo, hi) = (WALL_Y - WALL_THICKNESS / 2.0, WALL_Y + WALL_THICKNESS / 2.0);
    let rect = |name: &str, x0: f64, x1: f64| {
        PolygonObstacle::new(
            name,
            vec![
                Point::new(x0, lo),
                Point::new(x1, lo),
                Point::new(x1, hi),
                Point::new(x0, hi),
            ],
            0.0,
        )
    };
    let obstacles = vec![
        rect("wall_left", 0.0, round2(hc - half)),
        rect("wall_right", round2(hc + half), 10.0),
    ];
    let hole = Hole {
        a: Point::new(round2(hc - half), WALL_Y),
        b: Point::new(round2(hc + half), WALL_Y),
        thickness: WALL_THICKNESS,
    };

    let slot = |i: usize| 10.0 * (i + 1) as f64 / (n + 1) as f64;
    let speed = CRUISE * DRONE_VMAX;
    let mut robots = BTreeMap::new();
    let mut trajectories = BTreeMap::new();
    let mut t = 0.0;
    for i in 0..n {
        let id = format!("drone{i}");
        let start = pt(slot(i) + rng.range_f64(-0.3, 0.3), 1.25 + rng.range_f64(-0.25, 0.25));
        let gx = round2(slot(i) + rng.range_f64(-0.3, 0.3));
        let goal = pt(gx, 8.75);
        robots.insert(
            id.clone(),
            RobotSpec {
                start,
                goal: Some(Rect::centered(goal, 0.5, 0.5)),
                v_max: DRONE_VMAX,
            },
        );
        let route = [
            start,
            Point::new(start.x, 3.0),
            Point::new(hc, 4.0),
            Point::new(hc, 6.0),
            Point::new(gx, 7.5),
            goal,
        ];
        let traj = timed(&route, t, speed);
        t = traj.last().unwrap().t;
        trajectories.insert(id, traj);
    }

    let time_limit = (TIME_SLACK * t).ceil();
    Some(Sampled {
        state: EnvState::PathDrones(ContinuousScene {
            bounds: Rect::new(Point::new(0.0, 0.0), Point::new(10.0, 10.0)),
            obstacles,
            robots,
            safe_distance: DRONE_SAFE_DISTANCE,
            time_limit,
        }),
        goal: GoalSpec::PathDrones { hole },
        time_limit,
        witness: Plan::Waypoints { trajectories },
    })
}

fn shape_template(shape: ShapeKind, n: usize) -> Vec<Point> {
    match shape {
        ShapeKind::Circle => (0..n)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / n as f64;
                Point::new(2.5 * a.cos(), 2.5 * a.sin())
            })
            .collect(),
        ShapeKind::Triangle => {
            let corners: Vec<Point> = (0..3)
                .map(|k| {
                    let a = PI / 2.0 + 2.0 * PI * k as f64 / 3.0;
                    Point::new(2.8 * a.cos(), 2.8 * a.sin())
                })
                .collect();
            // evenly spaced along the perimeter, starting at a corner
            (0..n)
                .map(|k| {
                    let s = 3.0 * k as f64 / n as f64;
                    let side = s.floor() as usize;
                    corners[side].lerp(corners[(side + 1) % 3], s - side as f64)
                })
                .collect()
        }
        ShapeKind::Line => (0..n)
            .map(|k| Point::new(1.2 * (k as f64 - (n as f64 - 1.0) / 2.0), 0.0))
            .collect(),
    }
}

/// Boxes scattered on a 10 x 10 m table must be placed on the slots of a
/// shape; bowls on the table are keep-out zones.
fn shape_scene(boxes: u32, bowls: u32, shape: Option<ShapeKind>, rng: &mut SeededRng) -> Option<Sampled> {
    let n = boxes as usize;
    let shape = shape.unwrap_or_else(|| [ShapeKind::Circle, ShapeKind::Triangle, ShapeKind::Line][rng.index(3)]);
    let center = Point::new(rng.range_f64(3.5, 6.5), rng.range_f64(3.5, 6.5));
    let theta = rng.range_f64(0.0, 2.0 * PI);
    let (c, s) = (theta.cos(), theta.sin());
    let slots: Vec<Point> = shape_template(shape, n)
        .into_iter()
        .map(|p| pt(center.x + c * p.x - s * p.y, center.y + s * p.x + c * p.y))
        .collect();
    let table = Rect::new(Point::new(0.0, 0.0), Point::new(10.0, 10.0));
    let inner = Rect::new(Point::new(0.5, 0.5), Point::new(9.5, 9.5));
    if !slots.iter().all(|p| inner.contains(*p)) {
        return None;
    }

    let mut discs: Vec<Disc> = Vec::new();
    for _ in 0..bowls {
        let bowl = (0..200).find_map(|_| {
            let d = Disc {
                center: pt(rng.range_f64(1.0, 9.0), rng.range_f64(1.0, 9.0)),
                radius: round2(rng.range_f64(0.5, 0.9)),
            };
            let clear_of_slots = slots
                .iter()
                .all(|p| p.dist(d.center) >= d.radius + SHAPE_TOLERANCE + 0.1);
            let clear_of_bowls = discs
                .iter()
                .all(|o| o.center.dist(d.center) >= o.radius + d.radius + 0.1);
            (clear_of_slots && clear_of_bowls).then_some(d)
        })?;
        discs.push(bowl);
    }

    let mut starts: BTreeMap<String, Point> = BTreeMap::new();
    for color in COLORS.iter().take(n) {
        let p = (0..200).find_map(|_| {
            let p = pt(rng.range_f64(0.5, 9.5), rng.range_f64(0.5, 9.5));
            let ok = discs.iter().all(|d| p.dist(d.center) >= d.radius + 0.3)
                && starts.values().all(|q| p.dist(*q) >= 0.6)
                && slots.iter().all(|q| p.dist(*q) > 2.0 * SHAPE_TOLERANCE);
            ok.then_some(p)
        })?;
        starts.insert(format!("box_{color}"), p);
    }

    let time_limit = 2.0 * n as f64;
    let trajectories = starts
        .iter()
        .zip(&slots)
        .enumerate()
        .map(|(k, ((id, start), slot))| {
            (
                id.clone(),
                vec![Waypoint::at(*start, 0.0), Waypoint::at(*slot, (k + 1) as f64)],
            )
        })
        .collect();
    Some(Sampled {
        state: EnvState::ShapeFormation(ShapeScene {
            bounds: table,
            boxes: starts,
            time_limit,
        }),
        goal: GoalSpec::ShapeFormation(ShapeSpec {
            shape,
            target_poses: slots,
            tolerance: SHAPE_TOLERANCE,
            bowls: discs,
        }),
        time_limit,
        witness: Plan::Waypoints { trajectories },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EnvKind, DIFFICULTY_BUCKETS};

    #[test]
    fn every_bucket_generates_with_a_passing_witness() {
        for env in EnvKind::CONTINUOUS {
            for b in 0..DIFFICULTY_BUCKETS {
                let d = DifficultyParams::bucket(env, b);
                for seed in 0..5 {
                    let inst = generate(&d, seed).unwrap_or_else(|e| panic!("{env} {b} {seed}: {e}"));
                    let w = witness_plan(&inst).unwrap();
                    assert!(evaluate(&inst, &w, DEFAULT_SPEED_EPSILON).is_success());
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let d = DifficultyParams::bucket(EnvKind::PathDrones, 3);
        assert_eq!(generate(&d, 9).unwrap(), generate(&d, 9).unwrap());
        assert_ne!(generate(&d, 9).unwrap(), generate(&d, 10).unwrap());
    }

    #[test]
    fn foreign_instance_has_no_witness() {
        let d = DifficultyParams::bucket(EnvKind::PathRacecars, 1);
        let mut inst = generate(&d, 4).unwrap();
        inst.seed = 5;
        assert_eq!(witness_plan(&inst), None);
    }
}
