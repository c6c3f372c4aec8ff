//! Brute-force ground-truth solvers for small instances.
//!
//! Gridworld and Blocksworld are solved over their own re-implementation of
//! the action semantics, sharing no transition code with [`crate::envs`], so
//! they double as independent checkers of it. BoxNet and BoxLift search over
//! `envs::apply_action` successors, which is a weaker form of independence.
//!
//! The budget counts generated search nodes; hitting it yields
//! [`OracleOutcome::BudgetExceeded`], which means "unknown", as opposed to
//! [`OracleOutcome::NoSolution`] which means the reachable space was closed.

use std::collections::{HashMap, VecDeque};

use serde_json::json;

use crate::continuous::ShapeScene;
use crate::envs::{self, boxlift, boxnet, BoxLiftState, BoxNetState};
use crate::model::{Action, EnvKind, EnvState, GoalSpec, Plan, TaskInstance, Waypoint};

pub const DEFAULT_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum OracleOutcome {
    Solved { plan: Plan, length: usize },
    NoSolution,
    BudgetExceeded,
    /// Path-planning environments have no brute-force oracle.
    Unsupported,
}

impl OracleOutcome {
    pub fn plan(&self) -> Option<&Plan> {
        match self {
            OracleOutcome::Solved { plan, .. } => Some(plan),
            _ => None,
        }
    }
}

pub fn oracle_solve(inst: &TaskInstance, budget: u64) -> OracleOutcome {
    match (&inst.initial_state, &inst.goal) {
        (EnvState::Gridworld(_), _) => grid::solve(inst, budget),
        (EnvState::Blocksworld(_), GoalSpec::Blocksworld { .. }) => blocks::solve(inst, budget),
        (EnvState::BoxNet(s), _) => solve_boxnet(s, budget),
        (EnvState::BoxLift(s), _) => solve_boxlift(s, budget),
        (EnvState::ShapeFormation(scene), GoalSpec::ShapeFormation(spec)) => {
            solve_shape(scene, spec, inst.time_limit.unwrap_or(f64::INFINITY), budget)
        }
        _ => OracleOutcome::Unsupported,
    }
}

/// Length of a step-optimal plan, or `None` when unknown.
pub fn oracle_optimal_length(inst: &TaskInstance, budget: u64) -> Option<usize> {
    match oracle_solve(inst, budget) {
        OracleOutcome::Solved { length, .. } => Some(length),
        _ => None,
    }
}

/// Result of replaying an action plan with the oracle's own semantics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Replay {
    Illegal { step: usize },
    Completed { goal_reached: bool, steps: usize },
}

/// Replays an action plan with the oracle's independent semantics. `None`
/// for environments whose oracle reuses `envs::apply_action`.
pub fn independent_replay(inst: &TaskInstance, plan: &Plan) -> Option<Replay> {
    let steps = plan.steps()?;
    match inst.env_kind {
        EnvKind::Gridworld => Some(grid::replay(inst, steps)),
        EnvKind::Blocksworld => Some(blocks::replay(inst, steps)),
        _ => None,
    }
}

/// Generic BFS bookkeeping: nodes are stored once, each with its parent and
/// the step that produced it.
struct Tree<S> {
    nodes: Vec<(S, Option<(usize, Vec<Action>)>)>,
}

impl<S> Tree<S> {
    fn path(&self, mut idx: usize) -> Vec<Vec<Action>> {
        let mut steps = Vec::new();
        while let Some((parent, step)) = &self.nodes[idx].1 {
            steps.push(step.clone());
            idx = *parent;
        }
        steps.reverse();
        steps
    }
}

fn bfs<S, K, F, G, E>(start: S, key: K, is_goal: G, mut expand: E, budget: u64) -> OracleOutcome
where
    S: Clone,
    K: Fn(&S) -> F,
    F: std::hash::Hash + Eq,
    G: Fn(&S) -> bool,
    E: FnMut(&S, &mut dyn FnMut(Vec<Action>, S) -> bool),
{
    if is_goal(&start) {
        return OracleOutcome::Solved {
            plan: Plan::empty_actions(),
            length: 0,
        };
    }
    let mut seen: HashMap<F, ()> = HashMap::new();
    seen.insert(key(&start), ());
    let mut tree = Tree {
        nodes: vec![(start, None)],
    };
    let mut queue = VecDeque::from([0usize]);
    let mut generated = 0u64;
    while let Some(idx) = queue.pop_front() {
        let state = tree.nodes[idx].0.clone();
        let mut found = None;
        let mut over_budget = false;
        expand(&state, &mut |step, next| {
            generated += 1;
            if generated > budget {
                over_budget = true;
                return false;
            }
            let k = key(&next);
            if seen.contains_key(&k) {
                return true;
            }
            seen.insert(k, ());
            let goal = is_goal(&next);
            tree.nodes.push((next, Some((idx, step))));
            let new_idx = tree.nodes.len() - 1;
            if goal {
                found = Some(new_idx);
                return false;
            }
            queue.push_back(new_idx);
            true
        });
        if let Some(g) = found {
            let steps = tree.path(g);
            let length = steps.len();
            return OracleOutcome::Solved {
                plan: Plan::Actions { steps },
                length,
            };
        }
        if over_budget {
            return OracleOutcome::BudgetExceeded;
        }
    }
    OracleOutcome::NoSolution
}

/// Gridworld over (cell index, visited bitmask).
mod grid {
    use super::*;

    const MOVES: [(&str, i32, i32); 4] = [
        ("move_up", -1, 0),
        ("move_down", 1, 0),
        ("move_left", 0, -1),
        ("move_right", 0, 1),
    ];

    struct Layout {
        w: i32,
        h: i32,
        blocked: Vec<bool>,
        goal_bit: Vec<Option<u32>>,
        full: u32,
    }

    fn layout(inst: &TaskInstance) -> (Layout, (i32, i32, u32)) {
        let EnvState::Gridworld(s) = &inst.initial_state else {
            unreachable!()
        };
        let (w, h) = (s.width as i32, s.height as i32);
        let mut blocked = vec![false; (w * h) as usize];
        for c in &s.obstacles {
            blocked[(c.row * w + c.col) as usize] = true;
        }
        let mut goal_bit = vec![None; (w * h) as usize];
        let mut mask = 0u32;
        for (i, g) in s.goals.iter().enumerate() {
            goal_bit[(g.cell.row * w + g.cell.col) as usize] = Some(i as u32);
            if g.visited {
                mask |= 1 << i;
            }
        }
        let full = if s.goals.is_empty() { 0 } else { (1u32 << s.goals.len()) - 1 };
        (
            Layout {
                w,
                h,
                blocked,
                goal_bit,
                full,
            },
            (s.robot.row, s.robot.col, mask),
        )
    }

    fn step(l: &Layout, st: (i32, i32, u32), token: &str) -> Option<(i32, i32, u32)> {
        let (r, c, m) = st;
        if token == "visit_goal" {
            let bit = l.goal_bit[(r * l.w + c) as usize]?;
            return Some((r, c, m | (1 << bit)));
        }
        let &(_, dr, dc) = MOVES.iter().find(|(t, _, _)| *t == token)?;
        let (nr, nc) = (r + dr, c + dc);
        if nr < 0 || nc < 0 || nr >= l.h || nc >= l.w || l.blocked[(nr * l.w + nc) as usize] {
            return None;
        }
        Some((nr, nc, m))
    }

    pub fn solve(inst: &TaskInstance, budget: u64) -> OracleOutcome {
        let (l, start) = layout(inst);
        bfs(
            start,
            |s| *s,
            |s| s.2 == l.full,
            |s, emit| {
                for token in ["visit_goal", "move_up", "move_down", "move_left", "move_right"] {
                    if let Some(n) = step(&l, *s, token) {
                        if n == *s {
                            continue;
                        }
                        if !emit(vec![Action::new("robot", token, vec![])], n) {
                            return;
                        }
                    }
                }
            },
            budget,
        )
    }

    pub fn replay(inst: &TaskInstance, steps: &[Vec<Action>]) -> Replay {
        let (l, mut st) = layout(inst);
        for (i, s) in steps.iter().enumerate() {
            match s.as_slice() {
                [] => {}
                [a] if a.robot == "robot" && a.args.is_empty() => match step(&l, st, &a.action) {
                    Some(n) => st = n,
                    None => return Replay::Illegal { step: i },
                },
                _ => return Replay::Illegal { step: i },
            }
        }
        Replay::Completed {
            goal_reached: st.2 == l.full,
            steps: steps.len(),
        }
    }
}

/// Blocksworld over a "what is each block resting on" vector.
mod blocks {
    use super::*;

    const TABLE: u8 = u8::MAX;
    const HELD: u8 = u8::MAX - 1;

    struct Names(Vec<String>);

    impl Names {
        fn idx(&self, s: &str) -> Option<u8> {
            self.0.iter().position(|n| n == s).map(|i| i as u8)
        }
    }

    fn encode(names: &Names, towers: &[Vec<String>], holding: Option<&String>) -> Vec<u8> {
        let mut below = vec![TABLE; names.0.len()];
        for t in towers {
            for (k, b) in t.iter().enumerate() {
                let i = names.idx(b).unwrap() as usize;
                below[i] = if k == 0 { TABLE } else { names.idx(&t[k - 1]).unwrap() };
            }
        }
        if let Some(h) = holding {
            below[names.idx(h).unwrap() as usize] = HELD;
        }
        below
    }

    fn clear(below: &[u8], x: u8) -> bool {
        below[x as usize] != HELD && !below.contains(&x)
    }

    fn holding(below: &[u8]) -> bool {
        below.contains(&HELD)
    }

    fn step(below: &[u8], token: &str, x: u8, y: Option<u8>) -> Option<Vec<u8>> {
        let mut n = below.to_vec();
        match (token, y) {
            ("pick_up", None) => {
                if holding(below) || below[x as usize] != TABLE || !clear(below, x) {
                    return None;
                }
                n[x as usize] = HELD;
            }
            ("unstack", Some(y)) => {
                if holding(below) || below[x as usize] != y || !clear(below, x) {
                    return None;
                }
                n[x as usize] = HELD;
            }
            ("put_down", None) => {
                if below[x as usize] != HELD {
                    return None;
                }
                n[x as usize] = TABLE;
            }
            ("stack", Some(y)) => {
                if below[x as usize] != HELD || x == y || !clear(below, y) {
                    return None;
                }
                n[x as usize] = y;
            }
            _ => return None,
        }
        Some(n)
    }

    fn setup(inst: &TaskInstance) -> (Names, Vec<u8>, Vec<u8>) {
        let (EnvState::Blocksworld(s), GoalSpec::Blocksworld { towers }) =
            (&inst.initial_state, &inst.goal)
        else {
            unreachable!()
        };
        let names = Names(s.blocks());
        let start = encode(&names, &s.towers, s.holding.as_ref());
        let goal = encode(&names, towers, None);
        (names, start, goal)
    }

    pub fn solve(inst: &TaskInstance, budget: u64) -> OracleOutcome {
        let (names, start, goal) = setup(inst);
        let n = names.0.len() as u8;
        bfs(
            start,
            |s| s.clone(),
            |s| *s == goal,
            |s, emit| {
                for x in 0..n {
                    let xn = &names.0[x as usize];
                    for token in ["pick_up", "put_down"] {
                        if let Some(next) = step(s, token, x, None) {
                            if !emit(vec![Action::new("arm", token, vec![json!(xn)])], next) {
                                return;
                            }
                        }
                    }
                    for y in 0..n {
                        if x == y {
                            continue;
                        }
                        let yn = &names.0[y as usize];
                        for token in ["unstack", "stack"] {
                            if let Some(next) = step(s, token, x, Some(y)) {
                                let a = Action::new("arm", token, vec![json!(xn), json!(yn)]);
                                if !emit(vec![a], next) {
                                    return;
                                }
                            }
                        }
                    }
                }
            },
            budget,
        )
    }

    pub fn replay(inst: &TaskInstance, steps: &[Vec<Action>]) -> Replay {
        let (names, mut st, goal) = setup(inst);
        for (i, s) in steps.iter().enumerate() {
            match s.as_slice() {
                [] => {}
                [a] if a.robot == "arm" => {
                    let x = a.str_arg(0).and_then(|b| names.idx(b));
                    let y = match a.args.len() {
                        1 => Some(None),
                        2 => a.str_arg(1).and_then(|b| names.idx(b)).map(Some),
                        _ => None,
                    };
                    match (x, y) {
                        (Some(x), Some(y)) => match step(&st, &a.action, x, y) {
                            Some(n) => st = n,
                            None => return Replay::Illegal { step: i },
                        },
                        _ => return Replay::Illegal { step: i },
                    }
                }
                _ => return Replay::Illegal { step: i },
            }
        }
        Replay::Completed {
            goal_reached: st == goal,
            steps: steps.len(),
        }
    }
}

fn solve_boxnet(start: &BoxNetState, budget: u64) -> OracleOutcome {
    let arms: Vec<String> = start.arms.keys().cloned().collect();
    bfs(
        start.clone(),
        |s: &BoxNetState| s.boxes.clone(),
        boxnet::is_goal,
        |s, emit| {
            // per-arm options plus idling; cartesian product over busy arms
            let options: Vec<Vec<Action>> = arms
                .iter()
                .map(|a| boxnet::arm_options(s, a))
                .filter(|o| !o.is_empty())
                .collect();
            let mut counter = vec![0usize; options.len()];
            loop {
                // advance odometer; digit value 0 = idle
                let mut i = 0;
                loop {
                    if i == counter.len() {
                        return;
                    }
                    counter[i] += 1;
                    if counter[i] <= options[i].len() {
                        break;
                    }
                    counter[i] = 0;
                    i += 1;
                }
                let step: Vec<Action> = counter
                    .iter()
                    .zip(&options)
                    .filter(|(c, _)| **c > 0)
                    .map(|(c, o)| o[*c - 1].clone())
                    .collect();
                if let Ok(next) = boxnet::apply(s, &step) {
                    if !emit(step, next) {
                        return;
                    }
                }
            }
        },
        budget,
    )
}

/// Assign disjoint robot groups to boxes `k..` of `targets`, each group
/// strong enough for its box. Returns robot -> box index.
fn assign_groups(caps: &[(String, u32)], targets: &[(String, u32)], k: usize, used: u32) -> Option<Vec<(usize, usize)>> {
    let Some((_, w)) = targets.get(k) else {
        return Some(Vec::new());
    };
    let n = caps.len();
    for mask in 1u32..(1 << n) {
        if mask & used != 0 {
            continue;
        }
        let total: u32 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| caps[i].1).sum();
        if !boxlift::can_lift(total, *w) {
            continue;
        }
        if let Some(mut tail) = assign_groups(caps, targets, k + 1, used | mask) {
            tail.extend((0..n).filter(|i| mask & (1 << i) != 0).map(|i| (i, k)));
            return Some(tail);
        }
    }
    None
}

fn solve_boxlift(start: &BoxLiftState, budget: u64) -> OracleOutcome {
    let caps: Vec<(String, u32)> = start.robots.iter().map(|(k, v)| (k.clone(), *v)).collect();
    let boxes: Vec<(String, u32)> = start.boxes.iter().map(|(k, b)| (k.clone(), b.weight)).collect();
    let initial: u32 = start
        .boxes
        .values()
        .enumerate()
        .filter(|(_, b)| b.lifted)
        .fold(0, |m, (i, _)| m | (1 << i));
    let full = (1u32 << boxes.len()) - 1;
    bfs(
        initial,
        |m| *m,
        |m| *m == full,
        |m, emit| {
            let remaining: Vec<usize> = (0..boxes.len()).filter(|i| m & (1 << i) == 0).collect();
            // larger simultaneous lifts first
            let mut subsets: Vec<u32> = (1u32..(1 << remaining.len())).collect();
            subsets.sort_by_key(|s| std::cmp::Reverse(s.count_ones()));
            for sub in subsets {
                let chosen: Vec<usize> = remaining
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| sub & (1 << k) != 0)
                    .map(|(_, i)| *i)
                    .collect();
                let mut targets: Vec<(String, u32)> = chosen.iter().map(|i| boxes[*i].clone()).collect();
                targets.sort_by_key(|t| std::cmp::Reverse(t.1));
                let Some(assignment) = assign_groups(&caps, &targets, 0, 0) else {
                    continue;
                };
                let mut step: Vec<Action> = assignment
                    .iter()
                    .map(|(r, b)| Action::new(caps[*r].0.clone(), "lift", vec![json!(targets[*b].0)]))
                    .collect();
                step.sort_by(|a, b| a.robot.cmp(&b.robot));
                let next = chosen.iter().fold(*m, |acc, i| acc | (1 << i));
                if !emit(step, next) {
                    return;
                }
            }
        },
        budget,
    )
}

/// Enumerates box-to-slot assignments until one respects every keep-out.
fn solve_shape(
    scene: &ShapeScene,
    spec: &crate::continuous::ShapeSpec,
    time_limit: f64,
    budget: u64,
) -> OracleOutcome {
    let ids: Vec<&String> = scene.boxes.keys().collect();
    let n = ids.len();
    if spec.target_poses.len() != n || time_limit < n as f64 {
        return OracleOutcome::NoSolution;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut tried = 0u64;
    loop {
        tried += 1;
        if tried > budget {
            return OracleOutcome::BudgetExceeded;
        }
        let ok = perm.iter().all(|&s| {
            let p = spec.target_poses[s];
            spec.bowls.iter().all(|b| !b.contains(p))
        });
        if ok {
            let trajectories = ids
                .iter()
                .zip(&perm)
                .enumerate()
                .map(|(k, (id, &s))| {
                    let start = scene.boxes[*id];
                    let slot = spec.target_poses[s];
                    (
                        (*id).clone(),
                        vec![Waypoint::at(start, 0.0), Waypoint::at(slot, (k + 1) as f64)],
                    )
                })
                .collect();
            return OracleOutcome::Solved {
                plan: Plan::Waypoints { trajectories },
                length: n,
            };
        }
        if !next_permutation(&mut perm) {
            return OracleOutcome::NoSolution;
        }
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Reference plan for any instance: the oracle's plan for discrete and
/// shape-formation instances, the generator's constructive witness for the
/// path-planning ones.
pub fn reference_plan(inst: &TaskInstance, budget: u64) -> Option<Plan> {
    match oracle_solve(inst, budget) {
        OracleOutcome::Solved { plan, .. } => Some(plan),
        OracleOutcome::Unsupported => crate::continuous::witness_plan(inst),
        OracleOutcome::BudgetExceeded => constructive_plan(inst),
        OracleOutcome::NoSolution => None,
    }
}

/// A feasible but usually long plan built without search, for instances too
/// large for the oracle. Its length stays within the fallback step limit the
/// generator assigns. Replayed before returning.
pub fn constructive_plan(inst: &TaskInstance) -> Option<Plan> {
    let steps = match (&inst.initial_state, &inst.goal) {
        (EnvState::Blocksworld(s), GoalSpec::Blocksworld { towers }) => rebuild_towers(s, towers),
        (EnvState::BoxNet(s), _) => deliver_one_by_one(s),
        _ => return None,
    };
    let end = replay_with_envs(inst, &steps).ok()?;
    envs::is_goal(&end, &inst.goal).then_some(Plan::Actions { steps })
}

fn rebuild_towers(s: &envs::BlocksworldState, goal: &[Vec<String>]) -> Vec<Vec<Action>> {
    let act = |name: &str, args: &[&String]| vec![Action::new(envs::blocksworld::ARM, name, args.iter().map(|a| json!(a)).collect())];
    let mut steps = Vec::new();
    if let Some(h) = &s.holding {
        steps.push(act("put_down", &[h]));
    }
    for t in &s.towers {
        for k in (1..t.len()).rev() {
            steps.push(act("unstack", &[&t[k], &t[k - 1]]));
            steps.push(act("put_down", &[&t[k]]));
        }
    }
    for t in goal {
        for k in 1..t.len() {
            steps.push(act("pick_up", &[&t[k]]));
            steps.push(act("stack", &[&t[k], &t[k - 1]]));
        }
    }
    steps
}

/// Each box in turn walks rows first, then columns, handed on by the arm of
/// the cell it sits in, and is dropped at its goal.
fn deliver_one_by_one(s: &BoxNetState) -> Vec<Vec<Action>> {
    let arm_at = |c: envs::Cell| s.arms.iter().find(|(_, &a)| a == c).map(|(id, _)| id.clone());
    let mut steps = Vec::new();
    for (id, b) in &s.boxes {
        let boxnet::BoxLocation::Cell(mut at) = b.location else { continue };
        let goal = s.goals[&b.color];
        while at != goal {
            let next = if at.row != goal.row {
                envs::Cell::new(at.row + (goal.row - at.row).signum(), at.col)
            } else {
                envs::Cell::new(at.row, at.col + (goal.col - at.col).signum())
            };
            let Some(arm) = arm_at(at) else { return steps };
            steps.push(vec![Action::new(arm, "move", vec![json!(id), json!(next.row), json!(next.col)])]);
            at = next;
        }
        let Some(arm) = arm_at(at) else { return steps };
        steps.push(vec![Action::new(arm, "place", vec![json!(id)])]);
    }
    steps
}

/// Replays an action plan through `envs::apply_action`, returning the final
/// state, or the failing step index.
pub fn replay_with_envs(inst: &TaskInstance, steps: &[Vec<Action>]) -> Result<EnvState, usize> {
    let mut s = inst.initial_state.clone();
    for (i, step) in steps.iter().enumerate() {
        s = envs::apply_action(&s, step).map_err(|_| i)?;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::gridworld::{GoalCell, GridworldState};
    use crate::envs::{BlocksworldState, Cell};
    use crate::model::{DifficultyParams, DEFAULT_EXEC_TIMEOUT_SECS, INSTANCE_SCHEMA_VERSION};
    use std::collections::BTreeSet;

    pub(crate) fn instance(state: EnvState, goal: GoalSpec, difficulty: DifficultyParams) -> TaskInstance {
        TaskInstance {
            schema_version: INSTANCE_SCHEMA_VERSION,
            env_kind: state.env_kind(),
            seed: 0,
            difficulty,
            initial_state: state,
            goal,
            step_limit: Some(100),
            time_limit: None,
            exec_timeout: DEFAULT_EXEC_TIMEOUT_SECS,
        }
    }

    fn towers(t: &[&[&str]]) -> Vec<Vec<String>> {
        t.iter().map(|x| x.iter().map(|s| s.to_string()).collect()).collect()
    }

    fn swap_instance() -> TaskInstance {
        instance(
            EnvState::Blocksworld(BlocksworldState::on_table(towers(&[&["B", "A"]]))),
            GoalSpec::Blocksworld {
                towers: towers(&[&["A", "B"]]),
            },
            DifficultyParams::Blocksworld { blocks: 2 },
        )
    }

    #[test]
    fn blocksworld_swap_takes_four_steps() {
        let inst = swap_instance();
        let OracleOutcome::Solved { plan, length } = oracle_solve(&inst, DEFAULT_BUDGET) else {
            panic!()
        };
        assert_eq!(length, 4);
        let tokens: Vec<String> = plan.steps().unwrap().iter().map(|s| s[0].to_string()).collect();
        assert_eq!(
            tokens,
            ["arm:unstack(A,B)", "arm:put_down(A)", "arm:pick_up(B)", "arm:stack(B,A)"]
        );
        assert_eq!(oracle_optimal_length(&inst, DEFAULT_BUDGET), Some(4));
    }

    #[test]
    fn gridworld_goal_at_start_is_one_visit() {
        let s = GridworldState {
            width: 2,
            height: 2,
            obstacles: BTreeSet::new(),
            goals: vec![GoalCell {
                cell: Cell::new(0, 0),
                visited: false,
            }],
            robot: Cell::new(0, 0),
        };
        let inst = instance(
            EnvState::Gridworld(s),
            GoalSpec::Gridworld,
            DifficultyParams::Gridworld {
                width: 2,
                height: 2,
                obstacle_density: 0.0,
                goals: 1,
            },
        );
        let OracleOutcome::Solved { plan, length } = oracle_solve(&inst, DEFAULT_BUDGET) else {
            panic!()
        };
        assert_eq!(length, 1);
        assert_eq!(plan.steps().unwrap()[0][0].action, "visit_goal");
    }

    #[test]
    fn solved_at_start_is_zero() {
        let inst = instance(
            EnvState::Blocksworld(BlocksworldState::on_table(towers(&[&["A", "B"]]))),
            GoalSpec::Blocksworld {
                towers: towers(&[&["A", "B"]]),
            },
            DifficultyParams::Blocksworld { blocks: 2 },
        );
        assert_eq!(oracle_optimal_length(&inst, DEFAULT_BUDGET), Some(0));
    }

    #[test]
    fn large_blocksworld_small_budget_is_unknown() {
        let d = DifficultyParams::Blocksworld { blocks: 15 };
        let inst = crate::envs::generate_instance(EnvKind::Blocksworld, &d, 3).unwrap();
        assert_eq!(oracle_solve(&inst, 1000), OracleOutcome::BudgetExceeded);
        assert_eq!(oracle_optimal_length(&inst, 1000), None);
    }

    #[test]
    fn boxlift_exhaustive_assignment() {
        // capacities {60,50,40}, weights {100,45}. Lifting needs strictly more
        // capacity than weight, so box 100 needs {60,50} (110) or all three,
        // leaving 40 < 45 for the other box: the optimum is two steps.
        let inst = instance(
            EnvState::BoxLift(BoxLiftState::new(&[60, 50, 40], &[100, 45])),
            GoalSpec::BoxLift,
            DifficultyParams::BoxLift {
                robots: 3,
                boxes: 2,
                capacity: (40, 60),
                weight: (45, 100),
            },
        );
        // brute force over every robot -> {idle, box0, box1} map for one step
        let mut one_step = false;
        for code in 0..27u32 {
            let mut totals = [0u32; 2];
            let mut c = code;
            for cap in [60, 50, 40] {
                match c % 3 {
                    1 => totals[0] += cap,
                    2 => totals[1] += cap,
                    _ => {}
                }
                c /= 3;
            }
            one_step |= totals[0] > 100 && totals[1] > 45;
        }
        assert!(!one_step);
        let OracleOutcome::Solved { plan, length } = oracle_solve(&inst, DEFAULT_BUDGET) else {
            panic!()
        };
        assert_eq!(length, 2);
        let end = replay_with_envs(&inst, plan.steps().unwrap()).unwrap();
        assert!(crate::envs::is_goal(&end, &inst.goal));
    }

    #[test]
    fn unreachable_goal_is_no_solution() {
        let s = GridworldState {
            width: 3,
            height: 1,
            obstacles: BTreeSet::from([Cell::new(0, 1)]),
            goals: vec![GoalCell {
                cell: Cell::new(0, 2),
                visited: false,
            }],
            robot: Cell::new(0, 0),
        };
        let inst = instance(
            EnvState::Gridworld(s),
            GoalSpec::Gridworld,
            DifficultyParams::Gridworld {
                width: 3,
                height: 2,
                obstacle_density: 0.0,
                goals: 1,
            },
        );
        assert_eq!(oracle_solve(&inst, DEFAULT_BUDGET), OracleOutcome::NoSolution);
    }

    #[test]
    fn independent_replay_agrees_on_oracle_plans() {
        for env in [EnvKind::Gridworld, EnvKind::Blocksworld] {
            for seed in 0..20 {
                let inst = crate::envs::generate_instance(env, &DifficultyParams::small(env), seed).unwrap();
                let plan = oracle_solve(&inst, DEFAULT_BUDGET).plan().cloned().unwrap();
                let r = independent_replay(&inst, &plan).unwrap();
                assert!(matches!(r, Replay::Completed { goal_reached: true, .. }));
                let end = replay_with_envs(&inst, plan.steps().unwrap()).unwrap();
                assert!(crate::envs::is_goal(&end, &inst.goal));
            }
        }
    }

    #[test]
    fn permutations_enumerate_all() {
        let mut v = vec![0, 1, 2, 3];
        let mut count = 1;
        while next_permutation(&mut v) {
            count += 1;
        }
        assert_eq!(count, 24);
    }

    #[test]
    fn constructive_plans_fit_the_step_limit() {
        for env in [EnvKind::Blocksworld, EnvKind::BoxNet] {
            for seed in 0..5 {
                let d = DifficultyParams::bucket(env, 4);
                let inst = envs::generate_instance(env, &d, seed).unwrap();
                let plan = constructive_plan(&inst).unwrap();
                let n = plan.steps().unwrap().len() as u32;
                assert!(n <= inst.step_limit.unwrap(), "{env} seed {seed}: {n} steps");
            }
        }
    }
}
