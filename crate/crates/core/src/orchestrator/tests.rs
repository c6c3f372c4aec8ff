use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::*;
use crate::envs::generate_instance;
use crate::llm::{GatewayConfig, MockBackend, Reply, RetryPolicy};
use crate::model::{DifficultyParams, EnvKind, FailureReason};
use crate::oracles::{reference_plan, DEFAULT_BUDGET};
use crate::sandbox::SandboxConfig;
use crate::wire::serialize_plan;

fn instance(env: EnvKind, seed: u64) -> TaskInstance {
    generate_instance(env, &DifficultyParams::small(env), seed).unwrap()
}

fn gateway(mock: MockBackend) -> Gateway {
    Gateway::new(
        Arc::new(mock),
        GatewayConfig {
            retry: RetryPolicy::no_delay(),
            ..GatewayConfig::default()
        },
    )
}

fn config(method: Method) -> OrchestratorConfig {
    OrchestratorConfig {
        method,
        record_timing: false,
        ..OrchestratorConfig::default()
    }
}

fn printing(text: &str) -> String {
    format!("Here it is.\n```python\nprint({:?})\n```\n", text)
}

/// Task replies come from `programs` in order (the last one repeats), the
/// checker passes iff the output has a plan marker, the steerer follows it.
fn code_mock(programs: Vec<String>) -> MockBackend {
    let n = AtomicUsize::new(0);
    MockBackend::responder(move |role, req| {
        let prompt = &req.messages[1].content;
        Reply::Text(match role {
            roles::TASK => {
                let i = n.fetch_add(1, Ordering::SeqCst).min(programs.len() - 1);
                programs[i].clone()
            }
            roles::CHECK => "```python\ndata = open('candidate_output.txt').read()\nprint('PASS' if '===PLAN===' in data else 'FAIL')\n```".into(),
            roles::STEER => {
                let report = prompt.split("Checker report:\n").last().unwrap_or("");
                if report.lines().next() == Some("PASS") {
                    "DECISION: ACCEPT\nGUIDANCE: none".into()
                } else {
                    "DECISION: REVISE\nGUIDANCE: search over states instead of guessing".into()
                }
            }
            other => panic!("unexpected role {other}"),
        })
    })
}

fn decisions(r: &EpisodeRecord) -> Vec<Decision> {
    r.rounds.iter().map(|x| x.steer_decision.as_ref().unwrap().decision).collect()
}

#[test]
fn accepts_at_round_two() {
    let inst = instance(EnvKind::Blocksworld, 3);
    let good = printing(&serialize_plan(&reference_plan(&inst, DEFAULT_BUDGET).unwrap()));
    let gw = gateway(code_mock(vec![printing("thinking"), good]));
    let r = run_episode(&inst, &config(Method::CodeSymbolicPlanner), &gw, &Sandbox::new(SandboxConfig::default())).unwrap();
    assert_eq!(decisions(&r), [Decision::Revise, Decision::Accept]);
    assert!(r.success(), "{:?}", r.final_verdict);
    assert_eq!(r.llm_calls, 6);
    assert_eq!(r.rounds[0].check_result.as_ref().unwrap().passed, Some(false));
    assert_eq!(r.rounds[1].check_result.as_ref().unwrap().passed, Some(true));
    assert!(r.rounds[1].task_prompt.contains("search over states"));
    assert_eq!(r.rounds[1].guidance_text, "search over states instead of guessing");
}

#[test]
fn force_accepts_at_the_round_cap() {
    let inst = instance(EnvKind::Gridworld, 2);
    let gw = gateway(code_mock(vec![printing("no plan")]));
    let r = run_episode(&inst, &config(Method::CodeSymbolicPlanner), &gw, &Sandbox::new(SandboxConfig::default())).unwrap();
    assert_eq!(decisions(&r), [Decision::Revise, Decision::Revise, Decision::ForceAccept]);
    assert!(r.rounds[2].check_result.is_none());
    assert_eq!(r.llm_calls, 7);
    assert_eq!(r.final_verdict.failure_reason(), FailureReason::ParseError);
    assert!(r.final_plan.is_none());
}

#[test]
fn one_round_equals_code_answer() {
    let inst = instance(EnvKind::BoxLift, 4);
    let good = printing(&serialize_plan(&reference_plan(&inst, DEFAULT_BUDGET).unwrap()));
    let sb = Sandbox::new(SandboxConfig::default());
    let csp = OrchestratorConfig {
        max_rounds: 1,
        ..config(Method::CodeSymbolicPlanner)
    };
    let a = run_episode(&inst, &csp, &gateway(code_mock(vec![good.clone()])), &sb).unwrap();
    let mut b = run_episode(&inst, &config(Method::CodeAnswer), &gateway(code_mock(vec![good])), &sb).unwrap();
    assert!(a.success());
    assert_eq!(b.method, Method::CodeAnswer);
    b.method = Method::CodeSymbolicPlanner;
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn sleeping_program_times_out() {
    let mut inst = instance(EnvKind::Gridworld, 1);
    inst.exec_timeout = 0.5;
    let slow = "```python\nimport time\ntime.sleep(30)\nprint('===PLAN===')\n```".to_string();
    let gw = gateway(code_mock(vec![slow]));
    let r = run_episode(&inst, &config(Method::CodeAnswer), &gw, &Sandbox::new(SandboxConfig::default())).unwrap();
    assert_eq!(r.final_verdict.failure_reason(), FailureReason::ExecTimeout);
    assert!(r.rounds[0].sandbox_result.as_ref().unwrap().timed_out);
}

#[test]
fn only_question_parses_prose_or_plans() {
    let inst = instance(EnvKind::Blocksworld, 1);
    let sb = Sandbox::new(SandboxConfig::default());
    let plan = serialize_plan(&reference_plan(&inst, DEFAULT_BUDGET).unwrap());
    let r = run_episode(&inst, &config(Method::OnlyQuestion), &gateway(MockBackend::repeating(&plan)), &sb).unwrap();
    assert!(r.success());
    let r = run_episode(&inst, &config(Method::OnlyQuestion), &gateway(MockBackend::repeating("I am not sure.")), &sb).unwrap();
    assert_eq!(r.final_verdict.failure_reason(), FailureReason::ParseError);
    assert_eq!(r.llm_calls, 1);
}

#[test]
fn backend_failure_sets_method_error() {
    let inst = instance(EnvKind::Gridworld, 1);
    let gw = gateway(MockBackend::from_replies([Reply::Fatal("HTTP 401".into())]));
    let r = run_episode(&inst, &config(Method::CodeSymbolicPlanner), &gw, &Sandbox::new(SandboxConfig::default())).unwrap();
    assert!(r.method_error.as_deref().unwrap().contains("401"));
    assert!(!r.success());
    assert_eq!(r.transcript.len(), 1);
}

#[test]
fn missing_interpreter_is_an_error() {
    let inst = instance(EnvKind::Gridworld, 1);
    let sb = Sandbox::new(SandboxConfig {
        guest_cmd: vec!["/nonexistent/interpreter".into()],
        ..SandboxConfig::default()
    });
    let gw = gateway(code_mock(vec![printing("x")]));
    assert!(matches!(
        run_episode(&inst, &config(Method::CodeAnswer), &gw, &sb),
        Err(OrchestratorError::Sandbox(_))
    ));
}

/// Likelihood favouring the candidate that matches the next oracle step.
fn saycan_follow(inst: &TaskInstance) -> MockBackend {
    let plan = reference_plan(inst, DEFAULT_BUDGET).unwrap();
    let texts: Vec<String> = plan
        .steps()
        .unwrap()
        .iter()
        .map(|s| s.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "))
        .collect();
    MockBackend::repeating("").with_likelihoods(move |req, cands| {
        let history = req.messages[1].content.split("Steps taken so far:\n").nth(1).unwrap_or("");
        let taken = history.lines().take_while(|l| !l.starts_with("Current state")).filter(|l| l.contains(". ")).count();
        cands
            .iter()
            .map(|c| if texts.get(taken) == Some(c) { 0.9 } else { 0.1 / cands.len() as f64 })
            .collect()
    })
}

#[test]
fn saycan_follows_likelihoods_and_clamps_k() {
    let inst = instance(EnvKind::Gridworld, 3);
    let cfg = OrchestratorConfig {
        saycan_k: 50,
        ..config(Method::SayCan)
    };
    let r = run_episode(&inst, &cfg, &gateway(saycan_follow(&inst)), &Sandbox::new(SandboxConfig::default())).unwrap();
    assert!(r.success(), "{:?}", r.final_verdict);
    for s in &r.steps {
        assert_eq!(s.candidates.len(), crate::envs::gridworld::ACTIONS.len());
        assert_eq!(s.likelihood_source.as_deref(), Some("logprobs"));
        assert!(s.candidates.windows(2).all(|w| w[0].combined >= w[1].combined));
    }
    assert_eq!(r.llm_calls as usize, r.steps.len());
}

#[test]
fn saycan_never_picks_infeasible_steps() {
    let inst = instance(EnvKind::Blocksworld, 2);
    // Uniform likelihoods: choice is by feasibility and index only.
    let mock = MockBackend::repeating("").with_likelihoods(|_, c| vec![1.0 / c.len() as f64; c.len()]);
    let cfg = OrchestratorConfig {
        saycan_k: 2,
        ..config(Method::SayCan)
    };
    let r = run_episode(&inst, &cfg, &gateway(mock), &Sandbox::new(SandboxConfig::default())).unwrap();
    assert!(!r.steps.is_empty());
    for s in &r.steps {
        assert!(s.candidates.len() <= 2);
        let best = &s.candidates[0];
        assert_eq!(best.feasibility_likelihood, 1.0);
        assert_eq!(s.chosen.as_deref(), Some(best.text.as_str()));
    }
    assert_ne!(r.final_verdict.failure_reason(), FailureReason::IllegalAction);
}

#[test]
fn saycan_unparseable_ratings_stop_at_once() {
    let inst = instance(EnvKind::BoxNet, 1);
    let r = run_episode(&inst, &config(Method::SayCan), &gateway(MockBackend::repeating("hmm")), &Sandbox::new(SandboxConfig::default())).unwrap();
    assert_eq!(r.steps.len(), 1);
    assert_eq!(r.steps[0].chosen, None);
    assert_eq!(r.steps[0].likelihood_source.as_deref(), Some("rating_prompt"));
    assert_eq!(r.final_plan.as_ref().unwrap().steps().unwrap().len(), 0);
    assert!(!r.success());
}

#[test]
fn saycan_continuous_reaches_open_goals() {
    for env in [EnvKind::PathRacecars, EnvKind::ShapeFormation] {
        let inst = instance(env, 1);
        // Prefer goal / slot targets, then the lowest index.
        let mock = MockBackend::repeating("").with_likelihoods(|_, c| {
            c.iter()
                .enumerate()
                .map(|(i, t)| if t.contains(" to goal ") { 0.9 } else { 0.05 / (i + 1) as f64 })
                .collect()
        });
        let r = run_episode(&inst, &config(Method::SayCan), &gateway(mock), &Sandbox::new(SandboxConfig::default())).unwrap();
        assert!(r.final_plan.is_some(), "{env}");
        assert!(r.steps.iter().all(|s| s.chosen.is_none() || s.candidates[0].feasibility_likelihood == 1.0));
        if env == EnvKind::ShapeFormation {
            assert!(r.success(), "{env}: {:?}", r.final_verdict);
        }
    }
}

/// Central planner and committer replay the oracle; robots answer OK.
fn hmas_follow(inst: &TaskInstance) -> MockBackend {
    let plan = reference_plan(inst, DEFAULT_BUDGET).unwrap();
    let steps: Vec<String> = plan
        .steps()
        .unwrap()
        .iter()
        .map(|s| serde_json::to_string(s).unwrap())
        .collect();
    let central = AtomicUsize::new(0);
    MockBackend::responder(move |role, _| {
        Reply::Text(match role {
            roles::HMAS_CENTRAL => {
                let i = central.fetch_add(1, Ordering::SeqCst);
                steps.get(i).cloned().unwrap_or_else(|| "DONE".into())
            }
            roles::HMAS_FEEDBACK => "OK".into(),
            roles::HMAS_COMMIT => {
                let i = central.load(Ordering::SeqCst) - 1;
                steps[i].clone()
            }
            other => panic!("unexpected role {other}"),
        })
    })
}

#[test]
fn hmas_single_robot_gets_no_feedback() {
    let inst = instance(EnvKind::Gridworld, 5);
    let r = run_episode(&inst, &config(Method::Hmas2), &gateway(hmas_follow(&inst)), &Sandbox::new(SandboxConfig::default())).unwrap();
    assert!(r.success(), "{:?}", r.final_verdict);
    assert!(r.steps.iter().all(|s| s.feedback.is_empty()));
    assert!(r.transcript.iter().all(|t| t.role == roles::HMAS_CENTRAL));
    assert_eq!(r.llm_calls as usize, r.steps.len());
}

#[test]
fn hmas_asks_every_robot_each_step() {
    let inst = instance(EnvKind::BoxLift, 2);
    let n = inst.agent_count();
    assert!(n > 1);
    let r = run_episode(&inst, &config(Method::Hmas2), &gateway(hmas_follow(&inst)), &Sandbox::new(SandboxConfig::default())).unwrap();
    assert!(r.success(), "{:?}", r.final_verdict);
    for s in &r.steps {
        assert_eq!(s.feedback.len(), n);
    }
    let fb = r.transcript.iter().filter(|t| t.role == roles::HMAS_FEEDBACK).count();
    assert_eq!(fb, n * r.steps.len());
    assert_eq!(r.llm_calls as usize, (n + 2) * r.steps.len());
}

#[test]
fn hmas_illegal_step_ends_the_episode() {
    let inst = instance(EnvKind::Blocksworld, 1);
    let bad = r#"[{"robot": "arm", "action": "stack", "args": ["Z", "Y"]}]"#;
    let r = run_episode(&inst, &config(Method::Hmas2), &gateway(MockBackend::repeating(bad)), &Sandbox::new(SandboxConfig::default())).unwrap();
    assert_eq!(r.steps.len(), 1);
    assert_eq!(r.final_verdict.failure_reason(), FailureReason::IllegalAction);
}

#[test]
fn clip_keeps_the_tail() {
    assert_eq!(clip_tail("abcdef", 10), "abcdef");
    let c = clip_tail("abcdef", 2);
    assert!(c.ends_with("\nef"));
    assert!(c.contains("4 characters omitted"));
}
