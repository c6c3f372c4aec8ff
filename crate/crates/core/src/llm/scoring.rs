use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{ChatRequest, LlmError, ScoredCandidate, Session};

pub const SOURCE_LOGPROBS: &str = "logprobs";
pub const SOURCE_RATING: &str = "rating_prompt";

/// How the two likelihoods are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    #[default]
    Product,
    /// Mean of the two likelihoods.
    Sum,
}

impl Combine {
    pub fn apply(self, llm: f64, feasibility: f64) -> f64 {
        match self {
            Combine::Product => llm * feasibility,
            Combine::Sum => (llm + feasibility) / 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    /// Best first, at most K entries.
    pub top: Vec<ScoredCandidate>,
    /// Which likelihood path ran.
    pub source: &'static str,
}

impl Scored {
    /// The selected candidate, if any has a positive score.
    pub fn best(&self) -> Option<&ScoredCandidate> {
        self.top.first().filter(|c| c.combined > 0.0)
    }
}

/// Parses `index: score` lines (1-based) from a rating reply into
/// normalized likelihoods. Unrated candidates get 0.
pub fn parse_ratings(reply: &str, n: usize) -> Vec<f64> {
    static LINE: OnceLock<Regex> = OnceLock::new();
    let re = LINE.get_or_init(|| {
        Regex::new(r"(?m)^\s*\[?(\d+)\]?\s*[:.)=-]\s*(\d+(?:\.\d+)?)").expect("static regex")
    });
    let mut raw = vec![0.0; n];
    for cap in re.captures_iter(reply) {
        let (Ok(i), Ok(score)) = (cap[1].parse::<usize>(), cap[2].parse::<f64>()) else {
            continue;
        };
        if (1..=n).contains(&i) {
            raw[i - 1] = score.clamp(0.0, 100.0);
        }
    }
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.iter_mut().for_each(|v| *v /= total);
    }
    raw
}

/// Ranks `candidates` by combined likelihood and returns the top `k`.
/// `request` is the rendered scoring prompt; it is sent for log-probabilities
/// when the backend has them and as a rating prompt otherwise.
pub fn score_candidates(
    session: &mut Session<'_>,
    request: &ChatRequest,
    candidates: &[String],
    feasible: &[bool],
    k: usize,
    combine: Combine,
) -> Result<Scored, LlmError> {
    if candidates.is_empty() || k == 0 || feasible.len() != candidates.len() {
        return Err(LlmError::InvalidRequest(
            "need at least one candidate, K >= 1 and one feasibility flag per candidate".into(),
        ));
    }
    let (llm, source) = match session.candidate_likelihoods("saycan_score", request, candidates)? {
        Some(v) => (v, SOURCE_LOGPROBS),
        None => {
            let reply = session.complete("saycan_rate", request)?;
            (parse_ratings(&reply, candidates.len()), SOURCE_RATING)
        }
    };
    let mut scored: Vec<(usize, ScoredCandidate)> = candidates
        .iter()
        .enumerate()
        .map(|(i, text)| {
            let l = llm.get(i).copied().unwrap_or(0.0);
            let l = if l.is_finite() { l.clamp(0.0, 1.0) } else { 0.0 };
            let f = if feasible[i] { 1.0 } else { 0.0 };
            let combined = if f == 0.0 { 0.0 } else { combine.apply(l, f) };
            (
                i,
                ScoredCandidate {
                    text: text.clone(),
                    llm_likelihood: l,
                    feasibility_likelihood: f,
                    combined,
                },
            )
        })
        .collect();
    scored.sort_by(|(ia, a), (ib, b)| b.combined.total_cmp(&a.combined).then(ia.cmp(ib)));
    scored.truncate(k.min(candidates.len()));
    Ok(Scored {
        top: scored.into_iter().map(|(_, c)| c).collect(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ChatMessage, Gateway, GatewayConfig, MockBackend};
    use std::sync::Arc;

    fn req() -> ChatRequest {
        ChatRequest {
            messages: vec![ChatMessage::user("pick")],
            temperature: 0.0,
            max_tokens: 64,
            model_id: "mock".into(),
        }
    }

    fn with_probs(p: Vec<f64>) -> Gateway {
        let mock = MockBackend::repeating("").with_likelihoods(move |_, _| p.clone());
        Gateway::new(Arc::new(mock), GatewayConfig::default())
    }

    fn names(s: &Scored) -> Vec<&str> {
        s.top.iter().map(|c| c.text.as_str()).collect()
    }

    #[test]
    fn top_two_by_likelihood() {
        let gw = with_probs(vec![0.7, 0.2, 0.1]);
        let mut s = gw.session(5);
        let c: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let r = score_candidates(&mut s, &req(), &c, &[true; 3], 2, Combine::Product).unwrap();
        assert_eq!(names(&r), ["a", "b"]);
        assert_eq!(r.source, SOURCE_LOGPROBS);
    }

    #[test]
    fn infeasible_is_zeroed() {
        let gw = with_probs(vec![0.9, 0.1]);
        let mut s = gw.session(5);
        let c: Vec<String> = ["a", "b"].map(String::from).to_vec();
        let r = score_candidates(&mut s, &req(), &c, &[false, true], 5, Combine::Product).unwrap();
        assert_eq!(names(&r), ["b", "a"]);
        assert_eq!(r.top[1].combined, 0.0);
        assert_eq!(r.top.len(), 2);
    }

    #[test]
    fn single_feasible_candidate() {
        let gw = with_probs(vec![0.4]);
        let mut s = gw.session(5);
        let r = score_candidates(&mut s, &req(), &["only".into()], &[true], 1, Combine::Product).unwrap();
        assert_eq!(r.best().unwrap().combined, 0.4);
    }

    #[test]
    fn rating_fallback() {
        let gw = Gateway::new(
            Arc::new(MockBackend::repeating("1: 10\n2: 30\n3) 60\n")),
            GatewayConfig::default(),
        );
        let mut s = gw.session(5);
        let c: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let r = score_candidates(&mut s, &req(), &c, &[true; 3], 5, Combine::Product).unwrap();
        assert_eq!(r.source, SOURCE_RATING);
        assert_eq!(names(&r), ["c", "b", "a"]);
        assert!((r.top[0].llm_likelihood - 0.6).abs() < 1e-12);
        assert_eq!(s.transcript()[0].role, "saycan_rate");
    }

    #[test]
    fn unparseable_rating_selects_nothing() {
        assert_eq!(parse_ratings("no idea", 2), vec![0.0, 0.0]);
        let gw = Gateway::new(Arc::new(MockBackend::repeating("no idea")), GatewayConfig::default());
        let mut s = gw.session(5);
        let r = score_candidates(&mut s, &req(), &["a".into()], &[true], 5, Combine::Product).unwrap();
        assert!(r.best().is_none());
    }

    #[test]
    fn rescaling_keeps_the_choice() {
        for scale in [0.5, 0.01, 1.0] {
            let gw = with_probs(vec![0.3 * scale, 0.6 * scale, 0.1 * scale]);
            let mut s = gw.session(5);
            let c: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
            let r = score_candidates(&mut s, &req(), &c, &[true, false, true], 1, Combine::Product).unwrap();
            assert_eq!(names(&r), ["a"]);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let gw = with_probs(vec![]);
        let mut s = gw.session(5);
        assert!(score_candidates(&mut s, &req(), &[], &[], 1, Combine::Product).is_err());
        assert!(score_candidates(&mut s, &req(), &["a".into()], &[true], 0, Combine::Product).is_err());
    }
}
