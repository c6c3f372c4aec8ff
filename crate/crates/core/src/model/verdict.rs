use serde::{Deserialize, Serialize};

/// Why a trial failed. Variants are listed in reporting priority: when more
/// than one applies, the verifier reports the earliest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    ExecTimeout,
    ParseError,
    IllegalAction,
    VelocityViolation,
    TimeLimitViolation,
    CollisionViolation,
    SafeDistanceViolation,
    OrderViolation,
    GoalNotReached,
    None,
}

impl FailureReason {
    pub const ALL: [FailureReason; 10] = [
        FailureReason::ExecTimeout,
        FailureReason::ParseError,
        FailureReason::IllegalAction,
        FailureReason::VelocityViolation,
        FailureReason::TimeLimitViolation,
        FailureReason::CollisionViolation,
        FailureReason::SafeDistanceViolation,
        FailureReason::OrderViolation,
        FailureReason::GoalNotReached,
        FailureReason::None,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::ExecTimeout => "exec_timeout",
            FailureReason::ParseError => "parse_error",
            FailureReason::IllegalAction => "illegal_action",
            FailureReason::VelocityViolation => "velocity_violation",
            FailureReason::TimeLimitViolation => "time_limit_violation",
            FailureReason::CollisionViolation => "collision_violation",
            FailureReason::SafeDistanceViolation => "safe_distance_violation",
            FailureReason::OrderViolation => "order_violation",
            FailureReason::GoalNotReached => "goal_not_reached",
            FailureReason::None => "none",
        }
    }

    /// Numeric code exposed over the C ABI.
    pub fn code(self) -> i32 {
        self as i32
    }
}

impl std::fmt::Display for FailureReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerdictError {
    #[error("failure_reason must be `none` exactly when all three criteria hold")]
    Inconsistent,
    #[error("success flag disagrees with the three criteria")]
    SuccessMismatch,
}

/// Outcome of one trial under the three criteria: the output parses, the
/// goal is reached, and every constraint holds.
///
/// The success equivalence is enforced at construction and on
/// deserialization, so every `Verdict` in memory is consistent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VerdictRepr")]
pub struct Verdict {
    syntax_ok: bool,
    goal_reached: bool,
    constraints_ok: bool,
    success: bool,
    failure_reason: FailureReason,
    detail: String,
}

#[derive(Deserialize)]
struct VerdictRepr {
    syntax_ok: bool,
    goal_reached: bool,
    constraints_ok: bool,
    success: bool,
    failure_reason: FailureReason,
    #[serde(default)]
    detail: String,
}

impl TryFrom<VerdictRepr> for Verdict {
    type Error = VerdictError;

    fn try_from(r: VerdictRepr) -> Result<Self, Self::Error> {
        let v = Verdict::new(
            r.syntax_ok,
            r.goal_reached,
            r.constraints_ok,
            r.failure_reason,
            r.detail,
        )?;
        if v.success != r.success {
            return Err(VerdictError::SuccessMismatch);
        }
        Ok(v)
    }
}

impl Verdict {
    pub fn new(
        syntax_ok: bool,
        goal_reached: bool,
        constraints_ok: bool,
        failure_reason: FailureReason,
        detail: impl Into<String>,
    ) -> Result<Self, VerdictError> {
        let success = syntax_ok && goal_reached && constraints_ok;
        if success != (failure_reason == FailureReason::None) {
            return Err(VerdictError::Inconsistent);
        }
        Ok(Verdict {
            syntax_ok,
            goal_reached,
            constraints_ok,
            success,
            failure_reason,
            detail: detail.into(),
        })
    }

    pub fn success() -> Self {
        Verdict::new(true, true, true, FailureReason::None, "").unwrap()
    }

    pub fn exec_timeout(detail: impl Into<String>) -> Self {
        Verdict::new(false, false, false, FailureReason::ExecTimeout, detail).unwrap()
    }

    pub fn parse_error(detail: impl Into<String>) -> Self {
        Verdict::new(false, false, false, FailureReason::ParseError, detail).unwrap()
    }

    pub fn illegal_action(detail: impl Into<String>) -> Self {
        Verdict::new(true, false, false, FailureReason::IllegalAction, detail).unwrap()
    }

    pub fn goal_not_reached(detail: impl Into<String>) -> Self {
        Verdict::new(true, false, true, FailureReason::GoalNotReached, detail).unwrap()
    }

    /// A constraint violation. `goal_reached` records whether the goal was
    /// nevertheless achieved.
    ///
    /// # Panics
    /// If `reason` is `None`, `GoalNotReached`, or a pre-replay class.
    pub fn constraint_violation(
        reason: FailureReason,
        goal_reached: bool,
        detail: impl Into<String>,
    ) -> Self {
        assert!(
            matches!(
                reason,
                FailureReason::VelocityViolation
                    | FailureReason::TimeLimitViolation
                    | FailureReason::CollisionViolation
                    | FailureReason::SafeDistanceViolation
                    | FailureReason::OrderViolation
            ),
            "{reason} is not a constraint class"
        );
        Verdict::new(true, goal_reached, false, reason, detail).unwrap()
    }

    pub fn syntax_ok(&self) -> bool {
        self.syntax_ok
    }

    pub fn goal_reached(&self) -> bool {
        self.goal_reached
    }

    pub fn constraints_ok(&self) -> bool {
        self.constraints_ok
    }

    pub fn is_success(&self) -> bool {
        self.success
    }

    pub fn failure_reason(&self) -> FailureReason {
        self.failure_reason
    }

    pub fn detail(&self) -> &str {
        &self.detail
    }
}
