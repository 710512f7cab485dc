//! Three-valued verdicts for bounded semantic checking.

use std::fmt;

/// Outcome of a bounded check. `Holds` and `Refuted` are definite for the
/// bounds recorded; `Unknown` records why the check could not decide.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Holds { bounds: String },
    Refuted { witness: String },
    Unknown { reason: String },
}

impl Verdict {
    pub fn holds(bounds: impl Into<String>) -> Verdict {
        Verdict::Holds { bounds: bounds.into() }
    }

    pub fn refuted(witness: impl Into<String>) -> Verdict {
        Verdict::Refuted { witness: witness.into() }
    }

    pub fn unknown(reason: impl Into<String>) -> Verdict {
        Verdict::Unknown { reason: reason.into() }
    }

    pub fn is_holds(&self) -> bool {
        matches!(self, Verdict::Holds { .. })
    }

    pub fn is_refuted(&self) -> bool {
        matches!(self, Verdict::Refuted { .. })
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Verdict::Unknown { .. })
    }

    /// Strong-Kleene conjunction.
    pub fn and(self, other: Verdict) -> Verdict {
        match (&self, &other) {
            (Verdict::Refuted { .. }, _) => self,
            (_, Verdict::Refuted { .. }) => other,
            (Verdict::Unknown { .. }, _) => self,
            (_, Verdict::Unknown { .. }) => other,
            _ => self,
        }
    }

    /// Strong-Kleene disjunction.
    pub fn or(self, other: Verdict) -> Verdict {
        match (&self, &other) {
            (Verdict::Holds { .. }, _) => self,
            (_, Verdict::Holds { .. }) => other,
            (Verdict::Unknown { .. }, _) => self,
            (_, Verdict::Unknown { .. }) => other,
            _ => self,
        }
    }

    /// Strong-Kleene implication.
    pub fn implies(self, other: Verdict) -> Verdict {
        match (&self, &other) {
            (Verdict::Refuted { .. }, _) => Verdict::holds("antecedent refuted"),
            (_, Verdict::Holds { .. }) => other,
            (Verdict::Holds { .. }, Verdict::Refuted { witness }) => {
                Verdict::refuted(witness.clone())
            }
            _ => Verdict::unknown("implication undecided"),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Holds { .. } => "holds",
            Verdict::Refuted { .. } => "refuted",
            Verdict::Unknown { .. } => "unknown",
        }
    }

    pub fn detail(&self) -> &str {
        match self {
            Verdict::Holds { bounds } => bounds,
            Verdict::Refuted { witness } => witness,
            Verdict::Unknown { reason } => reason,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.detail();
        if d.is_empty() {
            write!(f, "{}", self.label())
        } else {
            write!(f, "{} ({})", self.label(), d)
        }
    }
}
