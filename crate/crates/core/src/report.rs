//! Evaluated inequalities.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::qcore::hex_digest;

/// Default slack tolerance for a PASS verdict.
pub const PASS_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Optimizer output; a lower bound on a supremum or an upper bound on an
    /// infimum.
    Estimate,
    /// Closed-form value.
    Analytic,
    /// Value supplied by the caller.
    Declared,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InconclusiveReason {
    /// The inequality's own smallness hypothesis does not hold.
    Hypothesis { detail: String },
    /// A one-sided surrogate on the disadvantaged side limited the check.
    OptimizationBudget { surrogate: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Inconclusive { reason: InconclusiveReason },
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }

    pub fn is_hypothesis_failure(&self) -> bool {
        matches!(
            self,
            Verdict::Inconclusive { reason: InconclusiveReason::Hypothesis { .. } }
        )
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Inconclusive { reason: InconclusiveReason::Hypothesis { .. } } => {
                "INCONCLUSIVE(hypothesis)"
            }
            Verdict::Inconclusive { reason: InconclusiveReason::OptimizationBudget { .. } } => {
                "INCONCLUSIVE(optimization)"
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    #[serde(with = "float")]
    pub value: f64,
}

impl Component {
    pub fn new(name: impl Into<String>, value: f64) -> Self {
        Self { name: name.into(), value }
    }
}

/// One evaluated inequality `lhs <= rhs`.
///
/// `rhs` is the sum of `rhs_components`; `slack = rhs - lhs`. Components that
/// are not applicable (a correction term whose hypothesis fails) are listed
/// in `excluded` and do not enter the sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub id: String,
    #[serde(with = "float")]
    pub lhs: f64,
    pub lhs_provenance: Provenance,
    #[serde(with = "float")]
    pub rhs: f64,
    pub rhs_components: Vec<Component>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded: Vec<String>,
    #[serde(with = "float")]
    pub slack: f64,
    pub allowance: f64,
    #[serde(flatten)]
    pub verdict: Verdict,
    pub inputs_fingerprint: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Component>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn new(
        id: impl Into<String>,
        lhs: f64,
        lhs_provenance: Provenance,
        rhs_components: Vec<Component>,
    ) -> Self {
        let rhs: f64 = rhs_components.iter().map(|c| c.value).sum();
        Self {
            id: id.into(),
            lhs,
            lhs_provenance,
            rhs,
            rhs_components,
            excluded: Vec::new(),
            slack: rhs - lhs,
            allowance: PASS_TOL,
            verdict: Verdict::Pass,
            inputs_fingerprint: String::new(),
            seed: 0,
            diagnostics: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn with_allowance(mut self, allowance: f64) -> Self {
        self.allowance = allowance;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_fingerprint(mut self, fp: String) -> Self {
        self.inputs_fingerprint = fp;
        self
    }

    pub fn exclude(mut self, what: impl Into<String>) -> Self {
        self.excluded.push(what.into());
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn diagnostic(mut self, name: impl Into<String>, value: f64) -> Self {
        self.diagnostics.push(Component::new(name, value));
        self
    }

    /// Sets the verdict. A failed hypothesis always wins; otherwise PASS iff
    /// `slack >= -allowance`, and a negative slack is blamed on `surrogate`.
    pub fn judge(mut self, hypothesis: Result<(), String>, surrogate: &str) -> Self {
        self.verdict = match hypothesis {
            Err(detail) => Verdict::Inconclusive { reason: InconclusiveReason::Hypothesis { detail } },
            Ok(()) if self.slack >= -self.allowance => Verdict::Pass,
            Ok(()) => Verdict::Inconclusive {
                reason: InconclusiveReason::OptimizationBudget { surrogate: surrogate.into() },
            },
        };
        self
    }

    pub fn component(&self, name: &str) -> Option<f64> {
        self.rhs_components.iter().find(|c| c.name == name).map(|c| c.value)
    }

    pub fn diagnostic_value(&self, name: &str) -> Option<f64> {
        self.diagnostics.iter().find(|c| c.name == name).map(|c| c.value)
    }
}

/// JSON has no infinities: non-finite values are written as the strings
/// `"inf"`, `"-inf"` and `"nan"`, finite ones as numbers.
pub mod float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("expected a number, got `{other}`"))),
            },
        }
    }
}

/// Hex SHA-256 over a list of string parts (length-prefixed).
pub fn fingerprint(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    hex_digest(h)
}
