//! Structured records of inequality checks.
//!
//! A report carries both sides of the inequality, the tolerance policy that
//! was applied, and a pass/fail/vacuous verdict. Reports serialize to JSON
//! with a stable field order and no wall-clock data, so identical configs
//! produce byte-identical output.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Both sides vanish (or the bound is infinite); the inequality holds
    /// but carries no information.
    Vacuous,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TolerancePolicy {
    /// Multiplicative slack applied to the right-hand side.
    pub factor: f64,
    /// Where the slack comes from (discretization direction, mollification…).
    pub note: String,
}

impl TolerancePolicy {
    pub fn exact() -> Self {
        TolerancePolicy {
            factor: 1.0 + 1e-9,
            note: "exact inequality, floating-point slack only".into(),
        }
    }

    pub fn factor(factor: f64, note: impl Into<String>) -> Self {
        TolerancePolicy {
            factor,
            note: note.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct Provenance {
    pub config_hash: String,
    pub code_version: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentReport {
    pub experiment_id: String,
    pub group_tag: String,
    pub alpha: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    /// lhs / rhs when rhs > 0, otherwise 0.
    pub ratio: f64,
    pub tolerance_policy: TolerancePolicy,
    pub verdict: Verdict,
    /// Auxiliary named scalars (per-link slacks, empirical constants, …).
    pub details: BTreeMap<String, f64>,
    pub provenance: Provenance,
}

impl ExperimentReport {
    /// Build a report for `lhs ≤ factor · rhs`; `rhs = +∞` means the bound is
    /// vacuous, both sides ≈ 0 likewise.
    pub fn for_bound(
        id: impl Into<String>,
        group_tag: impl Into<String>,
        alpha: Option<f64>,
        lhs: f64,
        rhs: f64,
        policy: TolerancePolicy,
    ) -> Self {
        let verdict = if rhs.is_infinite() || (lhs.abs() < 1e-300 && rhs.abs() < 1e-300) {
            Verdict::Vacuous
        } else if lhs <= policy.factor * rhs {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        let ratio = if rhs > 0.0 && rhs.is_finite() {
            lhs / rhs
        } else {
            0.0
        };
        ExperimentReport {
            experiment_id: id.into(),
            group_tag: group_tag.into(),
            alpha,
            lhs,
            rhs,
            ratio,
            tolerance_policy: policy,
            verdict,
            details: BTreeMap::new(),
            provenance: Provenance::default(),
        }
    }

    /// Build a report for the two-sided identity `lhs ≈ rhs` within a
    /// relative tolerance.
    pub fn for_identity(
        id: impl Into<String>,
        group_tag: impl Into<String>,
        alpha: Option<f64>,
        lhs: f64,
        rhs: f64,
        rel_tol: f64,
        note: impl Into<String>,
    ) -> Self {
        let scale = lhs.abs().max(rhs.abs());
        let verdict = if scale < 1e-300 {
            Verdict::Vacuous
        } else if (lhs - rhs).abs() <= rel_tol * scale {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        let ratio = if rhs.abs() > 0.0 { lhs / rhs } else { 0.0 };
        ExperimentReport {
            experiment_id: id.into(),
            group_tag: group_tag.into(),
            alpha,
            lhs,
            rhs,
            ratio,
            tolerance_policy: TolerancePolicy {
                factor: 1.0 + rel_tol,
                note: note.into(),
            },
            verdict,
            details: BTreeMap::new(),
            provenance: Provenance::default(),
        }
    }

    /// Record an observed quantity without asserting any bound: the verdict
    /// is pass as long as the value is finite.
    pub fn observational(
        id: impl Into<String>,
        group_tag: impl Into<String>,
        alpha: Option<f64>,
        lhs: f64,
        rhs: f64,
    ) -> Self {
        let verdict = if lhs.is_finite() && rhs.is_finite() {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
        ExperimentReport {
            experiment_id: id.into(),
            group_tag: group_tag.into(),
            alpha,
            lhs,
            rhs,
            ratio,
            tolerance_policy: TolerancePolicy {
                // f64::MAX rather than infinity: JSON has no literal for ∞
                factor: f64::MAX,
                note: "observational: empirical value recorded, no bound asserted".into(),
            },
            verdict,
            details: BTreeMap::new(),
            provenance: Provenance::default(),
        }
    }

    pub fn with_detail(mut self, key: impl Into<String>, value: f64) -> Self {
        self.details.insert(key.into(), value);
        self
    }

    pub fn passed(&self) -> bool {
        !matches!(self.verdict, Verdict::Fail)
    }
}

/// Render reports as CSV (one row per report, fixed precision).
pub fn reports_to_csv(reports: &[ExperimentReport]) -> String {
    let mut out = String::from("experiment_id,group,alpha,lhs,rhs,ratio,tolerance_factor,verdict\n");
    for r in reports {
        let verdict = match r.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Vacuous => "vacuous",
        };
        out.push_str(&format!(
            "{},{},{},{:.12e},{:.12e},{:.12e},{:.6},{}\n",
            r.experiment_id,
            r.group_tag,
            r.alpha.map(|a| a.to_string()).unwrap_or_default(),
            r.lhs,
            r.rhs,
            r.ratio,
            r.tolerance_policy.factor,
            verdict
        ));
    }
    out
}

/// Render reports as pretty JSON with stable ordering.
pub fn reports_to_json(reports: &[ExperimentReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts() {
        let r = ExperimentReport::for_bound("x", "euclidean:2", None, 1.0, 2.0, TolerancePolicy::exact());
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(r.ratio, 0.5);
        let r = ExperimentReport::for_bound("x", "g", None, 3.0, 2.0, TolerancePolicy::exact());
        assert_eq!(r.verdict, Verdict::Fail);
        let r = ExperimentReport::for_bound("x", "g", None, 1.0, f64::INFINITY, TolerancePolicy::exact());
        assert_eq!(r.verdict, Verdict::Vacuous);
        let r = ExperimentReport::for_bound("x", "g", None, 0.0, 0.0, TolerancePolicy::exact());
        assert_eq!(r.verdict, Verdict::Vacuous);
    }

    #[test]
    fn json_round_trip() {
        let r = ExperimentReport::for_bound("id", "heisenberg1", Some(0.5), 1.0, 2.0, TolerancePolicy::exact())
            .with_detail("slack", 0.25);
        let s = serde_json::to_string(&r).unwrap();
        let back: ExperimentReport = serde_json::from_str(&s).unwrap();
        assert_eq!(r, back);
    }
}
