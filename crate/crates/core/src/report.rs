//! Residual statistics, verdicts and the JSON report document.

use serde::{Deserialize, Serialize};

use crate::exprlang::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

/// Tolerance set; every field can be overridden from a model file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Identity checks (Jacobiator, integrability conditions, cochain and coupling-domain identities).
    pub identity: f64,
    /// Agreement between two independent evaluation routes.
    pub oracle: f64,
    /// RK4 conservation diagnostics.
    pub conservation: f64,
    /// Finite-difference cross-check of derivatives.
    pub finite_difference: f64,
    /// Base threshold for `|κ| > 0`; scaled by `1 + max|κ|` over the sample set.
    pub kappa: f64,
    /// Threshold for `|β| > 0`.
    pub beta: f64,
    /// Divergence of Hamiltonian fields against a certificate volume.
    pub divergence: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: 1e-9,
            oracle: 1e-9,
            conservation: 1e-6,
            finite_difference: 1e-5,
            kappa: 1e-9,
            beta: 1e-9,
            divergence: 1e-6,
        }
    }
}

/// Outcome of one named check over a sample set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: String,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub worst_point: Option<[f64; 5]>,
    pub verdict: Verdict,
    pub tolerance: f64,
    pub samples: usize,
    /// Points excluded from the statistics (outside the check's domain or not evaluable).
    pub skipped: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    pub fn skipped(id: &str, note: &str) -> CheckResult {
        CheckResult {
            id: id.to_string(),
            max_residual: 0.0,
            mean_residual: 0.0,
            worst_point: None,
            verdict: Verdict::Skipped,
            tolerance: 0.0,
            samples: 0,
            skipped: 0,
            note: Some(note.to_string()),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }

    pub fn with_note(mut self, note: impl Into<String>) -> CheckResult {
        self.note = Some(note.into());
        self
    }
}

/// Running max/mean of non-negative residuals, mergeable in sample order.
#[derive(Clone, Debug, Default)]
pub struct Stats {
    pub max: f64,
    pub sum: f64,
    pub count: usize,
    pub skipped: usize,
    pub worst: Option<Point>,
    /// Number of residuals above their own per-point threshold, when thresholds are tracked.
    pub failures: usize,
}

impl Stats {
    pub fn new() -> Stats {
        Stats::default()
    }

    pub fn push(&mut self, r: f64, p: &Point) {
        let r = if r.is_nan() { f64::INFINITY } else { r };
        if self.worst.is_none() || r > self.max {
            self.max = r;
            self.worst = Some(*p);
        }
        self.sum += r;
        self.count += 1;
    }

    /// Records `r` together with a pass/fail decision made against a point-dependent threshold.
    pub fn push_checked(&mut self, r: f64, ok: bool, p: &Point) {
        self.push(r, p);
        if !ok {
            self.failures += 1;
        }
    }

    pub fn skip(&mut self) {
        self.skipped += 1;
    }

    pub fn merge(&mut self, o: &Stats) {
        if o.count > 0 && (self.worst.is_none() || o.max > self.max) {
            self.max = o.max;
            self.worst = o.worst;
        }
        self.sum += o.sum;
        self.count += o.count;
        self.skipped += o.skipped;
        self.failures += o.failures;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    /// Verdict by comparing the largest residual with `tol`.
    pub fn finish(&self, id: &str, tol: f64) -> CheckResult {
        let verdict = if self.count == 0 {
            Verdict::Skipped
        } else if self.max <= tol && self.failures == 0 {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        CheckResult {
            id: id.to_string(),
            max_residual: self.max,
            mean_residual: self.mean(),
            worst_point: self.worst.map(|p| p.coords()),
            verdict,
            tolerance: tol,
            samples: self.count,
            skipped: self.skipped,
            note: None,
        }
    }

    /// Verdict from the per-point decisions recorded by [`Stats::push_checked`].
    pub fn finish_checked(&self, id: &str, tol: f64) -> CheckResult {
        let mut r = self.finish(id, tol);
        if self.count > 0 {
            r.verdict = if self.failures == 0 { Verdict::Pass } else { Verdict::Fail };
        }
        r
    }
}

/// A list of check results plus any points where two verdicts that must agree did not.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
    #[serde(default)]
    pub disagreements: Vec<[f64; 5]>,
}

impl VerificationReport {
    pub fn new() -> VerificationReport {
        VerificationReport::default()
    }

    pub fn push(&mut self, c: CheckResult) {
        self.checks.push(c);
    }

    pub fn extend(&mut self, o: VerificationReport) {
        self.checks.extend(o.checks);
        self.disagreements.extend(o.disagreements);
    }

    pub fn passed(&self) -> bool {
        self.disagreements.is_empty() && self.checks.iter().all(CheckResult::passed)
    }

    pub fn get(&self, id: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn verdict(&self, id: &str) -> Option<Verdict> {
        self.get(id).map(|c| c.verdict)
    }
}

/// Sample-set description stored in reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleDescription {
    pub generator: String,
    pub count: usize,
    pub seed: u64,
    pub box_bounds: [[f64; 2]; 5],
}

/// JSON document emitted by the command-line driver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub model: String,
    pub command: String,
    pub tool_version: String,
    pub tolerances: Tolerances,
    pub samples: Option<SampleDescription>,
    pub checks: Vec<CheckResult>,
    #[serde(default)]
    pub disagreements: Vec<[f64; 5]>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub data: serde_json::Value,
}

impl ReportDocument {
    pub fn passed(&self) -> bool {
        self.disagreements.is_empty() && self.checks.iter().all(CheckResult::passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merging_in_order_matches_sequential_push() {
        let pts: Vec<Point> = (0..10).map(|k| Point::new(k as f64, 0.0, 0.0, 0.0, 0.0)).collect();
        let vals = [0.1, 0.5, 0.2, 0.5, 0.0, 0.3, 0.9, 0.1, 0.9, 0.4];
        let mut all = Stats::new();
        for (p, v) in pts.iter().zip(vals) {
            all.push(v, p);
        }
        let mut a = Stats::new();
        let mut b = Stats::new();
        for (k, (p, v)) in pts.iter().zip(vals).enumerate() {
            if k < 4 {
                a.push(v, p)
            } else {
                b.push(v, p)
            }
        }
        a.merge(&b);
        assert_eq!(a.max, all.max);
        assert_eq!(a.worst, all.worst);
        assert_eq!(a.count, all.count);
        assert!((a.sum - all.sum).abs() < 1e-15);
        assert_eq!(all.worst.unwrap().x(0), 6.0);
    }

    #[test]
    fn verdicts() {
        let p = Point::new(0.0, 0.0, 0.0, 0.0, 0.0);
        let mut s = Stats::new();
        assert_eq!(s.finish("x", 1.0).verdict, Verdict::Skipped);
        s.push(0.5, &p);
        assert_eq!(s.finish("x", 1.0).verdict, Verdict::Pass);
        s.push(f64::NAN, &p);
        assert_eq!(s.finish("x", 1.0).verdict, Verdict::Fail);
    }

    #[test]
    fn tolerances_fill_missing_fields_from_defaults() {
        let t: Tolerances = toml::from_str("identity = 1e-7").unwrap();
        assert_eq!(t.identity, 1e-7);
        assert_eq!(t.oracle, 1e-9);
    }
}
