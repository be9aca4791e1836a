//! Check results and their two renderings: an aligned text table for
//! humans and a deterministic structured (JSON) document for machines.
//! The structured form carries no timing data, so reruns with the same
//! config and seed are byte-identical.

use crate::model::format_f64;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
    NotCertified,
}

impl CheckStatus {
    pub fn tag(&self) -> &'static str {
        match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "SKIPPED",
            CheckStatus::NotCertified => "NOT_CERTIFIED",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub id: String,
    pub status: CheckStatus,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub note: String,
    pub runtime_ms: u128,
}

#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub suite: String,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl SuiteResult {
    pub fn fail_count(&self) -> usize {
        self.checks
            .iter()
            .filter(|c| c.status == CheckStatus::Fail)
            .count()
    }

    /// Canonical ordering, independent of completion order.
    pub fn sort(&mut self) {
        self.checks.sort_by(|a, b| a.id.cmp(&b.id));
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("suite {} (seed {})\n", self.suite, self.seed));
        let id_width = self
            .checks
            .iter()
            .map(|c| c.id.len())
            .max()
            .unwrap_or(5)
            .max(5);
        out.push_str(&format!(
            "{:<id_width$}  {:<13} {:>14} {:>14} {:>12} {:>8}  note\n",
            "check", "status", "lhs", "rhs", "margin", "ms"
        ));
        for c in &self.checks {
            out.push_str(&format!(
                "{:<id_width$}  {:<13} {:>14} {:>14} {:>12} {:>8}  {}\n",
                c.id,
                c.status.tag(),
                compact(c.lhs),
                compact(c.rhs),
                compact(c.margin),
                c.runtime_ms,
                c.note
            ));
        }
        out.push_str(&format!(
            "result: {} checks, {} failed\n",
            self.checks.len(),
            self.fail_count()
        ));
        out
    }

    /// Deterministic machine-readable rendering (no runtimes).
    pub fn render_structured(&self) -> String {
        let mut out = String::new();
        out.push_str("{\n");
        out.push_str(&format!("  \"schema_version\": {SCHEMA_VERSION},\n"));
        out.push_str(&format!("  \"suite\": \"{}\",\n", self.suite));
        out.push_str(&format!("  \"seed\": {},\n", self.seed));
        out.push_str("  \"checks\": [\n");
        for (i, c) in self.checks.iter().enumerate() {
            out.push_str(&format!(
                "    {{\"id\": \"{}\", \"status\": \"{}\", \"lhs\": {}, \"rhs\": {}, \"margin\": {}, \"note\": \"{}\"}}{}\n",
                c.id,
                c.status.tag(),
                json_f64(c.lhs),
                json_f64(c.rhs),
                json_f64(c.margin),
                c.note.replace('"', "'"),
                if i + 1 == self.checks.len() { "" } else { "," }
            ));
        }
        out.push_str("  ]\n}\n");
        out
    }
}

fn compact(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.is_nan() {
        "-".to_string()
    } else if x.abs() >= 0.01 && x.abs() < 1e6 {
        format!("{x:.6}")
    } else {
        format!("{x:.4e}")
    }
}

fn json_f64(x: f64) -> String {
    if x.is_finite() {
        format_f64(x)
    } else if x.is_nan() {
        "\"nan\"".to_string()
    } else if x > 0.0 {
        "\"inf\"".to_string()
    } else {
        "\"-inf\"".to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SuiteResult {
        SuiteResult {
            suite: "demo".into(),
            seed: 7,
            checks: vec![
                CheckResult {
                    id: "b-second".into(),
                    status: CheckStatus::Pass,
                    lhs: 1.0,
                    rhs: 2.0,
                    margin: 1.0,
                    note: "".into(),
                    runtime_ms: 3,
                },
                CheckResult {
                    id: "a-first".into(),
                    status: CheckStatus::NotCertified,
                    lhs: f64::INFINITY,
                    rhs: f64::NAN,
                    margin: 0.0,
                    note: "outside regime".into(),
                    runtime_ms: 1,
                },
            ],
        }
    }

    #[test]
    fn structured_is_deterministic_and_sorted() {
        let mut a = sample();
        a.sort();
        assert_eq!(a.checks[0].id, "a-first");
        let mut b = sample();
        b.sort();
        // runtimes differ but the structured rendering must not
        b.checks[0].runtime_ms = 999;
        assert_eq!(a.render_structured(), b.render_structured());
        assert!(a.render_structured().contains("\"schema_version\": 1"));
    }

    #[test]
    fn not_certified_is_not_a_failure() {
        let r = sample();
        assert_eq!(r.fail_count(), 0);
    }
}
