use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Not evaluated because an earlier stage failed.
    Skipped,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        })
    }
}

/// One named check: measured value against a threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub value: Option<f64>,
    pub threshold: String,
    pub note: String,
}

impl Check {
    pub fn new(
        name: impl Into<String>,
        pass: bool,
        value: Option<f64>,
        threshold: impl Into<String>,
        note: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            status: if pass { Status::Pass } else { Status::Fail },
            value,
            threshold: threshold.into(),
            note: note.into(),
        }
    }

    /// `value < limit`.
    pub fn below(name: impl Into<String>, value: f64, limit: f64, note: impl Into<String>) -> Self {
        Self::new(name, value < limit, Some(value), format!("< {limit:?}"), note)
    }

    /// `value > limit`.
    pub fn above(name: impl Into<String>, value: f64, limit: f64, note: impl Into<String>) -> Self {
        Self::new(name, value > limit, Some(value), format!("> {limit:?}"), note)
    }

    pub fn skipped(name: impl Into<String>, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: Status::Skipped,
            value: None,
            threshold: String::new(),
            note: note.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.value.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
        write!(
            f,
            "[{}] {}: {} (threshold {}) {}",
            self.status, self.name, v, self.threshold, self.note
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl VerifyReport {
    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
        self.pass = self.checks.iter().all(Check::passed);
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.checks
            .iter()
            .map(|c| {
                vec![
                    c.name.clone(),
                    c.status.to_string(),
                    c.value.map_or_else(String::new, crate::artifacts::format_float),
                    c.threshold.clone(),
                    c.note.clone(),
                ]
            })
            .collect()
    }
}
