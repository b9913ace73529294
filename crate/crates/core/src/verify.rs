//! Verification records shared by every checking routine.

use std::fmt;

/// Outcome of one named numeric check.
///
/// `max_deviation` is always already scaled, so the check passes iff
/// `max_deviation <= tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub detail: Option<String>,
}

impl Check {
    pub fn from_deviation(name: impl Into<String>, max_deviation: f64, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            // NaN deviations fail.
            passed: max_deviation <= tolerance,
            max_deviation,
            tolerance,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Check {
        self.detail = Some(detail.into());
        self
    }

    pub fn verdict(&self) -> &'static str {
        if self.passed {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {:.3e}", self.verdict(), self.name, self.max_deviation)?;
        if let Some(d) = &self.detail {
            write!(f, " ({})", d)?;
        }
        Ok(())
    }
}

/// Tracks the running maximum of scaled deviations.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct MaxDeviation(pub f64);

impl MaxDeviation {
    /// Records `|value| / (1 + scale)`.
    pub fn record(&mut self, value: f64, scale: f64) {
        let d = value.abs() / (1.0 + scale.abs());
        if d > self.0 || d.is_nan() {
            self.0 = d;
        }
    }
}
