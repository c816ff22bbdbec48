//! Reporting for the acceptance run.

use std::time::{Duration, Instant};

/// One criterion outcome.
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// Collects criterion lines and the overall verdict.
#[derive(Default)]
pub struct Report {
    failed: Vec<String>,
}

impl Report {
    /// Runs `body`, enforces `budget` on its wall time and prints one line.
    pub fn run<F>(&mut self, id: &str, name: &str, budget: Duration, body: F)
    where
        F: FnOnce() -> Result<Outcome, String>,
    {
        let start = Instant::now();
        let result = body();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let timing = format!(
            "{:.3} s of {:.3} s",
            elapsed.as_secs_f64(),
            budget.as_secs_f64()
        );
        let over = if elapsed > budget {
            " (over time budget)"
        } else {
            ""
        };
        println!(
            "{} {id} {name}: {detail}; {timing}{over}",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            self.failed.push(id.to_string());
        }
    }

    pub fn failed(&self) -> &[String] {
        &self.failed
    }
}
