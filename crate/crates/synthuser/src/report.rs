//! Report files and the plain-text summary.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use synthuser_core::play::AgentStatus;
use synthuser_core::SimulationReport;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report file: {0}")]
    Io(#[from] io::Error),
    #[error("report file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Pretty-printed JSON with a trailing newline. Identical reports give
/// identical bytes.
pub fn report_to_string(report: &SimulationReport) -> Result<String, ReportError> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

pub fn write_report(report: &SimulationReport, path: &Path) -> Result<(), ReportError> {
    fs::write(path, report_to_string(report)?)?;
    Ok(())
}

pub fn load_report(path: &Path) -> Result<SimulationReport, ReportError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn status_text(status: &AgentStatus) -> String {
    match status {
        AgentStatus::MaxSteps => "max_steps".into(),
        AgentStatus::TraceComplete => "trace_complete".into(),
        AgentStatus::Halted { error } => format!("halted ({error})"),
        AgentStatus::StoppedOnViolation => "stopped_on_violation".into(),
        AgentStatus::Stopped => "stopped".into(),
        AgentStatus::BootstrapFailed { error } => format!("bootstrap_failed ({error})"),
    }
}

/// Human-readable digest: totals, one row per agent, every violation and
/// runtime error, then state-action coverage.
pub fn summarize(report: &SimulationReport) -> String {
    let t = &report.totals;
    let mut out = String::new();
    let _ = writeln!(out, "seed: {}", report.master_seed);
    let _ = writeln!(out, "agents: {}", t.agents);
    let _ = writeln!(out, "steps: {}", t.steps);
    let _ = writeln!(out, "violations: {}", t.violations);
    let _ = writeln!(out, "runtime errors: {}", t.runtime_errors);
    let _ = writeln!(out, "rejected requests: {}", t.rejected);
    let _ = writeln!(out, "off-model rate: {:.4}", report.off_model_rate());
    let _ = writeln!(out, "coverage: {} state-action pairs", report.coverage.len());
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<6} {:<10} {:>6} {:>10} {:>14} {:>9}  status",
        "agent", "kind", "steps", "violations", "runtime_errors", "off_model"
    );
    for a in &report.agents {
        let violations = a.steps.iter().filter(|s| s.is_violation()).count();
        let errors = a.steps.iter().filter(|s| s.runtime_error.is_some()).count();
        let off = a.steps.iter().filter(|s| s.off_model).count();
        let kind = serde_json::to_value(a.kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{:<6} {:<10} {:>6} {:>10} {:>14} {:>9}  {}",
            a.agent,
            kind,
            a.steps.len(),
            violations,
            errors,
            off,
            status_text(&a.status)
        );
    }
    if !report.violations.is_empty() {
        let _ = writeln!(out);
        for v in &report.violations {
            let expected = v
                .expected
                .iter()
                .map(|(view, p)| format!("{view}={p:.3}"))
                .collect::<Vec<_>>()
                .join(", ");
            let mode = v.expected_mode.map(|m| m.to_string()).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "violation: agent {} step {} in {} after `{}`: expected {} ({}), observed {}",
                v.agent, v.step, v.state, v.action, mode, expected, v.observed
            );
        }
    }
    if !report.runtime_errors.is_empty() {
        let _ = writeln!(out);
        for e in &report.runtime_errors {
            let _ = writeln!(
                out,
                "runtime error: agent {} step {} in {} after `{}`: {}",
                e.agent, e.step, e.state, e.action, e.error
            );
        }
    }
    if !report.coverage.is_empty() {
        let _ = writeln!(out);
        for c in &report.coverage {
            let _ = writeln!(out, "  {:>6}  {:<10} {} {}", c.count, c.state, c.kind, c.component);
        }
    }
    out
}
