use std::fmt::Write as _;
use std::path::Path;

use crate::apps::AdaptationRecord;

use super::scenario::ExperimentReport;
use super::WorkloadError;

pub const REPORT_HEADER: [&str; 14] = [
    "cell",
    "seed",
    "method",
    "m",
    "events",
    "matches",
    "mean_ms",
    "median_ms",
    "p99_ms",
    "throughput_eps",
    "redirects",
    "utilization",
    "policy_share",
    "decisions",
];

fn csv_err(e: csv::Error) -> WorkloadError {
    WorkloadError::Io(std::io::Error::other(e))
}

fn row(r: &ExperimentReport) -> Vec<String> {
    let join = |xs: &[f64]| xs.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(";");
    vec![
        r.cell.clone(),
        r.seed.to_string(),
        r.method.label().to_string(),
        r.m.to_string(),
        r.events.to_string(),
        r.matches.to_string(),
        format!("{:.4}", r.mean_ms),
        format!("{:.4}", r.median_ms),
        format!("{:.4}", r.p99_ms),
        format!("{:.4}", r.throughput),
        r.redirects.to_string(),
        join(&r.utilization),
        join(&r.policy_share),
        (r.trace.len() / 3).to_string(),
    ]
}

/// One row per report.
pub fn write_report_csv(path: &Path, reports: &[ExperimentReport]) -> Result<(), WorkloadError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(REPORT_HEADER).map_err(csv_err)?;
    for r in reports {
        w.write_record(row(r)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Every adaptation decision of every report, in report order.
pub fn write_trace_csv(path: &Path, reports: &[ExperimentReport]) -> Result<(), WorkloadError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(AdaptationRecord::CSV_HEADER.split(',')).map_err(csv_err)?;
    for rec in reports.iter().flat_map(|r| &r.trace) {
        w.write_record(rec.to_string().split(',')).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-width table of the headline metrics.
pub fn summary_table(reports: &[ExperimentReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<14} {:<6} {:>8} {:>11} {:>11} {:>11} {:>12} {:>9}",
        "cell", "method", "events", "mean_ms", "median_ms", "p99_ms", "throughput", "redirects"
    );
    for r in reports {
        let cell = if r.cell.is_empty() { "-" } else { r.cell.as_str() };
        let _ = writeln!(
            s,
            "{:<14} {:<6} {:>8} {:>11.3} {:>11.3} {:>11.3} {:>12.2} {:>9}",
            cell,
            r.method.label(),
            r.events,
            r.mean_ms,
            r.median_ms,
            r.p99_ms,
            r.throughput,
            r.redirects
        );
    }
    s
}
