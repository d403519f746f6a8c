use std::str::FromStr;

use thiserror::Error;

use super::EvalReport;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown report format {0:?} (expected json, csv or md)")]
    UnknownFormat(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = ReportError;
    fn from_str(s: &str) -> Result<Self, ReportError> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            _ => Err(ReportError::UnknownFormat(s.to_string())),
        }
    }
}

pub const CSV_HEADER: [&str; 11] = [
    "tier", "config", "trial", "seed", "template", "success", "failure", "votes_won", "votes", "mean_coverage", "codes",
];

/// One report in the requested format.
pub fn emit_report(report: &EvalReport, format: ReportFormat) -> Result<String, ReportError> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        _ => emit_reports(std::slice::from_ref(report), format),
    }
}

/// Several reports: a JSON array, one CSV row per trial, or one markdown
/// table row per report.
pub fn emit_reports(reports: &[EvalReport], format: ReportFormat) -> Result<String, ReportError> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(reports)? + "\n"),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER)?;
            for r in reports {
                for t in &r.trials {
                    let won = t.votes.iter().filter(|v| v.success).count();
                    let cov = t.votes.iter().map(|v| v.coverage).sum::<f64>() / t.votes.len().max(1) as f64;
                    let codes = t.votes.iter().map(|v| v.code.as_str()).collect::<Vec<_>>().join(" | ");
                    w.write_record([
                        r.tier.to_string(),
                        r.config.ablations.label(),
                        t.trial.to_string(),
                        t.seed.to_string(),
                        t.template.clone().unwrap_or_default(),
                        t.success.to_string(),
                        t.failure.map(|f| f.to_string()).unwrap_or_default(),
                        won.to_string(),
                        t.votes.len().to_string(),
                        format!("{cov:.4}"),
                        codes,
                    ])?;
                }
            }
            let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::Markdown => {
            let mut s = String::from("| Tier | Scenes | Config | Success | Rate | Failures |\n");
            s += "|---|---|---|---|---|---|\n";
            for r in reports {
                let rate = r.success_rate.map_or("n/a".to_string(), |x| format!("{:.1}%", 100.0 * x));
                let fails = if r.failure_counts.is_empty() {
                    "-".to_string()
                } else {
                    r.failure_counts.iter().map(|(k, v)| format!("{k} {v}")).collect::<Vec<_>>().join(", ")
                };
                s += &format!(
                    "| {} | {} | {} | {}/{} | {} | {} |\n",
                    r.tier,
                    r.tier.description(),
                    r.config.ablations.label(),
                    r.successes,
                    r.trials.len(),
                    rate,
                    fails
                );
            }
            Ok(s)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_tier, EvalConfig, Tier};

    fn small() -> EvalReport {
        let cfg = EvalConfig { votes: 1, ..Default::default() };
        run_tier(Tier::C3, 2, 4, &cfg)
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let r = small();
        let a = emit_report(&r, ReportFormat::Json).unwrap();
        let back: EvalReport = serde_json::from_str(&a).unwrap();
        assert_eq!(emit_report(&back, ReportFormat::Json).unwrap(), a);
    }

    #[test]
    fn csv_header_is_fixed() {
        let out = emit_report(&small(), ReportFormat::Csv).unwrap();
        assert_eq!(out.lines().next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(out.lines().count(), 3);
    }

    #[test]
    fn markdown_has_one_row_per_report() {
        let cfg = EvalConfig { votes: 1, ..Default::default() };
        let reports: Vec<EvalReport> = [Tier::C1, Tier::C2, Tier::C3].iter().map(|t| run_tier(*t, 0, 1, &cfg)).collect();
        let md = emit_reports(&reports, ReportFormat::Markdown).unwrap();
        assert_eq!(md.lines().count(), 2 + 3);
        assert!(md.contains("n/a"));
    }

    #[test]
    fn unknown_format_is_an_error() {
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
