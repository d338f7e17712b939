//! Side-by-side comparison of run reports.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use super::experiment::{RunReport, Summary, METRICS};
use super::output::{fmt_f64, Table};

#[derive(Debug, Error, PartialEq)]
pub enum CompareError {
    #[error("need at least two reports, got {0}")]
    TooFew(usize),
    #[error("report {index} ({policy}) differs from report 0 in {what}")]
    Mismatch { index: usize, policy: String, what: &'static str },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub policy: String,
    pub stats: BTreeMap<String, Summary>,
    /// Mean minus the first report's mean, per metric.
    pub difference: BTreeMap<String, f64>,
    pub optimality_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub scenario: String,
    pub seed: u64,
    pub rows: Vec<ComparisonRow>,
}

/// Aligns reports that share a scenario and seed.
pub fn compare(reports: &[RunReport]) -> Result<Comparison, CompareError> {
    if reports.len() < 2 {
        return Err(CompareError::TooFew(reports.len()));
    }
    let first = &reports[0];
    for (index, r) in reports.iter().enumerate().skip(1) {
        let what = if r.scenario != first.scenario {
            "scenario"
        } else if r.seed != first.seed {
            "seed"
        } else if r.episodes.len() != first.episodes.len() {
            "episode count"
        } else {
            continue;
        };
        return Err(CompareError::Mismatch { index, policy: r.policy.clone(), what });
    }
    let rows = reports
        .iter()
        .map(|r| ComparisonRow {
            policy: r.policy.clone(),
            stats: r.summary.clone(),
            difference: METRICS.iter().map(|&m| (m.to_string(), r.summary[m].mean - first.summary[m].mean)).collect(),
            optimality_gap: r.optimality_gap,
        })
        .collect();
    Ok(Comparison { scenario: first.scenario.name.clone(), seed: first.seed, rows })
}

impl Comparison {
    pub fn table(&self) -> Table {
        let mut header = vec!["policy".to_string()];
        for m in METRICS {
            header.extend([format!("{m}_mean"), format!("{m}_sd"), format!("{m}_difference")]);
        }
        header.push("optimality_gap".into());
        let mut t = Table::new(header);
        for r in &self.rows {
            let mut row = vec![r.policy.clone()];
            for m in METRICS {
                let s = r.stats[m];
                row.extend([fmt_f64(s.mean), fmt_f64(s.sd), fmt_f64(r.difference[m])]);
            }
            row.push(r.optimality_gap.map(fmt_f64).unwrap_or_default());
            t.push(row);
        }
        t
    }

    /// Column-aligned `mean ± sd` text for terminals.
    pub fn render(&self) -> String {
        let mut cells = vec![std::iter::once("policy".to_string())
            .chain(METRICS.iter().map(|m| m.to_string()))
            .chain(["gap".into()])
            .collect::<Vec<_>>()];
        for r in &self.rows {
            let mut line = vec![r.policy.clone()];
            line.extend(METRICS.iter().map(|&m| format!("{:.4} ± {:.4}", r.stats[m].mean, r.stats[m].sd)));
            line.push(r.optimality_gap.map_or("-".into(), |g| format!("{g:.4}")));
            cells.push(line);
        }
        let widths: Vec<usize> = (0..cells[0].len()).map(|j| cells.iter().map(|l| l[j].chars().count()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for line in cells {
            let padded: Vec<String> = line.iter().zip(&widths).map(|(c, &w)| format!("{c:<w$}")).collect();
            out.push_str(padded.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}
