use std::fmt::Write as _;
use std::str::FromStr;

use super::{LevelSummary, Population, StatsError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    /// Aligned plain-text table for reading.
    Table,
    /// CSV for plotting tools.
    Data,
}

impl FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "data" => Ok(ReportFormat::Data),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

const COLUMNS: [&str; 10] = [
    "level",
    "population",
    "agent_id",
    "n_trials",
    "n_passed",
    "proportion_passed",
    "n_individuals",
    "median",
    "q1",
    "q3",
];

const CHILD_NOTE: &str = "\nnote: child rows from `serve --human` sessions were played by submitting \
scripts, as machine agents do; external study data may come from frame-by-frame control.\n";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn row(s: &LevelSummary) -> [String; 10] {
    [
        s.level.to_string(),
        s.population.to_string(),
        s.agent_id.clone(),
        s.n_trials.to_string(),
        s.n_passed.to_string(),
        format!("{:.6}", s.proportion_passed),
        s.n_individuals.to_string(),
        opt(s.median),
        opt(s.q1),
        opt(s.q3),
    ]
}

/// Renders summaries in a fixed order (level, population, agent) so the
/// output depends only on the input set.
pub fn emit_report(summaries: &[LevelSummary], format: ReportFormat) -> String {
    let mut sorted: Vec<&LevelSummary> = summaries.iter().collect();
    sorted.sort_by(|a, b| {
        (a.level, a.population, &a.agent_id).cmp(&(b.level, b.population, &b.agent_id))
    });
    let rows: Vec<[String; 10]> = sorted.iter().map(|s| row(s)).collect();
    match format {
        ReportFormat::Data => {
            let mut out = COLUMNS.join(",");
            out.push('\n');
            for r in &rows {
                let cells: Vec<String> = r
                    .iter()
                    .map(|c| {
                        if c.contains([',', '"', '\n']) {
                            format!("\"{}\"", c.replace('"', "\"\""))
                        } else {
                            c.clone()
                        }
                    })
                    .collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
            out
        }
        ReportFormat::Table => {
            let mut widths: Vec<usize> = COLUMNS.iter().map(|c| c.len()).collect();
            for r in &rows {
                for (w, c) in widths.iter_mut().zip(r) {
                    *w = (*w).max(c.len());
                }
            }
            let mut out = String::new();
            let line = |cells: Vec<&str>, out: &mut String| {
                let padded: Vec<String> = cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:<w$}"))
                    .collect();
                let _ = writeln!(out, "{}", padded.join("  ").trim_end());
            };
            line(COLUMNS.to_vec(), &mut out);
            for r in &rows {
                line(r.iter().map(String::as_str).collect(), &mut out);
            }
            if sorted.iter().any(|s| s.population == Population::Child) {
                out.push_str(CHILD_NOTE);
            }
            out
        }
    }
}

pub fn write_report(
    summaries: &[LevelSummary],
    format: ReportFormat,
    path: &std::path::Path,
) -> Result<(), StatsError> {
    std::fs::write(path, emit_report(summaries, format))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{aggregate, TrialRecord};

    #[test]
    fn child_rows_carry_the_control_note() {
        let rs = vec![TrialRecord::new("c1", Population::Child, "l01_task1", true)];
        let s = aggregate(&rs).unwrap();
        assert!(emit_report(&s, ReportFormat::Table).ends_with(CHILD_NOTE));
        assert!(!emit_report(&s, ReportFormat::Data).contains("note"));
    }

    #[test]
    fn empty_is_header_only() {
        for f in [ReportFormat::Table, ReportFormat::Data] {
            assert_eq!(emit_report(&[], f).lines().count(), 1);
        }
    }

    #[test]
    fn one_row_per_level_and_population() {
        let mut rs = Vec::new();
        for t in 1..=4 {
            rs.push(TrialRecord::new("m", Population::Llm, &format!("l01_task{t}"), t % 2 == 0));
            rs.push(TrialRecord::new(&format!("c{t}"), Population::Child, &format!("l01_task{t}"), true));
        }
        let s = aggregate(&rs).unwrap();
        let data = emit_report(&s, ReportFormat::Data);
        assert_eq!(data.lines().count(), 3);
        assert!(data.contains("1,llm,m,4,2,0.500000,1,,,"));
        assert!(data.contains("1,child,,4,4,1.000000,4,1.000000,1.000000,1.000000"));
        let reversed: Vec<_> = s.iter().rev().cloned().collect();
        assert_eq!(emit_report(&reversed, ReportFormat::Table), emit_report(&s, ReportFormat::Table));
    }
}
