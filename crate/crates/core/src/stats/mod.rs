//! Trial records, per-level aggregation and reports.
//!
//! Single-individual agents (language models, baselines) pool all their
//! trials of a level into one proportion. Populations of individuals
//! (children, competition entrants) get one proportion per individual and
//! are summarised by median and quartiles.

mod report;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use crate::arena::level_from_task_id;

pub use report::{emit_report, write_report, ReportFormat};

pub const RECORDS_VERSION: &str = "arenabench-records/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Population {
    Llm,
    Child,
    Competition,
    Baseline,
}

impl Population {
    pub fn as_str(self) -> &'static str {
        match self {
            Population::Llm => "llm",
            Population::Child => "child",
            Population::Competition => "competition",
            Population::Baseline => "baseline",
        }
    }

    /// Whether records of this kind come from many distinct individuals.
    pub fn is_population(self) -> bool {
        matches!(self, Population::Child | Population::Competition)
    }
}

impl fmt::Display for Population {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Population {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "llm" => Ok(Population::Llm),
            "child" => Ok(Population::Child),
            "competition" => Ok(Population::Competition),
            "baseline" => Ok(Population::Baseline),
            other => Err(format!("unknown population `{other}`")),
        }
    }
}

/// One agent's attempt at one task. Columns after `passed` are optional in
/// the interchange CSV so external studies can supply just the outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    #[serde(rename = "participant_id")]
    pub agent_id: String,
    pub population: Population,
    pub task_id: String,
    pub passed: bool,
    pub level: Option<u8>,
    pub trial_index: Option<u32>,
    pub final_reward: Option<f64>,
    pub scripts_used: Option<u32>,
    pub steps_used: Option<u32>,
    pub termination: Option<String>,
    pub relaunches: Option<u32>,
    pub trace_hash: Option<String>,
    pub transcript_ref: Option<String>,
}

impl TrialRecord {
    pub fn new(agent_id: &str, population: Population, task_id: &str, passed: bool) -> Self {
        Self {
            agent_id: agent_id.into(),
            population,
            task_id: task_id.into(),
            passed,
            level: level_from_task_id(task_id),
            trial_index: None,
            final_reward: None,
            scripts_used: None,
            steps_used: None,
            termination: None,
            relaunches: None,
            trace_hash: None,
            transcript_ref: None,
        }
    }

    pub fn level(&self) -> Option<u8> {
        self.level.or_else(|| level_from_task_id(&self.task_id))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("schema error at row {row}: {message}")]
    Schema { row: usize, message: String },
    #[error("summary would pool populations {0} and {1}")]
    MixedPopulation(Population, Population),
    #[error("no records to aggregate")]
    Empty,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: u8,
    pub population: Population,
    /// The agent for single-individual summaries, empty for populations.
    pub agent_id: String,
    pub n_trials: usize,
    pub n_passed: usize,
    pub proportion_passed: f64,
    pub n_individuals: usize,
    pub per_individual: Vec<f64>,
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
}

/// Quantile by linear interpolation between order statistics, inclusive of
/// the extremes: position `p * (n - 1)` in the sorted sample.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Groups records by `(population, agent)` for single individuals or by
/// population alone, then summarises per level.
pub fn aggregate(records: &[TrialRecord]) -> Result<Vec<LevelSummary>, StatsError> {
    if records.is_empty() {
        return Err(StatsError::Empty);
    }
    // group key: (population, agent or "", level)
    let mut groups: BTreeMap<(Population, String, u8), Vec<&TrialRecord>> = BTreeMap::new();
    for (row, r) in records.iter().enumerate() {
        let level = r.level().ok_or_else(|| StatsError::Schema {
            row: row + 1,
            message: format!("cannot derive level from task `{}`", r.task_id),
        })?;
        let who = if r.population.is_population() {
            String::new()
        } else {
            r.agent_id.clone()
        };
        groups.entry((r.population, who, level)).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((population, agent_id, level), rs) in groups {
        out.push(summarise(population, agent_id, level, &rs)?);
    }
    Ok(out)
}

/// Summary of one group; every record must carry `population`.
pub fn summarise(
    population: Population,
    agent_id: String,
    level: u8,
    records: &[&TrialRecord],
) -> Result<LevelSummary, StatsError> {
    if let Some(r) = records.iter().find(|r| r.population != population) {
        return Err(StatsError::MixedPopulation(population, r.population));
    }
    let n_trials = records.len();
    let n_passed = records.iter().filter(|r| r.passed).count();
    let proportion_passed = n_passed as f64 / n_trials as f64;
    let mut s = LevelSummary {
        level,
        population,
        agent_id,
        n_trials,
        n_passed,
        proportion_passed,
        n_individuals: 1,
        per_individual: Vec::new(),
        median: None,
        q1: None,
        q3: None,
    };
    if population.is_population() {
        let mut per: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for r in records {
            let e = per.entry(r.agent_id.as_str()).or_default();
            e.0 += r.passed as usize;
            e.1 += 1;
        }
        let mut props: Vec<f64> = per.values().map(|(p, n)| *p as f64 / *n as f64).collect();
        props.sort_by(|a, b| a.partial_cmp(b).expect("proportions are finite"));
        s.n_individuals = props.len();
        s.median = Some(quantile(&props, 0.5));
        s.q1 = Some(quantile(&props, 0.25));
        s.q3 = Some(quantile(&props, 0.75));
        s.per_individual = props;
    }
    Ok(s)
}

const REQUIRED: [&str; 4] = ["participant_id", "population", "task_id", "passed"];

/// Reads interchange CSV. Row numbers in errors count the header as row 1.
pub fn ingest_external_csv<R: Read>(reader: R) -> Result<Vec<TrialRecord>, StatsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| StatsError::Schema {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    for col in REQUIRED {
        if !headers.iter().any(|h| h == col) {
            return Err(StatsError::Schema {
                row: 1,
                message: format!("missing column `{col}`"),
            });
        }
    }
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<TrialRecord>().enumerate() {
        let row_no = i + 2;
        let mut r = row.map_err(|e| StatsError::Schema {
            row: row_no,
            message: e.to_string(),
        })?;
        let derived = level_from_task_id(&r.task_id);
        match (r.level, derived) {
            (Some(l), Some(d)) if l != d => {
                return Err(StatsError::Schema {
                    row: row_no,
                    message: format!("level {l} contradicts task id `{}`", r.task_id),
                })
            }
            (Some(l), _) if !(1..=10).contains(&l) => {
                return Err(StatsError::Schema {
                    row: row_no,
                    message: format!("level {l} outside 1..=10"),
                })
            }
            (None, None) => {
                return Err(StatsError::Schema {
                    row: row_no,
                    message: format!("cannot derive level from task `{}`", r.task_id),
                })
            }
            (None, d) => r.level = d,
            _ => {}
        }
        out.push(r);
    }
    Ok(out)
}

/// Writes records in the interchange CSV schema.
pub fn export_csv<W: std::io::Write>(records: &[TrialRecord], w: W) -> Result<(), StatsError> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in records {
        wtr.serialize(r).map_err(|e| StatsError::Io(std::io::Error::other(e)))?;
    }
    if records.is_empty() {
        wtr.write_record(record_columns())
            .map_err(|e| StatsError::Io(std::io::Error::other(e)))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn record_columns() -> [&'static str; 13] {
    [
        "participant_id",
        "population",
        "task_id",
        "passed",
        "level",
        "trial_index",
        "final_reward",
        "scripts_used",
        "steps_used",
        "termination",
        "relaunches",
        "trace_hash",
        "transcript_ref",
    ]
}

/// Loads every `records.csv` under `dir` (non-recursive) or the file itself.
pub fn load_records(path: &std::path::Path) -> Result<Vec<TrialRecord>, StatsError> {
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        let mut out = Vec::new();
        for f in files {
            out.extend(ingest_external_csv(std::fs::File::open(f)?)?);
        }
        Ok(out)
    } else {
        ingest_external_csv(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(agent: &str, pop: Population, task: &str, passed: bool) -> TrialRecord {
        TrialRecord::new(agent, pop, task, passed)
    }

    #[test]
    fn pooled_proportion() {
        let rs: Vec<_> = (0..12)
            .map(|i| rec("m", Population::Llm, &format!("l01_task{}", i % 4 + 1), i < 7))
            .collect();
        let s = aggregate(&rs).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].n_trials, 12);
        assert_eq!(s[0].proportion_passed, 7.0 / 12.0);
        assert!(s[0].q1.is_none());
    }

    #[test]
    fn quartiles_of_three_individuals() {
        // Per-individual proportions 1/4, 2/4, 4/4 over four trials each.
        let mut rs = Vec::new();
        for (who, wins) in [("a", 1), ("b", 2), ("c", 4)] {
            for t in 0..4 {
                rs.push(rec(who, Population::Child, &format!("l02_task{}", t + 1), t < wins));
            }
        }
        let s = &aggregate(&rs).unwrap()[0];
        assert_eq!(s.per_individual, vec![0.25, 0.5, 1.0]);
        assert!((s.q1.unwrap() - 0.375).abs() < 1e-12);
        assert!((s.q3.unwrap() - 0.75).abs() < 1e-12);
        assert_eq!(s.median, Some(0.5));
    }

    #[test]
    fn all_failed() {
        let rs: Vec<_> = (0..6)
            .map(|i| rec(&format!("p{i}"), Population::Competition, "l03_task1", false))
            .collect();
        let s = &aggregate(&rs).unwrap()[0];
        assert_eq!(s.proportion_passed, 0.0);
        assert_eq!((s.q1, s.q3), (Some(0.0), Some(0.0)));
    }

    #[test]
    fn mixed_population_is_rejected() {
        let a = rec("x", Population::Child, "l01_task1", true);
        let b = rec("y", Population::Llm, "l01_task1", true);
        assert!(matches!(
            summarise(Population::Child, String::new(), 1, &[&a, &b]),
            Err(StatsError::MixedPopulation(..))
        ));
    }

    #[test]
    fn csv_ingest() {
        let text = "participant_id,population,task_id,passed\nc1,child,l01_task1,true\nc2,child,l10_task4,false\n";
        let rs = ingest_external_csv(text.as_bytes()).unwrap();
        assert_eq!(rs.len(), 2);
        assert_eq!(rs[1].level, Some(10));

        let bad = "participant_id,population,task_id,passed\nc1,alien,l01_task1,true\n";
        assert!(matches!(
            ingest_external_csv(bad.as_bytes()),
            Err(StatsError::Schema { row: 2, .. })
        ));
        let missing = "participant_id,task_id,passed\nc1,l01_task1,true\n";
        assert!(matches!(
            ingest_external_csv(missing.as_bytes()),
            Err(StatsError::Schema { row: 1, .. })
        ));
    }

    #[test]
    fn export_then_ingest() {
        let mut r = rec("m", Population::Baseline, "l04_task2", true);
        r.trial_index = Some(2);
        r.final_reward = Some(0.8125);
        r.trace_hash = Some("ab".into());
        let rs = vec![r, rec("n", Population::Llm, "l05_task1", false)];
        let mut buf = Vec::new();
        export_csv(&rs, &mut buf).unwrap();
        let back = ingest_external_csv(buf.as_slice()).unwrap();
        let mut expected = rs.clone();
        expected[1].level = Some(5);
        assert_eq!(back, expected);
    }
}
