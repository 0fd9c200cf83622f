//! Run files, replay verification and table rendering.
//!
//! A run file is pretty-printed JSON holding one [`ExperimentResult`] plus a
//! schema version and timestamps. Circuits inside it are stored as DSL text.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::circuit::Circuit;
use crate::eval::Evaluator;
use crate::optimizer::{ExperimentResult, OptimizerConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Recorded and recomputed scores must agree to this tolerance.
pub const REPLAY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLogFile {
    pub schema_version: u32,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub experiment: ExperimentResult,
}

impl RunLogFile {
    pub fn new(
        experiment: ExperimentResult,
        started_at: DateTime<Utc>,
        finished_at: DateTime<Utc>,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            started_at,
            finished_at,
            experiment,
        }
    }

    /// `"{proposer} seed {seed}"`, used as the default table row label.
    pub fn label(&self) -> String {
        format!(
            "{} seed {}",
            self.experiment.proposer_id, self.experiment.config.seed
        )
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed run file: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: schema version {found} is not supported (expected {expected})")]
    SchemaVersion {
        path: PathBuf,
        found: u64,
        expected: u32,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `run` to `path` through a sibling temp file and a rename, so
/// readers never see a partial file.
pub fn write_run(path: &Path, run: &RunLogFile) -> Result<(), StoreError> {
    let text = serde_json::to_string_pretty(run).map_err(|source| StoreError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let file_name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    let tmp = dir.join(format!(".{file_name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.write_all(b"\n")?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io_err(path))
}

pub fn read_run(path: &Path) -> Result<RunLogFile, StoreError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_run(&text, path)
}

/// Parses run file text; `path` only labels errors.
pub fn parse_run(text: &str, path: &Path) -> Result<RunLogFile, StoreError> {
    let json_err = |source| StoreError::Json {
        path: path.to_path_buf(),
        source,
    };
    let value: serde_json::Value = serde_json::from_str(text).map_err(json_err)?;
    // Check the version before the body so that a future layout reports the
    // version rather than whatever field failed first.
    let found = value.get("schema_version").and_then(|v| v.as_u64());
    match found {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(StoreError::SchemaVersion {
                path: path.to_path_buf(),
                found: v,
                expected: SCHEMA_VERSION,
            })
        }
        None => {
            return Err(StoreError::Json {
                path: path.to_path_buf(),
                source: <serde_json::Error as serde::de::Error>::missing_field("schema_version"),
            })
        }
    }
    serde_json::from_value(value).map_err(json_err)
}

/// `run-<first 16 hex digits of sha256(config json)>.json`.
pub fn run_file_name(config: &OptimizerConfig) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    let digest = Sha256::digest(&json);
    let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    format!("run-{hex}.json")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mismatch {
    pub location: String,
    pub recorded: f64,
    /// `None` when the stored circuit could not be evaluated.
    pub recomputed: Option<f64>,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.recomputed {
            Some(r) => write!(
                f,
                "{}: recorded {} but recomputed {}",
                self.location, self.recorded, r
            ),
            None => write!(
                f,
                "{}: recorded {} but the circuit does not evaluate",
                self.location, self.recorded
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReplayReport {
    pub checked: usize,
    pub mismatches: Vec<Mismatch>,
}

impl ReplayReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Re-evaluates every circuit stored in the run and compares it with the
/// recorded score.
pub fn replay_verify<E: Evaluator + ?Sized>(run: &RunLogFile, evaluator: &mut E) -> ReplayReport {
    let mut report = ReplayReport::default();
    let mut check = |location: String, circuit: &Circuit, recorded: f64| {
        report.checked += 1;
        let recomputed = evaluator.evaluate(circuit).ok();
        let agrees = recomputed.is_some_and(|r| (r - recorded).abs() <= REPLAY_TOLERANCE);
        if !agrees {
            report.mismatches.push(Mismatch {
                location,
                recorded,
                recomputed,
            });
        }
    };
    let exp = &run.experiment;
    check("initial".into(), &exp.initial_circuit, exp.initial_q);
    for query in &exp.queries {
        let qi = query.query_index + 1;
        check(
            format!("query {qi} start"),
            &query.start_circuit,
            query.start_q,
        );
        check(
            format!("query {qi} best"),
            &query.best_circuit,
            query.best_q,
        );
        for step in &query.steps {
            if let (Some(c), Some(q)) = (&step.circuit, step.q) {
                check(format!("query {qi} step {}", step.step_index + 1), c, q);
            }
        }
    }
    check("best".into(), &exp.best_circuit, exp.best_q);
    report
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Improved {
        from: f64,
        to: f64,
    },
    NoImprovement,
    Done,
    /// Query never ran and the run did not stop early.
    Missing,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Improved { from, to } => {
                write!(f, "{}→{}", two_decimals(*from), two_decimals(*to))
            }
            Cell::NoImprovement => f.write_str("no improv."),
            Cell::Done => f.write_str("done"),
            Cell::Missing => f.write_str("-"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub label: String,
    pub initial_q: f64,
    pub cells: Vec<Cell>,
}

impl TableRow {
    /// Initial q followed by the query cells, separated by `" | "`.
    pub fn render(&self) -> String {
        let mut parts = vec![two_decimals(self.initial_q)];
        parts.extend(self.cells.iter().map(Cell::to_string));
        parts.join(" | ")
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TableSpec {
    pub rows: Vec<TableRow>,
}

impl TableSpec {
    pub fn num_queries(&self) -> usize {
        self.rows.iter().map(|r| r.cells.len()).max().unwrap_or(0)
    }

    pub fn render(&self) -> String {
        if self.rows.is_empty() {
            return String::new();
        }
        let mut header = vec!["run".to_string(), "initial".to_string()];
        header.extend((1..=self.num_queries()).map(|k| format!("query {k}")));
        let mut out = header.join(" | ");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.label);
            out.push_str(" | ");
            out.push_str(&row.render());
            out.push('\n');
        }
        out
    }
}

/// Two decimals with trailing zeros trimmed: 0.5 → "0.5", 1.0 → "1".
pub fn two_decimals(x: f64) -> String {
    let s = format!("{x:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

pub fn render_table(runs: &[RunLogFile]) -> TableSpec {
    let width = runs
        .iter()
        .map(|r| r.experiment.config.queries)
        .max()
        .unwrap_or(0);
    let rows = runs
        .iter()
        .map(|run| {
            let exp = &run.experiment;
            let mut cells: Vec<Cell> = exp
                .queries
                .iter()
                .map(|q| {
                    if q.improved() {
                        Cell::Improved {
                            from: q.start_q,
                            to: q.best_q,
                        }
                    } else {
                        Cell::NoImprovement
                    }
                })
                .collect();
            let filler = if exp.early_stopped {
                Cell::Done
            } else {
                Cell::Missing
            };
            cells.resize(width.max(cells.len()), filler);
            TableRow {
                label: run.label(),
                initial_q: exp.initial_q,
                cells,
            }
        })
        .collect();
    TableSpec { rows }
}
