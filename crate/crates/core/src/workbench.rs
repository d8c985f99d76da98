//! Outline persistence next to source files and the corpus evaluation
//! harness.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gateway::Backend;
use crate::generation::{generate_outline_with, GenerationError, IssueLevel, PromptConfig, RequestOptions, Technique};
use crate::outline::{validate, Outline, OutlineStatement, Violation};
use crate::source::{LanguageProfile, SourceError, SourceUnit};

pub const SIDECAR_SCHEMA: &str = "nlo.sidecar";
/// Version 1 hashes code with SHA-256.
pub const SIDECAR_VERSION: u32 = 1;
pub const SIDECAR_SUFFIX: &str = ".nlo.json";

#[derive(Debug, Error)]
pub enum SidecarError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: not a sidecar record: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("{path}: unsupported sidecar version {found}")]
    Version { path: PathBuf, found: u32 },
    #[error("outline does not fit the code: {0:?}")]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Source(#[from] SourceError),
}

/// SHA-256 of the code as written to disk by [`SourceUnit::to_text`].
pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SidecarRecord {
    pub schema: String,
    pub version: u32,
    pub source_path: String,
    pub content_hash: String,
    pub profile: LanguageProfile,
    pub statements: Vec<OutlineStatement>,
    /// The code the statements were written against.
    pub code: Vec<String>,
}

impl SidecarRecord {
    pub fn outline(&self) -> Outline {
        Outline::new(self.statements.clone())
    }

    pub fn unit(&self) -> Result<SourceUnit, SourceError> {
        SourceUnit::new(self.code.clone(), self.profile.clone())
    }
}

pub fn sidecar_path(source: &Path) -> PathBuf {
    let mut name = source.as_os_str().to_owned();
    name.push(SIDECAR_SUFFIX);
    PathBuf::from(name)
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SidecarError + '_ {
    move |source| SidecarError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the outline of the code at `source` to `<source>.nlo.json`.
pub fn sidecar_write(unit: &SourceUnit, outline: &Outline, source: &Path) -> Result<SidecarRecord, SidecarError> {
    let violations = validate(outline, unit);
    if !violations.is_empty() {
        return Err(SidecarError::Invalid(violations));
    }
    let record = SidecarRecord {
        schema: SIDECAR_SCHEMA.to_string(),
        version: SIDECAR_VERSION,
        source_path: source.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        content_hash: content_hash(&unit.to_text()),
        profile: unit.profile().clone(),
        statements: outline.statements.clone(),
        code: unit.lines().to_vec(),
    };
    let path = sidecar_path(source);
    let json = serde_json::to_string_pretty(&record).expect("record serializes") + "\n";
    fs::write(&path, json).map_err(io_err(&path))?;
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SidecarState {
    pub record: SidecarRecord,
    /// The source file no longer matches the code the record was written for.
    pub stale: bool,
}

/// Reads the sidecar of `source` and compares it with the file's bytes.
pub fn sidecar_read(source: &Path) -> Result<SidecarState, SidecarError> {
    let path = sidecar_path(source);
    let json = fs::read_to_string(&path).map_err(io_err(&path))?;
    let value: serde_json::Value = serde_json::from_str(&json).map_err(|e| SidecarError::Schema {
        path: path.clone(),
        message: e.to_string(),
    })?;
    if value.get("schema").and_then(|s| s.as_str()) != Some(SIDECAR_SCHEMA) {
        return Err(SidecarError::Schema {
            path,
            message: format!("schema is not {SIDECAR_SCHEMA:?}"),
        });
    }
    match value.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(SIDECAR_VERSION) => {}
        Some(v) => {
            return Err(SidecarError::Version {
                path,
                found: u32::try_from(v).unwrap_or(u32::MAX),
            })
        }
        None => {
            return Err(SidecarError::Schema {
                path,
                message: "missing version".into(),
            })
        }
    }
    let record: SidecarRecord = serde_json::from_value(value).map_err(|e| SidecarError::Schema {
        path: path.clone(),
        message: e.to_string(),
    })?;
    let unit = record.unit()?;
    let violations = validate(&record.outline(), &unit);
    if !violations.is_empty() {
        return Err(SidecarError::Invalid(violations));
    }
    let current = fs::read(source).map_err(io_err(source))?;
    let stale = hex::encode(Sha256::digest(&current)) != record.content_hash;
    Ok(SidecarState { record, stale })
}

pub const EVAL_SCHEMA: &str = "nlo.eval/1";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("nothing to evaluate: no techniques or no backends")]
    NoJobs,
    #[error("{function}: {source}")]
    Generation {
        function: String,
        #[source]
        source: GenerationError,
    },
}

/// One function of an evaluation corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub name: String,
    pub unit: SourceUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub backend: String,
    pub model: String,
    pub technique: Technique,
    pub none: usize,
    pub minor: usize,
    pub major: usize,
    pub avg_statements: f64,
    /// How often each issue kind occurred, over all functions.
    pub issue_counts: BTreeMap<String, usize>,
}

impl EvalRow {
    pub fn functions(&self) -> usize {
        self.none + self.minor + self.major
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTable {
    pub schema: String,
    pub functions: usize,
    pub rows: Vec<EvalRow>,
}

fn evaluate_one(
    corpus: &[CorpusEntry],
    config: &PromptConfig,
    backend: &dyn Backend,
    options: &RequestOptions,
) -> Result<EvalRow, EvalError> {
    let mut row = EvalRow {
        backend: backend.id().to_string(),
        model: backend.model().to_string(),
        technique: config.technique,
        none: 0,
        minor: 0,
        major: 0,
        avg_statements: 0.0,
        issue_counts: BTreeMap::new(),
    };
    let mut statements = 0;
    for entry in corpus {
        let report = generate_outline_with(&entry.unit, config, backend, options).map_err(|source| {
            EvalError::Generation {
                function: entry.name.clone(),
                source,
            }
        })?;
        match report.level() {
            IssueLevel::None => row.none += 1,
            IssueLevel::Minor => row.minor += 1,
            IssueLevel::Major => row.major += 1,
        }
        for issue in &report.issues {
            *row.issue_counts.entry(issue.kind.name().to_string()).or_default() += 1;
        }
        statements += report.outline.len();
    }
    row.avg_statements = statements as f64 / corpus.len() as f64;
    Ok(row)
}

/// Generates an outline for every function with every (backend, prompt)
/// pair and tallies parse issues. Rows are sorted by backend, model and
/// technique regardless of completion order.
pub fn evaluate_corpus(
    corpus: &[CorpusEntry],
    configs: &[PromptConfig],
    backends: &[&dyn Backend],
    options: &RequestOptions,
) -> Result<EvalTable, EvalError> {
    if corpus.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    if configs.is_empty() || backends.is_empty() {
        return Err(EvalError::NoJobs);
    }
    let results: Vec<Result<EvalRow, EvalError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = backends
            .iter()
            .flat_map(|&b| configs.iter().map(move |c| (b, c)))
            .map(|(backend, config)| scope.spawn(move || evaluate_one(corpus, config, backend, options)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("eval worker panicked")).collect()
    });
    let mut rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    rows.sort_by(|a, b| {
        (&a.backend, &a.model, a.technique.name()).cmp(&(&b.backend, &b.model, b.technique.name()))
    });
    Ok(EvalTable {
        schema: EVAL_SCHEMA.to_string(),
        functions: corpus.len(),
        rows,
    })
}

/// Fixed-width text table with one line per row.
pub fn render_eval_table(table: &EvalTable) -> String {
    let header = ["backend", "model", "technique", "none", "minor", "major", "avg"];
    let cells: Vec<[String; 7]> = table
        .rows
        .iter()
        .map(|r| {
            [
                r.backend.clone(),
                r.model.clone(),
                r.technique.name().to_string(),
                r.none.to_string(),
                r.minor.to_string(),
                r.major.to_string(),
                format!("{:.2}", r.avg_statements),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |row: &[String]| {
        let parts: Vec<String> = row
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| if i < 3 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&header.map(String::from));
    for row in &cells {
        line(row);
    }
    out
}
