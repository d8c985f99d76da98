use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::outline::{validate, Outline};
use crate::source::{LanguageProfile, SourceUnit};

use super::parse::parse_infilling;

/// A handwritten (code, outline) pair shown to the model before the query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FewShotExample {
    pub name: String,
    pub unit: SourceUnit,
    pub gold: Outline,
}

#[derive(Debug, Error)]
pub enum FewShotError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("few-shot example {name}: {reason}")]
    Invalid { name: String, reason: String },
    #[error("unknown few-shot set {0:?}")]
    UnknownSet(String),
}

impl FewShotExample {
    /// Builds an example from code text and its `N| text` outline, checking
    /// that the outline parses cleanly and validates against the code.
    pub fn from_texts(
        name: impl Into<String>,
        code: &str,
        outline: &str,
        profile: LanguageProfile,
    ) -> Result<Self, FewShotError> {
        let name = name.into();
        let unit = SourceUnit::from_text(code, profile);
        let invalid = |reason: String| FewShotError::Invalid {
            name: name.clone(),
            reason,
        };
        if unit.is_empty() {
            return Err(invalid("empty code".into()));
        }
        let report = parse_infilling(outline, &unit);
        if let Some(issue) = report.issues.first() {
            return Err(invalid(issue.to_string()));
        }
        if let Some(v) = validate(&report.outline, &unit).first() {
            return Err(invalid(v.to_string()));
        }
        Ok(Self {
            name,
            unit,
            gold: report.outline,
        })
    }
}

const DEFAULT_SET: [(&str, &str, &str); 8] = [
    (
        "01_download_kaggle_dataset",
        include_str!("../../fewshots/default/01_download_kaggle_dataset.py"),
        include_str!("../../fewshots/default/01_download_kaggle_dataset.outline"),
    ),
    (
        "02_get_line_number_prefix",
        include_str!("../../fewshots/default/02_get_line_number_prefix.py"),
        include_str!("../../fewshots/default/02_get_line_number_prefix.outline"),
    ),
    (
        "03_random_new_variable",
        include_str!("../../fewshots/default/03_random_new_variable.py"),
        include_str!("../../fewshots/default/03_random_new_variable.outline"),
    ),
    (
        "04_test_run_value_search",
        include_str!("../../fewshots/default/04_test_run_value_search.py"),
        include_str!("../../fewshots/default/04_test_run_value_search.outline"),
    ),
    (
        "05_nearest_neighbor_tour",
        include_str!("../../fewshots/default/05_nearest_neighbor_tour.py"),
        include_str!("../../fewshots/default/05_nearest_neighbor_tour.outline"),
    ),
    (
        "06_load_key_value_config",
        include_str!("../../fewshots/default/06_load_key_value_config.py"),
        include_str!("../../fewshots/default/06_load_key_value_config.outline"),
    ),
    (
        "07_retry_with_backoff",
        include_str!("../../fewshots/default/07_retry_with_backoff.py"),
        include_str!("../../fewshots/default/07_retry_with_backoff.outline"),
    ),
    (
        "08_summarize_scores",
        include_str!("../../fewshots/default/08_summarize_scores.py"),
        include_str!("../../fewshots/default/08_summarize_scores.outline"),
    ),
];

/// The eight built-in Python examples.
pub fn default_few_shots() -> Vec<FewShotExample> {
    DEFAULT_SET
        .iter()
        .map(|(name, code, outline)| {
            FewShotExample::from_texts(*name, code, outline, LanguageProfile::python())
                .expect("built-in few-shot examples are valid")
        })
        .collect()
}

/// Looks up a built-in set by name.
pub fn builtin_set(name: &str) -> Result<Vec<FewShotExample>, FewShotError> {
    match name {
        "default" => Ok(default_few_shots()),
        other => Err(FewShotError::UnknownSet(other.to_string())),
    }
}

/// Loads every `<stem>.<ext>` + `<stem>.outline` pair in `dir`, ordered by
/// stem. The code extension picks the language profile.
pub fn load_dir(dir: impl AsRef<Path>) -> Result<Vec<FewShotExample>, FewShotError> {
    let dir = dir.as_ref();
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| FewShotError::Io { path, source }
    };
    let mut code_files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or_default();
        if path.is_file() && ext != "outline" {
            code_files.push(path);
        }
    }
    code_files.sort();

    let mut examples = Vec::new();
    for code_path in code_files {
        let stem = code_path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let outline_path = code_path.with_extension("outline");
        if !outline_path.exists() {
            continue;
        }
        let ext = code_path.extension().and_then(|e| e.to_str()).unwrap_or_default();
        let profile = LanguageProfile::for_extension(ext).ok_or_else(|| FewShotError::Invalid {
            name: stem.clone(),
            reason: format!("no language profile for extension {ext:?}"),
        })?;
        let code = fs::read_to_string(&code_path).map_err(io_err(&code_path))?;
        let outline = fs::read_to_string(&outline_path).map_err(io_err(&outline_path))?;
        examples.push(FewShotExample::from_texts(stem, &code, &outline, profile)?);
    }
    Ok(examples)
}
