//! Outline generation: prompts, response parsing and constraint checking.

mod constraint;
mod fewshot;
mod issues;
pub(crate) mod parse;
mod prompt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{complete, Backend, GatewayError, GenerationRequest};
use crate::source::{SourceError, SourceUnit};

pub use constraint::{build_constraint, constraint_accepts, Acceptance, Constraint, Slot};
pub use fewshot::{builtin_set, default_few_shots, load_dir, FewShotError, FewShotExample};
pub use issues::{IssueKind, IssueLevel, ParseIssue, ParseReport, Severity};
pub use parse::{fenced_blocks, parse_infilling, parse_interleaved, strip_code_fence, FencedBlock};
pub use prompt::{
    build_prompt, PromptConfig, Technique, INFILLING_INSTRUCTIONS, INTERLEAVED_INSTRUCTIONS,
};

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RequestOptions {
    pub temperature: f64,
    pub max_output: Option<usize>,
}

impl RequestOptions {
    fn request(&self, prompt: crate::gateway::ChatPrompt) -> GenerationRequest {
        GenerationRequest {
            prompt,
            temperature: self.temperature,
            max_output: self.max_output,
        }
    }
}

pub fn parse_response(technique: Technique, response: &str, unit: &SourceUnit) -> ParseReport {
    match technique {
        Technique::Interleaved => parse_interleaved(response, unit),
        Technique::Infilling => parse_infilling(response, unit),
    }
}

/// Prompts the backend greedily and parses its answer.
pub fn generate_outline(
    unit: &SourceUnit,
    config: &PromptConfig,
    backend: &dyn Backend,
) -> Result<ParseReport, GenerationError> {
    generate_outline_with(unit, config, backend, &RequestOptions::default())
}

pub fn generate_outline_with(
    unit: &SourceUnit,
    config: &PromptConfig,
    backend: &dyn Backend,
    options: &RequestOptions,
) -> Result<ParseReport, GenerationError> {
    let prompt = build_prompt(unit, config)?;
    let response = complete(&options.request(prompt), backend)?;
    Ok(parse_response(config.technique, &response, unit))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstrainedReport {
    pub report: ParseReport,
    pub acceptance: Acceptance,
}

/// Interleaved generation checked against [`build_constraint`] after the
/// fact. The outline is parsed either way; `acceptance` says whether the
/// response stayed within the constraint.
pub fn generate_constrained(
    unit: &SourceUnit,
    config: &PromptConfig,
    backend: &dyn Backend,
    options: &RequestOptions,
) -> Result<ConstrainedReport, GenerationError> {
    let config = PromptConfig {
        technique: Technique::Interleaved,
        ..config.clone()
    };
    let prompt = build_prompt(unit, &config)?;
    let response = complete(&options.request(prompt), backend)?;
    let acceptance = constraint_accepts(&build_constraint(unit), &strip_code_fence(&response));
    Ok(ConstrainedReport {
        report: parse_interleaved(&response, unit),
        acceptance,
    })
}
