//! Finish Changes: let the model complete an edit that the developer started
//! in the code or in the outline.

use similar::TextDiff;
use thiserror::Error;

use crate::gateway::{complete, Backend, ChatPrompt, GatewayError};
use crate::generation::{fenced_blocks, RequestOptions};
use crate::outline::{extract, render_interleaved, validate, Outline, OutlineError, Violation};
use crate::source::{LanguageProfile, SourceUnit};

#[derive(Debug, Error)]
pub enum MaintenanceError {
    #[error("{which} outline does not fit its code: {violations:?}")]
    InvalidSession {
        which: &'static str,
        violations: Vec<Violation>,
    },
    #[error("response has no closed code block")]
    NoCodeBlock,
    #[error(transparent)]
    Outline(#[from] OutlineError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// The last saved (code, outline) pair and the one the developer is editing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditSession {
    old_unit: SourceUnit,
    old_outline: Outline,
    current_unit: SourceUnit,
    current_outline: Outline,
}

impl EditSession {
    pub fn new(
        old_unit: SourceUnit,
        old_outline: Outline,
        current_unit: SourceUnit,
        current_outline: Outline,
    ) -> Result<Self, MaintenanceError> {
        for (which, unit, outline) in [
            ("old", &old_unit, &old_outline),
            ("current", &current_unit, &current_outline),
        ] {
            let violations = validate(outline, unit);
            if !violations.is_empty() {
                return Err(MaintenanceError::InvalidSession { which, violations });
            }
        }
        Ok(Self {
            old_unit,
            old_outline,
            current_unit,
            current_outline,
        })
    }

    /// Builds a session from two star-commented texts.
    pub fn from_annotated(
        old: &str,
        current: &str,
        profile: &LanguageProfile,
    ) -> Result<Self, MaintenanceError> {
        let (old_unit, old_outline) = extract(&SourceUnit::from_text(old, profile.clone()))?;
        let (current_unit, current_outline) =
            extract(&SourceUnit::from_text(current, profile.clone()))?;
        Self::new(old_unit, old_outline, current_unit, current_outline)
    }

    pub fn old_unit(&self) -> &SourceUnit {
        &self.old_unit
    }

    pub fn old_outline(&self) -> &Outline {
        &self.old_outline
    }

    pub fn current_unit(&self) -> &SourceUnit {
        &self.current_unit
    }

    pub fn current_outline(&self) -> &Outline {
        &self.current_outline
    }

    fn annotated_old(&self) -> SourceUnit {
        render_interleaved(&self.old_unit, &self.old_outline).expect("validated in new")
    }

    fn annotated_current(&self) -> SourceUnit {
        render_interleaved(&self.current_unit, &self.current_outline).expect("validated in new")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinishResult {
    pub reasoning: String,
    pub new_unit: SourceUnit,
    pub new_outline: Outline,
    /// Unified diff from the current annotated code to the new one.
    pub diff: String,
}

impl FinishResult {
    /// The proposed code, star comments included.
    pub fn annotated(&self) -> SourceUnit {
        render_interleaved(&self.new_unit, &self.new_outline).expect("validated when parsed")
    }
}

const FINISH_SYSTEM: &str = "\
You are an expert programmer.
You help developers finish code changes they have started.
A function is shown together with its outline: short comments that summarize each logical section of the code.
The developer edits either the code or the outline. Your job is to make the code and the outline agree again.";

pub fn build_finish_prompt(session: &EditSession) -> ChatPrompt {
    let star = session.current_unit.profile().star_prefix();
    let user = format!(
        "Here is the old version of a function. Its outline is written as comments starting with `{star}`.\n\
         ```\n{old}\n```\n\n\
         The developer has started to change the code or the outline. Here is the current version:\n\
         ```\n{current}\n```\n\n\
         Finish the developer's changes.\n\
         1. List the changes the developer made between the old and current versions.\n\
         2. Reason about what else in the code and the outline must change to complete those changes.\n\
         3. Write the complete new version of the function, with its outline as `{star}` comments, in one code block.",
        old = session.annotated_old().joined(),
        current = session.annotated_current().joined(),
    );
    ChatPrompt::new(FINISH_SYSTEM).user(user)
}

/// Splits a response into the reasoning before its last code block and the
/// (code, outline) pair encoded in that block.
pub fn parse_finish_response(
    response: &str,
    profile: &LanguageProfile,
) -> Result<(String, SourceUnit, Outline), MaintenanceError> {
    let block = fenced_blocks(response)
        .into_iter()
        .filter(|b| b.closed)
        .next_back()
        .ok_or(MaintenanceError::NoCodeBlock)?;
    let reasoning = response[..block.offset].trim().to_string();
    let annotated = SourceUnit::from_text(&block.body, profile.clone());
    let (unit, outline) = extract(&annotated)?;
    let violations = validate(&outline, &unit);
    if !violations.is_empty() {
        return Err(OutlineError::Placement(violations).into());
    }
    Ok((reasoning, unit, outline))
}

pub fn finish_changes(
    session: &EditSession,
    backend: &dyn Backend,
) -> Result<FinishResult, MaintenanceError> {
    finish_changes_with(session, backend, &RequestOptions::default())
}

pub fn finish_changes_with(
    session: &EditSession,
    backend: &dyn Backend,
    options: &RequestOptions,
) -> Result<FinishResult, MaintenanceError> {
    let request = crate::gateway::GenerationRequest {
        prompt: build_finish_prompt(session),
        temperature: options.temperature,
        max_output: options.max_output,
    };
    let response = complete(&request, backend)?;
    let (reasoning, new_unit, new_outline) =
        parse_finish_response(&response, session.current_unit.profile())?;
    let new_annotated = render_interleaved(&new_unit, &new_outline)?;
    let diff = unified_diff_text(&session.annotated_current(), &new_annotated, "code");
    Ok(FinishResult {
        reasoning,
        new_unit,
        new_outline,
        diff,
    })
}

/// Unified diff with three lines of context. Always starts with the `---`
/// and `+++` headers, even when the units are equal.
pub fn unified_diff_text(a: &SourceUnit, b: &SourceUnit, path: &str) -> String {
    let (old, new) = (a.to_text(), b.to_text());
    let diff = TextDiff::from_lines(&old, &new);
    let mut out = format!("--- a/{path}\n+++ b/{path}\n");
    for hunk in diff.unified_diff().context_radius(3).iter_hunks() {
        out.push_str(&hunk.to_string());
    }
    out
}
