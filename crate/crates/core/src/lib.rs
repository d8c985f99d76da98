//! Natural-language outlines for source code.
//!
//! An outline is a short list of prose statements, each anchored to the line
//! of code it summarizes. This crate builds the prompts that ask a language
//! model for outlines, parses and repairs the responses, renders outlines as
//! star comments (`#*`, `//*`), keeps them in sync with edited code, splits a
//! change list into reviewable topics and triages decompiled functions.

pub mod source;
pub mod outline;
pub mod gateway;
pub mod generation;
pub mod maintenance;
pub mod triage;
pub mod virtual_split;
pub mod workbench;

pub use outline::{Outline, OutlineDiff, OutlineError, OutlineStatement, Violation};
pub use source::{classify_line, LanguageProfile, LineClass, SourceError, SourceUnit};
