//! Security triage of decompiled functions: a short summary, a suspicion
//! score from 0 to 3 and an outline of only the suspicious parts.

use std::fmt::Write;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::gateway::{complete, Backend, ChatPrompt, GatewayError, GenerationRequest};
use crate::generation::RequestOptions;
use crate::outline::{Outline, OutlineStatement};
use crate::source::{LanguageProfile, SourceError, SourceUnit};

pub const TRIAGE_SCHEMA: &str = "nlo.triage/1";

const SCORE_MARKER: &str = "\n\nSuspicion score:\n";
const NOTES_MARKER: &str = "\n\nNotes:\n";
const NO_NOTES: &str = "<None>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriagePrediction {
    pub summary: String,
    /// 0 to 3, or -1 when the score could not be read.
    pub score: i8,
    pub outline: Outline,
    pub errors: Vec<String>,
}

impl TriagePrediction {
    fn sentinel(errors: Vec<String>) -> Self {
        Self {
            summary: String::new(),
            score: -1,
            outline: Outline::empty(),
            errors,
        }
    }

    /// Whether the outline is empty exactly when the score is 0.
    pub fn is_consistent(&self) -> bool {
        (self.score == 0) == self.outline.is_empty()
    }

    /// The response format [`parse_triage`] reads.
    pub fn to_wire(&self) -> String {
        let mut out = format!("{}{SCORE_MARKER}{}{NOTES_MARKER}", self.summary, self.score);
        if self.outline.is_empty() {
            out.push_str(NO_NOTES);
        } else {
            let notes: Vec<String> = self
                .outline
                .iter()
                .map(|s| format!("Line {}: {}", s.anchor, s.text))
                .collect();
            out.push_str(&notes.join("\n"));
        }
        out
    }
}

static NOTE_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^Lines? ([0-9]+)(?: ?- ?[0-9]+)?: (.*)$").expect("static regex"));

fn is_py_space(c: char) -> bool {
    c.is_whitespace() || ('\u{1c}'..='\u{1f}').contains(&c)
}

fn py_strip(s: &str) -> &str {
    s.trim_matches(is_py_space)
}

fn is_line_break(c: char) -> bool {
    matches!(
        c,
        '\n' | '\r' | '\u{0b}' | '\u{0c}' | '\u{1c}' | '\u{1d}' | '\u{1e}' | '\u{85}' | '\u{2028}' | '\u{2029}'
    )
}

/// Splits like Python's `str.splitlines()`: every Unicode line boundary
/// counts, `\r\n` is one break and a final break adds no empty line.
fn splitlines(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = s.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if !is_line_break(c) {
            continue;
        }
        out.push(&s[start..i]);
        let mut end = i + c.len_utf8();
        if c == '\r' {
            if let Some(&(j, '\n')) = chars.peek() {
                chars.next();
                end = j + 1;
            }
        }
        start = end;
    }
    if start < s.len() {
        out.push(&s[start..]);
    }
    out
}

/// Reads a summary, score and notes response. Never fails: problems are
/// collected as bracketed strings in `errors`.
pub fn parse_triage(response: &str, summary_line_width: Option<usize>) -> TriagePrediction {
    let prediction = response.split("\n\n\n").next().unwrap_or_default();
    let mut errors = Vec::new();
    if !prediction.contains(SCORE_MARKER) {
        errors.push("[no score section]".to_string());
    }
    if !prediction.contains(NOTES_MARKER) {
        errors.push("[no outline section]".to_string());
    }
    if !errors.is_empty() {
        return TriagePrediction::sentinel(errors);
    }
    let (summary, remaining) = prediction.split_once(SCORE_MARKER).expect("checked above");
    let (score, outline_text) = remaining.split_once(NOTES_MARKER).unwrap_or((remaining, ""));

    let summary = py_strip(summary);
    let score_text = py_strip(score);
    let score = match score_text {
        "0" | "1" | "2" | "3" => score_text.parse().expect("single digit"),
        other => {
            errors.push(format!("[unexpected score: {other}]"));
            -1
        }
    };
    let outline_text = py_strip(outline_text);

    let mut notes: Vec<(usize, String)> = Vec::new();
    if outline_text != NO_NOTES {
        for line in splitlines(outline_text) {
            let parsed = NOTE_LINE
                .captures(line)
                .and_then(|c| Some((c[1].parse::<usize>().ok()?, c[2].to_string())));
            match parsed {
                Some(note) => notes.push(note),
                None => errors.push("[malformed outline line]".to_string()),
            }
        }
    }
    notes.sort_by_key(|(n, _)| *n);
    let mut statements: Vec<OutlineStatement> = Vec::with_capacity(notes.len());
    for (line, text) in notes {
        if statements.last().is_some_and(|s| s.anchor == line) {
            errors.push(format!("[duplicate line number: {line}]"));
            continue;
        }
        statements.push(OutlineStatement::new(line, text));
    }

    let summary = match summary_line_width {
        Some(width) if width > 0 => splitlines(summary)
            .into_iter()
            .map(|line| {
                if py_strip(line).is_empty() {
                    String::new()
                } else {
                    textwrap::wrap(line, width).join("\n")
                }
            })
            .collect::<Vec<_>>()
            .join("\n"),
        _ => summary.to_string(),
    };

    TriagePrediction {
        summary,
        score,
        outline: Outline::new(statements),
        errors,
    }
}

/// A decompiled function and the prediction shown for it in the prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriageExample {
    pub name: String,
    pub unit: SourceUnit,
    pub prediction: TriagePrediction,
}

macro_rules! triage_shot {
    ($name:literal) => {
        (
            $name,
            include_str!(concat!("../fewshots/triage/", $name, ".java")),
            include_str!(concat!("../fewshots/triage/", $name, ".txt")),
        )
    };
}

const DEFAULT_TRIAGE_SHOTS: [(&str, &str, &str); 7] = [
    triage_shot!("01_upload_device_id"),
    triage_shot!("02_format_price"),
    triage_shot!("03_bind_list_item"),
    triage_shot!("04_load_remote_code"),
    triage_shot!("05_cache_location"),
    triage_shot!("06_hide_on_emulator"),
    triage_shot!("07_parse_settings"),
];

pub fn default_triage_examples() -> Vec<TriageExample> {
    DEFAULT_TRIAGE_SHOTS
        .iter()
        .map(|(name, code, wire)| {
            let prediction = parse_triage(wire, None);
            assert!(prediction.errors.is_empty(), "built-in triage example {name}");
            TriageExample {
                name: name.to_string(),
                unit: SourceUnit::from_text(code, LanguageProfile::c_like()),
                prediction,
            }
        })
        .collect()
}

pub const TRIAGE_INSTRUCTIONS: &str = "\
You are an expert reverse engineer who reviews decompiled Android app functions for malware.
For each function, write three things in this order:
1. A summary of one to three sentences describing what the function does and whether it is suspicious.
2. After a line `Suspicion score:`, an integer from 0 (not suspicious at all) to 3 (very suspicious).
3. After a line `Notes:`, one line per suspicious part of the code, written as `Line N: comment` or `Lines N-M: comment`.
   Only describe security-relevant behavior. If the score is 0, write `<None>` instead.
Separate the three parts with a blank line.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriageConfig {
    pub instructions: String,
    pub few_shots: Vec<TriageExample>,
    pub summary_line_width: Option<usize>,
}

impl Default for TriageConfig {
    fn default() -> Self {
        Self {
            instructions: TRIAGE_INSTRUCTIONS.to_string(),
            few_shots: default_triage_examples(),
            summary_line_width: None,
        }
    }
}

fn triage_user(numbered: &str) -> String {
    format!("Please review this decompiled function, with line numbers added for reference:\n```\n{numbered}\n```")
}

pub fn build_triage_prompt(unit: &SourceUnit, config: &TriageConfig) -> Result<ChatPrompt, SourceError> {
    let mut prompt = ChatPrompt::new(config.instructions.clone());
    for ex in &config.few_shots {
        prompt = prompt
            .user(triage_user(&ex.unit.number_lines()?))
            .assistant(ex.prediction.to_wire());
    }
    Ok(prompt.user(triage_user(&unit.number_lines()?)))
}

#[derive(Debug, thiserror::Error)]
pub enum TriageError {
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriageRecord {
    pub schema: String,
    pub name: String,
    #[serde(flatten)]
    pub prediction: TriagePrediction,
    pub consistent: bool,
}

impl TriageRecord {
    pub fn new(name: impl Into<String>, prediction: TriagePrediction) -> Self {
        Self {
            schema: TRIAGE_SCHEMA.to_string(),
            name: name.into(),
            consistent: prediction.is_consistent(),
            prediction,
        }
    }
}

pub fn triage(
    unit: &SourceUnit,
    config: &TriageConfig,
    backend: &dyn Backend,
    options: &RequestOptions,
) -> Result<TriagePrediction, TriageError> {
    let request = GenerationRequest {
        prompt: build_triage_prompt(unit, config)?,
        temperature: options.temperature,
        max_output: options.max_output,
    };
    let response = complete(&request, backend)?;
    Ok(parse_triage(&response, config.summary_line_width))
}

/// Counts of each score; index 0 holds unreadable scores and index
/// `s + 1` holds score `s`.
pub fn score_histogram<'a>(predictions: impl IntoIterator<Item = &'a TriagePrediction>) -> [usize; 5] {
    let mut counts = [0; 5];
    for p in predictions {
        counts[(p.score + 1).clamp(0, 4) as usize] += 1;
    }
    counts
}

pub fn render_histogram(counts: &[usize; 5]) -> String {
    let mut out = String::new();
    for (label, n) in ["unreadable", "0", "1", "2", "3"].iter().zip(counts) {
        let _ = writeln!(out, "score {label:>10}: {n}");
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::gateway::ScriptedBackend;

    pub(crate) const CLIPBOARD_WIRE: &str = "\
This function reads the user's clipboard data. This is suspicious behavior that may be a privacy concern.

Suspicion score:
2

Notes:
Line 2: Accesses the user's clipboard.
Line 10: Sends the clipboard contents to `this.ab1.c23()`.";

    fn errors(text: &str) -> Vec<String> {
        parse_triage(text, None).errors
    }

    #[test]
    fn clipboard_prediction() {
        let p = parse_triage(CLIPBOARD_WIRE, None);
        assert_eq!(p.score, 2);
        assert_eq!(p.outline.anchors(), [2, 10]);
        assert!(p.errors.is_empty());
        assert!(p.is_consistent());
        assert!(p.summary.starts_with("This function reads"));
    }

    #[test]
    fn missing_sections_give_the_sentinel() {
        let p = parse_triage("just words", None);
        assert_eq!(p, TriagePrediction::sentinel(vec!["[no score section]".into(), "[no outline section]".into()]));
        assert_eq!(errors("a\n\nSuspicion score:\n1"), ["[no outline section]"]);
        assert_eq!(errors("a\n\nNotes:\n<None>"), ["[no score section]"]);
    }

    #[test]
    fn extra_text_after_two_blank_lines_is_dropped() {
        let p = parse_triage(&format!("{CLIPBOARD_WIRE}\n\n\nLine 5: ignored"), None);
        assert_eq!(p.outline.len(), 2);
        let cut = parse_triage("a\n\n\n\nSuspicion score:\n1\n\nNotes:\n<None>", None);
        assert_eq!(cut.score, -1);
    }

    #[test]
    fn bad_score() {
        let p = parse_triage("s\n\nSuspicion score:\n5\n\nNotes:\n<None>", None);
        assert_eq!(p.score, -1);
        assert_eq!(p.errors, ["[unexpected score: 5]"]);
        assert_eq!(errors("s\n\nSuspicion score:\n 2/3 \n\nNotes:\n<None>"), ["[unexpected score: 2/3]"]);
    }

    #[test]
    fn notes_lines() {
        let p = parse_triage("s\n\nSuspicion score:\n1\n\nNotes:\nLine 3: a\nLine 3: b", None);
        assert_eq!(p.outline.statements, [OutlineStatement::new(3, "a")]);
        assert_eq!(p.errors, ["[duplicate line number: 3]"]);
        let r = parse_triage("s\n\nSuspicion score:\n1\n\nNotes:\nLines 3-5: r\nLine 1 - 2: q\nline 4: no\nLine 9: z", None);
        assert_eq!(r.outline.anchors(), [1, 3, 9]);
        assert_eq!(r.errors, ["[malformed outline line]"]);
        let none = parse_triage("s\n\nSuspicion score:\n0\n\nNotes:\n  <None>  ", None);
        assert!(none.outline.is_empty() && none.errors.is_empty() && none.is_consistent());
    }

    #[test]
    fn splitlines_matches_python() {
        assert_eq!(splitlines("a\r\nb\rc\u{2028}d\n"), ["a", "b", "c", "d"]);
        assert_eq!(splitlines("a\n\nb"), ["a", "", "b"]);
        assert!(splitlines("").is_empty());
    }

    #[test]
    fn summary_wrapping() {
        let wire = "one two three four\n\nfive\n\nSuspicion score:\n0\n\nNotes:\n<None>";
        let p = parse_triage(wire, Some(9));
        assert_eq!(p.summary, "one two\nthree\nfour\n\nfive");
        assert_eq!(parse_triage(wire, Some(0)).summary, "one two three four\n\nfive");
    }

    #[test]
    fn wire_round_trip() {
        let p = parse_triage(CLIPBOARD_WIRE, None);
        assert_eq!(parse_triage(&p.to_wire(), None), p);
    }

    #[test]
    fn consistency_flag() {
        let zero_with_note = parse_triage("s\n\nSuspicion score:\n0\n\nNotes:\nLine 1: x", None);
        assert!(!zero_with_note.is_consistent());
        assert!(!TriageRecord::new("f", zero_with_note).consistent);
    }

    #[test]
    fn default_examples_and_prompt() {
        let config = TriageConfig::default();
        assert_eq!(config.few_shots.len(), 7);
        assert!(config.few_shots.iter().all(|e| e.prediction.is_consistent()));
        let unit = SourceUnit::from_text("void f() {}\n", LanguageProfile::c_like());
        let prompt = build_triage_prompt(&unit, &config).unwrap();
        assert_eq!(prompt.turns.len(), 15);
        assert!(prompt.turns[14].text.contains("  1|void f() {}"));
    }

    #[test]
    fn triage_end_to_end() {
        let backend = ScriptedBackend::new([CLIPBOARD_WIRE]);
        let unit = SourceUnit::from_text("void a() {}\n", LanguageProfile::c_like());
        let p = triage(&unit, &TriageConfig::default(), &backend, &RequestOptions::default()).unwrap();
        assert_eq!(p.score, 2);
        assert_eq!(score_histogram([&p]), [0, 0, 0, 1, 0]);
    }
}
