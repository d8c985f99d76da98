use std::fmt;

use serde::{Deserialize, Serialize};

use crate::outline::Outline;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Minor,
    Major,
}

/// Everything that can go wrong while turning a model response into an
/// outline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    // Interleaved responses.
    ExtraBlankLine,
    MissingBlankLine,
    ConsecutiveComment,
    MissingComment,
    ChangedTrailingComment,
    ChangedCode,
    ExtraPredictionLines,
    MissingPredictionLines,
    EmptyOutline,
    // Line-number responses.
    MalformedLine,
    LineNumberOutOfBounds,
    NotSorted,
    DuplicateLineNumber,
    CommentedEmptyLine,
    // Topic assignments in diff splitting.
    UnknownTopicIndex,
}

impl IssueKind {
    pub const ALL: [IssueKind; 15] = [
        IssueKind::ExtraBlankLine,
        IssueKind::MissingBlankLine,
        IssueKind::ConsecutiveComment,
        IssueKind::MissingComment,
        IssueKind::ChangedTrailingComment,
        IssueKind::ChangedCode,
        IssueKind::ExtraPredictionLines,
        IssueKind::MissingPredictionLines,
        IssueKind::EmptyOutline,
        IssueKind::MalformedLine,
        IssueKind::LineNumberOutOfBounds,
        IssueKind::NotSorted,
        IssueKind::DuplicateLineNumber,
        IssueKind::CommentedEmptyLine,
        IssueKind::UnknownTopicIndex,
    ];

    pub fn severity(self) -> Severity {
        match self {
            IssueKind::ExtraBlankLine
            | IssueKind::MissingBlankLine
            | IssueKind::MissingComment
            | IssueKind::ChangedTrailingComment
            | IssueKind::ExtraPredictionLines
            | IssueKind::NotSorted
            | IssueKind::CommentedEmptyLine => Severity::Minor,
            IssueKind::ConsecutiveComment
            | IssueKind::ChangedCode
            | IssueKind::MissingPredictionLines
            | IssueKind::EmptyOutline
            | IssueKind::MalformedLine
            | IssueKind::LineNumberOutOfBounds
            | IssueKind::DuplicateLineNumber
            | IssueKind::UnknownTopicIndex => Severity::Major,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            IssueKind::ExtraBlankLine => "extra_blank_line",
            IssueKind::MissingBlankLine => "missing_blank_line",
            IssueKind::ConsecutiveComment => "consecutive_comment",
            IssueKind::MissingComment => "missing_comment",
            IssueKind::ChangedTrailingComment => "changed_trailing_comment",
            IssueKind::ChangedCode => "changed_code",
            IssueKind::ExtraPredictionLines => "extra_prediction_lines",
            IssueKind::MissingPredictionLines => "missing_prediction_lines",
            IssueKind::EmptyOutline => "empty_outline",
            IssueKind::MalformedLine => "malformed_line",
            IssueKind::LineNumberOutOfBounds => "line_number_out_of_bounds",
            IssueKind::NotSorted => "not_sorted",
            IssueKind::DuplicateLineNumber => "duplicate_line_number",
            IssueKind::CommentedEmptyLine => "commented_empty_line",
            IssueKind::UnknownTopicIndex => "unknown_topic_index",
        }
    }
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One problem found in a response.
///
/// `location` is the 1-based line of the original code the issue concerns
/// for interleaved responses, and the 1-based response line for line-number
/// responses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseIssue {
    pub kind: IssueKind,
    pub severity: Severity,
    pub location: Option<usize>,
    pub detail: String,
}

impl ParseIssue {
    pub fn new(kind: IssueKind, location: Option<usize>, detail: impl Into<String>) -> Self {
        Self {
            kind,
            severity: kind.severity(),
            location,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for ParseIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Minor => "minor",
            Severity::Major => "major",
        };
        match self.location {
            Some(line) => write!(f, "{sev} {} at line {line}: {}", self.kind, self.detail),
            None => write!(f, "{sev} {}: {}", self.kind, self.detail),
        }
    }
}

/// Three-way classification used when tallying many reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IssueLevel {
    None,
    Minor,
    Major,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub outline: Outline,
    pub issues: Vec<ParseIssue>,
    /// Set when parsing stopped early at changed code.
    pub truncated: bool,
}

impl ParseReport {
    pub fn has_major(&self) -> bool {
        self.issues.iter().any(|i| i.severity == Severity::Major)
    }

    pub fn level(&self) -> IssueLevel {
        if self.has_major() {
            IssueLevel::Major
        } else if self.issues.is_empty() {
            IssueLevel::None
        } else {
            IssueLevel::Minor
        }
    }

    pub fn kinds(&self) -> Vec<IssueKind> {
        self.issues.iter().map(|i| i.kind).collect()
    }

    pub(crate) fn push(&mut self, kind: IssueKind, location: Option<usize>, detail: impl Into<String>) {
        self.issues.push(ParseIssue::new(kind, location, detail));
    }
}
