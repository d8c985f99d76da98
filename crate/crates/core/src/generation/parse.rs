use std::sync::LazyLock;

use regex::Regex;

use crate::outline::{Outline, OutlineStatement};
use crate::source::{classify_line, comment_text, strip_trailing_comment, LineClass, SourceUnit};

use super::issues::{IssueKind, ParseReport};

/// A triple-backtick block found in model output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FencedBlock {
    /// Byte offset of the opening fence line.
    pub offset: usize,
    pub body: String,
    pub closed: bool,
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

/// All fenced blocks in `text`, in order. An unclosed final fence runs to
/// the end of the text.
pub fn fenced_blocks(text: &str) -> Vec<FencedBlock> {
    let mut blocks = Vec::new();
    let mut open: Option<(usize, Vec<&str>)> = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let bare = line.trim_end_matches(['\n', '\r']);
        match open.take() {
            None if is_fence(bare) => open = Some((offset, Vec::new())),
            None => {}
            Some((start, body)) if is_fence(bare) && bare.trim() == "```" => blocks.push(FencedBlock {
                offset: start,
                body: body.join("\n"),
                closed: true,
            }),
            Some((start, mut body)) => {
                body.push(bare);
                open = Some((start, body));
            }
        }
        offset += line.len();
    }
    if let Some((start, body)) = open {
        blocks.push(FencedBlock {
            offset: start,
            body: body.join("\n"),
            closed: false,
        });
    }
    blocks
}

/// Contents of the first fenced block, or the whole text when there is none.
pub fn strip_code_fence(text: &str) -> String {
    match fenced_blocks(text).into_iter().next() {
        Some(block) => block.body,
        None => text.to_string(),
    }
}

struct Pending {
    texts: Vec<String>,
    verified: bool,
}

impl Pending {
    fn new() -> Self {
        Self {
            texts: Vec::new(),
            verified: true,
        }
    }

    fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }
}

struct InterleavedScan<'a> {
    original: &'a SourceUnit,
    report: ParseReport,
    statements: Vec<OutlineStatement>,
    pending: Pending,
}

impl InterleavedScan<'_> {
    /// Whether a statement may sit directly above original line `line`.
    fn anchorable(&self, line: usize) -> bool {
        let blank = self.original.class_of(line) == Some(LineClass::Blank);
        let in_doc = self.original.docstring_span().is_some_and(|d| d.contains(line));
        !blank && !in_doc
    }

    fn next_anchorable(&self, from: usize) -> Option<usize> {
        (from..=self.original.len()).find(|&l| self.anchorable(l))
    }

    /// Attaches pending comments to original line `line`, or holds them for a
    /// later line when `line` cannot carry a statement.
    fn flush(&mut self, line: usize) {
        if self.pending.is_empty() {
            return;
        }
        if !self.anchorable(line) {
            self.report.push(
                IssueKind::CommentedEmptyLine,
                Some(line),
                "comment above a blank or docstring line moved down",
            );
            return;
        }
        let pending = std::mem::replace(&mut self.pending, Pending::new());
        if pending.texts.len() > 1 {
            self.report.push(
                IssueKind::ConsecutiveComment,
                Some(line),
                format!("{} consecutive comments joined", pending.texts.len()),
            );
        }
        self.statements.push(OutlineStatement {
            anchor: line,
            text: pending.texts.join(" "),
            verified: pending.verified,
        });
    }

    fn flush_at_next(&mut self, from: usize) {
        if let Some(line) = self.next_anchorable(from) {
            self.flush(line);
        }
    }
}

/// Recovers an outline from code that the model repeated with comments added.
pub fn parse_interleaved(response: &str, original: &SourceUnit) -> ParseReport {
    let profile = original.profile();
    let body = strip_code_fence(response);
    let pred: Vec<&str> = body.lines().collect();
    let orig = original.lines();
    let mut scan = InterleavedScan {
        original,
        report: ParseReport::default(),
        statements: Vec::new(),
        pending: Pending::new(),
    };
    if pred.iter().all(|l| l.trim().is_empty()) {
        scan.report.push(IssueKind::EmptyOutline, None, "empty response");
        return scan.report;
    }
    let (mut p, mut o) = (0, 0);

    while p < pred.len() && o < orig.len() {
        let pl = pred[p].trim_end();
        let ol = orig[o].trim_end();
        let line = o + 1;
        if pl == ol {
            scan.flush(line);
            p += 1;
            o += 1;
            continue;
        }
        let pclass = classify_line(profile, pl);
        let oclass = classify_line(profile, ol);
        if pclass.is_comment() {
            let (text, verified) = comment_text(profile, pl).unwrap_or_default();
            if text.is_empty() {
                scan.report
                    .push(IssueKind::ExtraBlankLine, Some(line), "empty comment line skipped");
            } else {
                scan.pending.texts.push(text.to_string());
                scan.pending.verified &= verified;
            }
            p += 1;
        } else if pclass == LineClass::Blank {
            scan.report.push(IssueKind::ExtraBlankLine, Some(line), "blank line skipped");
            p += 1;
        } else if oclass == LineClass::Blank {
            scan.report
                .push(IssueKind::MissingBlankLine, Some(line), "original blank line skipped");
            o += 1;
        } else if oclass.is_comment() {
            scan.report
                .push(IssueKind::MissingComment, Some(line), format!("missing {ol:?}"));
            o += 1;
        } else if strip_trailing_comment(profile, pl) == strip_trailing_comment(profile, ol) {
            scan.report
                .push(IssueKind::ChangedTrailingComment, Some(line), "trailing comment differs");
            scan.flush(line);
            p += 1;
            o += 1;
        } else {
            scan.report.push(
                IssueKind::ChangedCode,
                Some(line),
                format!("expected {ol:?}, found {pl:?}"),
            );
            scan.report.truncated = true;
            scan.flush_at_next(line);
            break;
        }
    }

    if !scan.report.truncated {
        if o < orig.len() {
            let rest = &orig[o..];
            if !rest.iter().all(|l| l.trim().is_empty()) {
                scan.report.push(
                    IssueKind::MissingPredictionLines,
                    Some(o + 1),
                    format!("{} original lines unmatched", rest.len()),
                );
                scan.flush_at_next(o + 1);
            }
        }
        let leftover = pred[p..].iter().filter(|l| !l.trim().is_empty()).count();
        if leftover > 0 || !scan.pending.is_empty() {
            scan.report.push(
                IssueKind::ExtraPredictionLines,
                None,
                format!("{} prediction lines ignored", leftover + scan.pending.texts.len()),
            );
        }
    }

    let mut report = scan.report;
    if scan.statements.is_empty() {
        report.push(IssueKind::EmptyOutline, None, "no outline statements");
    }
    report.outline = Outline::new(scan.statements);
    report
}

static INFILL_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*([0-9]+)\|\s?(.*)$").expect("static regex"));

/// Recovers an outline from `N| text` lines.
pub fn parse_infilling(response: &str, original: &SourceUnit) -> ParseReport {
    let body = if fenced_blocks(response).is_empty() {
        response.to_string()
    } else {
        strip_code_fence(response)
    };
    let mut report = ParseReport::default();
    let mut parsed: Vec<(usize, String, usize)> = Vec::new();

    for (i, raw) in body.lines().enumerate() {
        let at = Some(i + 1);
        if raw.trim().is_empty() {
            continue;
        }
        let Some(caps) = INFILL_LINE.captures(raw) else {
            report.push(IssueKind::MalformedLine, at, format!("{raw:?}"));
            continue;
        };
        let text = caps[2].trim_end();
        if text.is_empty() {
            report.push(IssueKind::MalformedLine, at, "missing statement text");
            continue;
        }
        match caps[1].parse::<usize>() {
            Ok(n) if (1..=original.len()).contains(&n) => parsed.push((n, text.to_string(), i + 1)),
            _ => report.push(
                IssueKind::LineNumberOutOfBounds,
                at,
                format!("line {} outside 1..={}", &caps[1], original.len()),
            ),
        }
    }

    if parsed.windows(2).any(|w| w[0].0 > w[1].0) {
        report.push(IssueKind::NotSorted, None, "statements sorted by line number");
        parsed.sort_by_key(|(n, _, _)| *n);
    }

    let doc = original.docstring_span();
    let anchorable = |l: usize| {
        original.class_of(l) != Some(LineClass::Blank) && !doc.is_some_and(|d| d.contains(l))
    };
    let mut statements: Vec<OutlineStatement> = Vec::new();
    let mut seen_raw: Vec<usize> = Vec::new();
    for (n, text, at) in parsed {
        if seen_raw.contains(&n) {
            report.push(IssueKind::DuplicateLineNumber, Some(at), format!("line {n} repeated"));
            continue;
        }
        seen_raw.push(n);
        let anchor = if anchorable(n) {
            n
        } else {
            match (n + 1..=original.len()).find(|&l| anchorable(l)) {
                Some(next) => {
                    report.push(
                        IssueKind::CommentedEmptyLine,
                        Some(at),
                        format!("line {n} moved to {next}"),
                    );
                    next
                }
                None => {
                    report.push(
                        IssueKind::CommentedEmptyLine,
                        Some(at),
                        format!("line {n} has no code below it, dropped"),
                    );
                    continue;
                }
            }
        };
        if statements.last().is_some_and(|s| s.anchor == anchor) {
            report.push(
                IssueKind::DuplicateLineNumber,
                Some(at),
                format!("line {n} lands on line {anchor}, already taken"),
            );
            continue;
        }
        statements.push(OutlineStatement::new(anchor, text));
    }

    if statements.is_empty() {
        report.push(IssueKind::EmptyOutline, None, "no outline statements");
    }
    report.outline = Outline::new(statements);
    report
}
