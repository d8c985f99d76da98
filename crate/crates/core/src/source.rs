//! Line-indexed source text with per-language comment rules.
//!
//! Everything here is textual. There is no grammar behind [`SourceUnit`]:
//! comment and docstring detection is a light lexical scan that is good
//! enough to decide where outline statements may be placed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Widest line number `number_lines` will emit.
pub const MAX_NUMBERED_LINES: usize = 999;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SourceError {
    #[error("line {index} contains a newline character")]
    LineContainsNewline { index: usize },
    #[error("unit has {count} lines; line numbering supports at most {MAX_NUMBERED_LINES}")]
    TooManyLines { count: usize },
    #[error("unit has no lines")]
    EmptyUnit,
    #[error("invalid language profile: {0}")]
    InvalidProfile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocstringRule {
    PythonTripleQuote,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
struct ProfileSpec {
    name: String,
    line_comment_token: String,
    #[serde(default = "default_docstring_rule")]
    docstring_rule: DocstringRule,
}

fn default_docstring_rule() -> DocstringRule {
    DocstringRule::None
}

/// Comment syntax of one language.
///
/// The star prefix is always the line comment token followed by `*`, and the
/// verified prefix appends `!` to that.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ProfileSpec")]
pub struct LanguageProfile {
    name: String,
    line_comment_token: String,
    docstring_rule: DocstringRule,
}

impl TryFrom<ProfileSpec> for LanguageProfile {
    type Error = SourceError;

    fn try_from(spec: ProfileSpec) -> Result<Self, Self::Error> {
        LanguageProfile::new(spec.name, spec.line_comment_token, spec.docstring_rule)
    }
}

impl LanguageProfile {
    pub const STAR_SUFFIX: &'static str = "*";
    pub const VERIFIED_SUFFIX: &'static str = "!";

    pub fn new(
        name: impl Into<String>,
        line_comment_token: impl Into<String>,
        docstring_rule: DocstringRule,
    ) -> Result<Self, SourceError> {
        let name = name.into();
        let line_comment_token = line_comment_token.into();
        if name.trim().is_empty() {
            return Err(SourceError::InvalidProfile("empty name".into()));
        }
        if line_comment_token.is_empty() || line_comment_token.chars().any(char::is_whitespace) {
            return Err(SourceError::InvalidProfile(format!(
                "comment token {line_comment_token:?} must be non-empty and contain no whitespace"
            )));
        }
        Ok(Self {
            name,
            line_comment_token,
            docstring_rule,
        })
    }

    pub fn python() -> Self {
        Self {
            name: "python".into(),
            line_comment_token: "#".into(),
            docstring_rule: DocstringRule::PythonTripleQuote,
        }
    }

    /// `//` comments; covers C, C++, Java, Go, JavaScript, Rust and friends.
    pub fn c_like() -> Self {
        Self {
            name: "c_like".into(),
            line_comment_token: "//".into(),
            docstring_rule: DocstringRule::None,
        }
    }

    /// Looks up one of the shipped profiles.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "python" => Some(Self::python()),
            "c_like" => Some(Self::c_like()),
            _ => None,
        }
    }

    /// Picks a shipped profile from a file extension.
    pub fn for_extension(ext: &str) -> Option<Self> {
        match ext {
            "py" | "pyi" => Some(Self::python()),
            "c" | "h" | "cc" | "cpp" | "hpp" | "cxx" | "java" | "js" | "ts" | "go" | "rs"
            | "kt" | "swift" | "cs" | "scala" | "smali" => Some(Self::c_like()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn line_comment_token(&self) -> &str {
        &self.line_comment_token
    }

    pub fn docstring_rule(&self) -> DocstringRule {
        self.docstring_rule
    }

    pub fn star_prefix(&self) -> String {
        format!("{}{}", self.line_comment_token, Self::STAR_SUFFIX)
    }

    pub fn verified_prefix(&self) -> String {
        format!("{}{}{}", self.line_comment_token, Self::STAR_SUFFIX, Self::VERIFIED_SUFFIX)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LineClass {
    Blank,
    Comment,
    StarComment,
    VerifiedStarComment,
    Code,
}

impl LineClass {
    /// Any kind of line comment, star or not.
    pub fn is_comment(self) -> bool {
        matches!(
            self,
            LineClass::Comment | LineClass::StarComment | LineClass::VerifiedStarComment
        )
    }

    pub fn is_star(self) -> bool {
        matches!(self, LineClass::StarComment | LineClass::VerifiedStarComment)
    }
}

pub fn classify_line(profile: &LanguageProfile, line: &str) -> LineClass {
    let body = line.trim_start();
    if body.is_empty() {
        return LineClass::Blank;
    }
    let token = profile.line_comment_token();
    let Some(after_token) = body.strip_prefix(token) else {
        return LineClass::Code;
    };
    match after_token.strip_prefix(LanguageProfile::STAR_SUFFIX) {
        Some(rest) if rest.starts_with(LanguageProfile::VERIFIED_SUFFIX) => {
            LineClass::VerifiedStarComment
        }
        Some(_) => LineClass::StarComment,
        None => LineClass::Comment,
    }
}

/// Count of leading whitespace characters. Tabs count as one character.
pub fn indentation(line: &str) -> usize {
    line.chars().take_while(|c| c.is_whitespace()).count()
}

/// The leading whitespace of `line`, verbatim.
pub fn indent_str(line: &str) -> &str {
    let end = line.len() - line.trim_start().len();
    &line[..end]
}

/// Text of a comment line after the comment token, an optional star marker
/// and surrounding whitespace. Returns the text and the verified flag.
pub fn comment_text<'a>(profile: &LanguageProfile, line: &'a str) -> Option<(&'a str, bool)> {
    let body = line.trim_start().strip_prefix(profile.line_comment_token())?;
    let (body, verified) = match body.strip_prefix(LanguageProfile::STAR_SUFFIX) {
        Some(rest) => match rest.strip_prefix(LanguageProfile::VERIFIED_SUFFIX) {
            Some(rest) => (rest, true),
            None => (rest, false),
        },
        None => (body, false),
    };
    Some((body.trim(), verified))
}

/// Removes a trailing line comment that sits outside string literals.
pub fn strip_trailing_comment<'a>(profile: &LanguageProfile, line: &'a str) -> &'a str {
    let mut lexer = Lexer::new(profile);
    let cut = lexer.scan(line).comment_start.unwrap_or(line.len());
    line[..cut].trim_end()
}

/// A 1-based inclusive line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineSpan {
    pub start: usize,
    pub end: usize,
}

impl LineSpan {
    pub fn contains(&self, line: usize) -> bool {
        self.start <= line && line <= self.end
    }
}

/// Code text split into lines, together with its language profile.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SourceUnit {
    lines: Vec<String>,
    profile: LanguageProfile,
}

impl SourceUnit {
    pub fn new(lines: Vec<String>, profile: LanguageProfile) -> Result<Self, SourceError> {
        if let Some(i) = lines.iter().position(|l| l.contains('\n')) {
            return Err(SourceError::LineContainsNewline { index: i + 1 });
        }
        Ok(Self { lines, profile })
    }

    /// Splits text on `\n`, dropping a `\r` before each newline and the empty
    /// piece after a final newline.
    pub fn from_text(text: &str, profile: LanguageProfile) -> Self {
        let mut lines: Vec<String> = text
            .split('\n')
            .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
            .collect();
        if lines.last().is_some_and(|l| l.is_empty()) {
            lines.pop();
        }
        Self { lines, profile }
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn into_lines(self) -> Vec<String> {
        self.lines
    }

    pub fn profile(&self) -> &LanguageProfile {
        &self.profile
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// 1-based line access.
    pub fn line(&self, index: usize) -> Option<&str> {
        index.checked_sub(1).and_then(|i| self.lines.get(i)).map(String::as_str)
    }

    /// Class of the 1-based line `index`.
    pub fn class_of(&self, index: usize) -> Option<LineClass> {
        self.line(index).map(|l| classify_line(&self.profile, l))
    }

    /// Lines joined with `\n`, with a final newline when non-empty.
    pub fn to_text(&self) -> String {
        let mut out = self.lines.join("\n");
        if !self.lines.is_empty() {
            out.push('\n');
        }
        out
    }

    /// Lines joined with `\n` and no final newline.
    pub fn joined(&self) -> String {
        self.lines.join("\n")
    }

    /// Prefixes each line with its number right-aligned in three columns and
    /// a `|` separator.
    pub fn number_lines(&self) -> Result<String, SourceError> {
        if self.lines.is_empty() {
            return Err(SourceError::EmptyUnit);
        }
        if self.lines.len() > MAX_NUMBERED_LINES {
            return Err(SourceError::TooManyLines {
                count: self.lines.len(),
            });
        }
        Ok(self
            .lines
            .iter()
            .enumerate()
            .map(|(i, l)| format!("{:>3}|{}", i + 1, l))
            .collect::<Vec<_>>()
            .join("\n"))
    }

    /// Range of the docstring that opens a Python function body.
    pub fn docstring_span(&self) -> Option<LineSpan> {
        self.structure().docstring
    }

    /// First line of the function body after the signature and docstring,
    /// when the function structure is recognizable.
    pub fn body_start(&self) -> Option<usize> {
        self.structure().body_start
    }

    /// For each line, whether it begins in the middle of a multi-line
    /// statement: inside unbalanced brackets, inside a multi-line string, or
    /// after an explicit `\` continuation.
    pub fn continuation_flags(&self) -> Vec<bool> {
        let mut lexer = Lexer::new(&self.profile);
        let mut pending = false;
        self.lines
            .iter()
            .map(|line| {
                let starts_inside = pending;
                let scan = lexer.scan(line);
                let code = &line[..scan.comment_start.unwrap_or(line.len())];
                let backslash = scan.comment_start.is_none() && code.trim_end().ends_with('\\');
                pending = lexer.depth > 0 || lexer.in_multiline_string() || backslash;
                starts_inside
            })
            .collect()
    }

    fn structure(&self) -> Structure {
        match self.profile.docstring_rule {
            DocstringRule::PythonTripleQuote => python_structure(self),
            DocstringRule::None => Structure::default(),
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Structure {
    docstring: Option<LineSpan>,
    body_start: Option<usize>,
}

fn python_structure(unit: &SourceUnit) -> Structure {
    let lines = unit.lines();
    let Some(def_idx) = lines.iter().position(|l| {
        let t = l.trim_start();
        t.starts_with("def ") || t.starts_with("async def ")
    }) else {
        return Structure::default();
    };

    // Signature ends on the first line that closes all brackets with a colon.
    let mut lexer = Lexer::new(unit.profile());
    let mut sig_end = None;
    for (i, line) in lines.iter().enumerate().skip(def_idx) {
        let scan = lexer.scan(line);
        let code = line[..scan.comment_start.unwrap_or(line.len())].trim_end();
        if lexer.depth > 0 || lexer.in_multiline_string() || code.ends_with('\\') {
            continue;
        }
        if code.ends_with(':') {
            sig_end = Some(i);
        }
        // Otherwise a one-line body (`def f(): return 1`) or unparseable.
        break;
    }
    let Some(sig_end) = sig_end else {
        return Structure::default();
    };

    let next_non_blank = |from: usize| {
        (from..lines.len()).find(|&j| classify_line(unit.profile(), &lines[j]) != LineClass::Blank)
    };
    let Some(first) = next_non_blank(sig_end + 1) else {
        return Structure::default();
    };
    let docstring = docstring_at(lines, first);
    let body_start = match docstring {
        Some(span) => next_non_blank(span.end),
        None => Some(first),
    }
    .map(|j| j + 1);
    Structure {
        docstring,
        body_start,
    }
}

/// Recognizes a string literal statement starting at 0-based line `idx`.
fn docstring_at(lines: &[String], idx: usize) -> Option<LineSpan> {
    let text = lines[idx].trim_start();
    let prefix_len = text
        .chars()
        .take_while(|c| matches!(c, 'r' | 'R' | 'u' | 'U' | 'b' | 'B'))
        .count();
    if prefix_len > 2 {
        return None;
    }
    let rest = &text[prefix_len..];
    let delim = ["\"\"\"", "'''", "\"", "'"]
        .into_iter()
        .find(|d| rest.starts_with(d))?;
    let after_open = &rest[delim.len()..];
    if after_open.contains(delim) {
        return Some(LineSpan {
            start: idx + 1,
            end: idx + 1,
        });
    }
    if delim.len() == 1 {
        return None;
    }
    (idx + 1..lines.len())
        .find(|&j| lines[j].contains(delim))
        .map(|j| LineSpan {
            start: idx + 1,
            end: j + 1,
        })
}

struct LineScan {
    comment_start: Option<usize>,
}

/// Tracks bracket depth and multi-line strings across lines.
struct Lexer<'p> {
    profile: &'p LanguageProfile,
    depth: usize,
    open_string: Option<&'static str>,
}

impl<'p> Lexer<'p> {
    fn new(profile: &'p LanguageProfile) -> Self {
        Self {
            profile,
            depth: 0,
            open_string: None,
        }
    }

    fn in_multiline_string(&self) -> bool {
        self.open_string.is_some()
    }

    fn multiline_delims(&self) -> &'static [&'static str] {
        match self.profile.docstring_rule {
            DocstringRule::PythonTripleQuote => &["\"\"\"", "'''"],
            DocstringRule::None => &["`"],
        }
    }

    fn scan(&mut self, line: &str) -> LineScan {
        let token = self.profile.line_comment_token();
        let bytes = line.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let rest = &line[i..];
            if let Some(delim) = self.open_string {
                match rest.find(delim) {
                    Some(pos) => {
                        i += pos + delim.len();
                        self.open_string = None;
                        continue;
                    }
                    None => return LineScan { comment_start: None },
                }
            }
            if rest.starts_with(token) {
                return LineScan {
                    comment_start: Some(i),
                };
            }
            if let Some(delim) = self.multiline_delims().iter().find(|d| rest.starts_with(**d)) {
                self.open_string = Some(delim);
                i += delim.len();
                continue;
            }
            match bytes[i] {
                q @ (b'"' | b'\'') => {
                    // Single-line string; ends at the matching quote or the
                    // end of the line.
                    i += 1;
                    while i < bytes.len() && bytes[i] != q {
                        i += if bytes[i] == b'\\' { 2 } else { 1 };
                    }
                    i += 1;
                    continue;
                }
                b'(' | b'[' | b'{' => self.depth += 1,
                b')' | b']' | b'}' => self.depth = self.depth.saturating_sub(1),
                _ => {}
            }
            i += rest.chars().next().map_or(1, char::len_utf8);
        }
        LineScan { comment_start: None }
    }
}
