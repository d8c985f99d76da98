use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("diff line {line}: {message}")]
pub struct DiffError {
    /// 1-based line of the input text.
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> DiffError {
    DiffError {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    Context,
    Added,
    Removed,
    /// `\ No newline at end of file` and similar markers; not counted.
    Marker,
}

impl LineKind {
    fn prefix(self) -> char {
        match self {
            LineKind::Context => ' ',
            LineKind::Added => '+',
            LineKind::Removed => '-',
            LineKind::Marker => '\\',
        }
    }

    pub fn is_change(self) -> bool {
        matches!(self, LineKind::Added | LineKind::Removed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffLine {
    pub kind: LineKind,
    pub text: String,
}

impl DiffLine {
    pub fn render(&self) -> String {
        format!("{}{}", self.kind.prefix(), self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub old_start: usize,
    pub old_len: usize,
    pub new_start: usize,
    pub new_len: usize,
    /// The `@@ ... @@` line as written.
    pub header: String,
    pub lines: Vec<DiffLine>,
}

impl Hunk {
    fn counts(&self) -> (usize, usize) {
        self.lines.iter().fold((0, 0), |(old, new), l| match l.kind {
            LineKind::Context => (old + 1, new + 1),
            LineKind::Removed => (old + 1, new),
            LineKind::Added => (old, new + 1),
            LineKind::Marker => (old, new),
        })
    }

    pub fn is_consistent(&self) -> bool {
        self.counts() == (self.old_len, self.new_len)
    }
}

/// How a line of a file's diff text is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextRole {
    FileHeader,
    HunkHeader,
    Body(LineKind),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDiff {
    pub old_path: Option<String>,
    pub new_path: Option<String>,
    /// Lines before the first hunk, as written (`diff --git`, `---`, `+++`, ...).
    pub header: Vec<String>,
    pub hunks: Vec<Hunk>,
}

impl FileDiff {
    /// The new path, or the old one for deletions.
    pub fn path(&self) -> &str {
        self.new_path
            .as_deref()
            .or(self.old_path.as_deref())
            .unwrap_or_default()
    }

    /// Every line of this file's diff text with its role.
    pub fn text_lines(&self) -> Vec<(TextRole, String)> {
        let mut out: Vec<(TextRole, String)> = self
            .header
            .iter()
            .map(|h| (TextRole::FileHeader, h.clone()))
            .collect();
        for hunk in &self.hunks {
            out.push((TextRole::HunkHeader, hunk.header.clone()));
            out.extend(hunk.lines.iter().map(|l| (TextRole::Body(l.kind), l.render())));
        }
        out
    }

    /// The diff text of this file, newline-terminated.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for (_, line) in self.text_lines() {
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    /// 1-based positions within [`FileDiff::text`] of added and removed lines.
    pub fn changed_positions(&self) -> Vec<usize> {
        self.text_lines()
            .iter()
            .enumerate()
            .filter(|(_, (role, _))| matches!(role, TextRole::Body(k) if k.is_change()))
            .map(|(i, _)| i + 1)
            .collect()
    }

    /// Applies the hunks to `old`, returning the new file lines.
    pub fn apply(&self, old: &[String]) -> Result<Vec<String>, DiffError> {
        let mut out = Vec::with_capacity(old.len());
        let mut cursor = 0;
        for (n, hunk) in self.hunks.iter().enumerate() {
            let start = if hunk.old_len == 0 {
                hunk.old_start
            } else {
                hunk.old_start.saturating_sub(1)
            };
            if start < cursor || start > old.len() {
                return Err(err(n + 1, format!("hunk {} starts outside the file", n + 1)));
            }
            out.extend_from_slice(&old[cursor..start]);
            cursor = start;
            for line in &hunk.lines {
                match line.kind {
                    LineKind::Context | LineKind::Removed => {
                        if old.get(cursor) != Some(&line.text) {
                            return Err(err(n + 1, format!("hunk {} does not match the file", n + 1)));
                        }
                        if line.kind == LineKind::Context {
                            out.push(line.text.clone());
                        }
                        cursor += 1;
                    }
                    LineKind::Added => out.push(line.text.clone()),
                    LineKind::Marker => {}
                }
            }
        }
        out.extend_from_slice(&old[cursor..]);
        Ok(out)
    }
}

/// A change under review: its description and per-file diffs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeList {
    pub description: String,
    pub files: Vec<FileDiff>,
}

impl ChangeList {
    pub fn new(description: impl Into<String>, files: Vec<FileDiff>) -> Result<Self, DiffError> {
        let mut seen = HashSet::new();
        for f in &files {
            if !seen.insert(f.path().to_string()) {
                return Err(err(0, format!("duplicate file path {:?}", f.path())));
            }
        }
        Ok(Self {
            description: description.into(),
            files,
        })
    }

    pub fn parse(description: impl Into<String>, diff: &str) -> Result<Self, DiffError> {
        Self::new(description, parse_unified_diff(diff)?)
    }

    pub fn diff_text(&self) -> String {
        self.files.iter().map(FileDiff::text).collect()
    }

    pub fn changed_line_count(&self) -> usize {
        self.files.iter().map(|f| f.changed_positions().len()).sum()
    }
}

static HUNK_HEADER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^@@ -([0-9]+)(?:,([0-9]+))? \+([0-9]+)(?:,([0-9]+))? @@").expect("static regex")
});

fn header_path(rest: &str) -> Option<String> {
    let path = rest.split('\t').next().unwrap_or(rest).trim_end();
    if path == "/dev/null" {
        return None;
    }
    let path = path
        .strip_prefix("a/")
        .or_else(|| path.strip_prefix("b/"))
        .unwrap_or(path);
    Some(path.to_string())
}

fn number(text: Option<regex::Match<'_>>, line: usize) -> Result<usize, DiffError> {
    match text {
        None => Ok(1),
        Some(m) => m
            .as_str()
            .parse()
            .map_err(|_| err(line, format!("count {:?} too large", m.as_str()))),
    }
}

/// Parses a multi-file unified diff. Text before a file's `---` line (such as
/// `diff --git` and `index` lines) is kept in that file's header.
pub fn parse_unified_diff(text: &str) -> Result<Vec<FileDiff>, DiffError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut files: Vec<FileDiff> = Vec::new();
    let mut preamble: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    let mut i = 0;

    while i < lines.len() {
        let line = lines[i];
        if let Some(old) = line.strip_prefix("--- ") {
            let Some(new) = lines.get(i + 1).and_then(|l| l.strip_prefix("+++ ")) else {
                return Err(err(i + 2, "expected a +++ line after ---"));
            };
            let mut header = std::mem::take(&mut preamble);
            header.push(line.to_string());
            header.push(lines[i + 1].to_string());
            let file = FileDiff {
                old_path: header_path(old),
                new_path: header_path(new),
                header,
                hunks: Vec::new(),
            };
            if file.old_path.is_none() && file.new_path.is_none() {
                return Err(err(i + 1, "both paths are /dev/null"));
            }
            if !seen.insert(file.path().to_string()) {
                return Err(err(i + 1, format!("duplicate file path {:?}", file.path())));
            }
            files.push(file);
            i += 2;
            continue;
        }
        if line.starts_with("@@") {
            let Some(file) = files.last_mut().filter(|_| preamble.is_empty()) else {
                return Err(err(i + 1, "hunk outside a file diff"));
            };
            let caps = HUNK_HEADER
                .captures(line)
                .ok_or_else(|| err(i + 1, "malformed hunk header"))?;
            let mut hunk = Hunk {
                old_start: number(caps.get(1), i + 1)?,
                old_len: number(caps.get(2), i + 1)?,
                new_start: number(caps.get(3), i + 1)?,
                new_len: number(caps.get(4), i + 1)?,
                header: line.to_string(),
                lines: Vec::new(),
            };
            let header_line = i + 1;
            i += 1;
            let (mut old, mut new) = (0, 0);
            while old < hunk.old_len || new < hunk.new_len {
                let Some(&body) = lines.get(i) else {
                    return Err(err(header_line, "hunk ends before its counts are met"));
                };
                let (kind, rest) = match body.chars().next() {
                    Some(' ') => (LineKind::Context, &body[1..]),
                    None => (LineKind::Context, ""),
                    Some('+') => (LineKind::Added, &body[1..]),
                    Some('-') => (LineKind::Removed, &body[1..]),
                    Some('\\') => (LineKind::Marker, &body[1..]),
                    Some(_) => return Err(err(i + 1, "hunk body contradicts its counts")),
                };
                match kind {
                    LineKind::Context => {
                        old += 1;
                        new += 1;
                    }
                    LineKind::Removed => old += 1,
                    LineKind::Added => new += 1,
                    LineKind::Marker => {}
                }
                if old > hunk.old_len || new > hunk.new_len {
                    return Err(err(i + 1, "hunk body contradicts its counts"));
                }
                hunk.lines.push(DiffLine {
                    kind,
                    text: rest.to_string(),
                });
                i += 1;
            }
            while let Some(marker) = lines.get(i).and_then(|l| l.strip_prefix('\\')) {
                hunk.lines.push(DiffLine {
                    kind: LineKind::Marker,
                    text: marker.to_string(),
                });
                i += 1;
            }
            file.hunks.push(hunk);
            continue;
        }
        if matches!(line.chars().next(), Some('+' | '-' | ' ')) && preamble.is_empty() && !files.is_empty() {
            return Err(err(i + 1, "diff line outside a hunk"));
        }
        preamble.push(line.to_string());
        i += 1;
    }
    if let Some(pos) = preamble.iter().position(|l| !l.trim().is_empty()) {
        let at = lines.len() - preamble.len() + pos + 1;
        return Err(err(at, "text outside any file diff"));
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_FILES: &str = "\
diff --git a/a.py b/a.py
--- a/a.py
+++ b/a.py
@@ -1,3 +1,4 @@
 one
+inserted
 two
 three
--- a/b.py
+++ b/b.py
@@ -2 +2 @@ def f():
-old
+new
";

    #[test]
    fn parses_headers_and_counts() {
        let files = parse_unified_diff(TWO_FILES).unwrap();
        assert_eq!(files.len(), 2);
        assert_eq!(files[0].path(), "a.py");
        assert_eq!(files[0].header[0], "diff --git a/a.py b/a.py");
        let h = &files[0].hunks[0];
        assert_eq!((h.old_start, h.old_len, h.new_start, h.new_len), (1, 3, 1, 4));
        assert!(h.is_consistent());
        let g = &files[1].hunks[0];
        assert_eq!((g.old_len, g.new_len), (1, 1));
        assert_eq!(files[1].path(), "b.py");
    }

    #[test]
    fn text_reproduces_input() {
        let files = parse_unified_diff(TWO_FILES).unwrap();
        let joined: String = files.iter().map(FileDiff::text).collect();
        assert_eq!(joined, TWO_FILES);
    }

    #[test]
    fn contradicting_counts_fail() {
        let bad = "--- a/x\n+++ b/x\n@@ -1,2 +1,2 @@\n a\n+b\n+c\n";
        let e = parse_unified_diff(bad).unwrap_err();
        assert_eq!(e.line, 6);
        let short = "--- a/x\n+++ b/x\n@@ -1,3 +1,3 @@\n a\n";
        assert_eq!(parse_unified_diff(short).unwrap_err().line, 3);
    }

    #[test]
    fn new_and_deleted_files() {
        let diff = "--- /dev/null\n+++ b/new.txt\n@@ -0,0 +1,2 @@\n+x\n+y\n--- a/gone.txt\n+++ /dev/null\n@@ -1 +0,0 @@\n-z\n";
        let files = parse_unified_diff(diff).unwrap();
        assert_eq!(files[0].path(), "new.txt");
        assert_eq!(files[0].old_path, None);
        assert_eq!(files[1].path(), "gone.txt");
        assert_eq!(files[0].apply(&[]).unwrap(), ["x", "y"]);
        assert!(files[1].apply(&["z".into()]).unwrap().is_empty());
    }

    #[test]
    fn duplicate_paths_fail() {
        let diff = "--- a/x\n+++ b/x\n@@ -1 +1 @@\n-a\n+b\n--- a/x\n+++ b/x\n@@ -1 +1 @@\n-a\n+b\n";
        assert!(parse_unified_diff(diff).unwrap_err().message.contains("duplicate"));
    }

    #[test]
    fn no_newline_marker_is_kept() {
        let diff = "--- a/x\n+++ b/x\n@@ -1 +1 @@\n-a\n\\ No newline at end of file\n+b\n\\ No newline at end of file\n";
        let files = parse_unified_diff(diff).unwrap();
        assert_eq!(files[0].text(), diff);
        assert_eq!(files[0].changed_positions(), [4, 6]);
    }

    #[test]
    fn apply_reconstructs_new_side() {
        let files = parse_unified_diff(TWO_FILES).unwrap();
        let old: Vec<String> = ["one", "two", "three"].map(String::from).to_vec();
        assert_eq!(files[0].apply(&old).unwrap(), ["one", "inserted", "two", "three"]);
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(parse_unified_diff("@@ -1 +1 @@\n-a\n+b\n").is_err());
        assert!(parse_unified_diff("--- a/x\n+++ b/x\n@@ -1 +1 @@\n-a\n+b\ntrailing words\n").is_err());
        assert!(parse_unified_diff("--- a/x\nnot plus\n").is_err());
        assert!(parse_unified_diff("").unwrap().is_empty());
    }
}
