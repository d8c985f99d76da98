//! Outlines: anchored prose statements over a [`SourceUnit`].

use std::fmt;

use serde::{Deserialize, Serialize};
use similar::{capture_diff_slices, Algorithm, DiffOp};
use thiserror::Error;

use crate::source::{classify_line, indent_str, indentation, LineClass, SourceUnit};

/// One outline statement, placed directly above its 1-based anchor line.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OutlineStatement {
    pub anchor: usize,
    pub text: String,
    #[serde(default)]
    pub verified: bool,
}

impl OutlineStatement {
    pub fn new(anchor: usize, text: impl Into<String>) -> Self {
        Self {
            anchor,
            text: text.into(),
            verified: false,
        }
    }

    pub fn verified(anchor: usize, text: impl Into<String>) -> Self {
        Self {
            anchor,
            text: text.into(),
            verified: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Outline {
    pub statements: Vec<OutlineStatement>,
}

impl Outline {
    pub fn new(statements: Vec<OutlineStatement>) -> Self {
        Self { statements }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, OutlineStatement> {
        self.statements.iter()
    }

    pub fn anchors(&self) -> Vec<usize> {
        self.statements.iter().map(|s| s.anchor).collect()
    }

    /// Canonical `N| text` serialization used by line-number infilling.
    pub fn to_infilling_text(&self) -> String {
        self.statements
            .iter()
            .map(|s| format!("{}| {}", s.anchor, s.text))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

impl FromIterator<OutlineStatement> for Outline {
    fn from_iter<I: IntoIterator<Item = OutlineStatement>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

/// A reason an outline cannot be placed on a unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    OutOfRange { statement: usize, anchor: usize },
    BlankLine { statement: usize, anchor: usize },
    InsideDocstring { statement: usize, anchor: usize },
    NotIncreasing { statement: usize, anchor: usize },
    EmptyText { statement: usize },
    MultilineText { statement: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OutOfRange { statement, anchor } => {
                write!(f, "statement {statement}: anchor {anchor} is out of range")
            }
            Violation::BlankLine { statement, anchor } => {
                write!(f, "statement {statement}: anchor {anchor} is a blank line")
            }
            Violation::InsideDocstring { statement, anchor } => {
                write!(f, "statement {statement}: anchor {anchor} is inside the docstring")
            }
            Violation::NotIncreasing { statement, anchor } => write!(
                f,
                "statement {statement}: anchor {anchor} does not follow the previous anchor"
            ),
            Violation::EmptyText { statement } => write!(f, "statement {statement}: empty text"),
            Violation::MultilineText { statement } => {
                write!(f, "statement {statement}: text spans several lines")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OutlineError {
    #[error("outline does not fit the code: {}", join_violations(.0))]
    Placement(Vec<Violation>),
    #[error("star comment on line {line} has no code line below it")]
    DanglingComment { line: usize },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Checks every placement rule. Statements are numbered from 1 in the
/// returned violations.
pub fn validate(outline: &Outline, unit: &SourceUnit) -> Vec<Violation> {
    let mut out = Vec::new();
    let docstring = unit.docstring_span();
    let mut previous: Option<usize> = None;
    for (i, s) in outline.statements.iter().enumerate() {
        let statement = i + 1;
        let anchor = s.anchor;
        if anchor == 0 || anchor > unit.len() {
            out.push(Violation::OutOfRange { statement, anchor });
        } else if unit.class_of(anchor) == Some(LineClass::Blank) {
            out.push(Violation::BlankLine { statement, anchor });
        } else if docstring.is_some_and(|d| d.contains(anchor)) {
            out.push(Violation::InsideDocstring { statement, anchor });
        }
        if previous.is_some_and(|p| anchor <= p) {
            out.push(Violation::NotIncreasing { statement, anchor });
        }
        previous = Some(anchor);
        if s.text.contains('\n') || s.text.contains('\r') {
            out.push(Violation::MultilineText { statement });
        } else if s.text.trim().is_empty() {
            out.push(Violation::EmptyText { statement });
        }
    }
    out
}

fn ensure_valid(outline: &Outline, unit: &SourceUnit) -> Result<(), OutlineError> {
    let violations = validate(outline, unit);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(OutlineError::Placement(violations))
    }
}

/// How statement lines are written when interleaved with code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommentStyle {
    /// `#* text`, or `#*! text` for verified statements.
    Star,
    /// An ordinary line comment, `# text`.
    Plain,
}

/// Inserts each statement as a star comment above its anchor line.
pub fn render_interleaved(unit: &SourceUnit, outline: &Outline) -> Result<SourceUnit, OutlineError> {
    render_with_style(unit, outline, CommentStyle::Star)
}

pub fn render_with_style(
    unit: &SourceUnit,
    outline: &Outline,
    style: CommentStyle,
) -> Result<SourceUnit, OutlineError> {
    ensure_valid(outline, unit)?;
    let profile = unit.profile();
    let mut lines = Vec::with_capacity(unit.len() + outline.len());
    let mut statements = outline.statements.iter().peekable();
    for (i, line) in unit.lines().iter().enumerate() {
        while let Some(s) = statements.next_if(|s| s.anchor == i + 1) {
            let prefix = match (style, s.verified) {
                (CommentStyle::Star, true) => profile.verified_prefix(),
                (CommentStyle::Star, false) => profile.star_prefix(),
                (CommentStyle::Plain, _) => profile.line_comment_token().to_string(),
            };
            lines.push(format!("{}{} {}", indent_str(line), prefix, s.text));
        }
        lines.push(line.clone());
    }
    Ok(SourceUnit::new(lines, profile.clone()).expect("validated lines contain no newlines"))
}

/// The signature line followed by one bullet per statement, nested by the
/// indentation of the anchor lines.
pub fn render_standalone(unit: &SourceUnit, outline: &Outline) -> Result<String, OutlineError> {
    ensure_valid(outline, unit)?;
    let mut out = unit.line(1).unwrap_or_default().to_string();
    let mut levels: Vec<usize> = outline
        .statements
        .iter()
        .map(|s| indentation(unit.line(s.anchor).unwrap_or_default()))
        .collect();
    levels.sort_unstable();
    levels.dedup();
    for s in &outline.statements {
        let indent = indentation(unit.line(s.anchor).unwrap_or_default());
        let level = levels.binary_search(&indent).unwrap_or(0);
        out.push('\n');
        out.push_str(&"  ".repeat(level + 1));
        out.push_str("- ");
        out.push_str(&s.text);
    }
    Ok(out)
}

/// Removes star comments from `unit_with_comments`, returning the bare code
/// and the outline they encoded.
///
/// A run of star comments above one line becomes a single statement with the
/// texts joined by spaces. Star comments followed only by blank lines anchor
/// to the next non-blank line.
pub fn extract(unit_with_comments: &SourceUnit) -> Result<(SourceUnit, Outline), OutlineError> {
    let profile = unit_with_comments.profile();
    let mut bare: Vec<String> = Vec::with_capacity(unit_with_comments.len());
    let mut statements = Vec::new();
    // (texts, all verified, line of first comment)
    let mut pending: Option<(Vec<String>, bool, usize)> = None;

    for (i, line) in unit_with_comments.lines().iter().enumerate() {
        let class = classify_line(profile, line);
        if class.is_star() {
            let (text, verified) = star_text(profile, line);
            let entry = pending.get_or_insert_with(|| (Vec::new(), true, i + 1));
            if !text.is_empty() {
                entry.0.push(text.to_string());
            }
            entry.1 &= verified;
            continue;
        }
        bare.push(line.clone());
        if class == LineClass::Blank {
            continue;
        }
        if let Some((texts, verified, _)) = pending.take() {
            if !texts.is_empty() {
                statements.push(OutlineStatement {
                    anchor: bare.len(),
                    text: texts.join(" "),
                    verified,
                });
            }
        }
    }
    if let Some((_, _, line)) = pending {
        return Err(OutlineError::DanglingComment { line });
    }
    let unit = SourceUnit::new(bare, profile.clone()).expect("source lines contain no newlines");
    Ok((unit, Outline::new(statements)))
}

/// Star-comment text with exactly one leading space removed.
fn star_text<'a>(profile: &crate::source::LanguageProfile, line: &'a str) -> (&'a str, bool) {
    let body = line.trim_start();
    let (rest, verified) = match body.strip_prefix(profile.verified_prefix().as_str()) {
        Some(rest) => (rest, true),
        None => (
            body.strip_prefix(profile.star_prefix().as_str()).unwrap_or(body),
            false,
        ),
    };
    (rest.strip_prefix(' ').unwrap_or(rest), verified)
}

/// Maps statements through a line alignment of `old_unit` onto `new_unit`.
///
/// Unchanged lines keep their statements. Lines inside a replaced block are
/// paired positionally with the replacement lines. Statements on deleted
/// lines, or on lines that became blank, come back in the stale list.
pub fn remap_anchors(
    outline: &Outline,
    old_unit: &SourceUnit,
    new_unit: &SourceUnit,
) -> (Outline, Vec<OutlineStatement>) {
    let mut kept = Vec::new();
    let mut stale = Vec::new();
    for (s, target) in outline.statements.iter().zip(remapped_anchors(outline, old_unit, new_unit)) {
        match target {
            Some(anchor) => kept.push(OutlineStatement { anchor, ..s.clone() }),
            None => stale.push(s.clone()),
        }
    }
    (Outline::new(kept), stale)
}

/// New 1-based anchor for each statement, `None` when it went stale.
fn remapped_anchors(outline: &Outline, old_unit: &SourceUnit, new_unit: &SourceUnit) -> Vec<Option<usize>> {
    let mapping = line_mapping(old_unit, new_unit);
    outline
        .statements
        .iter()
        .map(|s| {
            s.anchor
                .checked_sub(1)
                .and_then(|i| mapping.get(i).copied().flatten())
                .map(|j| j + 1)
                .filter(|&a| new_unit.class_of(a) != Some(LineClass::Blank))
        })
        .collect()
}

/// For each 0-based old line, its 0-based new line, if any.
fn line_mapping(old_unit: &SourceUnit, new_unit: &SourceUnit) -> Vec<Option<usize>> {
    let mut mapping = vec![None; old_unit.len()];
    for op in capture_diff_slices(Algorithm::Myers, old_unit.lines(), new_unit.lines()) {
        match op {
            DiffOp::Equal {
                old_index,
                new_index,
                len,
            } => {
                for k in 0..len {
                    mapping[old_index + k] = Some(new_index + k);
                }
            }
            DiffOp::Replace {
                old_index,
                old_len,
                new_index,
                new_len,
            } => {
                for k in 0..old_len.min(new_len) {
                    mapping[old_index + k] = Some(new_index + k);
                }
            }
            DiffOp::Delete { .. } | DiffOp::Insert { .. } => {}
        }
    }
    mapping
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutlineDiff {
    pub added: Vec<OutlineStatement>,
    pub removed: Vec<OutlineStatement>,
    /// (old, new) pairs at the same remapped anchor.
    pub changed: Vec<(OutlineStatement, OutlineStatement)>,
}

impl OutlineDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.changed.is_empty()
    }
}

impl fmt::Display for OutlineDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.removed {
            writeln!(f, "- [{}] {}", s.anchor, s.text)?;
        }
        for (old, new) in &self.changed {
            writeln!(f, "~ [{}] {}", old.anchor, old.text)?;
            writeln!(f, "  [{}] {}", new.anchor, new.text)?;
        }
        for s in &self.added {
            writeln!(f, "+ [{}] {}", s.anchor, s.text)?;
        }
        Ok(())
    }
}

/// Statement-level difference between two outlines, matched by anchor after
/// remapping the old outline onto the new code.
pub fn diff_outlines(
    old: &Outline,
    new: &Outline,
    old_unit: &SourceUnit,
    new_unit: &SourceUnit,
) -> OutlineDiff {
    let targets = remapped_anchors(old, old_unit, new_unit);
    let mut diff = OutlineDiff::default();
    let mut matched = vec![false; old.len()];
    for n in &new.statements {
        match targets.iter().position(|t| *t == Some(n.anchor)) {
            Some(k) => {
                matched[k] = true;
                let original = &old.statements[k];
                if original.text != n.text {
                    diff.changed.push((original.clone(), n.clone()));
                }
            }
            None => diff.added.push(n.clone()),
        }
    }
    diff.removed = old
        .statements
        .iter()
        .zip(&matched)
        .filter(|(_, m)| !**m)
        .map(|(s, _)| s.clone())
        .collect();
    diff
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::LanguageProfile;

    pub(crate) const FIG_PLAIN: &str = "\
def nearest_neighbor_tour(nodes):
  distances = scipy.spatial.distance_matrix(nodes, nodes)
  current_node = 0
  tour = [current_node]
  tour_cost = 0.0
  distance_to_start = distances[current_node].copy()

  for _ in range(len(nodes) - 1):
    distances[:, current_node] = np.Inf
    neighbor = distances[current_node].argmin()
    tour_cost += distances[current_node][neighbor]
    tour.append(neighbor)
    current_node = neighbor

  tour_cost += distance_to_start[current_node]
  return tour_cost, tour
";

    fn py(text: &str) -> SourceUnit {
        SourceUnit::from_text(text, LanguageProfile::python())
    }

    fn fig_outline() -> Outline {
        Outline::new(vec![
            OutlineStatement::new(2, "Compute all pairwise distances between nodes."),
            OutlineStatement::new(3, "Initialize the tour."),
            OutlineStatement::new(8, "Iteratively add all nodes to the tour."),
            OutlineStatement::new(9, "Mark the current node as visited."),
            OutlineStatement::new(10, "Extend the tour by going to the nearest unvisited neighbor."),
            OutlineStatement::new(15, "Complete the cycle back to the starting node."),
        ])
    }

    #[test]
    fn fig_outline_is_valid() {
        assert!(validate(&fig_outline(), &py(FIG_PLAIN)).is_empty());
    }

    #[test]
    fn validate_reports_each_rule() {
        let unit = py("def f(x):\n  \"\"\"Doc.\"\"\"\n\n  y = x\n  return y\n");
        let check = |s: Vec<OutlineStatement>| validate(&Outline::new(s), &unit);
        assert_eq!(
            check(vec![OutlineStatement::new(0, "a")]),
            [Violation::OutOfRange { statement: 1, anchor: 0 }]
        );
        assert_eq!(
            check(vec![OutlineStatement::new(6, "a")]),
            [Violation::OutOfRange { statement: 1, anchor: 6 }]
        );
        assert_eq!(
            check(vec![OutlineStatement::new(3, "a")]),
            [Violation::BlankLine { statement: 1, anchor: 3 }]
        );
        assert_eq!(
            check(vec![OutlineStatement::new(2, "a")]),
            [Violation::InsideDocstring { statement: 1, anchor: 2 }]
        );
        assert_eq!(
            check(vec![OutlineStatement::new(4, "a"), OutlineStatement::new(4, "b")]),
            [Violation::NotIncreasing { statement: 2, anchor: 4 }]
        );
        assert_eq!(
            check(vec![OutlineStatement::new(4, "  ")]),
            [Violation::EmptyText { statement: 1 }]
        );
        assert_eq!(
            check(vec![OutlineStatement::new(4, "a\nb")]),
            [Violation::MultilineText { statement: 1 }]
        );
    }

    #[test]
    fn renders_interleaved_star_comments() {
        let unit = py("def sq(x):\n  return x**2\n");
        let outline = Outline::new(vec![OutlineStatement::new(2, "Squares the input.")]);
        let out = render_interleaved(&unit, &outline).unwrap();
        assert_eq!(out.lines(), ["def sq(x):", "  #* Squares the input.", "  return x**2"]);

        let verified = Outline::new(vec![OutlineStatement::verified(2, "Squares.")]);
        let out = render_interleaved(&unit, &verified).unwrap();
        assert_eq!(out.line(2), Some("  #*! Squares."));

        assert_eq!(render_interleaved(&unit, &Outline::empty()).unwrap(), unit);
    }

    #[test]
    fn render_copies_tabs_and_rejects_invalid() {
        let unit = py("def f():\n\tx = 1\n");
        let out = render_interleaved(&unit, &Outline::new(vec![OutlineStatement::new(2, "Set x.")]))
            .unwrap();
        assert_eq!(out.line(2), Some("\t#* Set x."));
        let err = render_interleaved(&unit, &Outline::new(vec![OutlineStatement::new(9, "x")]));
        assert!(matches!(err, Err(OutlineError::Placement(v)) if v.len() == 1));
    }

    #[test]
    fn renders_standalone_with_nesting() {
        let text = render_standalone(&py(FIG_PLAIN), &fig_outline()).unwrap();
        assert_eq!(
            text,
            "def nearest_neighbor_tour(nodes):\n\
             \x20 - Compute all pairwise distances between nodes.\n\
             \x20 - Initialize the tour.\n\
             \x20 - Iteratively add all nodes to the tour.\n\
             \x20   - Mark the current node as visited.\n\
             \x20   - Extend the tour by going to the nearest unvisited neighbor.\n\
             \x20 - Complete the cycle back to the starting node."
        );
        let unit = py("def f():\n  a = 1\n  b = 2\n");
        let flat = render_standalone(
            &unit,
            &Outline::new(vec![OutlineStatement::new(2, "A."), OutlineStatement::new(3, "B.")]),
        )
        .unwrap();
        assert_eq!(flat, "def f():\n  - A.\n  - B.");
        assert_eq!(render_standalone(&unit, &Outline::empty()).unwrap(), "def f():");
    }

    #[test]
    fn extract_inverts_render() {
        let unit = py(FIG_PLAIN);
        let rendered = render_interleaved(&unit, &fig_outline()).unwrap();
        assert_eq!(extract(&rendered).unwrap(), (unit, fig_outline()));
    }

    #[test]
    fn extract_keeps_plain_comments_and_joins_runs() {
        let unit = py("def f():\n  # plain\n  x = 1\n");
        let (bare, outline) = extract(&unit).unwrap();
        assert_eq!(bare, unit);
        assert!(outline.is_empty());

        let runs = py("def f():\n  #* First half\n  #* second half.\n  x = 1\n");
        let (bare, outline) = extract(&runs).unwrap();
        assert_eq!(bare.lines(), ["def f():", "  x = 1"]);
        assert_eq!(outline.statements, [OutlineStatement::new(2, "First half second half.")]);
    }

    #[test]
    fn extract_skips_blank_lines_and_reports_dangling() {
        let unit = py("def f():\n  #* Set up.\n\n  x = 1\n");
        let (bare, outline) = extract(&unit).unwrap();
        assert_eq!(bare.len(), 3);
        assert_eq!(outline.statements, [OutlineStatement::new(3, "Set up.")]);

        let dangling = py("def f():\n  x = 1\n  #* Nothing below.\n\n");
        assert_eq!(extract(&dangling), Err(OutlineError::DanglingComment { line: 3 }));
    }

    #[test]
    fn remap_shifts_and_reports_stale() {
        let old = py("def f():\n  a = 1\n  b = 2\n");
        let outline = Outline::new(vec![OutlineStatement::new(2, "A."), OutlineStatement::new(3, "B.")]);
        let shifted = py("def f():\n  z = 0\n  y = 0\n  a = 1\n  b = 2\n");
        let (moved, stale) = remap_anchors(&outline, &old, &shifted);
        assert_eq!(moved.anchors(), [4, 5]);
        assert!(stale.is_empty());

        let deleted = py("def f():\n  b = 2\n");
        let (moved, stale) = remap_anchors(&outline, &old, &deleted);
        assert_eq!(moved.statements, [OutlineStatement::new(2, "B.")]);
        assert_eq!(stale, [OutlineStatement::new(2, "A.")]);

        let (same, stale) = remap_anchors(&outline, &old, &old);
        assert_eq!(same, outline);
        assert!(stale.is_empty());
    }

    #[test]
    fn remap_follows_edited_lines() {
        let old = py("def f():\n  total = qty\n  return total\n");
        let new = py("def f():\n  total = qty * price\n  return total\n");
        let outline = Outline::new(vec![OutlineStatement::new(2, "Compute the total.")]);
        let (moved, stale) = remap_anchors(&outline, &old, &new);
        assert_eq!(moved.anchors(), [2]);
        assert!(stale.is_empty());
    }

    #[test]
    fn diff_reports_changed_added_removed() {
        let unit = py("def f(items):\n  total = sum(i.quantity for i in items)\n  log(total)\n  return total\n");
        let old = Outline::new(vec![
            OutlineStatement::new(2, "Compute the total quantity."),
            OutlineStatement::new(3, "Log it."),
        ]);
        assert!(diff_outlines(&old, &old, &unit, &unit).is_empty());

        let new_unit = py("def f(items):\n  total = sum(i.quantity * i.price for i in items)\n  log(total)\n  return total\n");
        let new = Outline::new(vec![
            OutlineStatement::new(2, "Compute the total value."),
            OutlineStatement::new(3, "Log it."),
            OutlineStatement::new(4, "Return it."),
        ]);
        let diff = diff_outlines(&old, &new, &unit, &new_unit);
        assert_eq!(diff.changed.len(), 1);
        assert_eq!(diff.changed[0].0.text, "Compute the total quantity.");
        assert_eq!(diff.changed[0].1.text, "Compute the total value.");
        assert_eq!(diff.added, [OutlineStatement::new(4, "Return it.")]);
        assert!(diff.removed.is_empty());

        let fewer = Outline::new(vec![OutlineStatement::new(3, "Log it.")]);
        let diff = diff_outlines(&old, &fewer, &unit, &unit);
        assert_eq!(diff.removed, [OutlineStatement::new(2, "Compute the total quantity.")]);
    }
}
