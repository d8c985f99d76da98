use serde::{Deserialize, Serialize};

use crate::source::{classify_line, comment_text, LanguageProfile, LineClass, SourceUnit};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Slot {
    /// A code line that must be repeated exactly.
    Line { text: String },
    /// Zero or more comment lines, at least one when `required`.
    Comments { required: bool },
}

/// The legal shapes of an annotated copy of some code: the original lines in
/// order, with comment lines allowed only at certain places.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub slots: Vec<Slot>,
    #[serde(skip, default = "LanguageProfile::python")]
    profile: LanguageProfile,
}

impl Constraint {
    pub fn profile(&self) -> &LanguageProfile {
        &self.profile
    }

    /// 1-based original lines that may carry a comment directly above them.
    pub fn open_lines(&self) -> Vec<usize> {
        let mut line = 0;
        let mut open = Vec::new();
        for slot in &self.slots {
            match slot {
                Slot::Line { .. } => line += 1,
                Slot::Comments { .. } => open.push(line + 1),
            }
        }
        open
    }

    /// The line whose slot must be filled, if any.
    pub fn required_line(&self) -> Option<usize> {
        let mut line = 0;
        for slot in &self.slots {
            match slot {
                Slot::Line { .. } => line += 1,
                Slot::Comments { required: true } => return Some(line + 1),
                Slot::Comments { required: false } => {}
            }
        }
        None
    }

    fn lines(&self) -> impl Iterator<Item = &str> {
        self.slots.iter().filter_map(|s| match s {
            Slot::Line { text } => Some(text.as_str()),
            Slot::Comments { .. } => None,
        })
    }
}

pub fn build_constraint(unit: &SourceUnit) -> Constraint {
    let profile = unit.profile();
    let continuation = unit.continuation_flags();
    let docstring = unit.docstring_span();
    let body_start = unit.body_start();
    let classes: Vec<LineClass> = unit.lines().iter().map(|l| classify_line(profile, l)).collect();

    let open = |line: usize| {
        let i = line - 1;
        let first_of_function = line == 1 && body_start.is_some();
        let in_comment_block = i > 0 && classes[i - 1].is_comment() && classes[i].is_comment();
        !first_of_function
            && classes[i] != LineClass::Blank
            && !continuation[i]
            && !in_comment_block
            && !docstring.is_some_and(|d| d.contains(line))
    };
    let required = body_start.and_then(|start| (start..=unit.len()).find(|&l| open(l)));

    let mut slots = Vec::with_capacity(unit.len() * 2);
    for (i, text) in unit.lines().iter().enumerate() {
        let line = i + 1;
        if open(line) {
            slots.push(Slot::Comments {
                required: required == Some(line),
            });
        }
        slots.push(Slot::Line { text: text.clone() });
    }
    Constraint {
        slots,
        profile: profile.clone(),
    }
}

/// Outcome of checking a candidate against a [`Constraint`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Acceptance {
    pub accepted: bool,
    /// 1-based candidate line where matching first failed. One past the last
    /// line when the candidate ended too early.
    pub first_violation: Option<usize>,
}

fn is_outline_comment(profile: &LanguageProfile, line: &str) -> bool {
    classify_line(profile, line).is_comment()
        && comment_text(profile, line).is_some_and(|(t, _)| !t.is_empty())
}

/// Matches candidate lines against the constraint left to right.
///
/// Matching tracks every slot position reachable so far, since a comment line
/// in the candidate could be either an inserted comment or a literal comment
/// from the original.
pub fn constraint_accepts(constraint: &Constraint, candidate: &str) -> Acceptance {
    let slots = &constraint.slots;
    let profile = &constraint.profile;
    // State: (slot index, whether the comment slot at that index has taken a line).
    let closure = |states: Vec<(usize, bool)>| {
        let mut out: Vec<(usize, bool)> = Vec::new();
        let mut stack = states;
        while let Some(state) = stack.pop() {
            if out.contains(&state) {
                continue;
            }
            out.push(state);
            let (i, filled) = state;
            if let Some(Slot::Comments { required }) = slots.get(i) {
                if !required || filled {
                    stack.push((i + 1, false));
                }
            }
        }
        out
    };

    let mut states = closure(vec![(0, false)]);
    let lines: Vec<&str> = candidate.lines().collect();
    for (n, line) in lines.iter().enumerate() {
        let mut next = Vec::new();
        for &(i, _) in &states {
            match slots.get(i) {
                Some(Slot::Line { text }) if text == line => next.push((i + 1, false)),
                Some(Slot::Comments { .. }) if is_outline_comment(profile, line) => {
                    next.push((i, true))
                }
                _ => {}
            }
        }
        if next.is_empty() {
            return Acceptance {
                accepted: false,
                first_violation: Some(n + 1),
            };
        }
        states = closure(next);
    }
    if states.iter().any(|&(i, _)| i == slots.len()) {
        Acceptance {
            accepted: true,
            first_violation: None,
        }
    } else {
        Acceptance {
            accepted: false,
            first_violation: Some(lines.len() + 1),
        }
    }
}

impl Constraint {
    /// The original code lines, in order.
    pub fn literal_text(&self) -> Vec<&str> {
        self.lines().collect()
    }
}
