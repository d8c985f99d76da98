//! Generators and checks shared by the property tests and the acceptance
//! suite.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fs;

use proptest::prelude::*;

use nlo_core::gateway::FnBackend;
use nlo_core::generation::{
    build_constraint, constraint_accepts, parse_infilling, parse_interleaved, RequestOptions,
};
use nlo_core::outline::{extract, remap_anchors, render_interleaved, render_with_style, CommentStyle};
use nlo_core::virtual_split::{
    split_files, split_files_sequential, topics_from_titles, ChangeList, VirtualSplit,
};
use nlo_core::workbench::{sidecar_read, sidecar_write};
use nlo_core::{LanguageProfile, Outline, OutlineStatement, SourceUnit};

// ---- units with outlines ----

#[derive(Debug, Clone)]
pub struct Annotated {
    pub unit: SourceUnit,
    pub outline: Outline,
}

const PY_CODE: &[&str] = &[
    "x = 1",
    "y = f(x)",
    "return y",
    "if x:",
    "for i in range(3):",
    "print(i)",
    "total += i  # running",
    "pass",
    "items.append(i)",
];

const C_CODE: &[&str] = &[
    "int x = 1;",
    "y = f(x);",
    "return y;",
    "if (x) {",
    "}",
    "for (int i = 0; i < 3; i++) {",
    "total += i;  // running",
    "log(\"a // b\");",
];

const WORDS: &[&str] = &["Set", "up", "the", "loop", "state.", "Return", "result", "for", "each", "item"];

fn indent() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["  ", "    ", "      "])
}

fn body_line(code: &'static [&'static str], comment: &'static str, comments: bool) -> BoxedStrategy<String> {
    let stmt = (indent(), prop::sample::select(code)).prop_map(|(i, s)| format!("{i}{s}"));
    if comments {
        prop_oneof![
            6 => stmt,
            2 => Just(String::new()),
            1 => indent().prop_map(move |i| format!("{i}{comment} note")),
        ]
        .boxed()
    } else {
        prop_oneof![6 => stmt, 2 => Just(String::new())].boxed()
    }
}

fn python_lines(comments: bool) -> impl Strategy<Value = Vec<String>> {
    let docstring = prop_oneof![
        Just(vec![]),
        Just(vec!["  \"\"\"One line.\"\"\"".to_string()]),
        Just(vec![
            "  \"\"\"Summary.".to_string(),
            String::new(),
            "  Details here.".to_string(),
            "  \"\"\"".to_string(),
        ]),
    ];
    (any::<bool>(), docstring, prop::collection::vec(body_line(PY_CODE, "#", comments), 1..12)).prop_map(
        |(header, doc, body)| {
            let mut lines = Vec::new();
            if header {
                lines.push("def f(x):".to_string());
                lines.extend(doc);
            }
            lines.extend(body);
            lines
        },
    )
}

fn c_lines(comments: bool) -> impl Strategy<Value = Vec<String>> {
    (any::<bool>(), prop::collection::vec(body_line(C_CODE, "//", comments), 1..12)).prop_map(|(header, body)| {
        let mut lines = Vec::new();
        if header {
            lines.push("int f(int x) {".to_string());
        }
        lines.extend(body);
        lines
    })
}

fn statement() -> impl Strategy<Value = (String, bool)> {
    (prop::collection::vec(prop::sample::select(WORDS), 1..5), any::<bool>()).prop_map(|(w, v)| (w.join(" "), v))
}

/// A unit plus a valid outline on a random subset of its anchorable lines.
///
/// `comments` allows plain comment lines in the code. `min_statements`
/// discards cases with fewer statements.
pub fn annotated(comments: bool, min_statements: usize) -> impl Strategy<Value = Annotated> {
    let units = prop_oneof![
        python_lines(comments).prop_map(|l| (l, LanguageProfile::python())),
        c_lines(comments).prop_map(|l| (l, LanguageProfile::c_like())),
    ];
    units
        .prop_flat_map(|(lines, profile)| {
            let n = lines.len();
            (
                Just(lines),
                Just(profile),
                prop::collection::vec(any::<bool>(), n),
                prop::collection::vec(statement(), n),
            )
        })
        .prop_map(|(lines, profile, pick, texts)| {
            let unit = SourceUnit::new(lines, profile).unwrap();
            let docstring = unit.docstring_span();
            let statements = (1..=unit.len())
                .filter(|&l| pick[l - 1])
                .filter(|&l| !unit.line(l).unwrap().trim().is_empty())
                .filter(|&l| !docstring.is_some_and(|d| d.contains(l)))
                .map(|l| {
                    let (text, verified) = texts[l - 1].clone();
                    OutlineStatement { anchor: l, text, verified }
                })
                .collect();
            Annotated {
                unit,
                outline: Outline::new(statements),
            }
        })
        .prop_filter("too few statements", move |a| a.outline.len() >= min_statements)
}

fn unverified(outline: &Outline) -> Outline {
    outline
        .iter()
        .map(|s| OutlineStatement::new(s.anchor, s.text.clone()))
        .collect()
}

pub fn check_render_extract(a: &Annotated) -> Result<(), String> {
    let rendered = render_interleaved(&a.unit, &a.outline).map_err(|e| e.to_string())?;
    let reparsed = SourceUnit::from_text(&rendered.to_text(), a.unit.profile().clone());
    let (unit, outline) = extract(&reparsed).map_err(|e| e.to_string())?;
    if unit != a.unit || outline != a.outline {
        return Err(format!("extract(render) changed {a:?} into {unit:?} / {outline:?}"));
    }
    Ok(())
}

pub fn check_interleaved_parse(a: &Annotated) -> Result<(), String> {
    let star = render_interleaved(&a.unit, &a.outline).map_err(|e| e.to_string())?;
    let report = parse_interleaved(&star.to_text(), &a.unit);
    if !report.issues.is_empty() || report.outline != a.outline {
        return Err(format!("star rendering of {a:?} parsed to {report:?}"));
    }
    let plain = render_with_style(&a.unit, &a.outline, CommentStyle::Plain).map_err(|e| e.to_string())?;
    let fenced = format!("```\n{}```\n", plain.to_text());
    let report = parse_interleaved(&fenced, &a.unit);
    if !report.issues.is_empty() || report.outline != unverified(&a.outline) {
        return Err(format!("plain rendering of {a:?} parsed to {report:?}"));
    }
    Ok(())
}

pub fn check_infilling_parse(a: &Annotated) -> Result<(), String> {
    let expected = unverified(&a.outline);
    let report = parse_infilling(&expected.to_infilling_text(), &a.unit);
    if !report.issues.is_empty() || report.outline != expected {
        return Err(format!("{:?} parsed to {report:?}", expected.to_infilling_text()));
    }
    Ok(())
}

pub fn check_remap_identity(a: &Annotated) -> Result<(), String> {
    let (kept, stale) = remap_anchors(&a.outline, &a.unit, &a.unit);
    if kept != a.outline || !stale.is_empty() {
        return Err(format!("remap onto the same unit gave {kept:?} and stale {stale:?}"));
    }
    Ok(())
}

pub fn check_sidecar_identity(a: &Annotated, dir: &std::path::Path) -> Result<(), String> {
    let ext = if a.unit.profile().name() == "python" { "py" } else { "c" };
    let source = dir.join(format!("unit.{ext}"));
    fs::write(&source, a.unit.to_text()).map_err(|e| e.to_string())?;
    let written = sidecar_write(&a.unit, &a.outline, &source).map_err(|e| e.to_string())?;
    let state = sidecar_read(&source).map_err(|e| e.to_string())?;
    if state.stale || state.record != written {
        return Err(format!("sidecar read back {state:?}, wrote {written:?}"));
    }
    if state.record.unit().map_err(|e| e.to_string())? != a.unit || state.record.outline() != a.outline {
        return Err("sidecar record does not reproduce the unit and outline".into());
    }
    Ok(())
}

// ---- constraint brute force ----

/// A Python unit of at most 8 lines together with facts recorded while
/// building it, independent of the library's own line analysis.
#[derive(Debug, Clone)]
pub struct ConstraintCase {
    pub lines: Vec<String>,
    /// Lines (1-based) above which a comment is allowed.
    pub open: BTreeSet<usize>,
    pub required: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Code,
    Blank,
    Comment,
    Continuation,
    Docstring,
}

#[derive(Debug, Clone)]
enum Segment {
    Code(&'static str),
    Blank,
    Comment,
    Parens,
    Backslash,
}

impl Segment {
    fn lines(&self) -> Vec<(String, Kind)> {
        match self {
            Segment::Code(s) => vec![(format!("    {s}"), Kind::Code)],
            Segment::Blank => vec![(String::new(), Kind::Blank)],
            Segment::Comment => vec![("    # note".into(), Kind::Comment)],
            Segment::Parens => vec![
                ("    y = g(1,".into(), Kind::Code),
                ("          2)".into(), Kind::Continuation),
            ],
            Segment::Backslash => vec![
                ("    z = 1 + \\".into(), Kind::Code),
                ("        2".into(), Kind::Continuation),
            ],
        }
    }
}

fn segment() -> impl Strategy<Value = Segment> {
    prop_oneof![
        4 => prop::sample::select(vec!["x = 1", "return x", "if x:", "        x += 1", "print(x)"]).prop_map(Segment::Code),
        2 => Just(Segment::Blank),
        2 => Just(Segment::Comment),
        1 => Just(Segment::Parens),
        1 => Just(Segment::Backslash),
    ]
}

pub fn constraint_case() -> impl Strategy<Value = ConstraintCase> {
    (0..3usize, 0..3usize, prop::collection::vec(segment(), 1..8)).prop_map(|(header, doc, segments)| {
        let mut lines: Vec<(String, Kind)> = Vec::new();
        match header {
            1 => lines.push(("def f(a, b):".into(), Kind::Code)),
            2 => {
                lines.push(("def f(a,".into(), Kind::Code));
                lines.push(("      b):".into(), Kind::Continuation));
            }
            _ => {}
        }
        let sig_len = lines.len();
        if header > 0 {
            match doc {
                1 => lines.push(("    \"\"\"Doc.\"\"\"".into(), Kind::Docstring)),
                2 => {
                    lines.push(("    \"\"\"Doc.".into(), Kind::Docstring));
                    lines.push(("    More.".into(), Kind::Docstring));
                    lines.push(("    \"\"\"".into(), Kind::Docstring));
                }
                _ => {}
            }
        }
        for s in segments {
            let more = s.lines();
            if lines.len() + more.len() > 8 {
                break;
            }
            lines.extend(more);
        }
        let kinds: Vec<Kind> = lines.iter().map(|(_, k)| *k).collect();
        let has_doc = kinds.contains(&Kind::Docstring);
        // Body start: first non-blank line after the signature, or after the
        // docstring when there is one.
        let body_start = if header == 0 {
            None
        } else {
            let after = if has_doc {
                kinds.iter().rposition(|k| *k == Kind::Docstring).unwrap() + 1
            } else {
                sig_len
            };
            (after..kinds.len()).find(|&i| kinds[i] != Kind::Blank).map(|i| i + 1)
        };
        let open: BTreeSet<usize> = (1..=kinds.len())
            .filter(|&l| {
                let k = kinds[l - 1];
                let after_comment = l > 1 && kinds[l - 2] == Kind::Comment && k == Kind::Comment;
                !(l == 1 && body_start.is_some())
                    && !matches!(k, Kind::Blank | Kind::Continuation | Kind::Docstring)
                    && !after_comment
            })
            .collect();
        let required = body_start.and_then(|b| open.iter().copied().find(|&l| l >= b));
        ConstraintCase {
            lines: lines.into_iter().map(|(l, _)| l).collect(),
            open,
            required,
        }
    })
}

const INSERTED: &str = "    # inserted";

fn candidate(lines: &[String], counts: &[usize]) -> (String, Vec<bool>) {
    let mut out = String::new();
    let mut literal = Vec::new();
    for (line, &c) in lines.iter().zip(counts) {
        for _ in 0..c {
            out.push_str(INSERTED);
            out.push('\n');
            literal.push(false);
        }
        out.push_str(line);
        out.push('\n');
        literal.push(true);
    }
    (out, literal)
}

fn all_counts(n: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..=max).map(move |c| {
                    let mut v = prefix.clone();
                    v.push(c);
                    v
                })
            })
            .collect();
    }
    out
}

fn mutations(line: &str) -> Vec<String> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    for i in 0..chars.len() {
        let mut replaced = chars.clone();
        replaced[i] = if chars[i] == 'Q' { 'R' } else { 'Q' };
        out.push(replaced.into_iter().collect());
        let mut deleted = chars.clone();
        deleted.remove(i);
        out.push(deleted.into_iter().collect());
    }
    for i in 0..=chars.len() {
        let mut inserted = chars.clone();
        inserted.insert(i, 'Q');
        out.push(inserted.into_iter().collect());
    }
    out
}

/// Compares the acceptor with enumeration of up to two comments above every
/// line, then mutates characters of accepted candidates.
pub fn check_constraint(case: &ConstraintCase) -> Result<(), String> {
    let unit = SourceUnit::new(case.lines.clone(), LanguageProfile::python()).map_err(|e| e.to_string())?;
    let constraint = build_constraint(&unit);
    let legal = |counts: &[usize]| {
        counts.iter().enumerate().all(|(i, &c)| c == 0 || case.open.contains(&(i + 1)))
            && case.required.is_none_or(|r| counts[r - 1] > 0)
    };
    let all = all_counts(case.lines.len(), 2);
    let legal_texts: BTreeSet<String> = all
        .iter()
        .filter(|c| legal(c))
        .map(|c| candidate(&case.lines, c).0)
        .collect();
    let mut accepted = Vec::new();
    for counts in &all {
        let (text, literal) = candidate(&case.lines, counts);
        let expected = legal_texts.contains(&text);
        let got = constraint_accepts(&constraint, &text);
        if got.accepted != expected {
            return Err(format!(
                "{:?}: counts {counts:?} expected accepted={expected}, got {got:?}",
                case.lines
            ));
        }
        if expected {
            accepted.push((text, literal));
        }
    }
    let stride = accepted.len().div_ceil(12).max(1);
    for (text, literal) in accepted.iter().step_by(stride) {
        let lines: Vec<&str> = text.lines().collect();
        for (i, _) in literal.iter().enumerate().filter(|(_, &l)| l) {
            for mutated in mutations(lines[i]) {
                let mut changed: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
                changed[i] = mutated;
                let candidate = changed.join("\n") + "\n";
                if constraint_accepts(&constraint, &candidate).accepted {
                    return Err(format!("mutation accepted: {candidate:?}"));
                }
            }
        }
    }
    Ok(())
}

// ---- virtual split ----

#[derive(Debug, Clone)]
pub struct SplitCase {
    pub diff: String,
    pub titles: Vec<String>,
    /// Model answer for each file path.
    pub answers: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Context,
    Add,
    Remove,
}

fn hunk_ops() -> impl Strategy<Value = Vec<Op>> {
    prop::collection::vec(prop_oneof![Just(Op::Context), Just(Op::Add), Just(Op::Remove)], 1..6).prop_map(
        |mut ops| {
            ops.insert(0, Op::Context);
            if ops.iter().all(|o| matches!(o, Op::Context)) {
                ops.push(Op::Add);
            }
            ops
        },
    )
}

fn file_diff(path: String, hunks: Vec<(usize, Vec<Op>)>) -> String {
    let mut out = format!("--- a/{path}\n+++ b/{path}\n");
    let (mut old_line, mut shift) = (1usize, 0isize);
    for (n, (gap, ops)) in hunks.into_iter().enumerate() {
        old_line += gap;
        let old_len = ops.iter().filter(|o| !matches!(o, Op::Add)).count();
        let new_len = ops.iter().filter(|o| !matches!(o, Op::Remove)).count();
        let new_start = (old_line as isize + shift) as usize;
        out.push_str(&format!("@@ -{old_line},{old_len} +{new_start},{new_len} @@\n"));
        for (k, op) in ops.iter().enumerate() {
            let text = format!("v{n}_{k} = {k}");
            out.push_str(&match op {
                Op::Context => format!(" {text}\n"),
                Op::Add => format!("+{text}\n"),
                Op::Remove => format!("-{text}\n"),
            });
        }
        old_line += old_len;
        shift += new_len as isize - old_len as isize;
    }
    out
}

fn answer_line(topics: usize) -> impl Strategy<Value = String> {
    prop_oneof![
        6 => (0..40usize, 0..topics + 4).prop_map(|(a, t)| format!("{a}|{t}| Change {a}.")),
        1 => Just(String::new()),
        1 => Just("nonsense".to_string()),
        1 => Just("12|".to_string()),
        1 => Just("|3| x".to_string()),
        1 => Just("```".to_string()),
    ]
}

pub fn split_case() -> impl Strategy<Value = SplitCase> {
    let titles = prop::collection::vec(prop::sample::select(vec!["Fix bug", "Add test", "Rename", "Docs"]), 0..4);
    let files = prop::collection::vec(prop::collection::vec((1..5usize, hunk_ops()), 1..4), 1..5);
    (titles, files)
        .prop_flat_map(|(titles, files)| {
            let t = titles.len();
            let answers = prop::collection::vec(
                prop_oneof![
                    1 => Just(vec![]),
                    6 => prop::collection::vec(answer_line(t), 0..8),
                ],
                files.len(),
            );
            (Just(titles), Just(files), answers)
        })
        .prop_map(|(titles, files, answers)| {
            let mut diff = String::new();
            let mut by_path = BTreeMap::new();
            for (k, (hunks, answer)) in files.into_iter().zip(answers).enumerate() {
                let path = format!("f{k}/mod.py");
                diff.push_str(&file_diff(path.clone(), hunks));
                by_path.insert(path, answer.join("\n"));
            }
            SplitCase {
                diff,
                titles: titles.into_iter().map(String::from).collect(),
                answers: by_path,
            }
        })
}

pub fn split_backend(case: &SplitCase) -> FnBackend {
    let answers = case.answers.clone();
    FnBackend::new(move |request| {
        let text = &request.prompt.turns.last().expect("prompt has a turn").text;
        Ok(answers
            .iter()
            .find(|(path, _)| text.contains(&format!("a/{path}")))
            .map(|(_, a)| a.clone())
            .unwrap_or_default())
    })
}

fn check_partition(cl: &ChangeList, split: &VirtualSplit) -> Result<(), String> {
    for (file, fs) in cl.files.iter().zip(&split.files) {
        let mut seen: Vec<usize> = fs.sections.iter().flat_map(|s| s.changed_lines.iter().copied()).collect();
        seen.sort_unstable();
        if seen != file.changed_positions() {
            return Err(format!("{}: sections cover {seen:?}, changes at {:?}", file.path(), file.changed_positions()));
        }
        for s in &fs.sections {
            if split.topic(s.topic).is_none() {
                return Err(format!("section assigned to missing topic {}", s.topic));
            }
        }
    }
    let sum: f64 = split.coverage.iter().map(|c| c.fraction).sum();
    if (sum - 1.0).abs() > 0.001 {
        return Err(format!("coverage fractions sum to {sum}"));
    }
    Ok(())
}

pub fn check_split(case: &SplitCase) -> Result<(), String> {
    let cl = ChangeList::parse("Generated change.", &case.diff).map_err(|e| e.to_string())?;
    let topics = topics_from_titles(case.titles.iter().map(String::as_str));
    let backend = split_backend(case);
    let options = RequestOptions::default();
    let concurrent = split_files(&cl, &topics, &backend, &options).map_err(|e| e.to_string())?;
    let sequential = split_files_sequential(&cl, &topics, &backend, &options).map_err(|e| e.to_string())?;
    if concurrent != sequential {
        return Err("concurrent and sequential splits differ".into());
    }
    check_partition(&cl, &concurrent)
}
