//! Virtual change-list split: group every change of a multi-file diff under
//! one of a few described topics, without touching the change itself.

mod diff;
mod report;

use std::sync::LazyLock;
use std::thread;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{complete, Backend, ChatPrompt, GatewayError, GenerationRequest};
use crate::generation::{IssueKind, ParseIssue, RequestOptions};

pub use diff::{parse_unified_diff, ChangeList, DiffError, DiffLine, FileDiff, Hunk, LineKind, TextRole};
pub use report::{render_html, render_json, render_terminal};

pub const SPLIT_SCHEMA: &str = "nlo.split/1";
pub const OTHER_CHANGES: &str = "Other changes";

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("no numbered topic lines in the response")]
    NoTopics,
    #[error("change list has no files")]
    EmptyChangeList,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub index: usize,
    pub title: String,
}

/// Renumbers `titles` from 1 and makes "Other changes" the last topic.
pub fn topics_from_titles<I, S>(titles: I) -> Vec<Topic>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let mut titles: Vec<String> = titles
        .into_iter()
        .map(Into::into)
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty() && !t.eq_ignore_ascii_case(OTHER_CHANGES))
        .collect();
    titles.push(OTHER_CHANGES.to_string());
    titles
        .into_iter()
        .enumerate()
        .map(|(i, title)| Topic { index: i + 1, title })
        .collect()
}

/// A diff with `N|` prefixes and the positions where runs of changes begin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumberedDiff {
    pub numbered: String,
    pub hints: Vec<usize>,
}

impl NumberedDiff {
    pub fn render(&self) -> String {
        let hints = if self.hints.is_empty() {
            "none".to_string()
        } else {
            self.hints
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(", ")
        };
        format!("{}\n\nChanges start at lines: {hints}", self.numbered)
    }
}

pub fn number_diff(file: &FileDiff) -> NumberedDiff {
    let lines = file.text_lines();
    let numbered = lines
        .iter()
        .enumerate()
        .map(|(i, (_, text))| format!("{:>3}|{}", i + 1, text))
        .collect::<Vec<_>>()
        .join("\n");
    let mut hints = Vec::new();
    let mut in_run = false;
    for (i, (role, _)) in lines.iter().enumerate() {
        let change = matches!(role, TextRole::Body(k) if k.is_change());
        if change && !in_run {
            hints.push(i + 1);
        }
        in_run = change || matches!(role, TextRole::Body(LineKind::Marker)) && in_run;
    }
    NumberedDiff { numbered, hints }
}

const TOPICS_SYSTEM: &str = "\
You are an expert code reviewer.
You help reviewers understand large code changes by splitting them into a few logical topics.";

pub fn build_topics_prompt(cl: &ChangeList) -> ChatPrompt {
    let mut user = format!("Here is the description of a code change:\n{}\n\nHere are its file diffs:\n", cl.description.trim());
    for file in &cl.files {
        user.push_str(&format!("\nFile {}:\n```diff\n{}```\n", file.path(), file.text()));
    }
    user.push_str(
        "\nFirst, summarize the changes in each file in one or two sentences. \
         Then write a line `Topics:` followed by a numbered list of the logical topics of this change, \
         one per line in the form `N. title`, ordered from most to least important. \
         Each title should be a short phrase. \
         The last topic must be `Other changes`, for minor edits such as imports, typo fixes and formatting.",
    );
    ChatPrompt::new(TOPICS_SYSTEM).user(user)
}

static TOPIC_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*[0-9]+\.\s+(.+?)\s*$").expect("static regex"));
static TOPICS_HEADING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*\**topics:?\**\s*$").expect("static regex"));

/// Reads `N. title` lines after the last `Topics:` heading, or anywhere when
/// there is no heading.
pub fn parse_topics(response: &str) -> Result<Vec<Topic>, SplitError> {
    let lines: Vec<&str> = response.lines().collect();
    let start = lines
        .iter()
        .rposition(|l| TOPICS_HEADING.is_match(l))
        .map_or(0, |i| i + 1);
    let titles: Vec<String> = lines[start..]
        .iter()
        .filter_map(|l| TOPIC_LINE.captures(l).map(|c| c[1].to_string()))
        .collect();
    if titles.is_empty() {
        return Err(SplitError::NoTopics);
    }
    Ok(topics_from_titles(titles))
}

pub fn generate_topics(
    cl: &ChangeList,
    backend: &dyn Backend,
    options: &RequestOptions,
) -> Result<Vec<Topic>, SplitError> {
    if cl.files.is_empty() {
        return Err(SplitError::EmptyChangeList);
    }
    let request = GenerationRequest {
        prompt: build_topics_prompt(cl),
        temperature: options.temperature,
        max_output: options.max_output,
    };
    parse_topics(&complete(&request, backend)?)
}

/// One model-proposed section of a file diff.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposedSection {
    /// 1-based line of the numbered file diff where the section starts.
    pub anchor: usize,
    pub topic: usize,
    pub description: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileProposal {
    pub sections: Vec<ProposedSection>,
    pub issues: Vec<ParseIssue>,
}

fn topic_list(topics: &[Topic]) -> String {
    topics
        .iter()
        .map(|t| format!("{}. {}", t.index, t.title))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn build_file_prompt(description: &str, file: &FileDiff, topics: &[Topic]) -> ChatPrompt {
    let user = format!(
        "Here is the description of a code change:\n{}\n\n\
         Here is the diff of one file, {}, with line numbers added for reference:\n```\n{}\n```\n\n\
         The change has these topics:\n{}\n\n\
         Identify the logical sections of this diff and summarize the changes in each one. \
         For each section, write the line number where it starts, then the number of the topic it belongs to, \
         then one sentence describing the change, in the form `N|T| description`. \
         Do not repeat the diff! Just provide the sections.",
        description.trim(),
        file.path(),
        number_diff(file).render(),
        topic_list(topics),
    );
    ChatPrompt::new(TOPICS_SYSTEM).user(user)
}

static SECTION_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*([0-9]+)\|\s*([0-9]+)\|\s?(.*)$").expect("static regex"));

/// Parses `N|T| description` lines for a file diff of `line_count` lines.
/// Unknown topics are moved to the last topic.
pub fn parse_file_sections(response: &str, line_count: usize, topics: &[Topic]) -> FileProposal {
    let other = topics.last().map_or(1, |t| t.index);
    let mut proposal = FileProposal::default();
    let issue = |kind, at: usize, detail: String| ParseIssue::new(kind, Some(at), detail);
    let mut parsed: Vec<(ProposedSection, usize)> = Vec::new();
    for (i, raw) in response.lines().enumerate() {
        let at = i + 1;
        if raw.trim().is_empty() || raw.trim_start().starts_with("```") {
            continue;
        }
        let Some(caps) = SECTION_LINE.captures(raw) else {
            proposal
                .issues
                .push(issue(IssueKind::MalformedLine, at, format!("{raw:?}")));
            continue;
        };
        let text = caps[3].trim_end();
        if text.is_empty() {
            proposal
                .issues
                .push(issue(IssueKind::MalformedLine, at, "missing description".into()));
            continue;
        }
        let anchor = match caps[1].parse::<usize>() {
            Ok(n) if (1..=line_count).contains(&n) => n,
            _ => {
                proposal.issues.push(issue(
                    IssueKind::LineNumberOutOfBounds,
                    at,
                    format!("line {} outside 1..={line_count}", &caps[1]),
                ));
                continue;
            }
        };
        let topic = match caps[2].parse::<usize>() {
            Ok(t) if topics.iter().any(|x| x.index == t) => t,
            _ => {
                proposal.issues.push(issue(
                    IssueKind::UnknownTopicIndex,
                    at,
                    format!("topic {} does not exist, moved to {OTHER_CHANGES}", &caps[2]),
                ));
                other
            }
        };
        parsed.push((
            ProposedSection {
                anchor,
                topic,
                description: text.to_string(),
            },
            at,
        ));
    }
    if parsed.windows(2).any(|w| w[0].0.anchor > w[1].0.anchor) {
        proposal.issues.push(ParseIssue::new(
            IssueKind::NotSorted,
            None,
            "sections sorted by line number",
        ));
        parsed.sort_by_key(|(s, _)| s.anchor);
    }
    for (section, at) in parsed {
        if proposal.sections.last().is_some_and(|s| s.anchor == section.anchor) {
            proposal.issues.push(issue(
                IssueKind::DuplicateLineNumber,
                at,
                format!("line {} repeated", section.anchor),
            ));
            continue;
        }
        proposal.sections.push(section);
    }
    proposal
}

pub fn split_file(
    description: &str,
    file: &FileDiff,
    topics: &[Topic],
    backend: &dyn Backend,
    options: &RequestOptions,
) -> Result<FileProposal, GatewayError> {
    let request = GenerationRequest {
        prompt: build_file_prompt(description, file, topics),
        temperature: options.temperature,
        max_output: options.max_output,
    };
    let response = complete(&request, backend)?;
    Ok(parse_file_sections(&response, file.text_lines().len(), topics))
}

/// One section of the final split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub anchor: usize,
    pub topic: usize,
    pub description: String,
    /// Positions of the added and removed lines the section owns.
    pub changed_lines: Vec<usize>,
    /// Set for sections created to hold changes the model left out.
    #[serde(default)]
    pub synthetic: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileSplit {
    pub path: String,
    pub sections: Vec<Section>,
    #[serde(default)]
    pub issues: Vec<ParseIssue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicCoverage {
    pub topic: usize,
    pub changed_lines: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualSplit {
    pub schema: String,
    pub description: String,
    pub topics: Vec<Topic>,
    pub files: Vec<FileSplit>,
    pub coverage: Vec<TopicCoverage>,
}

impl VirtualSplit {
    pub fn topic(&self, index: usize) -> Option<&Topic> {
        self.topics.iter().find(|t| t.index == index)
    }

    pub fn coverage_of(&self, index: usize) -> f64 {
        self.coverage
            .iter()
            .find(|c| c.topic == index)
            .map_or(0.0, |c| c.fraction)
    }
}

/// Turns per-file proposals into a split where every changed line belongs to
/// exactly one section. Missing proposals count as empty.
pub fn assemble_split(cl: &ChangeList, proposals: &[FileProposal], topics: &[Topic]) -> VirtualSplit {
    let topics = if topics.last().is_some_and(|t| t.title == OTHER_CHANGES)
        && topics.iter().enumerate().all(|(i, t)| t.index == i + 1)
    {
        topics.to_vec()
    } else {
        topics_from_titles(topics.iter().map(|t| t.title.clone()))
    };
    let other = topics.last().expect("always has Other changes").index;
    let empty = FileProposal::default();

    let mut files = Vec::with_capacity(cl.files.len());
    for (n, file) in cl.files.iter().enumerate() {
        let proposal = proposals.get(n).unwrap_or(&empty);
        let mut proposed: Vec<ProposedSection> = proposal
            .sections
            .iter()
            .map(|s| ProposedSection {
                topic: if topics.iter().any(|t| t.index == s.topic) { s.topic } else { other },
                ..s.clone()
            })
            .collect();
        proposed.sort_by_key(|s| s.anchor);
        proposed.dedup_by_key(|s| s.anchor);

        let mut sections: Vec<Section> = proposed
            .into_iter()
            .map(|s| Section {
                anchor: s.anchor,
                topic: s.topic,
                description: s.description,
                changed_lines: Vec::new(),
                synthetic: false,
            })
            .collect();
        let mut orphans = Vec::new();
        for pos in file.changed_positions() {
            match sections.iter_mut().rev().find(|s| s.anchor <= pos) {
                Some(section) => section.changed_lines.push(pos),
                None => orphans.push(pos),
            }
        }
        if let Some(&first) = orphans.first() {
            sections.insert(
                0,
                Section {
                    anchor: first,
                    topic: other,
                    description: "Changes without a described section.".to_string(),
                    changed_lines: orphans,
                    synthetic: true,
                },
            );
        }
        files.push(FileSplit {
            path: file.path().to_string(),
            sections,
            issues: proposal.issues.clone(),
        });
    }

    let total: usize = files
        .iter()
        .flat_map(|f| &f.sections)
        .map(|s| s.changed_lines.len())
        .sum();
    let coverage = topics
        .iter()
        .map(|t| {
            let lines: usize = files
                .iter()
                .flat_map(|f| &f.sections)
                .filter(|s| s.topic == t.index)
                .map(|s| s.changed_lines.len())
                .sum();
            TopicCoverage {
                topic: t.index,
                changed_lines: lines,
                fraction: if total == 0 { 0.0 } else { lines as f64 / total as f64 },
            }
        })
        .collect();

    VirtualSplit {
        schema: SPLIT_SCHEMA.to_string(),
        description: cl.description.clone(),
        topics,
        files,
        coverage,
    }
}

/// Asks for sections of every file at once, one thread per file, and
/// assembles them in file order.
pub fn split_files(
    cl: &ChangeList,
    topics: &[Topic],
    backend: &dyn Backend,
    options: &RequestOptions,
) -> Result<VirtualSplit, SplitError> {
    let proposals: Vec<Result<FileProposal, GatewayError>> = thread::scope(|scope| {
        let handles: Vec<_> = cl
            .files
            .iter()
            .map(|file| scope.spawn(move || split_file(&cl.description, file, topics, backend, options)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("split worker panicked"))
            .collect()
    });
    let proposals = proposals.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(assemble_split(cl, &proposals, topics))
}

/// Same as [`split_files`], one file after another.
pub fn split_files_sequential(
    cl: &ChangeList,
    topics: &[Topic],
    backend: &dyn Backend,
    options: &RequestOptions,
) -> Result<VirtualSplit, SplitError> {
    let proposals = cl
        .files
        .iter()
        .map(|file| split_file(&cl.description, file, topics, backend, options))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble_split(cl, &proposals, topics))
}

/// Topics, then per-file sections.
pub fn virtual_split(
    cl: &ChangeList,
    backend: &dyn Backend,
    options: &RequestOptions,
) -> Result<VirtualSplit, SplitError> {
    let topics = generate_topics(cl, backend, options)?;
    split_files(cl, &topics, backend, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{FnBackend, ScriptedBackend};

    const DIFF: &str = "\
--- a/lib.py
+++ b/lib.py
@@ -1,4 +1,6 @@
 import os
+import sys

 def f():
-  return 1
+  x = 2
+  return x
--- a/BUILD
+++ b/BUILD
@@ -1,2 +1,2 @@
 py_library(
-  name = \"lib\")
+  name = \"lib2\")
";

    fn cl() -> ChangeList {
        ChangeList::parse("Change f.", DIFF).unwrap()
    }

    #[test]
    fn numbering_and_hints() {
        let file = &cl().files[0];
        let numbered = number_diff(file);
        assert!(numbered.numbered.starts_with("  1|--- a/lib.py\n  2|+++ b/lib.py\n  3|@@"));
        assert_eq!(numbered.hints, [5, 8]);
        let stripped: Vec<&str> = numbered.numbered.lines().map(|l| &l[4..]).collect();
        assert_eq!(stripped.join("\n") + "\n", file.text());
        let context_only = parse_unified_diff("--- a/x\n+++ b/x\n@@ -1 +1 @@\n a\n").unwrap();
        assert!(number_diff(&context_only[0]).hints.is_empty());
    }

    #[test]
    fn topic_parsing() {
        assert_eq!(
            parse_topics("1. A").unwrap(),
            [
                Topic { index: 1, title: "A".into() },
                Topic { index: 2, title: OTHER_CHANGES.into() }
            ]
        );
        let topics = parse_topics("lib.py: adds x.\n1. Not a topic\nTopics:\n1. Other changes\n2. Main\n").unwrap();
        let titles: Vec<_> = topics.iter().map(|t| t.title.as_str()).collect();
        assert_eq!(titles, ["Main", OTHER_CHANGES]);
        assert!(matches!(parse_topics("nothing here"), Err(SplitError::NoTopics)));
    }

    #[test]
    fn section_parsing() {
        let topics = topics_from_titles(["Main"]);
        let p = parse_file_sections("4|1| Add ast_height implementation", 10, &topics);
        assert!(p.issues.is_empty());
        assert_eq!(p.sections[0].topic, 1);
        let three = topics_from_titles(["A", "B"]);
        let q = parse_file_sections("4|9| x", 10, &three);
        assert_eq!(q.sections[0].topic, 3);
        assert_eq!(q.issues[0].kind, IssueKind::UnknownTopicIndex);
        assert!(parse_file_sections("", 10, &three).sections.is_empty());
        let r = parse_file_sections("5|1| b\n2|1| a\n2|2| c\n99|1| d\nbad\n", 10, &three);
        assert_eq!(
            r.issues.iter().map(|i| i.kind).collect::<Vec<_>>(),
            [
                IssueKind::LineNumberOutOfBounds,
                IssueKind::MalformedLine,
                IssueKind::NotSorted,
                IssueKind::DuplicateLineNumber
            ]
        );
        assert_eq!(r.sections.iter().map(|s| s.anchor).collect::<Vec<_>>(), [2, 5]);
    }

    #[test]
    fn assembly_partitions_and_repairs() {
        let cl = cl();
        let topics = topics_from_titles(["Compute x"]);
        let proposals = vec![FileProposal {
            sections: vec![ProposedSection {
                anchor: 6,
                topic: 1,
                description: "Compute x.".into(),
            }],
            issues: Vec::new(),
        }];
        let split = assemble_split(&cl, &proposals, &topics);
        let lib = &split.files[0];
        assert_eq!(lib.sections.len(), 2);
        assert!(lib.sections[0].synthetic);
        assert_eq!(lib.sections[0].changed_lines, [5]);
        assert_eq!(lib.sections[1].changed_lines, [8, 9, 10]);
        let build = &split.files[1];
        assert_eq!(build.sections[0].topic, 2);
        assert!((split.coverage_of(1) - 0.5).abs() < 1e-12);
        assert!((split.coverage.iter().map(|c| c.fraction).sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn seven_of_ten_lines() {
        let mut text = String::from("--- a/x\n+++ b/x\n@@ -0,0 +1,10 @@\n");
        for i in 0..10 {
            text.push_str(&format!("+l{i}\n"));
        }
        let cl = ChangeList::parse("", &text).unwrap();
        let topics = topics_from_titles(["T"]);
        let sections = vec![
            ProposedSection { anchor: 4, topic: 1, description: "a".into() },
            ProposedSection { anchor: 11, topic: 2, description: "b".into() },
        ];
        let split = assemble_split(&cl, &[FileProposal { sections, issues: vec![] }], &topics);
        assert!((split.coverage_of(1) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn end_to_end_with_scripted_backend() {
        let cl = cl();
        let backend = FnBackend::new(|req: &GenerationRequest| {
            let text = &req.prompt.turns[0].text;
            Ok(if text.contains("Topics:") {
                "lib.py: reworks f.\nTopics:\n1. Rework f\n2. Other changes".to_string()
            } else if text.contains("lib.py, with") {
                "4|1| Import sys.\n6|1| Compute x first.".to_string()
            } else {
                "garbage".to_string()
            })
        });
        let opts = RequestOptions::default();
        let split = virtual_split(&cl, &backend, &opts).unwrap();
        assert_eq!(split.topics.len(), 2);
        assert!((split.coverage_of(1) - 4.0 / 6.0).abs() < 1e-12);
        let sequential = split_files_sequential(&cl, &split.topics, &backend, &opts).unwrap();
        assert_eq!(sequential, split);
        assert_eq!(split.files[1].issues[0].kind, IssueKind::MalformedLine);
    }

    #[test]
    fn gateway_failure_propagates() {
        let backend = ScriptedBackend::new(["1. Only topic"]);
        let err = virtual_split(&cl(), &backend, &RequestOptions::default()).unwrap_err();
        assert!(matches!(err, SplitError::Gateway(GatewayError::ScriptExhausted)));
    }
}
