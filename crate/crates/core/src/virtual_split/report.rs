use std::collections::BTreeSet;
use std::fmt::Write;

use super::{ChangeList, FileDiff, LineKind, TextRole, VirtualSplit};

const CONTEXT: usize = 3;

pub fn render_json(split: &VirtualSplit) -> String {
    serde_json::to_string_pretty(split).expect("split serializes") + "\n"
}

fn percent(fraction: f64) -> String {
    format!("{:.1}%", fraction * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shade {
    Hunk,
    Context,
    Topic(LineKind),
    Muted,
}

/// Lines of `file` to show for one topic: every line within a few lines of
/// a change in that topic. `None` marks an elided gap.
fn topic_view(file: &FileDiff, owned: &BTreeSet<usize>) -> Vec<Option<(usize, Shade, String)>> {
    let lines = file.text_lines();
    let visible = |pos: usize| owned.iter().any(|&p| p.abs_diff(pos) <= CONTEXT);
    let mut out = Vec::new();
    let mut last_shown = None;
    for (i, (role, text)) in lines.into_iter().enumerate() {
        let pos = i + 1;
        if role == TextRole::FileHeader || !visible(pos) {
            continue;
        }
        if last_shown.is_some_and(|l: usize| l + 1 != pos) {
            out.push(None);
        }
        let shade = match role {
            TextRole::HunkHeader => Shade::Hunk,
            TextRole::Body(kind) if kind.is_change() && owned.contains(&pos) => Shade::Topic(kind),
            TextRole::Body(kind) if kind.is_change() => Shade::Muted,
            _ => Shade::Context,
        };
        out.push(Some((pos, shade, text)));
        last_shown = Some(pos);
    }
    out
}

fn owned_positions(split: &VirtualSplit, file_index: usize, topic: usize) -> BTreeSet<usize> {
    split.files[file_index]
        .sections
        .iter()
        .filter(|s| s.topic == topic)
        .flat_map(|s| s.changed_lines.iter().copied())
        .collect()
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            other => out.push(other),
        }
    }
    out
}

const STYLE: &str = "\
body { font-family: sans-serif; margin: 2em; }
.topics a { margin-right: 1em; }
pre { background: #f6f8fa; padding: 0.5em; }
.add { background: #e6ffed; }
.del { background: #ffeef0; }
.muted { color: #999; }
.hunk { color: #6a737d; }
.gap { color: #aaa; }
.collapsed { color: #777; font-style: italic; }";

/// A static page with one section per topic. Each section expands the diff
/// lines that belong to the topic and mutes changes from other topics.
pub fn render_html(split: &VirtualSplit, cl: &ChangeList) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">");
    let _ = writeln!(out, "<title>{}</title>", escape(split.description.lines().next().unwrap_or("Split")));
    let _ = writeln!(out, "<style>\n{STYLE}\n</style>\n</head>\n<body>");
    let _ = writeln!(out, "<p class=\"description\">{}</p>", escape(&split.description));
    let _ = writeln!(out, "<nav class=\"topics\">");
    for t in &split.topics {
        let _ = writeln!(
            out,
            "<a href=\"#topic-{}\">{} ({})</a>",
            t.index,
            escape(&t.title),
            percent(split.coverage_of(t.index))
        );
    }
    let _ = writeln!(out, "</nav>");
    for t in &split.topics {
        let _ = writeln!(
            out,
            "<section id=\"topic-{}\">\n<h2>{}. {} ({})</h2>",
            t.index,
            t.index,
            escape(&t.title),
            percent(split.coverage_of(t.index))
        );
        for (n, file) in cl.files.iter().enumerate() {
            let owned = owned_positions(split, n, t.index);
            if owned.is_empty() {
                let _ = writeln!(out, "<p class=\"collapsed\">{} (collapsed)</p>", escape(file.path()));
                continue;
            }
            let _ = writeln!(out, "<h3>{}</h3>\n<ul>", escape(file.path()));
            for s in split.files[n].sections.iter().filter(|s| s.topic == t.index) {
                let _ = writeln!(out, "<li>line {}: {}</li>", s.anchor, escape(&s.description));
            }
            let _ = writeln!(out, "</ul>\n<pre>");
            for line in topic_view(file, &owned) {
                match line {
                    None => {
                        let _ = writeln!(out, "<span class=\"gap\">...</span>");
                    }
                    Some((_, shade, text)) => {
                        let class = match shade {
                            Shade::Hunk => "hunk",
                            Shade::Context => "ctx",
                            Shade::Topic(LineKind::Added) => "add",
                            Shade::Topic(_) => "del",
                            Shade::Muted => "muted",
                        };
                        let _ = writeln!(out, "<span class=\"{class}\">{}</span>", escape(&text));
                    }
                }
            }
            let _ = writeln!(out, "</pre>");
        }
        let _ = writeln!(out, "</section>");
    }
    let _ = writeln!(out, "</body>\n</html>");
    out
}

/// Plain-text version of [`render_html`]. Lines owned by the topic start
/// with `>`, changes from other topics with `~`.
pub fn render_terminal(split: &VirtualSplit, cl: &ChangeList) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Topics:");
    for t in &split.topics {
        let _ = writeln!(out, "  {}. {} ({})", t.index, t.title, percent(split.coverage_of(t.index)));
    }
    for t in &split.topics {
        let _ = writeln!(out, "\n== {}. {} ==", t.index, t.title);
        for (n, file) in cl.files.iter().enumerate() {
            let owned = owned_positions(split, n, t.index);
            if owned.is_empty() {
                continue;
            }
            let _ = writeln!(out, "-- {}", file.path());
            for s in split.files[n].sections.iter().filter(|s| s.topic == t.index) {
                let _ = writeln!(out, "   * line {}: {}", s.anchor, s.description);
            }
            for line in topic_view(file, &owned) {
                match line {
                    None => {
                        let _ = writeln!(out, "     ...");
                    }
                    Some((pos, shade, text)) => {
                        let mark = match shade {
                            Shade::Topic(_) => '>',
                            Shade::Muted => '~',
                            Shade::Hunk | Shade::Context => ' ',
                        };
                        let _ = writeln!(out, "{mark}{pos:>4}|{text}");
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::{assemble_split, topics_from_titles, FileProposal, ProposedSection};
    use super::*;

    fn example() -> (ChangeList, VirtualSplit) {
        let diff = "--- a/m.py\n+++ b/m.py\n@@ -1,3 +1,3 @@\n a\n-b\n+B\n c\n";
        let cl = ChangeList::parse("Fix <b>.", diff).unwrap();
        let topics = topics_from_titles(["Fix b"]);
        let proposal = FileProposal {
            sections: vec![ProposedSection {
                anchor: 4,
                topic: 1,
                description: "Capitalize b.".into(),
            }],
            issues: vec![],
        };
        let split = assemble_split(&cl, &[proposal], &topics);
        (cl, split)
    }

    #[test]
    fn json_round_trips() {
        let (_, split) = example();
        let back: VirtualSplit = serde_json::from_str(&render_json(&split)).unwrap();
        assert_eq!(back, split);
    }

    #[test]
    fn single_topic_is_everything() {
        let (cl, split) = example();
        let text = render_terminal(&split, &cl);
        assert!(text.contains("1. Fix b (100.0%)"));
        assert!(text.contains("2. Other changes (0.0%)"));
        assert!(text.contains(">   5|-b\n>   6|+B"));
    }

    #[test]
    fn html_escapes_and_marks_lines() {
        let (cl, split) = example();
        let html = render_html(&split, &cl);
        assert!(html.contains("Fix &lt;b&gt;."));
        assert!(html.contains("<span class=\"del\">-b</span>"));
        assert!(html.contains("m.py (collapsed)"));
    }
}
