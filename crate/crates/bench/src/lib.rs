//! Synthetic inputs shared by the benches.

use nlo_core::{LanguageProfile, Outline, OutlineStatement, SourceUnit};

/// A Python function of `blocks` three-line blocks separated by blank
/// lines, with one outline statement per block.
pub fn python_function(blocks: usize) -> (SourceUnit, Outline) {
    let mut lines = vec!["def generated(values):".to_string()];
    let mut statements = Vec::with_capacity(blocks);
    for k in 0..blocks {
        statements.push(OutlineStatement::new(lines.len() + 1, format!("Compute step {k} from the previous one.")));
        lines.push(format!("  x_{k} = values[{k}] + {k}  # offset"));
        lines.push(format!("  y_{k} = x_{k} * 2"));
        lines.push(format!("  values.append(y_{k})"));
        lines.push(String::new());
    }
    lines.push("  return values".into());
    let unit = SourceUnit::new(lines, LanguageProfile::python()).expect("no newlines");
    (unit, Outline::new(statements))
}

/// A unified diff over `files` files with `hunks` hunks each.
pub fn unified_diff(files: usize, hunks: usize) -> String {
    let mut out = String::new();
    for f in 0..files {
        out.push_str(&format!("diff --git a/pkg/m{f}.py b/pkg/m{f}.py\n--- a/pkg/m{f}.py\n+++ b/pkg/m{f}.py\n"));
        for h in 0..hunks {
            let start = 1 + h * 10;
            out.push_str(&format!("@@ -{start},4 +{start},4 @@\n"));
            out.push_str(&format!(" def f{h}():\n-  return {h}\n+  return {h} + 1\n   # done\n pass\n"));
        }
    }
    out
}
