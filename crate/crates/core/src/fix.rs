//! Rewriting notice files so that violating commits become documented.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use similar::TextDiff;

use crate::commits::{AuthorSet, ObligatingCommit};
use crate::date::find_date_span;
use crate::engine::{
    build_index, classify_all, generate_fix, written_author, DetectionRecord, FixAction, FixKind,
    MatchConfig,
};
use crate::history::Author;
use crate::model::ContentElement;
use crate::notice::{analyze, extract_all, split_blocks, ChangeLogBlock, Layout, NoticeFile, Role};

/// Upper bound on detect/fix rounds in [`fix_to_fixpoint`].
pub const MAX_FIX_ROUNDS: usize = 8;

/// Notice file created when a fork has none.
pub const DEFAULT_NOTICE_PATH: &str = "CHANGELOG.md";

/// Rewritten notice file with its unified diff.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilePatch {
    pub path: String,
    /// Previous content; `None` when the file is created.
    pub old: Option<String>,
    pub new: String,
    pub diff: String,
}

struct Doc {
    lines: Vec<String>,
    /// Line number in the original file, for lines that came from it.
    origin: Vec<Option<usize>>,
}

impl Doc {
    fn new(text: &str) -> Self {
        let lines: Vec<String> = text.lines().map(str::to_string).collect();
        let origin = (0..lines.len()).map(Some).collect();
        Self { lines, origin }
    }

    fn text(&self) -> String {
        if self.lines.is_empty() {
            return String::new();
        }
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }

    fn find(&self, original: usize) -> Option<usize> {
        self.origin.iter().position(|&o| o == Some(original))
    }

    fn insert(&mut self, at: usize, lines: Vec<String>) {
        let n = lines.len();
        self.lines.splice(at..at, lines);
        self.origin.splice(at..at, std::iter::repeat(None).take(n));
    }

    fn remove(&mut self, at: usize) -> String {
        self.origin.remove(at);
        self.lines.remove(at)
    }

    fn parse(&self) -> (Layout, Vec<ChangeLogBlock>) {
        let refs: Vec<&str> = self.lines.iter().map(String::as_str).collect();
        let layout = analyze(&refs);
        let blocks = split_blocks(&NoticeFile::new("", self.text()));
        (layout, blocks)
    }
}

fn block_of(blocks: &[ChangeLogBlock], line: usize) -> Option<&ChangeLogBlock> {
    blocks.iter().find(|b| b.lines.iter().any(|l| l.number == line))
}

fn block_covers(b: &ChangeLogBlock, date: NaiveDate) -> bool {
    if b.d_s.is_none() && b.d_e.is_none() {
        return false;
    }
    b.d_s.map_or(true, |s| s <= date) && b.d_e.map_or(true, |e| date <= e)
}

/// Replaces separators inside date expressions with dots so that the line
/// is not read back as a dated subtitle. Tokens are unaffected.
fn defuse_dates(line: &str) -> String {
    let mut s = line.to_string();
    while let Some((range, _)) = find_date_span(&s) {
        let replaced: String = s[range.clone()]
            .chars()
            .map(|c| if c.is_whitespace() || c == '-' || c == '/' { '.' } else { c })
            .collect();
        s.replace_range(range, &replaced);
    }
    s
}

fn author_label(a: &Author) -> &str {
    if a.name.trim().is_empty() {
        &a.email
    } else {
        a.name.trim()
    }
}

/// Single-line list entry for `msg`, optionally attributed.
pub fn entry_line(msg: &str, author: Option<&Author>) -> String {
    let mut line = format!("- {}", msg.split_whitespace().collect::<Vec<_>>().join(" "));
    if let Some(a) = author {
        line.push_str(&format!(" ({})", author_label(a)));
    }
    defuse_dates(&line)
}

fn heading_for(layout: &Layout, lines: &[String], date: NaiveDate) -> String {
    let template = (0..lines.len()).find(|&i| layout.dated && layout.roles[i] == Role::Subtitle);
    let hashes = template
        .map(|i| lines[i].trim_start().chars().take_while(|&c| c == '#').count())
        .unwrap_or(2);
    if hashes == 0 {
        date.to_string()
    } else {
        format!("{} {}", "#".repeat(hashes), date)
    }
}

/// Index after a leading document title and the blank lines following it.
fn after_title(lines: &[String]) -> usize {
    let mut i = match lines.first() {
        Some(l) if l.starts_with("# ") => 1,
        Some(l) if !l.trim().is_empty() && lines.get(1).is_some_and(|u| {
            let u = u.trim();
            u.len() >= 3 && u.chars().all(|c| c == '=')
        }) => 2,
        _ => return 0,
    };
    while lines.get(i).is_some_and(|l| l.trim().is_empty()) {
        i += 1;
    }
    i
}

/// Puts `line` into a dated block covering `date`, creating one if needed.
fn insert_dated(doc: &mut Doc, line: String, date: NaiveDate) {
    let (layout, blocks) = doc.parse();
    if layout.dated {
        let target = blocks
            .iter()
            .find(|b| b.subtitle_line.is_some() && b.d_e.is_some() && block_covers(b, date));
        if let Some(b) = target {
            let at = match b.lines.last() {
                Some(last) => last.number + 1,
                None => {
                    let s = b.subtitle_line.expect("dated block");
                    let mut at = s + 1;
                    while doc.lines.get(at).is_some() && layout.roles[at] == Role::Decoration {
                        at += 1;
                    }
                    at
                }
            };
            doc.insert(at, vec![line]);
            return;
        }
    }
    let heading = heading_for(&layout, &doc.lines, date);
    let first_dated = (0..doc.lines.len()).find(|&i| layout.dated && layout.roles[i] == Role::Subtitle);
    match first_dated {
        Some(i) if layout.newest_first => {
            doc.insert(i, vec![heading, String::new(), line, String::new()]);
        }
        Some(_) => {
            let mut block = vec![heading, String::new(), line];
            if doc.lines.last().is_some_and(|l| !l.trim().is_empty()) {
                block.insert(0, String::new());
            }
            let end = doc.lines.len();
            doc.insert(end, block);
        }
        None => {
            let at = after_title(&doc.lines);
            let mut block = vec![heading, String::new(), line];
            if at < doc.lines.len() {
                block.push(String::new());
            }
            if at > 0 && !doc.lines[at - 1].trim().is_empty() {
                block.insert(0, String::new());
            }
            doc.insert(at, block);
        }
    }
}

fn action_date(a: &FixAction) -> Option<NaiveDate> {
    a.payload.d_e.or(a.payload.d_s)
}

/// New content of `notice` after applying `actions`, all aimed at this file.
/// With no notice a fresh changelog is started.
pub fn apply_fixes(notice: Option<&NoticeFile>, actions: &[FixAction]) -> String {
    let mut doc = match notice {
        Some(n) => Doc::new(&n.text),
        None => Doc::new("# Changelog\n"),
    };
    if actions.is_empty() {
        return notice.map_or_else(|| doc.text(), |n| n.text.clone());
    }
    let mut ordered: Vec<&FixAction> = actions.iter().collect();
    ordered.sort_by_key(|a| (a.kind == FixKind::CreateEntry, a.kind, action_date(a)));

    for action in ordered {
        match action.kind {
            FixKind::SetAuthor | FixKind::SetDates => {
                let Some(at) = action.payload.source.as_ref().and_then(|s| doc.find(s.line)) else {
                    continue;
                };
                if let Some(a) = written_author(action) {
                    let updated = format!("{} ({})", doc.lines[at].trim_end(), author_label(a));
                    doc.lines[at] = defuse_dates(&updated);
                }
                if action.kind == FixKind::SetDates {
                    if let Some(date) = action_date(action) {
                        set_dates(&mut doc, at, date);
                    }
                }
            }
            FixKind::CreateEntry => {
                let Some(date) = action_date(action) else { continue };
                let line = entry_line(&action.payload.msg, written_author(action));
                insert_dated(&mut doc, line, date);
            }
        }
    }
    doc.text()
}

fn set_dates(doc: &mut Doc, at: usize, date: NaiveDate) {
    let (layout, blocks) = doc.parse();
    let block = block_of(&blocks, at);
    if block.is_some_and(|b| block_covers(b, date)) {
        return;
    }
    if !layout.dated {
        if let Some(s) = block.and_then(|b| b.subtitle_line) {
            let annotated = format!("{} ({})", doc.lines[s].trim_end(), date);
            doc.lines[s] = annotated;
            return;
        }
    }
    let line = doc.remove(at);
    let blank = |d: &Doc, i: usize| d.lines.get(i).is_some_and(|l| l.trim().is_empty());
    if at > 0 && blank(doc, at - 1) && blank(doc, at) {
        doc.remove(at);
    }
    insert_dated(doc, line, date);
}

/// Notice file that receives created entries: a root-level one if any,
/// otherwise the first by path.
pub fn preferred_notice(notices: &[NoticeFile]) -> Option<&NoticeFile> {
    notices
        .iter()
        .min_by(|a, b| (a.path.contains('/'), &a.path).cmp(&(b.path.contains('/'), &b.path)))
}

pub fn unified_diff(path: &str, old: Option<&str>, new: &str) -> String {
    let (from, old_text) = match old {
        Some(t) => (format!("a/{path}"), t),
        None => ("/dev/null".to_string(), ""),
    };
    TextDiff::from_lines(old_text, new)
        .unified_diff()
        .context_radius(3)
        .header(&from, &format!("b/{path}"))
        .to_string()
}

/// Groups `actions` per notice file and rewrites each one. Files whose
/// content does not change are omitted.
pub fn plan_fixes(notices: &[NoticeFile], actions: &[FixAction]) -> Vec<FilePatch> {
    let default_target = preferred_notice(notices).map_or(DEFAULT_NOTICE_PATH.to_string(), |n| n.path.clone());
    let mut grouped: BTreeMap<String, Vec<FixAction>> = BTreeMap::new();
    for a in actions {
        let target = a.target.clone().unwrap_or_else(|| default_target.clone());
        grouped.entry(target).or_default().push(a.clone());
    }
    grouped
        .into_iter()
        .filter_map(|(path, acts)| {
            let notice = notices.iter().find(|n| n.path == path);
            let new = apply_fixes(notice, &acts);
            let old = notice.map(|n| n.text.clone());
            if old.as_deref() == Some(new.as_str()) {
                return None;
            }
            let diff = unified_diff(&path, old.as_deref(), &new);
            Some(FilePatch { path, old, new, diff })
        })
        .collect()
}

/// A dedicated entry for the commit of `rec`, carrying its date and, when
/// required, its author.
pub fn dedicated_entry(rec: &DetectionRecord) -> Option<FixAction> {
    if !rec.kind.is_violation() {
        return None;
    }
    let h = &rec.commit;
    Some(FixAction {
        kind: FixKind::CreateEntry,
        target: None,
        payload: crate::notice::ChangeLogEntry {
            msg: h.msg.clone(),
            d_s: Some(h.date),
            d_e: Some(h.date),
            author: Some(h.author.clone()),
            source: None,
        },
        commit_id: h.id.clone(),
        with_author: rec
            .required
            .as_ref()
            .is_some_and(|r| r.requires(ContentElement::Author)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixOutcome {
    /// One patch per changed notice file, against the original content.
    pub patches: Vec<FilePatch>,
    pub actions: Vec<FixAction>,
    pub rounds: usize,
    /// Violations left after the last round.
    pub remaining: usize,
}

/// Repeats detection and repair until no obligating commit is violated.
///
/// The first round applies [`generate_fix`]. An edit to a shared entry can
/// move another commit's best match, so later rounds give each commit that
/// is still violated an entry of its own.
pub fn fix_to_fixpoint(
    notices: &[NoticeFile],
    obligating: &[ObligatingCommit],
    authors: &AuthorSet,
    cfg: &MatchConfig,
) -> FixOutcome {
    let mut current: Vec<NoticeFile> = notices.to_vec();
    let mut all_actions = Vec::new();
    let mut rounds = 0;
    let remaining = loop {
        let entries = extract_all(&current, authors);
        let index = build_index(&entries);
        let violating: Vec<DetectionRecord> = classify_all(obligating, &entries, &index, cfg)
            .into_iter()
            .filter(|r| r.kind.is_violation())
            .collect();
        if violating.is_empty() || rounds == MAX_FIX_ROUNDS {
            break violating.len();
        }
        let actions: Vec<FixAction> = if rounds == 0 {
            violating.iter().filter_map(generate_fix).collect()
        } else {
            violating.iter().filter_map(dedicated_entry).collect()
        };
        for patch in plan_fixes(&current, &actions) {
            match current.iter_mut().find(|n| n.path == patch.path) {
                Some(n) => n.text = patch.new,
                None => current.push(NoticeFile::new(patch.path, patch.new)),
            }
        }
        all_actions.extend(actions);
        rounds += 1;
    };
    let patches = current
        .iter()
        .filter_map(|n| {
            let old = notices.iter().find(|o| o.path == n.path).map(|o| o.text.clone());
            if old.as_deref() == Some(n.text.as_str()) {
                return None;
            }
            Some(FilePatch {
                path: n.path.clone(),
                diff: unified_diff(&n.path, old.as_deref(), &n.text),
                old,
                new: n.text.clone(),
            })
        })
        .collect();
    FixOutcome {
        patches,
        actions: all_actions,
        rounds,
        remaining,
    }
}
