//! Notice file discovery and changelog parsing.
//!
//! A notice file is split into blocks. When any line carries a date, every
//! dated line starts a block; otherwise markdown/setext headings do. Each
//! non-blank line that is not a subtitle becomes a change-log entry carrying
//! its block's date range.

use std::path::Path;

use chrono::NaiveDate;
use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::commits::AuthorSet;
use crate::date::parse_date;
use crate::error::{Error, Result};
use crate::history::Author;

const BUILTIN_PATTERNS: &str = include_str!("../data/notice_patterns.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoticeFile {
    pub path: String,
    pub text: String,
}

impl NoticeFile {
    pub fn new(path: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            text: text.into(),
        }
    }
}

/// Compiled notice filename globs.
#[derive(Debug, Clone)]
pub struct NoticePatterns {
    by_name: Vec<Regex>,
    by_path: Vec<Regex>,
}

impl NoticePatterns {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_PATTERNS).expect("shipped patterns are valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// One glob per line (`*` and `?` wildcards); `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut by_name = Vec::new();
        let mut by_path = Vec::new();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let re = glob_regex(line).map_err(|e| Error::DataFile {
                name: "notice patterns".into(),
                message: e.to_string(),
            })?;
            if line.contains('/') {
                by_path.push(re);
            } else {
                by_name.push(re);
            }
        }
        Ok(Self { by_name, by_path })
    }

    pub fn matches(&self, path: &str) -> bool {
        let name = path.rsplit('/').next().unwrap_or(path);
        self.by_name.iter().any(|re| re.is_match(name))
            || self.by_path.iter().any(|re| re.is_match(path))
    }
}

fn glob_regex(glob: &str) -> std::result::Result<Regex, regex::Error> {
    let mut pattern = String::from("^");
    for c in glob.chars() {
        match c {
            '*' => pattern.push_str("[^/]*"),
            '?' => pattern.push_str("[^/]"),
            _ => pattern.push_str(&regex::escape(&c.to_string())),
        }
    }
    pattern.push('$');
    RegexBuilder::new(&pattern).case_insensitive(true).build()
}

/// Paths in `fork_files` that look like notice files, sorted.
pub fn locate_notice_files<'a>(fork_files: impl IntoIterator<Item = &'a str>, patterns: &NoticePatterns) -> Vec<String> {
    let mut found: Vec<String> = fork_files
        .into_iter()
        .filter(|p| patterns.matches(p))
        .map(str::to_string)
        .collect();
    found.sort();
    found.dedup();
    found
}

/// A line inside a notice file; `number` is zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoticeLine {
    pub number: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeLogBlock {
    /// Subtitle text; empty for the preamble or a file without subtitles.
    pub subtitle: String,
    /// Zero-based line of the subtitle, if the block has one.
    pub subtitle_line: Option<usize>,
    pub d_s: Option<NaiveDate>,
    pub d_e: Option<NaiveDate>,
    pub lines: Vec<NoticeLine>,
}

impl ChangeLogBlock {
    pub fn is_dated(&self) -> bool {
        self.subtitle_line.is_some() && self.d_e.is_some()
    }
}

/// Where an entry was read from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntrySource {
    pub path: String,
    pub line: usize,
    pub block: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeLogEntry {
    pub msg: String,
    pub d_s: Option<NaiveDate>,
    pub d_e: Option<NaiveDate>,
    pub author: Option<Author>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<EntrySource>,
}

impl ChangeLogEntry {
    pub fn new(msg: impl Into<String>) -> Self {
        Self {
            msg: msg.into(),
            d_s: None,
            d_e: None,
            author: None,
            source: None,
        }
    }

    /// `date` lies in `[d_s, d_e]`, an absent bound being open on that side.
    /// An entry without any date never covers a date.
    pub fn covers(&self, date: NaiveDate) -> bool {
        if self.d_s.is_none() && self.d_e.is_none() {
            return false;
        }
        self.d_s.map_or(true, |s| s <= date) && self.d_e.map_or(true, |e| date <= e)
    }
}

fn is_atx_heading(line: &str) -> bool {
    let hashes = line.chars().take_while(|&c| c == '#').count();
    (1..=6).contains(&hashes)
        && line[hashes..]
            .chars()
            .next()
            .map_or(true, char::is_whitespace)
}

fn is_underline(line: &str) -> bool {
    let t = line.trim();
    t.len() >= 3
        && ['=', '-', '~', '^']
            .iter()
            .any(|&c| t.chars().all(|x| x == c))
}

fn is_list_item(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with("- ") || t.starts_with("* ") || t.starts_with("+ ")
}

/// Line roles used by the parser and by the fix writer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Role {
    Blank,
    Subtitle,
    /// Underline belonging to the preceding subtitle.
    Decoration,
    Entry,
}

/// Layout of a notice file.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub roles: Vec<Role>,
    pub dated: bool,
    /// True when dated subtitles run newest first (or there is at most one).
    pub newest_first: bool,
}

pub(crate) fn analyze(lines: &[&str]) -> Layout {
    let dates: Vec<Option<NaiveDate>> = lines.iter().map(|l| parse_date(l)).collect();
    let dated = dates.iter().any(Option::is_some);
    let mut roles = vec![Role::Entry; lines.len()];
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            roles[i] = Role::Blank;
            continue;
        }
        if dated {
            if dates[i].is_some() {
                roles[i] = Role::Subtitle;
            }
            continue;
        }
        if is_atx_heading(line.trim_start()) {
            roles[i] = Role::Subtitle;
            continue;
        }
        let next_is_underline = lines.get(i + 1).is_some_and(|n| is_underline(n));
        if next_is_underline && !is_list_item(line) && !is_underline(line) {
            roles[i] = Role::Subtitle;
        }
    }
    for i in 1..lines.len() {
        if roles[i - 1] == Role::Subtitle && is_underline(lines[i]) {
            roles[i] = Role::Decoration;
        }
    }
    let ordered: Vec<NaiveDate> = (0..lines.len())
        .filter(|&i| roles[i] == Role::Subtitle)
        .filter_map(|i| dates[i])
        .collect();
    let newest_first = match (ordered.first(), ordered.last()) {
        (Some(first), Some(last)) => first >= last,
        _ => true,
    };
    Layout {
        roles,
        dated,
        newest_first,
    }
}

pub fn split_blocks(notice: &NoticeFile) -> Vec<ChangeLogBlock> {
    let lines: Vec<&str> = notice.text.lines().collect();
    let layout = analyze(&lines);

    let mut blocks: Vec<ChangeLogBlock> = Vec::new();
    let mut current = ChangeLogBlock {
        subtitle: String::new(),
        subtitle_line: None,
        d_s: None,
        d_e: None,
        lines: Vec::new(),
    };
    for (i, line) in lines.iter().enumerate() {
        match layout.roles[i] {
            Role::Blank | Role::Decoration => {}
            Role::Subtitle => {
                let done = std::mem::replace(
                    &mut current,
                    ChangeLogBlock {
                        subtitle: line.trim().to_string(),
                        subtitle_line: Some(i),
                        d_s: None,
                        d_e: if layout.dated { parse_date(line) } else { None },
                        lines: Vec::new(),
                    },
                );
                if done.subtitle_line.is_some() || !done.lines.is_empty() {
                    blocks.push(done);
                }
            }
            Role::Entry => current.lines.push(NoticeLine {
                number: i,
                text: line.trim().to_string(),
            }),
        }
    }
    if current.subtitle_line.is_some() || !current.lines.is_empty() || blocks.is_empty() {
        blocks.push(current);
    }

    if layout.dated {
        assign_ranges(&mut blocks, layout.newest_first);
    }
    blocks
}

/// Each dated block ends at its own date and starts at the date of the next
/// older block. The oldest block is open towards the past. Lines before the
/// first subtitle of a newest-first file start at the newest date.
fn assign_ranges(blocks: &mut [ChangeLogBlock], newest_first: bool) {
    let dated: Vec<usize> = (0..blocks.len())
        .filter(|&i| blocks[i].subtitle_line.is_some())
        .collect();
    for (k, &i) in dated.iter().enumerate() {
        let older = if newest_first {
            dated.get(k + 1)
        } else {
            k.checked_sub(1).and_then(|j| dated.get(j))
        };
        let d_s = older.and_then(|&j| blocks[j].d_e);
        blocks[i].d_s = match (d_s, blocks[i].d_e) {
            (Some(s), Some(e)) if s > e => None,
            (s, _) => s,
        };
    }
    if newest_first {
        if let (Some(first), Some(&i)) = (blocks.first(), dated.first()) {
            if first.subtitle_line.is_none() {
                let newest = blocks[i].d_e;
                blocks[0].d_s = newest;
            }
        }
    }
}

/// End offset of the last whole-word, case-sensitive occurrence of `needle`.
fn last_word_end(hay: &str, needle: &str) -> Option<usize> {
    if needle.is_empty() {
        return None;
    }
    hay.match_indices(needle)
        .filter(|(i, _)| {
            let before = hay[..*i].chars().next_back();
            let after = hay[i + needle.len()..].chars().next();
            !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
        })
        .map(|(i, _)| i + needle.len())
        .last()
}

fn email_local_part(email: &str) -> &str {
    let local = email.split('@').next().unwrap_or("");
    // GitHub noreply addresses look like 1234+login@users.noreply.github.com
    match local.split_once('+') {
        Some((digits, login)) if digits.chars().all(|c| c.is_ascii_digit()) => login,
        _ => local,
    }
}

/// Author of `authors` named in `line` by display name or email local part
/// (whole word). When several are named, the mention ending last wins; ties
/// go to the earlier author in the set.
pub fn find_author<'a>(line: &str, authors: &'a AuthorSet) -> Option<&'a Author> {
    let mut best: Option<(usize, &Author)> = None;
    for a in authors.iter() {
        let end = [last_word_end(line, a.name.trim()), last_word_end(line, email_local_part(&a.email))]
            .into_iter()
            .flatten()
            .max();
        if let Some(end) = end {
            if best.map_or(true, |(b, _)| end > b) {
                best = Some((end, a));
            }
        }
    }
    best.map(|(_, a)| a)
}

fn mentions(text: &str, author: &Author) -> bool {
    last_word_end(text, author.name.trim()).is_some()
        || last_word_end(text, email_local_part(&author.email)).is_some()
}

/// `line` without a trailing parenthesized attribution naming `author`,
/// e.g. `Fixed tracking pixels (thanks Phylu)` -> `Fixed tracking pixels`.
pub fn strip_attribution<'a>(line: &'a str, author: &Author) -> &'a str {
    let t = line.trim_end();
    let Some(body) = t.strip_suffix(')') else {
        return line;
    };
    let Some(open) = body.rfind('(') else {
        return line;
    };
    let head = body[..open].trim_end();
    if mentions(&body[open + 1..], author) && !head.trim_start_matches(['-', '*', '+', ' ']).is_empty() {
        head
    } else {
        line
    }
}

pub fn extract_entries(path: &str, blocks: &[ChangeLogBlock], authors: &AuthorSet) -> Vec<ChangeLogEntry> {
    blocks
        .iter()
        .enumerate()
        .flat_map(|(b, block)| {
            block.lines.iter().map(move |line| {
                let author = find_author(&line.text, authors).cloned();
                let msg = match &author {
                    Some(a) => strip_attribution(&line.text, a).to_string(),
                    None => line.text.clone(),
                };
                ChangeLogEntry {
                    msg,
                    d_s: block.d_s,
                    d_e: block.d_e,
                    author,
                    source: Some(EntrySource {
                        path: path.to_string(),
                        line: line.number,
                        block: b,
                    }),
                }
            })
        })
        .collect()
}

/// Entries of every notice file, concatenated in path order.
pub fn extract_all(notices: &[NoticeFile], authors: &AuthorSet) -> Vec<ChangeLogEntry> {
    let mut sorted: Vec<&NoticeFile> = notices.iter().collect();
    sorted.sort_by(|a, b| a.path.cmp(&b.path));
    sorted
        .into_iter()
        .flat_map(|n| extract_entries(&n.path, &split_blocks(n), authors))
        .collect()
}
