//! File- and project-level license identification.
//!
//! Header text is pulled from the leading comment block of a file and
//! matched first against an `SPDX-License-Identifier` tag, then against a
//! small set of key sentences per license.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUILTIN_LICENSES: &str = include_str!("../data/licenses.toml");

/// Physical lines scanned for a header.
pub const HEADER_WINDOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DetectionMethod {
    SpdxTag,
    HeaderTemplate,
    ProjectFallback,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LicenseDetection {
    pub license: Option<String>,
    pub method: DetectionMethod,
}

impl LicenseDetection {
    fn found(license: String, method: DetectionMethod) -> Self {
        Self {
            license: Some(license),
            method,
        }
    }

    fn unknown() -> Self {
        Self {
            license: None,
            method: DetectionMethod::Unknown,
        }
    }
}

#[derive(Debug, Deserialize)]
struct LicenseFile {
    #[serde(default)]
    version: Option<String>,
    #[serde(default, rename = "template")]
    templates: Vec<TemplateRecord>,
    #[serde(default)]
    aliases: BTreeMap<String, String>,
}

#[derive(Debug, Deserialize)]
struct TemplateRecord {
    id: String,
    any: Vec<Vec<String>>,
}

#[derive(Debug, Clone)]
struct Template {
    id: String,
    /// Each alternative matches when all of its sentences are present.
    alternatives: Vec<Vec<String>>,
}

/// Key-sentence templates plus identifier aliases.
#[derive(Debug, Clone)]
pub struct LicenseMatcher {
    version: String,
    templates: Vec<Template>,
    /// Lowercased identifier or alias -> canonical identifier.
    ids: HashMap<String, String>,
}

impl LicenseMatcher {
    pub fn builtin() -> Self {
        Self::from_toml_str(BUILTIN_LICENSES, "builtin licenses.toml")
            .expect("shipped license data is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn from_toml_str(text: &str, name: &str) -> Result<Self> {
        let bad = |message: String| Error::DataFile {
            name: name.to_string(),
            message,
        };
        let file: LicenseFile = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        let mut ids = HashMap::new();
        let mut templates: Vec<Template> = Vec::new();
        for rec in file.templates {
            if ids
                .insert(rec.id.to_ascii_lowercase(), rec.id.clone())
                .is_some()
            {
                return Err(bad(format!("duplicate template `{}`", rec.id)));
            }
            let alternatives = rec
                .any
                .iter()
                .map(|alt| alt.iter().map(|s| word_normalize(s)).collect::<Vec<_>>())
                .filter(|alt| !alt.is_empty() && alt.iter().all(|s| !s.is_empty()))
                .collect();
            templates.push(Template {
                id: rec.id,
                alternatives,
            });
        }
        for (alias, target) in file.aliases {
            if !ids.values().any(|id| *id == target) {
                return Err(bad(format!("alias `{alias}` targets unknown license `{target}`")));
            }
            ids.insert(alias.to_ascii_lowercase(), target);
        }
        Ok(Self {
            version: file.version.unwrap_or_default(),
            templates,
            ids,
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn known_licenses(&self) -> impl Iterator<Item = &str> {
        self.templates.iter().map(|t| t.id.as_str())
    }

    /// Maps an identifier or alias to its canonical identifier.
    pub fn normalize_id(&self, raw: &str) -> Option<&str> {
        self.ids
            .get(&raw.trim().to_ascii_lowercase())
            .map(String::as_str)
    }

    /// Best template hit in already-normalized text. The score is the total
    /// length of the matched sentences; ties go to the earlier template.
    fn match_templates(&self, text: &str) -> Option<&str> {
        let normalized = word_normalize(text);
        let mut best: Option<(usize, &str)> = None;
        for template in &self.templates {
            let score = template
                .alternatives
                .iter()
                .filter(|alt| alt.iter().all(|s| contains_phrase(&normalized, s)))
                .map(|alt| alt.iter().map(String::len).sum::<usize>())
                .max();
            if let Some(score) = score {
                if best.map_or(true, |(b, _)| score > b) {
                    best = Some((score, &template.id));
                }
            }
        }
        best.map(|(_, id)| id)
    }

    fn match_spdx(&self, header: &str) -> Option<&str> {
        const TAG: &str = "spdx-license-identifier:";
        let start = header.find(TAG)? + TAG.len();
        header[start..]
            .split(|c: char| c.is_whitespace() || c == '(' || c == ')')
            .filter(|tok| !tok.is_empty())
            .take_while(|tok| !tok.ends_with(':'))
            .filter(|tok| !matches!(*tok, "or" | "and" | "with"))
            .map(|tok| tok.trim_end_matches([',', ';', '*', '/']))
            .find_map(|tok| self.normalize_id(tok))
    }

    pub fn detect_file_license(
        &self,
        content: &[u8],
        project_license: Option<&str>,
    ) -> LicenseDetection {
        let header = extract_header_text(content);
        if let Some(id) = self.match_spdx(&header) {
            return LicenseDetection::found(id.to_string(), DetectionMethod::SpdxTag);
        }
        if let Some(id) = self.match_templates(&header) {
            return LicenseDetection::found(id.to_string(), DetectionMethod::HeaderTemplate);
        }
        match project_license.and_then(|lic| self.normalize_id(lic)) {
            Some(lic) => LicenseDetection::found(lic.to_string(), DetectionMethod::ProjectFallback),
            None => LicenseDetection::unknown(),
        }
    }

    /// Looks at LICENSE / LICENCE / COPYING (optionally `.md` or `.txt`) in
    /// the repository root. Files are tried in path order.
    pub fn detect_project_license<'a, I>(&self, root_files: I) -> Option<String>
    where
        I: IntoIterator<Item = (&'a str, &'a [u8])>,
    {
        let mut candidates: Vec<(&str, &[u8])> = root_files
            .into_iter()
            .filter(|(path, _)| is_license_file_name(path))
            .collect();
        candidates.sort_by(|a, b| a.0.cmp(b.0));
        candidates.into_iter().find_map(|(_, bytes)| {
            if is_binary(bytes) {
                return None;
            }
            let text = String::from_utf8_lossy(bytes).to_lowercase();
            self.match_spdx(&collapse_ws(&text))
                .or_else(|| self.match_templates(&text))
                .map(str::to_string)
        })
    }
}

pub fn is_license_file_name(path: &str) -> bool {
    if path.contains('/') {
        return false;
    }
    let lower = path.to_ascii_lowercase();
    let stem = lower
        .strip_suffix(".md")
        .or_else(|| lower.strip_suffix(".txt"))
        .unwrap_or(&lower);
    matches!(stem, "license" | "licence" | "copying")
}

fn is_binary(bytes: &[u8]) -> bool {
    bytes.iter().take(8000).any(|&b| b == 0)
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lowercase; keep alphanumerics, `.` and `+`; everything else separates words.
fn word_normalize(s: &str) -> String {
    let mapped: String = s
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '.' || c == '+' {
                c.to_lowercase().next().unwrap_or(c)
            } else {
                ' '
            }
        })
        .collect();
    collapse_ws(&mapped)
}

/// Substring match aligned to word boundaries; `version 2` must not hit
/// `version 2.1` or `version 20`.
fn contains_phrase(haystack: &str, phrase: &str) -> bool {
    let bytes = haystack.as_bytes();
    let mut from = 0;
    while let Some(pos) = haystack[from..].find(phrase) {
        let start = from + pos;
        let end = start + phrase.len();
        let before_ok = start == 0 || bytes[start - 1] == b' ';
        let after_ok = match bytes.get(end) {
            None | Some(b' ') => true,
            Some(b'.') => !bytes.get(end + 1).is_some_and(u8::is_ascii_digit),
            Some(_) => false,
        };
        if before_ok && after_ok {
            return true;
        }
        from = start + 1;
        while !haystack.is_char_boundary(from) {
            from += 1;
        }
    }
    false
}

const PREPROCESSOR: &[&str] = &[
    "include", "define", "if", "ifdef", "ifndef", "else", "elif", "endif", "pragma", "import",
    "undef", "error", "line",
];

enum Block {
    Slash,
    Html,
    Ml,
    Haskell,
}

/// Text of the first contiguous comment region within the first
/// [`HEADER_WINDOW`] lines, with comment markers stripped, lowercased and
/// whitespace collapsed. Binary content yields an empty string.
pub fn extract_header_text(content: &[u8]) -> String {
    if is_binary(content) {
        return String::new();
    }
    let text = String::from_utf8_lossy(content);
    let mut parts: Vec<String> = Vec::new();
    let mut open: Option<Block> = None;

    for (idx, raw) in text.lines().take(HEADER_WINDOW).enumerate() {
        let line = raw.trim();
        if let Some(kind) = &open {
            let close = match kind {
                Block::Slash => "*/",
                Block::Html => "-->",
                Block::Ml => "*)",
                Block::Haskell => "-}",
            };
            match line.find(close) {
                Some(pos) => {
                    parts.push(strip_inner(&line[..pos]));
                    open = None;
                }
                None => parts.push(strip_inner(line)),
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        if idx == 0 && (line.starts_with("#!") || line.starts_with("<?xml")) {
            continue;
        }
        let opener = [
            ("/*", "*/", Block::Slash),
            ("<!--", "-->", Block::Html),
            ("(*", "*)", Block::Ml),
            ("{-", "-}", Block::Haskell),
        ]
        .into_iter()
        .find(|(o, _, _)| line.starts_with(o));
        if let Some((o, close, kind)) = opener {
            let rest = &line[o.len()..];
            match rest.find(close) {
                Some(pos) => parts.push(strip_inner(&rest[..pos])),
                None => {
                    parts.push(strip_inner(rest));
                    open = Some(kind);
                }
            }
            continue;
        }
        if let Some(body) = line_comment_body(line) {
            parts.push(body.to_string());
            continue;
        }
        // First code line ends the region.
        break;
    }
    collapse_ws(&parts.join(" ").to_lowercase())
}

fn line_comment_body(line: &str) -> Option<&str> {
    for marker in ["///", "//!", "//", "--", ";;", ";", "%", "'"] {
        if let Some(rest) = line.strip_prefix(marker) {
            if marker == "--" && rest.starts_with('-') && rest.trim_matches('-').is_empty() {
                // YAML document marker or a rule line
                return None;
            }
            return Some(rest);
        }
    }
    if let Some(rest) = line.strip_prefix('#') {
        let word = rest
            .trim_start()
            .split(|c: char| !c.is_ascii_alphabetic())
            .next()
            .unwrap_or("");
        if PREPROCESSOR.contains(&word) && !rest.starts_with(' ') {
            return None;
        }
        return Some(rest);
    }
    let lower = line.to_ascii_lowercase();
    if lower == "rem" || lower.starts_with("rem ") || lower.starts_with("::") {
        return Some(&line[3.min(line.len())..]);
    }
    None
}

fn strip_inner(line: &str) -> String {
    line.trim()
        .trim_start_matches('*')
        .trim_end_matches("*/")
        .trim()
        .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matcher() -> LicenseMatcher {
        LicenseMatcher::builtin()
    }

    #[test]
    fn header_of_block_comment() {
        let src = b"/* Licensed under the Apache License, Version 2.0 */\nint main() {}\n";
        assert_eq!(
            extract_header_text(src),
            "licensed under the apache license, version 2.0"
        );
    }

    #[test]
    fn header_absent_without_leading_comment() {
        assert_eq!(extract_header_text(b"#include <stdio.h>\nint x; // trailing\n"), "");
        assert_eq!(extract_header_text(b"fn main() {}\n// later\n"), "");
    }

    #[test]
    fn header_of_shell_script() {
        let src = b"#!/bin/sh\n# SPDX-License-Identifier: GPL-2.0-only\necho hi\n";
        assert_eq!(extract_header_text(src), "spdx-license-identifier: gpl-2.0-only");
    }

    #[test]
    fn header_spans_multiline_block_and_line_comments() {
        let src = b"/*\n * Copyright 2020 Foo\n *\n * Licensed   under X\n */\n\n// more\npackage a;\n// ignored\n";
        assert_eq!(extract_header_text(src), "copyright 2020 foo licensed under x more");
    }

    #[test]
    fn header_stops_at_window() {
        let mut src = String::new();
        for _ in 0..HEADER_WINDOW {
            src.push_str("//\n");
        }
        src.push_str("// SPDX-License-Identifier: MIT\n");
        assert_eq!(extract_header_text(src.as_bytes()), "");
    }

    #[test]
    fn binary_has_no_header() {
        assert_eq!(extract_header_text(b"// a\0b"), "");
    }

    #[test]
    fn spdx_tag_wins() {
        let m = matcher();
        let d = m.detect_file_license(
            b"// SPDX-License-Identifier: Apache-2.0\n// Licensed under the MIT License\n",
            Some("GPL-3.0"),
        );
        assert_eq!(d, LicenseDetection::found("Apache-2.0".into(), DetectionMethod::SpdxTag));
    }

    #[test]
    fn spdx_expression_picks_first_recognized() {
        let m = matcher();
        let d = m.detect_file_license(b"# SPDX-License-Identifier: (Foo-1 OR MIT OR Apache-2.0)\n", None);
        assert_eq!(d.license.as_deref(), Some("MIT"));
        let d = m.detect_file_license(b"# SPDX-License-Identifier: GPL-2.0-or-later\n", None);
        assert_eq!(d.license.as_deref(), Some("GPL-2.0"));
    }

    #[test]
    fn apache_boilerplate_is_template_match() {
        let src = b"/*\n * Licensed under the Apache License, Version 2.0 (the \"License\");\n * you may not use this file except in compliance with the License.\n */\n";
        let d = matcher().detect_file_license(src, None);
        assert_eq!(d, LicenseDetection::found("Apache-2.0".into(), DetectionMethod::HeaderTemplate));
    }

    #[test]
    fn gpl_versions_are_distinguished() {
        let m = matcher();
        let v2 = b"# This program is free software; you can redistribute it and/or modify\n# it under the terms of the GNU General Public License as published by\n# the Free Software Foundation; either version 2 of the License, or\n# (at your option) any later version.\n";
        assert_eq!(m.detect_file_license(v2, None).license.as_deref(), Some("GPL-2.0"));
        let v3 = String::from_utf8_lossy(v2).replace("version 2", "version 3");
        assert_eq!(m.detect_file_license(v3.as_bytes(), None).license.as_deref(), Some("GPL-3.0"));
        let lgpl = b"// GNU Lesser General Public License as published by the Free Software Foundation; either version 2.1 of the License\n";
        assert_eq!(m.detect_file_license(lgpl, None).license.as_deref(), Some("LGPL-2.1"));
    }

    #[test]
    fn unversioned_gpl_is_not_guessed() {
        let d = matcher().detect_file_license(b"// Released under the GNU General Public License.\n", None);
        assert_eq!(d, LicenseDetection::unknown());
    }

    #[test]
    fn falls_back_to_project_license() {
        let d = matcher().detect_file_license(b"int main() {}\n", Some("GPL-3.0"));
        assert_eq!(d, LicenseDetection::found("GPL-3.0".into(), DetectionMethod::ProjectFallback));
        let d = matcher().detect_file_license(b"int main() {}\n", None);
        assert_eq!(d.method, DetectionMethod::Unknown);
    }

    #[test]
    fn bsd_variants() {
        let m = matcher();
        let two = b"/* Redistribution and use in source and binary forms, with or without modification, are permitted provided that */\n";
        assert_eq!(m.detect_file_license(two, None).license.as_deref(), Some("BSD-2-Clause"));
        let three = b"/* Redistribution and use in source and binary forms, with or without modification, are permitted provided that\n * Neither the name of the copyright holder nor ... */\n";
        assert_eq!(m.detect_file_license(three, None).license.as_deref(), Some("BSD-3-Clause"));
    }

    #[test]
    fn project_license_from_root_files() {
        let m = matcher();
        let gpl3 = b"                    GNU GENERAL PUBLIC LICENSE\n                       Version 3, 29 June 2007\n\n Copyright (C) 2007 Free Software Foundation, Inc. <https://fsf.org/>\n";
        assert_eq!(
            m.detect_project_license([("LICENSE", &gpl3[..]), ("src/x.c", &b""[..])]),
            Some("GPL-3.0".into())
        );
        assert_eq!(m.detect_project_license([("README.md", &b"hi"[..])]), None);
        assert_eq!(
            m.detect_project_license([("COPYING.txt", &b"The MIT License (MIT)\n"[..])]),
            Some("MIT".into())
        );
        assert_eq!(
            m.detect_project_license([("sub/LICENSE", &b"The MIT License (MIT)\n"[..])]),
            None
        );
    }

    #[test]
    fn phrase_boundaries() {
        assert!(contains_phrase("gnu gpl version 2 or later", "version 2"));
        assert!(contains_phrase("version 2.", "version 2"));
        assert!(!contains_phrase("version 2.1", "version 2"));
        assert!(!contains_phrase("version 20", "version 2"));
        assert!(!contains_phrase("subversion 2", "version 2"));
    }

    #[test]
    fn detection_never_invents_identifiers() {
        let m = matcher();
        let d = m.detect_file_license(b"# SPDX-License-Identifier: Made-Up-1.0\n", None);
        assert_eq!(d.method, DetectionMethod::Unknown);
    }
}
