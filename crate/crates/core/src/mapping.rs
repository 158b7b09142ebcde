//! File mappings between the base snapshots and the fork, and selection of
//! the mapped files that a modification term protects.
//!
//! Mapping runs in three stages with strict priority: identical path, rename
//! chain through fork history, then file-level clone similarity. A fork file
//! consumed by one stage is not offered to the next.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::hash::{DefaultHasher, Hash, Hasher};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::history::{ChangeKind, CommitChanges};
use crate::model::{ModificationTerm, ObligationModel, ScopeElement};

pub const DEFAULT_CLONE_THRESHOLD: f64 = 0.8;
pub const SHINGLE_SIZE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Snapshot {
    /// Base at the fork point.
    B1,
    /// Latest base.
    B2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MappingOrigin {
    SamePath,
    Rename,
    Clone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileMapping {
    pub base_path: String,
    pub snapshot: Snapshot,
    pub fork_path: String,
    pub origin: MappingOrigin,
    /// Clone similarity; only set for `Clone` mappings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObligatingFile {
    pub base_path: String,
    pub fork_path: String,
    pub term: ModificationTerm,
}

/// File listings of the two base snapshots plus the set of paths the base
/// history ever created.
#[derive(Debug, Clone, Default)]
pub struct BaseFiles {
    pub b1: BTreeSet<String>,
    pub b2: BTreeSet<String>,
    pub created: BTreeSet<String>,
}

impl BaseFiles {
    /// Snapshot holding a base-created `path`, preferring B1.
    fn locate(&self, path: &str) -> Option<Snapshot> {
        if !self.created.contains(path) {
            return None;
        }
        if self.b1.contains(path) {
            Some(Snapshot::B1)
        } else if self.b2.contains(path) {
            Some(Snapshot::B2)
        } else {
            None
        }
    }
}

pub fn map_same_path(base: &BaseFiles, fork_files: &[String]) -> Vec<FileMapping> {
    fork_files
        .iter()
        .filter_map(|path| {
            base.locate(path).map(|snapshot| FileMapping {
                base_path: path.clone(),
                snapshot,
                fork_path: path.clone(),
                origin: MappingOrigin::SamePath,
                similarity: None,
            })
        })
        .collect()
}

/// Follows renames backwards through `fork_history` (newest first). The
/// walk stops at the commit that added the current path; a chain that ends
/// in a fork-side addition maps to nothing.
pub fn map_renames(
    base: &BaseFiles,
    unmapped: &[String],
    fork_history: &[CommitChanges],
) -> Vec<FileMapping> {
    unmapped
        .iter()
        .filter_map(|fork_path| {
            let mut current = fork_path.clone();
            let mut renamed = false;
            for entry in fork_history {
                let Some(change) = entry.changes.iter().find(|c| c.path == current) else {
                    continue;
                };
                match change.kind {
                    ChangeKind::Renamed => {
                        current = change.old_path.clone().expect("rename has old path");
                        renamed = true;
                    }
                    ChangeKind::Added => return None,
                    ChangeKind::Modified | ChangeKind::Deleted => {}
                }
            }
            if !renamed {
                return None;
            }
            base.locate(&current).map(|snapshot| FileMapping {
                base_path: current,
                snapshot,
                fork_path: fork_path.clone(),
                origin: MappingOrigin::Rename,
                similarity: None,
            })
        })
        .collect()
}

/// Token shingle set of a text file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fingerprint {
    shingles: Vec<u64>,
    tokens: usize,
}

impl Fingerprint {
    /// `None` for binary content.
    pub fn of(content: &[u8]) -> Option<Self> {
        if content.iter().take(8000).any(|&b| b == 0) {
            return None;
        }
        let text = String::from_utf8_lossy(content).to_lowercase();
        let tokens = tokenize_code(&text);
        let mut shingles: Vec<u64> = if tokens.len() < SHINGLE_SIZE {
            if tokens.is_empty() {
                Vec::new()
            } else {
                vec![hash_tokens(&tokens)]
            }
        } else {
            tokens.windows(SHINGLE_SIZE).map(hash_tokens).collect()
        };
        shingles.sort_unstable();
        shingles.dedup();
        Some(Self {
            shingles,
            tokens: tokens.len(),
        })
    }

    pub fn is_empty(&self) -> bool {
        self.shingles.is_empty()
    }

    pub fn len(&self) -> usize {
        self.shingles.len()
    }

    /// Jaccard similarity of the shingle sets; two empty sets are identical.
    pub fn similarity(&self, other: &Fingerprint) -> f64 {
        let (a, b) = (&self.shingles, &other.shingles);
        if a.is_empty() && b.is_empty() {
            return 1.0;
        }
        let (mut i, mut j, mut common) = (0, 0, 0usize);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    common += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        common as f64 / (a.len() + b.len() - common) as f64
    }

    /// Upper bound of `similarity` from set sizes alone.
    fn similarity_bound(&self, other: &Fingerprint) -> f64 {
        let (x, y) = (self.len().min(other.len()), self.len().max(other.len()));
        if y == 0 {
            1.0
        } else {
            x as f64 / y as f64
        }
    }
}

/// Identifier/number runs and single punctuation characters.
pub fn tokenize_code(text: &str) -> Vec<&str> {
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() || c == '_' {
            start.get_or_insert(i);
            continue;
        }
        if let Some(s) = start.take() {
            tokens.push(&text[s..i]);
        }
        if !c.is_whitespace() {
            tokens.push(&text[i..i + c.len_utf8()]);
        }
    }
    if let Some(s) = start {
        tokens.push(&text[s..]);
    }
    tokens
}

fn hash_tokens(tokens: &[&str]) -> u64 {
    let mut h = DefaultHasher::new();
    for t in tokens {
        t.hash(&mut h);
    }
    h.finish()
}

/// A base-side clone candidate.
#[derive(Debug, Clone)]
pub struct CloneCandidate {
    pub path: String,
    pub snapshot: Snapshot,
    pub class: ScopeElement,
    pub fingerprint: Fingerprint,
}

impl CloneCandidate {
    pub fn new(path: &str, snapshot: Snapshot, content: &[u8], model: &ObligationModel) -> Option<Self> {
        let fingerprint = Fingerprint::of(content)?;
        if fingerprint.is_empty() {
            return None;
        }
        Some(Self {
            path: path.to_string(),
            snapshot,
            class: model.classify_file(path),
            fingerprint,
        })
    }
}

/// Best-scoring base candidate of the same file class at or above
/// `threshold`; ties go to the smaller base path, then B1 over B2.
pub fn map_clones(
    unmapped: &[(String, Vec<u8>)],
    candidates: &[CloneCandidate],
    model: &ObligationModel,
    threshold: f64,
) -> Vec<FileMapping> {
    unmapped
        .par_iter()
        .filter_map(|(fork_path, content)| {
            let fp = Fingerprint::of(content)?;
            if fp.is_empty() {
                return None;
            }
            let class = model.classify_file(fork_path);
            let mut best: Option<(f64, &CloneCandidate)> = None;
            for cand in candidates.iter().filter(|c| c.class == class) {
                if fp.similarity_bound(&cand.fingerprint) < threshold {
                    continue;
                }
                let score = fp.similarity(&cand.fingerprint);
                if score < threshold {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((b, prev)) => {
                        score > b
                            || (score == b
                                && (cand.path.as_str(), cand.snapshot)
                                    < (prev.path.as_str(), prev.snapshot))
                    }
                };
                if better {
                    best = Some((score, cand));
                }
            }
            best.map(|(score, cand)| FileMapping {
                base_path: cand.path.clone(),
                snapshot: cand.snapshot,
                fork_path: fork_path.clone(),
                origin: MappingOrigin::Clone,
                similarity: Some(score),
            })
        })
        .collect()
}

/// Merges stage outputs honoring stage priority and sorts by fork path.
pub fn merge_stages(stages: Vec<Vec<FileMapping>>) -> Vec<FileMapping> {
    let mut seen = HashSet::new();
    let mut out: BTreeMap<String, FileMapping> = BTreeMap::new();
    for stage in stages {
        for m in stage {
            if seen.insert(m.fork_path.clone()) {
                out.insert(m.fork_path.clone(), m);
            }
        }
    }
    out.into_values().collect()
}

/// Keeps the mappings whose base file carries a modification term that
/// covers the file's type. `license_of` returns the detected license of a
/// mapping's base file.
pub fn select_obligating_files<F>(
    mappings: &[FileMapping],
    model: &ObligationModel,
    license_of: F,
) -> Vec<ObligatingFile>
where
    F: Fn(&FileMapping) -> Option<String>,
{
    mappings
        .iter()
        .filter_map(|m| {
            let lic = license_of(m)?;
            let term = model.lookup_mt(&lic)?;
            model.in_scope(term, &m.base_path).then(|| ObligatingFile {
                base_path: m.base_path.clone(),
                fork_path: m.fork_path.clone(),
                term: term.clone(),
            })
        })
        .collect()
}
