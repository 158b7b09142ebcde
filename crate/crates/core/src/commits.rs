//! Fork commit filtering and obligating-commit selection.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::history::{Author, ChangeKind, CommitChanges, CommitHistory};
use crate::mapping::ObligatingFile;
use crate::model::{union_required, ModificationTerm, Requirements};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObligatingCommit {
    pub commit: crate::history::Commit,
    pub terms: BTreeSet<ModificationTerm>,
    pub required: Requirements,
    /// Obligating fork paths this commit touches, sorted.
    pub touched: Vec<String>,
}

/// Authors of the fork history before any filtering, in first-seen order
/// (newest commit first) without duplicates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuthorSet {
    authors: Vec<Author>,
}

impl AuthorSet {
    pub fn from_history(history: &CommitHistory) -> Self {
        Self::from_authors(history.commits.iter().map(|c| c.author.clone()))
    }

    pub fn from_authors(iter: impl IntoIterator<Item = Author>) -> Self {
        let mut authors: Vec<Author> = Vec::new();
        for a in iter {
            if !authors.contains(&a) {
                authors.push(a);
            }
        }
        Self { authors }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Author> {
        self.authors.iter()
    }

    pub fn contains(&self, author: &Author) -> bool {
        self.authors.contains(author)
    }

    pub fn len(&self) -> usize {
        self.authors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.authors.is_empty()
    }
}

/// Drops fork commits whose id also appears in the base history.
pub fn filter_picked(fork: &CommitHistory, base: &CommitHistory) -> CommitHistory {
    let base_ids = base.ids();
    CommitHistory::new(
        fork.kind,
        fork.commits
            .iter()
            .filter(|c| !base_ids.contains(c.id.as_str()))
            .cloned()
            .collect(),
    )
}

/// Subject of the commit a `Revert "<subject>"` message refers to.
pub fn revert_target(msg: &str) -> Option<&str> {
    let subject = msg.lines().next()?.trim_end();
    subject.strip_prefix("Revert \"")?.strip_suffix('"')
}

/// Id referenced by the `This reverts commit <id>.` trailer, if any.
fn reverted_id(msg: &str) -> Option<&str> {
    msg.lines().find_map(|line| {
        line.trim()
            .strip_prefix("This reverts commit ")
            .map(|rest| rest.trim_end_matches('.').trim())
    })
}

/// Removes revert pairs. Commits are matched oldest first, so in a chain
/// `X`, `Revert "X"`, `Revert "Revert "X""` the inner pair cancels and the
/// outer revert stays as an ordinary commit. A revert whose target is not
/// in the history is kept.
pub fn filter_reverted(history: &CommitHistory) -> CommitHistory {
    let n = history.commits.len();
    let mut removed = vec![false; n];
    // live subjects -> indices (oldest first) of not-yet-cancelled commits
    let mut live: HashMap<&str, Vec<usize>> = HashMap::new();
    for idx in (0..n).rev() {
        let commit = &history.commits[idx];
        if let Some(target) = revert_target(&commit.msg) {
            if let Some(stack) = live.get_mut(target) {
                let by_id = reverted_id(&commit.msg).and_then(|id| {
                    stack
                        .iter()
                        .rposition(|&j| history.commits[j].id.starts_with(id) && !id.is_empty())
                });
                let pos = by_id.or_else(|| stack.len().checked_sub(1));
                if let Some(pos) = pos {
                    let j = stack.remove(pos);
                    removed[j] = true;
                    removed[idx] = true;
                    continue;
                }
            }
        }
        live.entry(commit.subject()).or_default().push(idx);
    }
    CommitHistory::new(
        history.kind,
        history
            .commits
            .iter()
            .zip(&removed)
            .filter(|(_, r)| !**r)
            .map(|(c, _)| c.clone())
            .collect(),
    )
}

/// Walks `history` newest to oldest and marks commits that touch an
/// obligating file. A rename onto an obligating path extends the tracked
/// set with the old path so that older edits are attributed too. `changes`
/// supplies the first-parent changes per commit id.
pub fn select_obligating(
    history: &CommitHistory,
    changes: &HashMap<String, Vec<crate::history::FileChange>>,
    obligating_files: &[ObligatingFile],
) -> Result<Vec<ObligatingCommit>> {
    let mut tracked: BTreeMap<String, Vec<ObligatingFile>> = BTreeMap::new();
    for f in obligating_files {
        let entry = tracked.entry(f.fork_path.clone()).or_default();
        if !entry.contains(f) {
            entry.push(f.clone());
        }
    }
    let mut out = Vec::new();
    for commit in &history.commits {
        let mut terms: BTreeSet<ModificationTerm> = BTreeSet::new();
        let mut touched: BTreeSet<String> = BTreeSet::new();
        let mut additions: Vec<ObligatingFile> = Vec::new();
        for change in changes.get(&commit.id).map(Vec::as_slice).unwrap_or(&[]) {
            let Some(files) = tracked.get(&change.path) else {
                continue;
            };
            terms.extend(files.iter().map(|f| f.term.clone()));
            touched.insert(change.path.clone());
            if change.kind == ChangeKind::Renamed {
                let old = change.old_path.clone().expect("rename has old path");
                additions.extend(files.iter().map(|f| ObligatingFile {
                    base_path: f.base_path.clone(),
                    fork_path: old.clone(),
                    term: f.term.clone(),
                }));
            }
        }
        for f in additions {
            let entry = tracked.entry(f.fork_path.clone()).or_default();
            if !entry.contains(&f) {
                entry.push(f);
            }
        }
        if !terms.is_empty() {
            let required = derive_requirements(&terms)?;
            out.push(ObligatingCommit {
                commit: commit.clone(),
                terms,
                required,
                touched: touched.into_iter().collect(),
            });
        }
    }
    Ok(out)
}

pub fn derive_requirements(terms: &BTreeSet<ModificationTerm>) -> Result<Requirements> {
    union_required(terms.iter())
}

/// Builds the id -> changes lookup used by [`select_obligating`].
pub fn changes_by_id(entries: &[CommitChanges]) -> HashMap<String, Vec<crate::history::FileChange>> {
    entries
        .iter()
        .map(|e| (e.commit.id.clone(), e.changes.clone()))
        .collect()
}

/// Ids in `history` that are not obligating.
pub fn obligation_free_ids<'a>(
    history: &'a CommitHistory,
    obligating: &[ObligatingCommit],
) -> Vec<&'a str> {
    let ob: HashSet<&str> = obligating.iter().map(|o| o.commit.id.as_str()).collect();
    history
        .commits
        .iter()
        .map(|c| c.id.as_str())
        .filter(|id| !ob.contains(id))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::{Commit, FileChange, HistoryKind};
    use crate::model::{ContentElement, MtDatabase};
    use chrono::NaiveDate;

    fn c(id: &str, msg: &str) -> Commit {
        Commit {
            id: id.into(),
            author: Author::new(format!("author-{id}"), format!("{id}@x.org")),
            date: NaiveDate::from_ymd_opt(2022, 1, 1).unwrap(),
            msg: msg.into(),
            parents: vec![],
        }
    }

    fn hist(commits: Vec<Commit>) -> CommitHistory {
        CommitHistory::new(HistoryKind::Fork, commits)
    }

    fn ids(h: &CommitHistory) -> Vec<&str> {
        h.commits.iter().map(|c| c.id.as_str()).collect()
    }

    #[test]
    fn picked_commits_are_removed() {
        let fork = hist(vec![c("f2", "mine"), c("p1", "picked"), c("f1", "mine too")]);
        let base = CommitHistory::new(HistoryKind::Base, vec![c("p1", "picked"), c("b9", "x")]);
        assert_eq!(ids(&filter_picked(&fork, &base)), vec!["f2", "f1"]);
        let empty = CommitHistory::new(HistoryKind::Base, vec![]);
        assert_eq!(filter_picked(&fork, &empty), fork);
    }

    #[test]
    fn revert_pairs_are_removed() {
        let h = hist(vec![
            c("r", "Revert \"fix parser\"\n\nThis reverts commit h."),
            c("o", "other"),
            c("h", "fix parser"),
        ]);
        assert_eq!(ids(&filter_reverted(&h)), vec!["o"]);
    }

    #[test]
    fn revert_of_unknown_commit_is_kept() {
        let h = hist(vec![c("r", "Revert \"pre-fork change\""), c("o", "other")]);
        assert_eq!(ids(&filter_reverted(&h)), vec!["r", "o"]);
    }

    #[test]
    fn no_reverts_unchanged() {
        let h = hist(vec![c("a", "one"), c("b", "two")]);
        assert_eq!(filter_reverted(&h), h);
    }

    #[test]
    fn nested_reverts_cancel_innermost_first() {
        let h = hist(vec![
            c("r2", "Revert \"Revert \"x\"\""),
            c("r1", "Revert \"x\""),
            c("x", "x"),
        ]);
        assert_eq!(ids(&filter_reverted(&h)), vec!["r2"]);
        let h = hist(vec![
            c("r3", "Revert \"Revert \"Revert \"x\"\"\""),
            c("r2", "Revert \"Revert \"x\"\""),
            c("r1", "Revert \"x\""),
            c("x", "x"),
        ]);
        // (x, r1) cancel; r2 stays; r3 cancels r2.
        assert!(filter_reverted(&h).is_empty());
    }

    #[test]
    fn revert_prefers_referenced_id() {
        let h = hist(vec![
            c("r", "Revert \"tweak\"\n\nThis reverts commit aaa111."),
            c("bbb222", "tweak"),
            c("aaa111", "tweak"),
        ]);
        assert_eq!(ids(&filter_reverted(&h)), vec!["bbb222"]);
    }

    fn ob(base: &str, fork: &str, lic: &str) -> ObligatingFile {
        ObligatingFile {
            base_path: base.into(),
            fork_path: fork.into(),
            term: MtDatabase::builtin().lookup_mt(lic).unwrap().clone(),
        }
    }

    #[test]
    fn obligating_selection_tracks_renames() {
        let h = hist(vec![c("c3", "fork only"), c("c2", "move p to q"), c("c1", "edit p")]);
        let mut changes = HashMap::new();
        changes.insert("c3".to_string(), vec![FileChange::added("new.c")]);
        changes.insert("c2".to_string(), vec![FileChange::renamed("p.c", "q.c")]);
        changes.insert("c1".to_string(), vec![FileChange::modified("p.c")]);
        let files = vec![ob("p.c", "q.c", "Apache-2.0")];
        let result = select_obligating(&h, &changes, &files).unwrap();
        assert_eq!(
            result.iter().map(|o| o.commit.id.as_str()).collect::<Vec<_>>(),
            vec!["c2", "c1"]
        );
        assert_eq!(result[1].touched, vec!["p.c"]);
        assert_eq!(result[0].required.content, BTreeSet::from([ContentElement::BriefStatement]));
        assert_eq!(obligation_free_ids(&h, &result), vec!["c3"]);
    }

    #[test]
    fn deletions_are_obligating_and_terms_union() {
        let h = hist(vec![c("c1", "drop and edit")]);
        let mut changes = HashMap::new();
        changes.insert(
            "c1".to_string(),
            vec![FileChange::deleted("a.c"), FileChange::modified("b.c")],
        );
        let files = vec![ob("a.c", "a.c", "GPL-2.0"), ob("b.c", "b.c", "Apache-2.0")];
        let result = select_obligating(&h, &changes, &files).unwrap();
        assert_eq!(result.len(), 1);
        assert_eq!(result[0].terms.len(), 2);
        assert_eq!(
            result[0].required.content,
            BTreeSet::from([ContentElement::Date, ContentElement::BriefStatement])
        );
    }

    #[test]
    fn selection_is_idempotent_on_its_output() {
        let h = hist(vec![c("c2", "b"), c("c1", "a")]);
        let mut changes = HashMap::new();
        changes.insert("c2".to_string(), vec![FileChange::modified("x.c")]);
        changes.insert("c1".to_string(), vec![FileChange::modified("y.c")]);
        let files = vec![ob("x.c", "x.c", "Apache-2.0")];
        let first = select_obligating(&h, &changes, &files).unwrap();
        let again = hist(first.iter().map(|o| o.commit.clone()).collect());
        assert_eq!(select_obligating(&again, &changes, &files).unwrap(), first);
    }

    #[test]
    fn author_set_dedups_in_order() {
        let h = hist(vec![c("a", "1"), c("b", "2"), c("a", "3")]);
        let set = AuthorSet::from_history(&h);
        assert_eq!(set.len(), 2);
        assert_eq!(set.iter().next().unwrap().name, "author-a");
    }

    #[test]
    fn empty_terms_error() {
        assert!(derive_requirements(&BTreeSet::new()).is_err());
    }
}
