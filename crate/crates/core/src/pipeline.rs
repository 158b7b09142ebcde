//! End-to-end detection and repair over a base/fork repository pair.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::commits::{
    changes_by_id, filter_picked, filter_reverted, select_obligating, AuthorSet, ObligatingCommit,
};
use crate::engine::{
    build_index, classify_all, DetectionRecord, FulfillmentType, MatchConfig, DEFAULT_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::extmap::ExtensionMap;
use crate::fix::{fix_to_fixpoint, FixOutcome};
use crate::history::{
    resolve_fork_point, CommitChanges, CommitHistory, GitRepo, HistoryKind, RepoRole,
    DEFAULT_RENAME_THRESHOLD,
};
use crate::license::{is_license_file_name, LicenseMatcher};
use crate::mapping::{
    map_clones, map_renames, map_same_path, merge_stages, select_obligating_files, BaseFiles,
    CloneCandidate, FileMapping, ObligatingFile, Snapshot, DEFAULT_CLONE_THRESHOLD,
};
use crate::metrics::{expand_label_ids, LabeledCommit, LabeledCorpus};
use crate::model::{MtDatabase, ObligationModel};
use crate::notice::{extract_all, locate_notice_files, NoticeFile, NoticePatterns};
use crate::report::{ConfigEcho, Report};

#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub fork_point: Option<String>,
    pub th: f64,
    pub clone_threshold: f64,
    pub rename_threshold: u8,
    pub mt_db: Option<PathBuf>,
    pub ext_map: Option<PathBuf>,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            fork_point: None,
            th: DEFAULT_THRESHOLD,
            clone_threshold: DEFAULT_CLONE_THRESHOLD,
            rename_threshold: DEFAULT_RENAME_THRESHOLD,
            mt_db: None,
            ext_map: None,
        }
    }
}

impl Options {
    pub fn model(&self) -> Result<ObligationModel> {
        let db = match &self.mt_db {
            Some(p) => MtDatabase::load(p)?,
            None => MtDatabase::builtin(),
        };
        let extensions = match &self.ext_map {
            Some(p) => ExtensionMap::load(p)?,
            None => ExtensionMap::builtin(),
        };
        Ok(ObligationModel { db, extensions })
    }

    fn match_config(&self) -> Result<MatchConfig> {
        if !(0.0..=1.0).contains(&self.clone_threshold) {
            return Err(Error::Threshold(self.clone_threshold));
        }
        MatchConfig::new(self.th)
    }
}

/// Everything the pipeline learned about a fork before classification.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub fork_root: PathBuf,
    pub fork_has_worktree: bool,
    pub fork_point: String,
    pub base_head: String,
    pub fork_head: String,
    pub mappings: Vec<FileMapping>,
    pub obligating_files: Vec<ObligatingFile>,
    /// Fork history after dropping picked and reverted commits.
    pub filtered: CommitHistory,
    pub obligating: Vec<ObligatingCommit>,
    pub authors: AuthorSet,
    pub notices: Vec<NoticeFile>,
    pub model: ObligationModel,
    pub cfg: MatchConfig,
    pub clone_threshold: f64,
}

fn read_snapshot(repo: &GitRepo, rev: &str, paths: &[String]) -> Result<HashMap<String, Vec<u8>>> {
    if paths.is_empty() {
        return Ok(HashMap::new());
    }
    repo.read_blobs(rev, paths)
}

fn project_license(matcher: &LicenseMatcher, repo: &GitRepo, rev: &str, files: &BTreeSet<String>) -> Result<Option<String>> {
    let roots: Vec<String> = files
        .iter()
        .filter(|p| !p.contains('/') && is_license_file_name(p))
        .cloned()
        .collect();
    let blobs = read_snapshot(repo, rev, &roots)?;
    Ok(matcher.detect_project_license(blobs.iter().map(|(p, b)| (p.as_str(), b.as_slice()))))
}

fn fork_changes(fork: &GitRepo, history: &CommitHistory, rename_threshold: u8) -> Result<Vec<CommitChanges>> {
    history
        .commits
        .par_iter()
        .map(|c| {
            Ok(CommitChanges {
                commit: c.clone(),
                changes: fork.changed_files(c, rename_threshold)?,
            })
        })
        .collect()
}

/// Notice files from the fork's working tree, or from its head commit when
/// the repository is bare.
fn read_notices(fork: &GitRepo, head: &str, head_files: &[String]) -> Result<Vec<NoticeFile>> {
    let patterns = NoticePatterns::builtin();
    match fork.working_tree_files()? {
        Some(files) => locate_notice_files(files.iter().map(String::as_str), &patterns)
            .into_iter()
            .map(|p| {
                let bytes = std::fs::read(fork.path().join(&p))?;
                Ok(NoticeFile::new(p, String::from_utf8_lossy(&bytes).into_owned()))
            })
            .collect(),
        None => {
            let paths = locate_notice_files(head_files.iter().map(String::as_str), &patterns);
            let blobs = read_snapshot(fork, head, &paths)?;
            Ok(paths
                .into_iter()
                .map(|p| {
                    let text = String::from_utf8_lossy(&blobs[&p]).into_owned();
                    NoticeFile::new(p, text)
                })
                .collect())
        }
    }
}

pub fn analyze(base_path: &Path, fork_path: &Path, opts: &Options) -> Result<Analysis> {
    let cfg = opts.match_config()?;
    let model = opts.model()?;
    let matcher = LicenseMatcher::builtin();
    let base = GitRepo::open(base_path, RepoRole::Base)?;
    let fork = GitRepo::open(fork_path, RepoRole::Fork)?;

    let base_head = base.head()?;
    let fork_head = fork.head()?;
    let fork_point = resolve_fork_point(&base, &fork, opts.fork_point.as_deref())?;

    let base_files = BaseFiles {
        b1: base.list_files(&fork_point)?.into_iter().collect(),
        b2: base.list_files(&base_head)?.into_iter().collect(),
        created: base.created_paths(&[&fork_point, &base_head])?,
    };
    let fork_files = fork.list_files(&fork_head)?;

    let h_f = fork.commits_between(&fork_point, &fork_head, HistoryKind::Fork)?;
    let h_b = base.commits_between(&fork_point, &base_head, HistoryKind::Base)?;
    let changes = fork_changes(&fork, &h_f, opts.rename_threshold)?;

    // File mappings, one stage after another.
    let same = map_same_path(&base_files, &fork_files);
    let taken: HashSet<&str> = same.iter().map(|m| m.fork_path.as_str()).collect();
    let unmapped: Vec<String> = fork_files.iter().filter(|p| !taken.contains(p.as_str())).cloned().collect();
    let renamed = map_renames(&base_files, &unmapped, &changes);
    let taken: HashSet<&str> = renamed.iter().map(|m| m.fork_path.as_str()).collect();
    let unmapped: Vec<String> = unmapped.into_iter().filter(|p| !taken.contains(p.as_str())).collect();
    let clones = if unmapped.is_empty() {
        Vec::new()
    } else {
        let fork_blobs = read_snapshot(&fork, &fork_head, &unmapped)?;
        let targets: Vec<(String, Vec<u8>)> = unmapped
            .iter()
            .filter_map(|p| fork_blobs.get(p).map(|b| (p.clone(), b.clone())))
            .collect();
        let mut candidates = Vec::new();
        for (snapshot, rev, files) in [
            (Snapshot::B1, &fork_point, &base_files.b1),
            (Snapshot::B2, &base_head, &base_files.b2),
        ] {
            let paths: Vec<String> = files.intersection(&base_files.created).cloned().collect();
            let blobs = read_snapshot(&base, rev, &paths)?;
            candidates.extend(paths.iter().filter_map(|p| CloneCandidate::new(p, snapshot, &blobs[p], &model)));
        }
        map_clones(&targets, &candidates, &model, opts.clone_threshold)
    };
    let mappings = merge_stages(vec![same, renamed, clones]);

    // Licenses of the mapped base files, per snapshot.
    let mut licenses: HashMap<(Snapshot, String), Option<String>> = HashMap::new();
    for (snapshot, rev, files) in [
        (Snapshot::B1, &fork_point, &base_files.b1),
        (Snapshot::B2, &base_head, &base_files.b2),
    ] {
        let paths: Vec<String> = mappings
            .iter()
            .filter(|m| m.snapshot == snapshot)
            .map(|m| m.base_path.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if paths.is_empty() {
            continue;
        }
        let project = project_license(&matcher, &base, rev, files)?;
        let blobs = read_snapshot(&base, rev, &paths)?;
        for p in paths {
            let detection = matcher.detect_file_license(&blobs[&p], project.as_deref());
            licenses.insert((snapshot, p), detection.license);
        }
    }
    let obligating_files = select_obligating_files(&mappings, &model, |m| {
        licenses.get(&(m.snapshot, m.base_path.clone())).cloned().flatten()
    });

    let filtered = filter_reverted(&filter_picked(&h_f, &h_b));
    let obligating = select_obligating(&filtered, &changes_by_id(&changes), &obligating_files)?;
    let authors = AuthorSet::from_history(&h_f);
    let notices = read_notices(&fork, &fork_head, &fork_files)?;

    Ok(Analysis {
        fork_root: fork.path().to_path_buf(),
        fork_has_worktree: !fork.is_bare(),
        fork_point,
        base_head,
        fork_head,
        mappings,
        obligating_files,
        filtered,
        obligating,
        authors,
        notices,
        model,
        cfg,
        clone_threshold: opts.clone_threshold,
    })
}

impl Analysis {
    /// Records for every commit of the filtered fork history, newest first.
    pub fn classify(&self) -> Vec<DetectionRecord> {
        let entries = extract_all(&self.notices, &self.authors);
        let index = build_index(&entries);
        let records = classify_all(&self.obligating, &entries, &index, &self.cfg);
        let mut by_id: HashMap<String, DetectionRecord> =
            records.into_iter().map(|r| (r.commit.id.clone(), r)).collect();
        self.filtered
            .commits
            .iter()
            .map(|c| by_id.remove(&c.id).unwrap_or_else(|| DetectionRecord::obligation_free(c.clone())))
            .collect()
    }

    pub fn report(&self, records: &[DetectionRecord]) -> Report {
        let config = ConfigEcho {
            th: self.cfg.th,
            clone_threshold: self.clone_threshold,
            fork_point: self.fork_point.clone(),
            base_head: self.base_head.clone(),
            fork_head: self.fork_head.clone(),
            db_version: self.model.db.version().to_string(),
        };
        let notices = self.notices.iter().map(|n| n.path.clone()).collect();
        Report::new(records, config, notices, &self.model)
    }

    /// Labeled corpus over the filtered history; label ids may be abbreviated.
    pub fn labeled_corpus(&self, labels: Vec<(String, FulfillmentType)>) -> Result<LabeledCorpus> {
        let labels = expand_label_ids(labels, self.filtered.commits.iter().map(|c| c.id.as_str()))?;
        let by_id: HashMap<&str, FulfillmentType> = labels.iter().map(|(id, t)| (id.as_str(), *t)).collect();
        let required: HashMap<&str, &ObligatingCommit> =
            self.obligating.iter().map(|o| (o.commit.id.as_str(), o)).collect();
        let mut commits = Vec::new();
        for c in &self.filtered.commits {
            let Some(&label) = by_id.get(c.id.as_str()) else { continue };
            commits.push(LabeledCommit {
                commit: c.clone(),
                required: required.get(c.id.as_str()).map(|o| o.required.clone()),
                label,
            });
        }
        if commits.len() != labels.len() {
            return Err(Error::LabelMismatch("duplicate labels".into()));
        }
        Ok(LabeledCorpus {
            commits,
            entries: extract_all(&self.notices, &self.authors),
        })
    }
}

pub fn run_detect(base_path: &Path, fork_path: &Path, opts: &Options) -> Result<Report> {
    let analysis = analyze(base_path, fork_path, opts)?;
    let records = analysis.classify();
    Ok(analysis.report(&records))
}

/// Detection followed by repair. With `write`, the rewritten notice files
/// are stored in the fork's working tree.
pub fn run_fix(base_path: &Path, fork_path: &Path, opts: &Options, write: bool) -> Result<(Report, FixOutcome)> {
    let analysis = analyze(base_path, fork_path, opts)?;
    let records = analysis.classify();
    let report = analysis.report(&records);
    let outcome = fix_to_fixpoint(&analysis.notices, &analysis.obligating, &analysis.authors, &analysis.cfg);
    if write && !outcome.patches.is_empty() {
        if !analysis.fork_has_worktree {
            return Err(Error::BareFork {
                path: analysis.fork_root.clone(),
            });
        }
        for patch in &outcome.patches {
            let target = analysis.fork_root.join(&patch.path);
            if let Some(dir) = target.parent() {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(target, &patch.new)?;
        }
    }
    Ok((report, outcome))
}
