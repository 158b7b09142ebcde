//! Read-only access to git history of the base and fork repositories.
//!
//! Everything shells out to the `git` executable. No command here writes to
//! a repository.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default rename similarity, in percent.
pub const DEFAULT_RENAME_THRESHOLD: u8 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RepoRole {
    Base,
    Fork,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Author {
    pub name: String,
    pub email: String,
}

impl Author {
    pub fn new(name: impl Into<String>, email: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            email: email.into(),
        }
    }

    /// Same display name, or same email address ignoring case.
    pub fn same_person(&self, other: &Author) -> bool {
        (!self.name.is_empty() && self.name == other.name)
            || (!self.email.is_empty() && self.email.eq_ignore_ascii_case(&other.email))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commit {
    pub id: String,
    pub author: Author,
    /// Committer date, UTC calendar day.
    pub date: NaiveDate,
    pub msg: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parents: Vec<String>,
}

impl Commit {
    pub fn subject(&self) -> &str {
        self.msg.lines().next().unwrap_or("")
    }

    pub fn is_merge(&self) -> bool {
        self.parents.len() > 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ChangeKind {
    Added,
    Deleted,
    Modified,
    Renamed,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FileChange {
    pub kind: ChangeKind,
    pub path: String,
    /// Present iff `kind` is `Renamed`.
    pub old_path: Option<String>,
}

impl FileChange {
    pub fn added(path: impl Into<String>) -> Self {
        Self::simple(ChangeKind::Added, path)
    }

    pub fn deleted(path: impl Into<String>) -> Self {
        Self::simple(ChangeKind::Deleted, path)
    }

    pub fn modified(path: impl Into<String>) -> Self {
        Self::simple(ChangeKind::Modified, path)
    }

    pub fn renamed(old: impl Into<String>, new: impl Into<String>) -> Self {
        Self {
            kind: ChangeKind::Renamed,
            path: new.into(),
            old_path: Some(old.into()),
        }
    }

    fn simple(kind: ChangeKind, path: impl Into<String>) -> Self {
        Self {
            kind,
            path: path.into(),
            old_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HistoryKind {
    /// Base commits between the fork point and the latest base revision.
    Base,
    /// Fork commits between the fork point and the latest fork revision.
    Fork,
}

/// Commits newest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitHistory {
    pub kind: HistoryKind,
    pub commits: Vec<Commit>,
}

impl CommitHistory {
    pub fn new(kind: HistoryKind, commits: Vec<Commit>) -> Self {
        Self { kind, commits }
    }

    pub fn len(&self) -> usize {
        self.commits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commits.is_empty()
    }

    pub fn ids(&self) -> HashSet<&str> {
        self.commits.iter().map(|c| c.id.as_str()).collect()
    }
}

/// A commit together with its first-parent changes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitChanges {
    pub commit: Commit,
    pub changes: Vec<FileChange>,
}

#[derive(Debug, Clone)]
pub struct GitRepo {
    path: PathBuf,
    role: RepoRole,
    bare: bool,
}

const LOG_FORMAT: &str = "--format=%H%x1f%P%x1f%an%x1f%ae%x1f%ct%x1f%B%x1e";

impl GitRepo {
    pub fn open(path: impl Into<PathBuf>, role: RepoRole) -> Result<Self> {
        let path = path.into();
        let out = Command::new("git")
            .arg("-C")
            .arg(&path)
            .args(["rev-parse", "--is-bare-repository"])
            .stdin(Stdio::null())
            .output();
        match out {
            Ok(out) if out.status.success() => {
                let bare = String::from_utf8_lossy(&out.stdout).trim() == "true";
                Ok(Self { path, role, bare })
            }
            Ok(_) => Err(Error::NotARepository { path }),
            Err(e) => Err(e.into()),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn role(&self) -> RepoRole {
        self.role
    }

    pub fn is_bare(&self) -> bool {
        self.bare
    }

    fn command(&self) -> Command {
        let mut cmd = Command::new("git");
        cmd.arg("-C")
            .arg(&self.path)
            .args(["-c", "core.quotepath=off", "-c", "log.showSignature=false"])
            .env("LC_ALL", "C")
            .env("GIT_TERMINAL_PROMPT", "0")
            .stdin(Stdio::null());
        cmd
    }

    fn git(&self, args: &[&str]) -> Result<Vec<u8>> {
        let out = self.command().args(args).output()?;
        if out.status.success() {
            Ok(out.stdout)
        } else {
            Err(Error::Git {
                path: self.path.clone(),
                args: args.join(" "),
                stderr: String::from_utf8_lossy(&out.stderr).trim().to_string(),
            })
        }
    }

    /// Full commit hash for a revision expression.
    pub fn resolve(&self, rev: &str) -> Result<String> {
        let spec = format!("{rev}^{{commit}}");
        self.git(&["rev-parse", "--verify", "--quiet", &spec])
            .ok()
            .map(|out| String::from_utf8_lossy(&out).trim().to_string())
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::UnknownRevision {
                path: self.path.clone(),
                rev: rev.to_string(),
            })
    }

    pub fn head(&self) -> Result<String> {
        self.resolve("HEAD")
    }

    /// Commits reachable from `to` but not from `from`, newest first.
    pub fn commits_between(&self, from: &str, to: &str, kind: HistoryKind) -> Result<CommitHistory> {
        let from = self.resolve(from)?;
        let to = self.resolve(to)?;
        if from == to {
            return Ok(CommitHistory::new(kind, Vec::new()));
        }
        let exclude = format!("^{from}");
        let out = self.git(&["log", "--topo-order", LOG_FORMAT, &to, &exclude, "--"])?;
        Ok(CommitHistory::new(kind, parse_log(&out)?))
    }

    /// First-parent changes of a commit with rename detection at
    /// `rename_threshold` percent similarity.
    pub fn changed_files(&self, commit: &Commit, rename_threshold: u8) -> Result<Vec<FileChange>> {
        let m = format!("-M{}%", rename_threshold.min(100));
        let out = match commit.parents.first() {
            Some(parent) => self.git(&[
                "diff-tree", "-r", "-z", "--no-commit-id", "--name-status", "--no-ext-diff", &m,
                parent, &commit.id,
            ])?,
            None => self.git(&[
                "diff-tree", "-r", "-z", "--no-commit-id", "--name-status", "--no-ext-diff", &m,
                "--root", &commit.id,
            ])?,
        };
        parse_name_status(&out)
    }

    /// Exact blob bytes of `path` at `rev`.
    pub fn file_content(&self, rev: &str, path: &str) -> Result<Vec<u8>> {
        let spec = format!("{rev}:{path}");
        self.git(&["cat-file", "blob", &spec])
            .map_err(|_| Error::NotFound {
                rev: rev.to_string(),
                path: path.to_string(),
            })
    }

    /// Blob contents for many paths in one `git cat-file --batch` session.
    /// Paths missing at `rev` are absent from the result.
    pub fn read_blobs(&self, rev: &str, paths: &[String]) -> Result<HashMap<String, Vec<u8>>> {
        let wanted: Vec<&String> = paths.iter().filter(|p| !p.contains('\n')).collect();
        let mut out = HashMap::with_capacity(wanted.len());
        if wanted.is_empty() {
            return Ok(out);
        }
        let mut child = self
            .command()
            .args(["cat-file", "--batch"])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let requests: Vec<u8> = wanted
            .iter()
            .flat_map(|p| format!("{rev}:{p}\n").into_bytes())
            .collect();
        let writer = std::thread::spawn(move || -> std::io::Result<()> {
            stdin.write_all(&requests)?;
            stdin.flush()
        });
        let mut reader = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut header = String::new();
        for path in wanted {
            header.clear();
            if reader.read_line(&mut header)? == 0 {
                break;
            }
            let fields: Vec<&str> = header.trim_end().split(' ').collect();
            if fields.len() == 3 {
                let size: usize = fields[2].parse().map_err(|_| self.batch_error(&header))?;
                let mut buf = vec![0u8; size + 1];
                reader.read_exact(&mut buf)?;
                buf.pop();
                if fields[1] == "blob" {
                    out.insert(path.clone(), buf);
                }
            }
        }
        writer.join().expect("writer thread").ok();
        child.wait()?;
        Ok(out)
    }

    fn batch_error(&self, header: &str) -> Error {
        Error::Git {
            path: self.path.clone(),
            args: "cat-file --batch".into(),
            stderr: format!("unexpected header `{}`", header.trim_end()),
        }
    }

    /// Regular files (blobs) in the tree of `rev`, sorted.
    pub fn list_files(&self, rev: &str) -> Result<Vec<String>> {
        let out = self.git(&["ls-tree", "-r", "-z", "--full-tree", rev])?;
        let mut files: Vec<String> = out
            .split(|&b| b == 0)
            .filter_map(|entry| {
                let entry = std::str::from_utf8(entry).ok()?;
                let (meta, path) = entry.split_once('\t')?;
                (meta.split(' ').nth(1) == Some("blob")).then(|| path.to_string())
            })
            .collect();
        files.sort();
        Ok(files)
    }

    /// Every path that some commit reachable from `revs` added. Renames count
    /// as additions of the new path, so a path whose rename chain starts with
    /// an addition is included.
    pub fn created_paths(&self, revs: &[&str]) -> Result<BTreeSet<String>> {
        let mut args = vec![
            "log", "--format=", "--name-only", "-z", "--no-renames", "--diff-filter=A",
        ];
        args.extend_from_slice(revs);
        args.push("--");
        let out = self.git(&args)?;
        Ok(out
            .split(|&b| b == 0)
            .filter_map(|p| std::str::from_utf8(p).ok())
            .map(|p| p.trim_matches('\n'))
            .filter(|p| !p.is_empty())
            .map(str::to_string)
            .collect())
    }

    pub fn created_by(&self, upto: &str, path: &str) -> Result<bool> {
        Ok(self.created_paths(&[upto])?.contains(path))
    }

    /// Tracked and untracked (not ignored) files of the working tree. `None`
    /// for bare repositories.
    pub fn working_tree_files(&self) -> Result<Option<Vec<String>>> {
        if self.bare {
            return Ok(None);
        }
        let out = self.git(&["ls-files", "-z", "--cached", "--others", "--exclude-standard"])?;
        let mut files: Vec<String> = out
            .split(|&b| b == 0)
            .filter_map(|p| std::str::from_utf8(p).ok())
            .filter(|p| !p.is_empty() && self.path.join(p).is_file())
            .map(str::to_string)
            .collect();
        files.sort();
        files.dedup();
        Ok(Some(files))
    }

    /// Commit ids, parents and committer times reachable from `rev`, in
    /// topological order (descendants before ancestors).
    fn ancestry(&self, rev: &str) -> Result<Vec<(String, Vec<String>, i64)>> {
        let out = self.git(&["log", "--topo-order", "--format=%H %ct %P", rev, "--"])?;
        Ok(String::from_utf8_lossy(&out)
            .lines()
            .filter_map(|line| {
                let mut it = line.split(' ');
                let id = it.next()?.to_string();
                let time = it.next()?.parse().ok()?;
                let parents = it.filter(|p| !p.is_empty()).map(str::to_string).collect();
                Some((id, parents, time))
            })
            .collect())
    }

    /// Commit metadata for one revision.
    pub fn commit(&self, rev: &str) -> Result<Commit> {
        let id = self.resolve(rev)?;
        let out = self.git(&["log", "-n1", LOG_FORMAT, &id, "--"])?;
        parse_log(&out)?
            .into_iter()
            .next()
            .ok_or(Error::UnknownRevision {
                path: self.path.clone(),
                rev: rev.to_string(),
            })
    }
}

/// The fork point: `override_rev` when given (it must resolve in both
/// repositories), otherwise the latest common ancestor of both heads.
pub fn resolve_fork_point(base: &GitRepo, fork: &GitRepo, override_rev: Option<&str>) -> Result<String> {
    if let Some(rev) = override_rev {
        let id = fork.resolve(rev)?;
        base.resolve(&id)?;
        return Ok(id);
    }
    let base_anc = base.ancestry(&base.head()?)?;
    let fork_anc = fork.ancestry(&fork.head()?)?;
    latest_common_ancestor(&base_anc, &fork_anc).ok_or(Error::NoCommonAncestor)
}

/// Maximal commits of the common ancestor set; among several, the newest by
/// committer time, then the smallest id. Symmetric in its arguments.
fn latest_common_ancestor(
    a: &[(String, Vec<String>, i64)],
    b: &[(String, Vec<String>, i64)],
) -> Option<String> {
    let in_a: HashSet<&str> = a.iter().map(|(id, _, _)| id.as_str()).collect();
    let parents: HashMap<&str, &Vec<String>> = a
        .iter()
        .chain(b.iter())
        .map(|(id, p, _)| (id.as_str(), p))
        .collect();
    let mut covered: HashSet<&str> = HashSet::new();
    let mut maximal: Vec<(&str, i64)> = Vec::new();
    for (id, _, time) in b {
        if !in_a.contains(id.as_str()) || covered.contains(id.as_str()) {
            continue;
        }
        maximal.push((id, *time));
        let mut stack = vec![id.as_str()];
        while let Some(cur) = stack.pop() {
            for p in parents.get(cur).into_iter().flat_map(|v| v.iter()) {
                if covered.insert(p.as_str()) {
                    stack.push(p);
                }
            }
        }
    }
    maximal
        .into_iter()
        .filter(|(id, _)| !covered.contains(id))
        .max_by(|x, y| x.1.cmp(&y.1).then_with(|| y.0.cmp(x.0)))
        .map(|(id, _)| id.to_string())
}

fn parse_log(out: &[u8]) -> Result<Vec<Commit>> {
    let text = String::from_utf8_lossy(out);
    let mut commits = Vec::new();
    for record in text.split('\x1e') {
        let record = record.trim_start_matches('\n');
        if record.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = record.splitn(6, '\x1f').collect();
        if fields.len() != 6 {
            return Err(Error::Git {
                path: PathBuf::new(),
                args: "log".into(),
                stderr: format!("malformed log record `{record}`"),
            });
        }
        let secs: i64 = fields[4].trim().parse().unwrap_or(0);
        let date = DateTime::from_timestamp(secs, 0)
            .map(|dt| dt.date_naive())
            .unwrap_or_default();
        commits.push(Commit {
            id: fields[0].to_string(),
            parents: fields[1].split_whitespace().map(str::to_string).collect(),
            author: Author::new(fields[2], fields[3]),
            date,
            msg: fields[5].trim_end().to_string(),
        });
    }
    Ok(commits)
}

fn parse_name_status(out: &[u8]) -> Result<Vec<FileChange>> {
    let mut fields = out
        .split(|&b| b == 0)
        .map(|f| String::from_utf8_lossy(f).into_owned());
    let mut changes = Vec::new();
    while let Some(status) = fields.next() {
        if status.is_empty() {
            continue;
        }
        let mut next = || {
            fields.next().ok_or_else(|| Error::Git {
                path: PathBuf::new(),
                args: "diff-tree".into(),
                stderr: format!("truncated name-status after `{status}`"),
            })
        };
        let change = match status.as_bytes()[0] {
            b'A' => FileChange::added(next()?),
            b'D' => FileChange::deleted(next()?),
            b'R' => {
                let old = next()?;
                let new = next()?;
                FileChange::renamed(old, new)
            }
            b'C' => {
                let _source = next()?;
                FileChange::added(next()?)
            }
            _ => FileChange::modified(next()?),
        };
        changes.push(change);
    }
    changes.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(changes)
}
