//! Throwaway git repositories for integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

#[derive(Debug, Clone, Copy)]
pub struct Person {
    pub name: &'static str,
    pub email: &'static str,
}

pub const UPSTREAM: Person = Person { name: "Upstream Dev", email: "dev@upstream.example" };
pub const ALICE: Person = Person { name: "Alice Smith", email: "alice@fork.example" };
pub const BOB: Person = Person { name: "Bob Stone", email: "bob@fork.example" };
pub const PHYLU: Person = Person { name: "Phylu", email: "12345+phylu@users.noreply.github.com" };

pub const APACHE_LICENSE: &str = "                                 Apache License\n                           Version 2.0, January 2004\n                        http://www.apache.org/licenses/\n";
pub const GPL_LICENSE: &str = "                    GNU GENERAL PUBLIC LICENSE\n                       Version 2, June 1991\n";

pub fn apache_source(body: &str) -> String {
    format!(
        "/*\n * Copyright 2020 Upstream\n *\n * Licensed under the Apache License, Version 2.0 (the \"License\");\n * you may not use this file except in compliance with the License.\n * You may obtain a copy of the License at\n *\n *     http://www.apache.org/licenses/LICENSE-2.0\n */\n\n{body}\n"
    )
}

pub fn spdx_source(id: &str, body: &str) -> String {
    format!("// SPDX-License-Identifier: {id}\n\n{body}\n")
}

pub struct Repo {
    pub path: PathBuf,
}

fn git_command(dir: &Path) -> Command {
    let mut cmd = Command::new("git");
    cmd.current_dir(dir)
        .env("GIT_CONFIG_GLOBAL", "/dev/null")
        .env("GIT_CONFIG_NOSYSTEM", "1")
        .env("GIT_AUTHOR_NAME", "Fixture")
        .env("GIT_AUTHOR_EMAIL", "fixture@example.org")
        .env("GIT_COMMITTER_NAME", "Fixture")
        .env("GIT_COMMITTER_EMAIL", "fixture@example.org")
        .args(["-c", "commit.gpgsign=false", "-c", "init.defaultBranch=main"]);
    cmd
}

fn run(mut cmd: Command) -> String {
    let out = cmd.output().expect("git runs");
    assert!(
        out.status.success(),
        "{:?} failed: {}",
        cmd,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).trim().to_string()
}

impl Repo {
    pub fn init(path: impl Into<PathBuf>) -> Self {
        let path = path.into();
        std::fs::create_dir_all(&path).unwrap();
        let repo = Self { path };
        repo.git(&["init", "-q"]);
        repo
    }

    pub fn git(&self, args: &[&str]) -> String {
        let mut cmd = git_command(&self.path);
        cmd.args(args);
        run(cmd)
    }

    pub fn write(&self, rel: &str, content: &str) -> &Self {
        let p = self.path.join(rel);
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(p, content).unwrap();
        self
    }

    pub fn read(&self, rel: &str) -> String {
        std::fs::read_to_string(self.path.join(rel)).unwrap()
    }

    pub fn exists(&self, rel: &str) -> bool {
        self.path.join(rel).exists()
    }

    /// Stages everything and commits; `date` is an ISO date (noon UTC).
    pub fn commit(&self, msg: &str, who: Person, date: &str) -> String {
        self.git(&["add", "-A"]);
        self.commit_staged(msg, who, date, &["commit", "-q", "--allow-empty", "-m", msg])
    }

    fn commit_staged(&self, _msg: &str, who: Person, date: &str, args: &[&str]) -> String {
        let stamp = format!("{date}T12:00:00+00:00");
        let mut cmd = git_command(&self.path);
        cmd.env("GIT_AUTHOR_NAME", who.name)
            .env("GIT_AUTHOR_EMAIL", who.email)
            .env("GIT_AUTHOR_DATE", &stamp)
            .env("GIT_COMMITTER_NAME", who.name)
            .env("GIT_COMMITTER_EMAIL", who.email)
            .env("GIT_COMMITTER_DATE", &stamp)
            .args(args);
        run(cmd);
        self.head()
    }

    /// `git revert` of `id` with a fixed identity and date.
    pub fn revert(&self, id: &str, who: Person, date: &str) -> String {
        self.commit_staged("", who, date, &["revert", "--no-edit", id])
    }

    pub fn head(&self) -> String {
        self.git(&["rev-parse", "HEAD"])
    }

    pub fn clone_to(&self, dest: impl Into<PathBuf>) -> Repo {
        let dest = dest.into();
        let mut cmd = git_command(self.path.parent().unwrap());
        cmd.args(["clone", "-q"]).arg(&self.path).arg(&dest);
        run(cmd);
        Repo { path: dest }
    }
}

pub struct Pair {
    pub dir: TempDir,
    pub base: Repo,
    pub fork: Repo,
    /// Commit ids worth naming in assertions.
    pub marks: Vec<(&'static str, String)>,
}

impl Pair {
    pub fn mark(&self, name: &str) -> &str {
        &self.marks.iter().find(|(n, _)| *n == name).expect("known mark").1
    }
}

fn apache_base(dir: &TempDir) -> Repo {
    let base = Repo::init(dir.path().join("base"));
    base.write("LICENSE", APACHE_LICENSE)
        .write("src/lib.c", &apache_source("int parse(void) { return 0; }"))
        .write("src/util.c", &apache_source("int util(void) { return 1; }"))
        .write("README.md", "# Upstream\n")
        .write("assets/logo.png", "\u{89}PNG fake");
    base.commit("Initial import", UPSTREAM, "2020-01-10");
    base
}

fn fork_of(base: &Repo, dir: &TempDir) -> Repo {
    base.clone_to(dir.path().join("fork"))
}

/// Fork only adds new files.
pub fn obligation_free() -> Pair {
    let dir = TempDir::new().unwrap();
    let base = apache_base(&dir);
    let fork = fork_of(&base, &dir);
    fork.write("src/extra.c", "int extra(void) { return 2; }\n");
    let c = fork.commit("Add extra helper", ALICE, "2021-02-01");
    Pair { dir, base, fork, marks: vec![("extra", c)] }
}

/// Apache source edit documented in a changelog.
pub fn documented() -> Pair {
    let dir = TempDir::new().unwrap();
    let base = apache_base(&dir);
    let fork = fork_of(&base, &dir);
    fork.write("src/lib.c", &apache_source("int parse(void) { return retry(3); }"));
    let c = fork.commit("Add retry logic to the parser", ALICE, "2021-03-01");
    fork.write("CHANGELOG.md", "# Changelog\n\n## 2021-03-01\n\n- Add retry logic to the parser\n");
    let n = fork.commit("Write changelog", ALICE, "2021-03-02");
    Pair { dir, base, fork, marks: vec![("edit", c), ("notes", n)] }
}

/// Apache source edit without any notice file.
pub fn undocumented() -> Pair {
    let dir = TempDir::new().unwrap();
    let base = apache_base(&dir);
    let fork = fork_of(&base, &dir);
    fork.write("src/lib.c", &apache_source("int parse(void) { return retry(3); }"));
    let c = fork.commit("Add retry logic to the parser", ALICE, "2021-03-01");
    Pair { dir, base, fork, marks: vec![("edit", c)] }
}

/// Changelog in the shape of a release-notes file with two dated blocks.
pub const RELEASE_NOTES: &str = "# Changelog

## 1.8.0 (2021-01-19)

Features:

- Added support for removing tracking pixels, thanks @Phylu
- Translations: German strings updated by Phylu
- Fixed contact sync for large address books (Phylu)

Fixes:

- Improved startup performance

## 1.7.9 (2020-05-24)

- Initial changes on top of upstream
";

/// GPL-2.0 edit whose matching changelog line sits in a block that ended
/// before the commit date.
pub fn gpl_out_of_range() -> Pair {
    let dir = TempDir::new().unwrap();
    let base = Repo::init(dir.path().join("base"));
    base.write("LICENSE", GPL_LICENSE)
        .write("src/main.c", &spdx_source("GPL-2.0-only", "int main(void) { return 0; }"))
        .write("src/pixels.c", &spdx_source("GPL-2.0-only", "int track(void) { return 0; }"));
    base.commit("Initial import", UPSTREAM, "2020-01-10");
    let fork = fork_of(&base, &dir);
    fork.write("CHANGELOG.md", RELEASE_NOTES);
    fork.commit("Release notes", PHYLU, "2021-01-19");
    fork.write("src/pixels.c", &spdx_source("GPL-2.0-only", "int track(void) { return strip(); }"));
    let c = fork.commit("Added support for removing tracking pixels", PHYLU, "2021-03-01");
    Pair { dir, base, fork, marks: vec![("edit", c)] }
}

/// The fork contains a base commit with its original id; only a fork point
/// before that commit makes it show up in the fork history.
pub fn cherry_picked() -> Pair {
    let dir = TempDir::new().unwrap();
    let base = apache_base(&dir);
    let x = base.head();
    base.write("src/lib.c", &apache_source("int parse(void) { return 7; }"));
    let p = base.commit("Base improvement", UPSTREAM, "2020-06-01");
    let fork = fork_of(&base, &dir);
    fork.write("src/extra.c", "int extra(void) { return 2; }\n");
    let q = fork.commit("Add extra helper", ALICE, "2021-02-01");
    Pair { dir, base, fork, marks: vec![("fork_point", x), ("picked", p), ("own", q)] }
}

/// An obligating edit and its revert.
pub fn reverted() -> Pair {
    let dir = TempDir::new().unwrap();
    let base = apache_base(&dir);
    let fork = fork_of(&base, &dir);
    fork.write("src/lib.c", &apache_source("int parse(void) { return 42; }"));
    let t = fork.commit("Tweak parser", ALICE, "2021-02-01");
    let r = fork.revert(&t, ALICE, "2021-02-02");
    Pair { dir, base, fork, marks: vec![("tweak", t), ("revert", r)] }
}

/// CDDL-1.0 edit whose changelog line names a different author.
pub fn wrong_author() -> Pair {
    let dir = TempDir::new().unwrap();
    let base = Repo::init(dir.path().join("base"));
    base.write("src/cache.c", &spdx_source("CDDL-1.0", "int evict(void) { return 0; }"));
    base.commit("Initial import", UPSTREAM, "2020-01-10");
    let fork = fork_of(&base, &dir);
    fork.write("NOTES.txt", "scratch\n");
    fork.commit("Scratch notes", BOB, "2021-01-01");
    fork.write("src/cache.c", &spdx_source("CDDL-1.0", "int evict(void) { return 1; }"));
    let c = fork.commit("Improve cache eviction", ALICE, "2021-02-01");
    fork.write("CHANGES.md", "Changes\n=======\n\n- Improve cache eviction (thanks Bob Stone)\n");
    fork.commit("Document changes", BOB, "2021-02-02");
    Pair { dir, base, fork, marks: vec![("edit", c)] }
}

/// Two obligating edits, one documented and one not, under GPL-3.0.
pub fn partially_documented() -> Pair {
    let dir = TempDir::new().unwrap();
    let base = Repo::init(dir.path().join("base"));
    base.write("lib/a.py", &spdx_source("GPL-3.0-or-later", "def a():\n    return 1"))
        .write("lib/b.py", &spdx_source("GPL-3.0-or-later", "def b():\n    return 2"))
        .write("NEWS", "Upstream news\n");
    base.commit("Initial import", UPSTREAM, "2020-01-10");
    let fork = fork_of(&base, &dir);
    fork.write("lib/a.py", &spdx_source("GPL-3.0-or-later", "def a():\n    return 10"));
    let a = fork.commit("Scale the a() result by ten", ALICE, "2021-04-01");
    fork.write("lib/b.py", &spdx_source("GPL-3.0-or-later", "def b():\n    return 20"));
    let b = fork.commit("Double b output", BOB, "2021-04-03");
    fork.write("NEWS", "2021-04-05 release\n\n- Scale the a() result by ten\n\nUpstream news\n");
    fork.commit("Update NEWS", ALICE, "2021-04-05");
    Pair { dir, base, fork, marks: vec![("documented", a), ("missing", b)] }
}
