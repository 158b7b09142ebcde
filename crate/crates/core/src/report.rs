//! Repository verdicts and report rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::engine::{DetectionRecord, FulfillmentType};
use crate::model::{ObligationModel, ScopeElement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RepoVerdict {
    ObligationFree,
    FullyObligated,
    PartiallyViolated,
    FullyViolated,
}

impl RepoVerdict {
    pub fn has_violations(self) -> bool {
        matches!(self, RepoVerdict::PartiallyViolated | RepoVerdict::FullyViolated)
    }
}

pub fn classify_repo(records: &[DetectionRecord]) -> RepoVerdict {
    let obligating: Vec<&DetectionRecord> = records.iter().filter(|r| r.is_obligating()).collect();
    let violated = obligating.iter().filter(|r| r.kind.is_violation()).count();
    if obligating.is_empty() {
        RepoVerdict::ObligationFree
    } else if violated == 0 {
        RepoVerdict::FullyObligated
    } else if violated == obligating.len() {
        RepoVerdict::FullyViolated
    } else {
        RepoVerdict::PartiallyViolated
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub commit_id: String,
    pub author: String,
    pub date: String,
    pub message_first_line: String,
    #[serde(rename = "type")]
    pub kind: FulfillmentType,
    pub matched_entry: Option<String>,
    pub score: f64,
    pub required_content: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub licenses: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub files: Vec<String>,
}

impl From<&DetectionRecord> for ReportRecord {
    fn from(r: &DetectionRecord) -> Self {
        let a = &r.commit.author;
        let author = if a.email.is_empty() {
            a.name.clone()
        } else {
            format!("{} <{}>", a.name, a.email)
        };
        Self {
            commit_id: r.commit.id.clone(),
            author,
            date: r.commit.date.to_string(),
            message_first_line: r.commit.subject().to_string(),
            kind: r.kind,
            matched_entry: r.entry.as_ref().map(|e| e.msg.clone()),
            score: (r.score * 1e6).round() / 1e6,
            required_content: r
                .required
                .as_ref()
                .map(|req| req.content.iter().map(|c| c.code().to_string()).collect())
                .unwrap_or_default(),
            licenses: r.terms.iter().map(|t| t.lic.clone()).collect(),
            files: r.touched.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub th: f64,
    pub clone_threshold: f64,
    pub fork_point: String,
    pub base_head: String,
    pub fork_head: String,
    pub db_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub verdict: RepoVerdict,
    /// Records per fulfillment type.
    pub counts: BTreeMap<FulfillmentType, usize>,
    /// Obligating commits touching at least one obligating file of each kind.
    pub scope_counts: BTreeMap<ScopeElement, usize>,
    pub config: ConfigEcho,
    pub notice_files: Vec<String>,
    pub records: Vec<ReportRecord>,
}

impl Report {
    pub fn new(records: &[DetectionRecord], config: ConfigEcho, notice_files: Vec<String>, model: &ObligationModel) -> Self {
        let mut counts: BTreeMap<FulfillmentType, usize> = FulfillmentType::ALL.iter().map(|&t| (t, 0)).collect();
        let mut scope_counts: BTreeMap<ScopeElement, usize> = BTreeMap::new();
        for r in records {
            *counts.entry(r.kind).or_default() += 1;
            if r.is_obligating() {
                let mut kinds: Vec<ScopeElement> = r.touched.iter().map(|p| model.classify_file(p)).collect();
                kinds.sort();
                kinds.dedup();
                for k in kinds {
                    *scope_counts.entry(k).or_default() += 1;
                }
            }
        }
        Self {
            verdict: classify_repo(records),
            counts,
            scope_counts,
            config,
            notice_files,
            records: records.iter().map(ReportRecord::from).collect(),
        }
    }

    pub fn has_violations(&self) -> bool {
        self.verdict.has_violations()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let c = &self.config;
        let _ = writeln!(out, "# Modification notice report\n");
        let _ = writeln!(out, "**Verdict:** {:?}\n", self.verdict);
        let _ = writeln!(out, "| setting | value |\n|---|---|");
        let _ = writeln!(out, "| threshold | {} |", c.th);
        let _ = writeln!(out, "| clone threshold | {} |", c.clone_threshold);
        let _ = writeln!(out, "| fork point | `{}` |", c.fork_point);
        let _ = writeln!(out, "| base head | `{}` |", c.base_head);
        let _ = writeln!(out, "| fork head | `{}` |", c.fork_head);
        let _ = writeln!(out, "| database version | {} |", c.db_version);
        let notices = if self.notice_files.is_empty() {
            "(none)".to_string()
        } else {
            self.notice_files.join(", ")
        };
        let _ = writeln!(out, "| notice files | {} |\n", escape(&notices));

        let _ = writeln!(out, "## Counts\n\n| type | commits |\n|---|---|");
        for (t, n) in &self.counts {
            let _ = writeln!(out, "| {t} | {n} |");
        }
        if !self.scope_counts.is_empty() {
            let _ = writeln!(out, "\n## Obligating commits by file kind\n\n| kind | commits |\n|---|---|");
            for (k, n) in &self.scope_counts {
                let _ = writeln!(out, "| {} | {n} |", k.code());
            }
        }
        let _ = writeln!(out, "\n## Commits\n");
        if self.records.is_empty() {
            let _ = writeln!(out, "No fork commits after the fork point.");
            return out;
        }
        let _ = writeln!(out, "| commit | date | author | type | score | required | message | matched entry |\n|---|---|---|---|---|---|---|---|");
        for r in &self.records {
            let _ = writeln!(
                out,
                "| `{}` | {} | {} | {} | {:.3} | {} | {} | {} |",
                &r.commit_id[..r.commit_id.len().min(12)],
                r.date,
                escape(&r.author),
                r.kind,
                r.score,
                r.required_content.join(" "),
                escape(&r.message_first_line),
                r.matched_entry.as_deref().map(escape).unwrap_or_default(),
            );
        }
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('|', "\\|").replace('<', "&lt;").replace('>', "&gt;")
}
