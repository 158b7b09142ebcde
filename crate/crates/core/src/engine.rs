//! Matching obligating commits against change-log entries.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commits::ObligatingCommit;
use crate::error::{Error, Result};
use crate::history::{Author, Commit};
use crate::model::{ContentElement, ModificationTerm, Requirements};
use crate::notice::ChangeLogEntry;
use crate::tfidf::TfIdfIndex;

pub const DEFAULT_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FulfillmentType {
    #[serde(rename = "OF")]
    ObligationFree,
    #[serde(rename = "OB")]
    FullyObligated,
    #[serde(rename = "VN")]
    ViolatedMissingNotice,
    #[serde(rename = "VD")]
    ViolatedMissingDate,
    #[serde(rename = "VA")]
    ViolatedMissingAuthor,
}

impl FulfillmentType {
    pub const ALL: [FulfillmentType; 5] = [
        FulfillmentType::ObligationFree,
        FulfillmentType::FullyObligated,
        FulfillmentType::ViolatedMissingNotice,
        FulfillmentType::ViolatedMissingDate,
        FulfillmentType::ViolatedMissingAuthor,
    ];

    pub fn code(self) -> &'static str {
        match self {
            FulfillmentType::ObligationFree => "OF",
            FulfillmentType::FullyObligated => "OB",
            FulfillmentType::ViolatedMissingNotice => "VN",
            FulfillmentType::ViolatedMissingDate => "VD",
            FulfillmentType::ViolatedMissingAuthor => "VA",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.code().eq_ignore_ascii_case(code))
    }

    pub fn is_violation(self) -> bool {
        matches!(
            self,
            FulfillmentType::ViolatedMissingNotice
                | FulfillmentType::ViolatedMissingDate
                | FulfillmentType::ViolatedMissingAuthor
        )
    }
}

impl fmt::Display for FulfillmentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub th: f64,
}

impl MatchConfig {
    pub fn new(th: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&th) {
            Ok(Self { th })
        } else {
            Err(Error::Threshold(th))
        }
    }
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            th: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub commit: Commit,
    /// Present for obligating commits.
    pub required: Option<Requirements>,
    pub terms: Vec<ModificationTerm>,
    pub touched: Vec<String>,
    pub entry: Option<ChangeLogEntry>,
    /// Position of `entry` in the entry list it was matched against.
    pub entry_index: Option<usize>,
    #[serde(rename = "type")]
    pub kind: FulfillmentType,
    pub score: f64,
}

impl DetectionRecord {
    pub fn obligation_free(commit: Commit) -> Self {
        Self {
            commit,
            required: None,
            terms: Vec::new(),
            touched: Vec::new(),
            entry: None,
            entry_index: None,
            kind: FulfillmentType::ObligationFree,
            score: 0.0,
        }
    }

    pub fn is_obligating(&self) -> bool {
        self.required.is_some()
    }
}

/// Index over the messages of `entries`.
pub fn build_index(entries: &[ChangeLogEntry]) -> TfIdfIndex {
    let msgs: Vec<&str> = entries.iter().map(|e| e.msg.as_str()).collect();
    TfIdfIndex::build(&msgs)
}

/// Outcome of checking one commit against the entries.
pub fn decide(
    commit: &Commit,
    required: &Requirements,
    entries: &[ChangeLogEntry],
    index: &TfIdfIndex,
    cfg: &MatchConfig,
) -> (FulfillmentType, Option<usize>, f64) {
    let Some((i, score)) = index.best_match(&commit.msg) else {
        return (FulfillmentType::ViolatedMissingNotice, None, 0.0);
    };
    if score < cfg.th {
        return (FulfillmentType::ViolatedMissingNotice, None, score);
    }
    let entry = &entries[i];
    let kind = if required.requires(ContentElement::Date) && !entry.covers(commit.date) {
        FulfillmentType::ViolatedMissingDate
    } else if required.requires(ContentElement::Author)
        && !entry.author.as_ref().is_some_and(|a| a.same_person(&commit.author))
    {
        FulfillmentType::ViolatedMissingAuthor
    } else {
        FulfillmentType::FullyObligated
    };
    (kind, Some(i), score)
}

pub fn classify(
    h: &ObligatingCommit,
    entries: &[ChangeLogEntry],
    index: &TfIdfIndex,
    cfg: &MatchConfig,
) -> DetectionRecord {
    let (kind, entry_index, score) = decide(&h.commit, &h.required, entries, index, cfg);
    DetectionRecord {
        commit: h.commit.clone(),
        required: Some(h.required.clone()),
        terms: h.terms.iter().cloned().collect(),
        touched: h.touched.clone(),
        entry: entry_index.map(|i| entries[i].clone()),
        entry_index,
        kind,
        score,
    }
}

/// Classifies every obligating commit, preserving input order.
pub fn classify_all(
    obligating: &[ObligatingCommit],
    entries: &[ChangeLogEntry],
    index: &TfIdfIndex,
    cfg: &MatchConfig,
) -> Vec<DetectionRecord> {
    obligating
        .par_iter()
        .map(|h| classify(h, entries, index, cfg))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FixKind {
    CreateEntry,
    SetDates,
    SetAuthor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixAction {
    pub kind: FixKind,
    /// Notice file to edit; `None` for a created entry, whose file is chosen
    /// when fixes are applied.
    pub target: Option<String>,
    /// Fields to write. For updates, `source` points at the entry to change.
    pub payload: ChangeLogEntry,
    pub commit_id: String,
    /// Whether the author has to appear in the written entry.
    pub with_author: bool,
}

/// The edit that repairs a violating record; `None` for OB and OF.
///
/// A date repair also carries the author when the commit requires one and
/// the matched entry does not name it.
pub fn generate_fix(rec: &DetectionRecord) -> Option<FixAction> {
    let h = &rec.commit;
    let needs_author = rec
        .required
        .as_ref()
        .is_some_and(|r| r.requires(ContentElement::Author));
    let entry_has_author = |e: &ChangeLogEntry| e.author.as_ref().is_some_and(|a| a.same_person(&h.author));
    let (kind, payload, with_author) = match rec.kind {
        FulfillmentType::ViolatedMissingNotice => (
            FixKind::CreateEntry,
            ChangeLogEntry {
                msg: h.msg.clone(),
                d_s: Some(h.date),
                d_e: Some(h.date),
                author: Some(h.author.clone()),
                source: None,
            },
            needs_author,
        ),
        FulfillmentType::ViolatedMissingDate => {
            let n = rec.entry.as_ref()?;
            let add_author = needs_author && !entry_has_author(n);
            (
                FixKind::SetDates,
                ChangeLogEntry {
                    d_s: Some(h.date),
                    d_e: Some(h.date),
                    author: add_author.then(|| h.author.clone()),
                    ..n.clone()
                },
                add_author,
            )
        }
        FulfillmentType::ViolatedMissingAuthor => {
            let n = rec.entry.as_ref()?;
            (
                FixKind::SetAuthor,
                ChangeLogEntry {
                    author: Some(h.author.clone()),
                    ..n.clone()
                },
                true,
            )
        }
        FulfillmentType::FullyObligated | FulfillmentType::ObligationFree => return None,
    };
    let target = payload.source.as_ref().map(|s| s.path.clone());
    Some(FixAction {
        kind,
        target,
        payload,
        commit_id: h.id.clone(),
        with_author,
    })
}

/// Author named by an action, if it has to be written.
pub fn written_author(action: &FixAction) -> Option<&Author> {
    if action.with_author {
        action.payload.author.as_ref()
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::notice::EntrySource;
    use chrono::NaiveDate;
    use std::collections::BTreeSet;

    fn day(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn commit(msg: &str, date: NaiveDate, author: &str) -> Commit {
        Commit {
            id: "abc1".into(),
            author: Author::new(author, format!("{}@example.org", author.to_lowercase())),
            date,
            msg: msg.into(),
            parents: vec![],
        }
    }

    fn req(elements: &[ContentElement]) -> Requirements {
        Requirements {
            content: elements.iter().copied().collect(),
            location: BTreeSet::new(),
        }
    }

    fn ob(c: Commit, r: Requirements) -> ObligatingCommit {
        ObligatingCommit {
            commit: c,
            terms: BTreeSet::new(),
            required: r,
            touched: vec![],
        }
    }

    fn entry(msg: &str, d_s: Option<NaiveDate>, d_e: Option<NaiveDate>, author: Option<&str>) -> ChangeLogEntry {
        ChangeLogEntry {
            msg: msg.into(),
            d_s,
            d_e,
            author: author.map(|a| Author::new(a, format!("{}@example.org", a.to_lowercase()))),
            source: Some(EntrySource {
                path: "CHANGELOG.md".into(),
                line: 3,
                block: 0,
            }),
        }
    }

    use ContentElement::{BriefStatement, Date};

    #[test]
    fn missing_notice() {
        let entries = vec![entry("update readme", None, None, None)];
        let idx = build_index(&entries);
        let rec = classify(&ob(commit("Add retry logic", day(2022, 1, 5), "alice"), req(&[BriefStatement])), &entries, &idx, &MatchConfig::default());
        assert_eq!(rec.kind, FulfillmentType::ViolatedMissingNotice);
        assert!(rec.entry.is_none());

        let none = classify(&ob(commit("x", day(2022, 1, 5), "a"), req(&[BriefStatement])), &[], &build_index(&[]), &MatchConfig::default());
        assert_eq!(none.kind, FulfillmentType::ViolatedMissingNotice);
    }

    #[test]
    fn date_outside_block() {
        let entries = vec![entry("Fixed tracking pixels", Some(day(2020, 5, 24)), Some(day(2021, 1, 19)), None)];
        let idx = build_index(&entries);
        let h = ob(commit("Fixed tracking pixels", day(2021, 3, 1), "Phylu"), req(&[Date, BriefStatement]));
        let rec = classify(&h, &entries, &idx, &MatchConfig::default());
        assert_eq!(rec.kind, FulfillmentType::ViolatedMissingDate);
        let inside = ob(commit("Fixed tracking pixels", day(2020, 12, 1), "Phylu"), req(&[Date, BriefStatement]));
        assert_eq!(classify(&inside, &entries, &idx, &MatchConfig::default()).kind, FulfillmentType::FullyObligated);
    }

    #[test]
    fn undated_entry_fails_date_check() {
        let entries = vec![entry("Fixed tracking pixels", None, None, None)];
        let idx = build_index(&entries);
        let h = ob(commit("Fixed tracking pixels", day(2021, 3, 1), "x"), req(&[Date, BriefStatement]));
        assert_eq!(classify(&h, &entries, &idx, &MatchConfig::default()).kind, FulfillmentType::ViolatedMissingDate);
    }

    #[test]
    fn statement_only_is_ob_or_vn() {
        let entries = vec![entry("Fixed tracking pixels", None, None, None)];
        let idx = build_index(&entries);
        let h = ob(commit("Fixed tracking pixels", day(2021, 3, 1), "x"), req(&[BriefStatement]));
        assert_eq!(classify(&h, &entries, &idx, &MatchConfig::default()).kind, FulfillmentType::FullyObligated);
    }

    #[test]
    fn author_checks() {
        let entries = vec![entry("Fixed tracking pixels", None, None, Some("Phylu"))];
        let idx = build_index(&entries);
        let r = req(&[ContentElement::Author, BriefStatement]);
        let other = ob(commit("Fixed tracking pixels", day(2021, 3, 1), "bob"), r.clone());
        assert_eq!(classify(&other, &entries, &idx, &MatchConfig::default()).kind, FulfillmentType::ViolatedMissingAuthor);
        let same = ob(commit("Fixed tracking pixels", day(2021, 3, 1), "Phylu"), r);
        assert_eq!(classify(&same, &entries, &idx, &MatchConfig::default()).kind, FulfillmentType::FullyObligated);
    }

    #[test]
    fn date_failure_reported_before_author() {
        let entries = vec![entry("Fixed tracking pixels", None, None, None)];
        let idx = build_index(&entries);
        let h = ob(commit("Fixed tracking pixels", day(2021, 3, 1), "bob"), req(&[Date, ContentElement::Author, BriefStatement]));
        assert_eq!(classify(&h, &entries, &idx, &MatchConfig::default()).kind, FulfillmentType::ViolatedMissingDate);
    }

    #[test]
    fn ties_go_to_earliest_entry() {
        let entries = vec![
            entry("fix bug", Some(day(2020, 1, 1)), Some(day(2020, 1, 1)), None),
            entry("fix bug", Some(day(2021, 1, 1)), Some(day(2021, 1, 1)), None),
        ];
        let idx = build_index(&entries);
        let rec = classify(&ob(commit("fix bug", day(2021, 1, 1), "a"), req(&[BriefStatement])), &entries, &idx, &MatchConfig::default());
        assert_eq!(rec.entry_index, Some(0));
    }

    #[test]
    fn zero_threshold_always_matches() {
        let entries = vec![entry("unrelated words", None, None, None)];
        let idx = build_index(&entries);
        let cfg = MatchConfig::new(0.0).unwrap();
        let rec = classify(&ob(commit("Add retry logic", day(2022, 1, 5), "a"), req(&[BriefStatement])), &entries, &idx, &cfg);
        assert_eq!(rec.kind, FulfillmentType::FullyObligated);
        assert!(MatchConfig::new(1.5).is_err());
    }

    #[test]
    fn fixes() {
        let c = commit("Add retry logic", day(2022, 1, 5), "alice");
        let mut rec = classify(&ob(c.clone(), req(&[BriefStatement])), &[], &build_index(&[]), &MatchConfig::default());
        let fix = generate_fix(&rec).unwrap();
        assert_eq!(fix.kind, FixKind::CreateEntry);
        assert_eq!(fix.payload.msg, "Add retry logic");
        assert_eq!((fix.payload.d_s, fix.payload.d_e), (Some(day(2022, 1, 5)), Some(day(2022, 1, 5))));
        assert_eq!(fix.payload.author, Some(c.author.clone()));
        assert_eq!(fix.commit_id, "abc1");

        rec.kind = FulfillmentType::ViolatedMissingDate;
        rec.entry = Some(entry("retry", None, Some(day(2020, 1, 1)), None));
        let fix = generate_fix(&rec).unwrap();
        assert_eq!(fix.kind, FixKind::SetDates);
        assert_eq!(fix.target.as_deref(), Some("CHANGELOG.md"));
        assert_eq!((fix.payload.d_s, fix.payload.d_e), (Some(day(2022, 1, 5)), Some(day(2022, 1, 5))));
        assert_eq!(fix.payload.msg, "retry");

        rec.kind = FulfillmentType::ViolatedMissingAuthor;
        let fix = generate_fix(&rec).unwrap();
        assert_eq!(fix.kind, FixKind::SetAuthor);
        assert_eq!(written_author(&fix), Some(&c.author));

        rec.kind = FulfillmentType::FullyObligated;
        assert!(generate_fix(&rec).is_none());
        assert!(generate_fix(&DetectionRecord::obligation_free(c)).is_none());
    }
}
