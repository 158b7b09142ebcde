//! Accuracy metrics against labeled commits and the threshold sweep.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::engine::{build_index, decide, FulfillmentType, MatchConfig};
use crate::error::{Error, Result};
use crate::history::Commit;
use crate::model::Requirements;
use crate::notice::ChangeLogEntry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    /// Labeled commits of this class.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub th: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub per_class: BTreeMap<FulfillmentType, ClassMetrics>,
}

const BASE_CLASSES: [FulfillmentType; 4] = [
    FulfillmentType::ViolatedMissingNotice,
    FulfillmentType::ViolatedMissingDate,
    FulfillmentType::ObligationFree,
    FulfillmentType::FullyObligated,
];

/// Per-class precision and recall over VN, VD, OF and OB (plus VA when it
/// occurs on either side) and their unweighted means. A class nobody
/// predicted has precision 0; a class absent from the labels has recall 0.
pub fn compute_macro_metrics(
    th: f64,
    predicted: &[(String, FulfillmentType)],
    labeled: &[(String, FulfillmentType)],
) -> Result<MetricsRow> {
    let pred: HashMap<&str, FulfillmentType> = predicted.iter().map(|(id, t)| (id.as_str(), *t)).collect();
    let gold: HashMap<&str, FulfillmentType> = labeled.iter().map(|(id, t)| (id.as_str(), *t)).collect();
    if pred.len() != predicted.len() || gold.len() != labeled.len() {
        return Err(Error::LabelMismatch("duplicate commit id".into()));
    }
    let missing: BTreeSet<&str> = gold.keys().filter(|id| !pred.contains_key(*id)).copied().collect();
    let extra: BTreeSet<&str> = pred.keys().filter(|id| !gold.contains_key(*id)).copied().collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::LabelMismatch(format!(
            "{} labeled commits without prediction, {} predictions without label (e.g. {})",
            missing.len(),
            extra.len(),
            missing.iter().chain(extra.iter()).next().copied().unwrap_or_default()
        )));
    }
    let mut classes: Vec<FulfillmentType> = BASE_CLASSES.to_vec();
    let va = FulfillmentType::ViolatedMissingAuthor;
    if pred.values().chain(gold.values()).any(|&t| t == va) {
        classes.push(va);
    }
    let mut per_class = BTreeMap::new();
    for &c in &classes {
        let tp = gold.iter().filter(|(id, &g)| g == c && pred[*id] == c).count();
        let predicted_c = pred.values().filter(|&&p| p == c).count();
        let support = gold.values().filter(|&&g| g == c).count();
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        per_class.insert(
            c,
            ClassMetrics {
                precision: ratio(tp, predicted_c),
                recall: ratio(tp, support),
                support,
            },
        );
    }
    let n = classes.len() as f64;
    Ok(MetricsRow {
        th,
        macro_precision: per_class.values().map(|m| m.precision).sum::<f64>() / n,
        macro_recall: per_class.values().map(|m| m.recall).sum::<f64>() / n,
        per_class,
    })
}

/// One labeled commit with everything classification needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCommit {
    pub commit: Commit,
    /// `None` for commits that touch no obligating file.
    pub required: Option<Requirements>,
    pub label: FulfillmentType,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledCorpus {
    pub commits: Vec<LabeledCommit>,
    pub entries: Vec<ChangeLogEntry>,
}

impl LabeledCorpus {
    pub fn predict(&self, cfg: &MatchConfig) -> Vec<(String, FulfillmentType)> {
        let index = build_index(&self.entries);
        self.commits
            .iter()
            .map(|c| {
                let kind = match &c.required {
                    Some(req) => decide(&c.commit, req, &self.entries, &index, cfg).0,
                    None => FulfillmentType::ObligationFree,
                };
                (c.commit.id.clone(), kind)
            })
            .collect()
    }

    pub fn labels(&self) -> Vec<(String, FulfillmentType)> {
        self.commits.iter().map(|c| (c.commit.id.clone(), c.label)).collect()
    }
}

/// 0.1, 0.2, ..., 0.9
pub fn default_thresholds() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

pub fn threshold_sweep(corpus: &LabeledCorpus, th_values: &[f64]) -> Result<Vec<MetricsRow>> {
    let labels = corpus.labels();
    th_values
        .iter()
        .map(|&th| {
            let cfg = MatchConfig::new(th)?;
            compute_macro_metrics(th, &corpus.predict(&cfg), &labels)
        })
        .collect()
}

/// Reads `<commit-id> <TYPE>` lines; `#` starts a comment.
pub fn parse_labels(text: &str) -> Result<Vec<(String, FulfillmentType)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Labels { line: i + 1, message };
        let mut parts = line.split_whitespace();
        let (Some(id), Some(kind), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err("expected `<commit-id> <TYPE>`".into()));
        };
        if !id.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(err(format!("`{id}` is not a commit id")));
        }
        let kind = FulfillmentType::from_code(kind).ok_or_else(|| err(format!("unknown type `{kind}`")))?;
        out.push((id.to_ascii_lowercase(), kind));
    }
    Ok(out)
}

/// Replaces abbreviated label ids by the unique full id they prefix.
pub fn expand_label_ids<'a>(
    labels: Vec<(String, FulfillmentType)>,
    ids: impl IntoIterator<Item = &'a str> + Clone,
) -> Result<Vec<(String, FulfillmentType)>> {
    labels
        .into_iter()
        .map(|(short, t)| {
            let mut hits = ids.clone().into_iter().filter(|id| id.starts_with(short.as_str()));
            match (hits.next(), hits.next()) {
                (Some(full), None) => Ok((full.to_string(), t)),
                (Some(_), Some(_)) => Err(Error::LabelMismatch(format!("ambiguous commit id `{short}`"))),
                (None, _) => Err(Error::LabelMismatch(format!("labeled commit `{short}` is not in the filtered fork history"))),
            }
        })
        .collect()
}
