//! Obligation model for license modification terms.
//!
//! A modification term is a license identifier paired with an obligation
//! `(scope group, content group, location group)`. The groups are fixed
//! vocabularies; the assignment of licenses to groups is data and lives in
//! a versioned TOML database that callers can replace.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extmap::ExtensionMap;

/// File kinds that a modification scope can cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScopeElement {
    #[serde(rename = "S_c1")]
    SourceCode,
    #[serde(rename = "S_c2")]
    Documentation,
    #[serde(rename = "S_c3")]
    ConfigurationFiles,
    #[serde(rename = "S_c4")]
    InterfaceDefinitionFiles,
    #[serde(rename = "S_c5")]
    Scripts,
    #[serde(rename = "S_c6")]
    SourceCodeDifferentialComparison,
    #[serde(rename = "S_c7")]
    DesignMaterials,
    /// Everything not covered by the other seven.
    #[serde(rename = "S_c8")]
    Others,
}

impl ScopeElement {
    pub const ALL: [ScopeElement; 8] = [
        ScopeElement::SourceCode,
        ScopeElement::Documentation,
        ScopeElement::ConfigurationFiles,
        ScopeElement::InterfaceDefinitionFiles,
        ScopeElement::Scripts,
        ScopeElement::SourceCodeDifferentialComparison,
        ScopeElement::DesignMaterials,
        ScopeElement::Others,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ScopeElement::SourceCode => "S_c1",
            ScopeElement::Documentation => "S_c2",
            ScopeElement::ConfigurationFiles => "S_c3",
            ScopeElement::InterfaceDefinitionFiles => "S_c4",
            ScopeElement::Scripts => "S_c5",
            ScopeElement::SourceCodeDifferentialComparison => "S_c6",
            ScopeElement::DesignMaterials => "S_c7",
            ScopeElement::Others => "S_c8",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.code() == code)
    }
}

impl fmt::Display for ScopeElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScopeGroup {
    #[serde(rename = "S_g1")]
    G1,
    #[serde(rename = "S_g2")]
    G2,
    #[serde(rename = "S_g3")]
    G3,
    #[serde(rename = "S_g4")]
    G4,
    #[serde(rename = "S_g5")]
    G5,
    #[serde(rename = "S_g6")]
    G6,
    #[serde(rename = "S_g7")]
    G7,
    #[serde(rename = "S_g8")]
    G8,
}

impl ScopeGroup {
    pub const ALL: [ScopeGroup; 8] = [
        ScopeGroup::G1,
        ScopeGroup::G2,
        ScopeGroup::G3,
        ScopeGroup::G4,
        ScopeGroup::G5,
        ScopeGroup::G6,
        ScopeGroup::G7,
        ScopeGroup::G8,
    ];

    pub fn elements(self) -> &'static [ScopeElement] {
        use ScopeElement::*;
        match self {
            ScopeGroup::G1 => &[SourceCode, Documentation],
            ScopeGroup::G2 => &[SourceCode, DesignMaterials],
            ScopeGroup::G3 => &[SourceCode, Documentation, ConfigurationFiles],
            ScopeGroup::G4 => &[SourceCode, InterfaceDefinitionFiles, Scripts],
            ScopeGroup::G5 => &[
                SourceCode,
                InterfaceDefinitionFiles,
                Scripts,
                SourceCodeDifferentialComparison,
            ],
            ScopeGroup::G6 => &[SourceCode, Documentation, InterfaceDefinitionFiles, Scripts],
            ScopeGroup::G7 => &[
                SourceCode,
                Documentation,
                InterfaceDefinitionFiles,
                Scripts,
                SourceCodeDifferentialComparison,
            ],
            ScopeGroup::G8 => &ScopeElement::ALL,
        }
    }

    pub fn contains(self, element: ScopeElement) -> bool {
        self.elements().contains(&element)
    }
}

/// Ingredients a modification notice has to carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ContentElement {
    #[serde(rename = "C_c1")]
    Date,
    #[serde(rename = "C_c2")]
    Author,
    #[serde(rename = "C_c3")]
    BriefStatement,
    #[serde(rename = "C_c4")]
    InformativeStatement,
}

impl ContentElement {
    pub const ALL: [ContentElement; 4] = [
        ContentElement::Date,
        ContentElement::Author,
        ContentElement::BriefStatement,
        ContentElement::InformativeStatement,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ContentElement::Date => "C_c1",
            ContentElement::Author => "C_c2",
            ContentElement::BriefStatement => "C_c3",
            ContentElement::InformativeStatement => "C_c4",
        }
    }

    pub fn is_statement(self) -> bool {
        matches!(
            self,
            ContentElement::BriefStatement | ContentElement::InformativeStatement
        )
    }
}

impl fmt::Display for ContentElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ContentGroup {
    #[serde(rename = "C_g1")]
    G1,
    #[serde(rename = "C_g2")]
    G2,
    #[serde(rename = "C_g3")]
    G3,
    #[serde(rename = "C_g4")]
    G4,
    #[serde(rename = "C_g5")]
    G5,
    #[serde(rename = "C_g6")]
    G6,
}

impl ContentGroup {
    pub const ALL: [ContentGroup; 6] = [
        ContentGroup::G1,
        ContentGroup::G2,
        ContentGroup::G3,
        ContentGroup::G4,
        ContentGroup::G5,
        ContentGroup::G6,
    ];

    pub fn elements(self) -> &'static [ContentElement] {
        use ContentElement::*;
        match self {
            ContentGroup::G1 => &[Date, BriefStatement],
            ContentGroup::G2 => &[Author, BriefStatement],
            ContentGroup::G3 => &[BriefStatement],
            ContentGroup::G4 => &[InformativeStatement],
            ContentGroup::G5 => &[Date, InformativeStatement],
            ContentGroup::G6 => &[Date, Author, InformativeStatement],
        }
    }
}

/// Where a notice has to be placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LocationMode {
    /// A separate document (L_c1).
    DocumentOnly,
    /// Each modified file (L_c2).
    PerFileOnly,
    /// Both a document and each modified file.
    Both,
    /// Either of the two; the license does not say.
    Either,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LocationGroup {
    #[serde(rename = "L_g1")]
    G1,
    #[serde(rename = "L_g2")]
    G2,
    #[serde(rename = "L_g3")]
    G3,
    #[serde(rename = "L_g4")]
    G4,
}

impl LocationGroup {
    pub const ALL: [LocationGroup; 4] = [
        LocationGroup::G1,
        LocationGroup::G2,
        LocationGroup::G3,
        LocationGroup::G4,
    ];

    pub fn mode(self) -> LocationMode {
        match self {
            LocationGroup::G1 => LocationMode::DocumentOnly,
            LocationGroup::G2 => LocationMode::PerFileOnly,
            LocationGroup::G3 => LocationMode::Both,
            LocationGroup::G4 => LocationMode::Either,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Obligation {
    pub scope: ScopeGroup,
    pub content: ContentGroup,
    pub location: LocationGroup,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModificationTerm {
    pub lic: String,
    pub obligation: Obligation,
    /// Group assignment not individually confirmed; see the database header.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub provisional: bool,
}

impl ModificationTerm {
    pub fn new(lic: impl Into<String>, obligation: Obligation) -> Self {
        Self {
            lic: lic.into(),
            obligation,
            provisional: false,
        }
    }
}

/// Content and location requirements of an obligating change.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirements {
    pub content: BTreeSet<ContentElement>,
    pub location: BTreeSet<LocationMode>,
}

impl Requirements {
    pub fn requires(&self, element: ContentElement) -> bool {
        self.content.contains(&element)
    }
}

/// Unions the content and location requirements of every term.
pub fn union_required<'a, I>(terms: I) -> Result<Requirements>
where
    I: IntoIterator<Item = &'a ModificationTerm>,
{
    let mut req = Requirements::default();
    let mut any = false;
    for term in terms {
        any = true;
        req.content
            .extend(term.obligation.content.elements().iter().copied());
        req.location.insert(term.obligation.location.mode());
    }
    if any {
        Ok(req)
    } else {
        Err(Error::EmptyTerms)
    }
}

#[derive(Debug, Deserialize)]
struct DbFile {
    version: String,
    #[serde(default, rename = "license")]
    licenses: Vec<DbRecord>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DbRecord {
    id: String,
    scope: ScopeGroup,
    content: ContentGroup,
    location: LocationGroup,
    #[serde(default)]
    provisional: bool,
}

/// Licenses with a modification term, keyed by identifier.
#[derive(Debug, Clone)]
pub struct MtDatabase {
    version: String,
    terms: BTreeMap<String, ModificationTerm>,
}

const BUILTIN_DB: &str = include_str!("../data/mt_db.toml");

impl MtDatabase {
    pub fn builtin() -> Self {
        Self::from_toml_str(BUILTIN_DB, "builtin mt_db.toml").expect("shipped database is valid")
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
        let file: DbFile = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        let mut terms = BTreeMap::new();
        for rec in file.licenses {
            let term = ModificationTerm {
                lic: rec.id.clone(),
                obligation: Obligation {
                    scope: rec.scope,
                    content: rec.content,
                    location: rec.location,
                },
                provisional: rec.provisional,
            };
            if terms.insert(rec.id.clone(), term).is_some() {
                return Err(bad(format!("duplicate license id `{}`", rec.id)));
            }
        }
        Ok(Self {
            version: file.version,
            terms,
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn lookup_mt(&self, license_id: &str) -> Option<&ModificationTerm> {
        self.terms.get(license_id)
    }

    pub fn terms(&self) -> impl Iterator<Item = &ModificationTerm> {
        self.terms.values()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// The term database together with the file classification it is applied to.
#[derive(Debug, Clone)]
pub struct ObligationModel {
    pub db: MtDatabase,
    pub extensions: ExtensionMap,
}

impl ObligationModel {
    pub fn builtin() -> Self {
        Self {
            db: MtDatabase::builtin(),
            extensions: ExtensionMap::builtin(),
        }
    }

    pub fn lookup_mt(&self, license_id: &str) -> Option<&ModificationTerm> {
        self.db.lookup_mt(license_id)
    }

    pub fn classify_file(&self, path: &str) -> ScopeElement {
        self.extensions.classify(path)
    }

    pub fn in_scope(&self, term: &ModificationTerm, path: &str) -> bool {
        term.obligation.scope.contains(self.classify_file(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obligation(s: ScopeGroup, c: ContentGroup, l: LocationGroup) -> Obligation {
        Obligation {
            scope: s,
            content: c,
            location: l,
        }
    }

    #[test]
    fn lookup_known_and_absent() {
        let db = MtDatabase::builtin();
        assert_eq!(
            db.lookup_mt("Apache-2.0").unwrap().obligation,
            obligation(ScopeGroup::G3, ContentGroup::G3, LocationGroup::G2)
        );
        assert_eq!(
            db.lookup_mt("GPL-3.0").unwrap().obligation,
            obligation(ScopeGroup::G8, ContentGroup::G1, LocationGroup::G4)
        );
        assert!(db.lookup_mt("MIT").is_none());
        assert!(db.lookup_mt("Not-A-License").is_none());
    }

    #[test]
    fn scope_queries() {
        let model = ObligationModel::builtin();
        let apache = model.lookup_mt("Apache-2.0").unwrap().clone();
        let gpl3 = model.lookup_mt("GPL-3.0").unwrap().clone();
        assert!(model.in_scope(&apache, "doc/guide.md"));
        assert!(model.in_scope(&gpl3, "assets/logo.png"));
        assert!(!model.in_scope(&apache, "assets/logo.png"));
    }

    #[test]
    fn union_examples() {
        let t1 = ModificationTerm::new("t1", obligation(ScopeGroup::G8, ContentGroup::G3, LocationGroup::G2));
        let t2 = ModificationTerm::new("t2", obligation(ScopeGroup::G8, ContentGroup::G5, LocationGroup::G1));
        let req = union_required([&t1, &t2]).unwrap();
        assert_eq!(
            req.content.into_iter().collect::<Vec<_>>(),
            vec![
                ContentElement::Date,
                ContentElement::BriefStatement,
                ContentElement::InformativeStatement
            ]
        );

        let db = MtDatabase::builtin();
        let gpl2 = db.lookup_mt("GPL-2.0").unwrap();
        let gpl3 = db.lookup_mt("GPL-3.0").unwrap();
        let req = union_required([gpl2, gpl3]).unwrap();
        assert_eq!(
            req.content,
            BTreeSet::from([ContentElement::Date, ContentElement::BriefStatement])
        );
        assert_eq!(
            req.location,
            BTreeSet::from([LocationMode::PerFileOnly, LocationMode::Either])
        );
    }

    #[test]
    fn union_of_nothing_is_an_error() {
        assert!(matches!(
            union_required(std::iter::empty()),
            Err(Error::EmptyTerms)
        ));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let text = r#"
version = "x"
[[license]]
id = "A"
scope = "S_g1"
content = "C_g1"
location = "L_g1"
[[license]]
id = "A"
scope = "S_g2"
content = "C_g1"
location = "L_g1"
"#;
        assert!(MtDatabase::from_toml_str(text, "t").is_err());
    }

    #[test]
    fn group_vocabularies() {
        for g in ScopeGroup::ALL {
            assert!(g.contains(ScopeElement::SourceCode), "{g:?}");
        }
        assert_eq!(ScopeGroup::G8.elements().len(), 8);
        for g in ContentGroup::ALL {
            assert!(g.elements().iter().any(|e| e.is_statement()), "{g:?}");
        }
    }

    fn arb_term() -> impl Strategy<Value = ModificationTerm> {
        (0usize..8, 0usize..6, 0usize..4).prop_map(|(s, c, l)| {
            ModificationTerm::new(
                format!("L{s}{c}{l}"),
                obligation(ScopeGroup::ALL[s], ContentGroup::ALL[c], LocationGroup::ALL[l]),
            )
        })
    }

    proptest! {
        #[test]
        fn union_is_order_insensitive(mut terms in prop::collection::vec(arb_term(), 1..6)) {
            let a = union_required(terms.iter()).unwrap();
            terms.reverse();
            let b = union_required(terms.iter()).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn union_is_monotone(terms in prop::collection::vec(arb_term(), 1..6), extra in arb_term()) {
            let a = union_required(terms.iter()).unwrap();
            let b = union_required(terms.iter().chain([&extra])).unwrap();
            prop_assert!(a.content.is_subset(&b.content));
            prop_assert!(a.location.is_subset(&b.location));
        }
    }
}
