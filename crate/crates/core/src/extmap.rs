//! File extension and basename classification into scope elements.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::ScopeElement;

const BUILTIN_MAP: &str = include_str!("../data/extensions.toml");

#[derive(Debug, Deserialize)]
struct MapFile {
    #[serde(default)]
    version: Option<String>,
    #[serde(default)]
    extensions: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    basenames: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct ExtensionMap {
    version: String,
    extensions: HashMap<String, ScopeElement>,
    basenames: HashMap<String, ScopeElement>,
}

impl ExtensionMap {
    pub fn builtin() -> Self {
        Self::from_toml_str(BUILTIN_MAP, "builtin extensions.toml").expect("shipped map is valid")
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
        let file: MapFile = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        let extensions = invert(&file.extensions).map_err(&bad)?;
        let basenames = invert(&file.basenames).map_err(&bad)?;
        Ok(Self {
            version: file.version.unwrap_or_default(),
            extensions,
            basenames,
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn len(&self) -> usize {
        self.extensions.len() + self.basenames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Basename rules win over extensions; anything unmapped is `Others`.
    pub fn classify(&self, path: &str) -> ScopeElement {
        let base = path.rsplit(['/', '\\']).next().unwrap_or(path);
        let base = base.to_ascii_lowercase();
        if let Some(e) = self.basenames.get(&base) {
            return *e;
        }
        match base.rsplit_once('.') {
            Some((_, ext)) if !ext.is_empty() => {
                self.extensions.get(ext).copied().unwrap_or(ScopeElement::Others)
            }
            _ => ScopeElement::Others,
        }
    }
}

fn invert(
    table: &BTreeMap<String, Vec<String>>,
) -> std::result::Result<HashMap<String, ScopeElement>, String> {
    let mut out = HashMap::new();
    for (code, names) in table {
        let element =
            ScopeElement::from_code(code).ok_or_else(|| format!("unknown scope element `{code}`"))?;
        if element == ScopeElement::Others {
            return Err("S_c8 is the fallback and cannot be mapped explicitly".into());
        }
        for name in names {
            let key = name.to_ascii_lowercase();
            if let Some(prev) = out.insert(key.clone(), element) {
                if prev != element {
                    return Err(format!("`{key}` mapped to both {prev} and {element}"));
                }
            }
        }
    }
    Ok(out)
}
