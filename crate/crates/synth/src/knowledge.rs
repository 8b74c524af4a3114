//! Where candidate attributes for an entity come from.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use deepsearch_core::fixture::fixture_key;
use serde::{Deserialize, Serialize};

/// One candidate edge: `relation` links the entity to `target`;
/// `value_text` is the readable fact ("was founded in 1962").
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Attribute {
    pub relation: String,
    pub target: String,
    #[serde(default)]
    pub value_text: String,
}

impl Attribute {
    pub fn new(relation: impl Into<String>, target: impl Into<String>, value_text: impl Into<String>) -> Self {
        Self {
            relation: relation.into(),
            target: target.into(),
            value_text: value_text.into(),
        }
    }

    /// Text the irreversibility judge sees.
    pub fn fact(&self) -> String {
        if self.value_text.is_empty() {
            format!("{} {}", self.relation, self.target)
        } else {
            self.value_text.clone()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SourceError {
    #[error("knowledge source {path}: {message}")]
    Unreadable { path: String, message: String },
    #[error("knowledge source unavailable: {0}")]
    Unavailable(String),
}

/// Must be safe to call from several graph builders at once.
pub trait KnowledgeSource: Send + Sync {
    /// Unknown entities have no attributes.
    fn lookup(&self, entity: &str) -> Result<Vec<Attribute>, SourceError>;
}

#[derive(Debug, Clone, Default)]
pub struct InMemorySource {
    pub attributes: BTreeMap<String, Vec<Attribute>>,
}

impl InMemorySource {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, entity: impl Into<String>, attrs: Vec<Attribute>) -> Self {
        self.attributes.insert(entity.into(), attrs);
        self
    }
}

impl KnowledgeSource for InMemorySource {
    fn lookup(&self, entity: &str) -> Result<Vec<Attribute>, SourceError> {
        Ok(self.attributes.get(entity).cloned().unwrap_or_default())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EntityFile {
    entity: String,
    attributes: Vec<Attribute>,
}

/// Directory of `<fixture_key(entity)>.json` files.
#[derive(Debug, Clone)]
pub struct FixtureSource {
    root: PathBuf,
}

impl FixtureSource {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path_for(&self, entity: &str) -> PathBuf {
        self.root.join(format!("{}.json", fixture_key(entity)))
    }

    pub fn write(&self, entity: &str, attributes: &[Attribute]) -> std::io::Result<()> {
        std::fs::create_dir_all(&self.root)?;
        let file = EntityFile {
            entity: entity.to_string(),
            attributes: attributes.to_vec(),
        };
        std::fs::write(self.path_for(entity), serde_json::to_vec_pretty(&file)?)
    }

    /// Writes every entity of an in-memory source.
    pub fn export(root: &Path, source: &InMemorySource) -> std::io::Result<Self> {
        let out = Self::new(root);
        for (entity, attrs) in &source.attributes {
            out.write(entity, attrs)?;
        }
        Ok(out)
    }
}

impl KnowledgeSource for FixtureSource {
    fn lookup(&self, entity: &str) -> Result<Vec<Attribute>, SourceError> {
        let path = self.path_for(entity);
        let raw = match std::fs::read(&path) {
            Ok(raw) => raw,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => {
                return Err(SourceError::Unreadable {
                    path: path.display().to_string(),
                    message: e.to_string(),
                });
            }
        };
        let file: EntityFile = serde_json::from_slice(&raw).map_err(|e| SourceError::Unreadable {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(file.attributes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_round_trip_and_unknown_entity() {
        let dir = tempfile::tempdir().unwrap();
        let mem = InMemorySource::new().with("Inception", vec![Attribute::new("director", "Christopher Nolan", "was directed by Christopher Nolan")]);
        let fx = FixtureSource::export(dir.path(), &mem).unwrap();
        assert_eq!(fx.lookup("Inception").unwrap(), mem.lookup("Inception").unwrap());
        assert!(fx.lookup("Tenet").unwrap().is_empty());
    }
}
