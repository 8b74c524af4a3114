//! File-backed visual asset store.
//!
//! Every image the agent touches is registered here exactly once and is
//! addressed afterwards by a short textual [`AssetId`]. Web assets reuse their
//! source URL as the id; derived assets (crops, zooms) get a store-generated
//! `asset://sha256/<digest>` locator. The mapping is a bijection on content:
//! identical bytes always come back with the id issued first.
//!
//! On-disk layout under the store root:
//!
//! ```text
//! store.json        digest algorithm + layout version
//! blobs/<digest>    raw bytes
//! index.jsonl       one IndexRecord per registered asset (append-only)
//! aliases.jsonl     later URLs that delivered already-known bytes
//! ```
//!
//! Replaying `index.jsonl` and `aliases.jsonl` reconstructs the store.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DIGEST_ALGORITHM: &str = "sha256";
pub const GENERATED_SCHEME: &str = "asset://sha256/";
pub const DEFAULT_MAX_ASSET_BYTES: usize = 32 * 1024 * 1024;

const LAYOUT_VERSION: u32 = 1;

/// Lightweight textual identifier standing in for an image in agent context.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AssetId(String);

impl AssetId {
    pub fn new(value: impl Into<String>) -> Result<Self, StoreError> {
        let value = value.into();
        if value.trim().is_empty() {
            return Err(StoreError::EmptyUid);
        }
        Ok(Self(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// True for ids minted by a store rather than taken from a source URL.
    pub fn is_generated(&self) -> bool {
        self.0.starts_with(GENERATED_SCHEME)
    }

    fn generated(content_hash: &str) -> Self {
        Self(format!("{GENERATED_SCHEME}{content_hash}"))
    }
}

impl fmt::Display for AssetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for AssetId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for AssetId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Retrieved,
    Generated,
}

/// Metadata for a registered asset. Bytes live on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetMeta {
    pub uid: AssetId,
    pub content_hash: String,
    pub media_type: String,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    pub provenance: Provenance,
}

/// A resolved asset: metadata plus the exact registered bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisualAsset {
    pub meta: AssetMeta,
    pub bytes: Vec<u8>,
}

impl VisualAsset {
    pub fn width(&self) -> u32 {
        self.meta.width
    }

    pub fn height(&self) -> u32 {
        self.meta.height
    }

    pub fn decode(&self) -> Result<image::DynamicImage, StoreError> {
        image::load_from_memory(&self.bytes).map_err(|e| StoreError::UndecodableImage(e.to_string()))
    }
}

/// A URL seen in search results whose bytes have not been pulled yet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteRef {
    pub url: String,
    pub caption: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("undecodable image: {0}")]
    UndecodableImage(String),
    #[error("unknown uid: {0}")]
    UnknownUid(String),
    #[error("uid must be non-empty")]
    EmptyUid,
    #[error("store uses digest {found}, expected {DIGEST_ALGORITHM}")]
    DigestMismatch { found: String },
    #[error("corrupt store index: {0}")]
    CorruptIndex(String),
    #[error("blob {0} failed its integrity check")]
    CorruptBlob(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Serialize, Deserialize)]
struct StoreMetadata {
    digest: String,
    version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct AliasRecord {
    alias: String,
    canonical: AssetId,
}

#[derive(Default)]
struct Inner {
    entries: BTreeMap<AssetId, AssetMeta>,
    hash_index: HashMap<String, AssetId>,
    aliases: BTreeMap<String, AssetId>,
    remote: BTreeMap<String, RemoteRef>,
}

/// Content-addressed, persistent asset store. Safe to share across threads.
pub struct AssetStore {
    root: PathBuf,
    max_bytes: usize,
    inner: RwLock<Inner>,
}

impl fmt::Debug for AssetStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner = self.inner.read();
        f.debug_struct("AssetStore")
            .field("root", &self.root)
            .field("entries", &inner.entries.len())
            .field("aliases", &inner.aliases.len())
            .finish()
    }
}

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn is_well_formed_url(s: &str) -> bool {
    match url::Url::parse(s) {
        Ok(u) => u.has_host() && matches!(u.scheme(), "http" | "https"),
        Err(_) => false,
    }
}

/// Decodes just enough of the payload to learn its format and dimensions.
fn probe(bytes: &[u8]) -> Result<(String, u32, u32), StoreError> {
    let format = image::guess_format(bytes).map_err(|e| StoreError::UndecodableImage(e.to_string()))?;
    let reader = image::ImageReader::with_format(std::io::Cursor::new(bytes), format);
    let (width, height) = reader
        .into_dimensions()
        .map_err(|e| StoreError::UndecodableImage(e.to_string()))?;
    if width == 0 || height == 0 {
        return Err(StoreError::UndecodableImage("zero-sized image".into()));
    }
    Ok((format.to_mime_type().to_string(), width, height))
}

impl AssetStore {
    /// Opens (or creates) a store rooted at `root`, replaying its index.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(root.join("blobs"))?;
        let meta_path = root.join("store.json");
        if meta_path.exists() {
            let meta: StoreMetadata = serde_json::from_slice(&fs::read(&meta_path)?)
                .map_err(|e| StoreError::CorruptIndex(e.to_string()))?;
            if meta.digest != DIGEST_ALGORITHM {
                return Err(StoreError::DigestMismatch { found: meta.digest });
            }
        } else {
            let meta = StoreMetadata {
                digest: DIGEST_ALGORITHM.to_string(),
                version: LAYOUT_VERSION,
            };
            fs::write(&meta_path, serde_json::to_vec_pretty(&meta).expect("metadata serializes"))?;
        }

        let mut inner = Inner::default();
        for record in read_jsonl::<AssetMeta>(&root.join("index.jsonl"))? {
            inner.hash_index.insert(record.content_hash.clone(), record.uid.clone());
            inner.entries.insert(record.uid.clone(), record);
        }
        for alias in read_jsonl::<AliasRecord>(&root.join("aliases.jsonl"))? {
            if !inner.entries.contains_key(&alias.canonical) {
                return Err(StoreError::CorruptIndex(format!(
                    "alias {} points at unknown uid {}",
                    alias.alias, alias.canonical
                )));
            }
            inner.aliases.insert(alias.alias, alias.canonical);
        }
        Ok(Self {
            root,
            max_bytes: DEFAULT_MAX_ASSET_BYTES,
            inner: RwLock::new(inner),
        })
    }

    pub fn with_max_bytes(mut self, max_bytes: usize) -> Self {
        self.max_bytes = max_bytes;
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Registers a retrieved image. A well-formed `source_url` becomes the id.
    pub fn register_asset(
        &self,
        bytes: &[u8],
        source_url: Option<&str>,
        caption: Option<&str>,
    ) -> Result<AssetId, StoreError> {
        self.register(bytes, source_url, caption, Provenance::Retrieved)
    }

    /// Registers the output of a visual transformation under a generated id.
    pub fn register_generated(&self, bytes: &[u8], caption: Option<&str>) -> Result<AssetId, StoreError> {
        self.register(bytes, None, caption, Provenance::Generated)
    }

    fn register(
        &self,
        bytes: &[u8],
        source_url: Option<&str>,
        caption: Option<&str>,
        provenance: Provenance,
    ) -> Result<AssetId, StoreError> {
        if bytes.len() > self.max_bytes {
            return Err(StoreError::UndecodableImage(format!(
                "payload of {} bytes exceeds the {} byte cap",
                bytes.len(),
                self.max_bytes
            )));
        }
        let (media_type, width, height) = probe(bytes)?;
        let hash = content_hash(bytes);
        let source_url = source_url.filter(|s| is_well_formed_url(s));

        let mut inner = self.inner.write();
        if let Some(existing) = inner.hash_index.get(&hash).cloned() {
            if let Some(url) = source_url {
                if url != existing.as_str() && !inner.aliases.contains_key(url) && !inner.entries.contains_key(url) {
                    append_jsonl(
                        &self.root.join("aliases.jsonl"),
                        &AliasRecord {
                            alias: url.to_string(),
                            canonical: existing.clone(),
                        },
                    )?;
                    tracing::debug!(alias = url, canonical = %existing, "recorded alias for known content");
                    inner.aliases.insert(url.to_string(), existing.clone());
                }
            }
            return Ok(existing);
        }

        // A URL already bound to other content cannot be reused as an id.
        let uid = match source_url {
            Some(url) if !inner.entries.contains_key(url) && !inner.aliases.contains_key(url) => {
                AssetId(url.to_string())
            }
            _ => AssetId::generated(&hash),
        };

        let blob = self.root.join("blobs").join(&hash);
        if !blob.exists() {
            let tmp = self.root.join("blobs").join(format!("{hash}.tmp"));
            let mut f = File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
            fs::rename(&tmp, &blob)?;
        }

        let record = AssetMeta {
            uid: uid.clone(),
            content_hash: hash.clone(),
            media_type,
            width,
            height,
            source_url: match provenance {
                Provenance::Retrieved => source_url.map(str::to_string),
                Provenance::Generated => None,
            },
            caption: caption.map(str::to_string),
            provenance,
        };
        append_jsonl(&self.root.join("index.jsonl"), &record)?;
        inner.hash_index.insert(hash, uid.clone());
        inner.entries.insert(uid.clone(), record);
        inner.remote.remove(uid.as_str());
        Ok(uid)
    }

    /// Remembers a URL surfaced by a search tool without downloading it.
    pub fn note_remote(&self, url: &str, caption: Option<&str>) {
        let mut inner = self.inner.write();
        if inner.entries.contains_key(url) || inner.aliases.contains_key(url) {
            return;
        }
        inner.remote.entry(url.to_string()).or_insert_with(|| RemoteRef {
            url: url.to_string(),
            caption: caption.map(str::to_string),
        });
    }

    pub fn remote(&self, url: &str) -> Option<RemoteRef> {
        self.inner.read().remote.get(url).cloned()
    }

    /// Canonical id for `uid`, following aliases.
    pub fn canonical(&self, uid: &str) -> Option<AssetId> {
        let inner = self.inner.read();
        if let Some((id, _)) = inner.entries.get_key_value(uid) {
            return Some(id.clone());
        }
        inner.aliases.get(uid).cloned()
    }

    pub fn contains(&self, uid: &str) -> bool {
        self.canonical(uid).is_some()
    }

    /// Registered, or at least seen in a search result.
    pub fn is_known(&self, uid: &str) -> bool {
        self.contains(uid) || self.inner.read().remote.contains_key(uid)
    }

    pub fn meta(&self, uid: &str) -> Result<AssetMeta, StoreError> {
        let inner = self.inner.read();
        let id = inner
            .entries
            .get_key_value(uid)
            .map(|(k, _)| k)
            .or_else(|| inner.aliases.get(uid))
            .ok_or_else(|| StoreError::UnknownUid(uid.to_string()))?;
        Ok(inner.entries[id].clone())
    }

    pub fn resolve(&self, uid: &str) -> Result<VisualAsset, StoreError> {
        let meta = self.meta(uid)?;
        let bytes = fs::read(self.root.join("blobs").join(&meta.content_hash))?;
        if content_hash(&bytes) != meta.content_hash {
            return Err(StoreError::CorruptBlob(meta.content_hash));
        }
        Ok(VisualAsset { meta, bytes })
    }

    pub fn aliases(&self) -> BTreeMap<String, AssetId> {
        self.inner.read().aliases.clone()
    }

    pub fn len(&self) -> usize {
        self.inner.read().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn uids(&self) -> Vec<AssetId> {
        self.inner.read().entries.keys().cloned().collect()
    }

    /// Number of distinct blobs on disk.
    pub fn blob_count(&self) -> Result<usize, StoreError> {
        Ok(fs::read_dir(self.root.join("blobs"))?
            .filter_map(Result::ok)
            .filter(|e| !e.file_name().to_string_lossy().ends_with(".tmp"))
            .count())
    }
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| StoreError::CorruptIndex(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(record);
    }
    Ok(out)
}

fn append_jsonl<T: Serialize>(path: &Path, record: &T) -> Result<(), StoreError> {
    let mut line = serde_json::to_vec(record).expect("index records serialize");
    line.push(b'\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(&line)?;
    Ok(())
}
