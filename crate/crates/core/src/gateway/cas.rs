//! Content-addressed storage for process documents.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::canonical::Digest;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CasError {
    #[error("no document {0}")]
    NotFound(Digest),
    #[error("malformed content id `{0}`")]
    MalformedCid(String),
    #[error("storage failure: {0}")]
    Io(String),
}

impl CasError {
    pub fn code(&self) -> &'static str {
        match self {
            CasError::NotFound(_) => "NotFound",
            CasError::MalformedCid(_) => "MalformedCid",
            CasError::Io(_) => "StorageError",
        }
    }
}

impl From<io::Error> for CasError {
    fn from(e: io::Error) -> Self {
        CasError::Io(e.to_string())
    }
}

pub fn parse_cid(s: &str) -> Result<Digest, CasError> {
    s.parse().map_err(|_| CasError::MalformedCid(s.to_string()))
}

/// Stores bytes under their SHA-256. `get` returns what is stored, unverified,
/// so callers can detect corruption by re-hashing.
pub trait ContentStore: Send + Sync {
    fn put(&self, bytes: &[u8]) -> Result<Digest, CasError>;
    fn get(&self, cid: &Digest) -> Result<Vec<u8>, CasError>;

    fn contains(&self, cid: &Digest) -> bool {
        self.get(cid).is_ok()
    }
}

#[derive(Debug, Default)]
pub struct MemoryCas {
    items: Mutex<BTreeMap<Digest, Vec<u8>>>,
}

impl MemoryCas {
    pub fn new() -> Self {
        Self::default()
    }

    /// Overwrite stored bytes without rehashing. Test hook for tamper checks.
    pub fn corrupt(&self, cid: &Digest, bytes: Vec<u8>) {
        self.items.lock().expect("cas lock").insert(*cid, bytes);
    }
}

impl ContentStore for MemoryCas {
    fn put(&self, bytes: &[u8]) -> Result<Digest, CasError> {
        let cid = Digest::of(bytes);
        self.items.lock().expect("cas lock").insert(cid, bytes.to_vec());
        Ok(cid)
    }

    fn get(&self, cid: &Digest) -> Result<Vec<u8>, CasError> {
        self.items.lock().expect("cas lock").get(cid).cloned().ok_or(CasError::NotFound(*cid))
    }
}

/// One file per document, named by the digest's hex.
#[derive(Debug, Clone)]
pub struct DirCas {
    root: PathBuf,
}

impl DirCas {
    pub fn open(root: impl AsRef<Path>) -> Result<Self, CasError> {
        fs::create_dir_all(root.as_ref())?;
        Ok(DirCas { root: root.as_ref().to_path_buf() })
    }

    pub fn path_of(&self, cid: &Digest) -> PathBuf {
        self.root.join(cid.hex())
    }
}

impl ContentStore for DirCas {
    fn put(&self, bytes: &[u8]) -> Result<Digest, CasError> {
        let cid = Digest::of(bytes);
        let path = self.path_of(&cid);
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &path)?;
        Ok(cid)
    }

    fn get(&self, cid: &Digest) -> Result<Vec<u8>, CasError> {
        match fs::read(self.path_of(cid)) {
            Ok(b) => Ok(b),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Err(CasError::NotFound(*cid)),
            Err(e) => Err(e.into()),
        }
    }
}
