//! On-disk cache of EHR graphs: one N3 file per patient plus `index.json`.
//! Files are keyed by patient IRI and the registry's asset hash, so a change
//! to any rule, template or manifest invalidates old entries.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::rdf::{parse_n3, serialize_n3, Graph, N3Error};

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: corrupt index: {source}")]
    Index { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: N3Error },
    #[error(
        "the cache at {dir} holds {available} up-to-date EHR graphs but {needed} are needed; run `twostep build` first"
    )]
    Missing {
        dir: PathBuf,
        available: usize,
        needed: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CacheEntry {
    pub patient_id: String,
    pub file: String,
    pub asset_hash: String,
    pub triples: usize,
}

pub struct EhrCache {
    dir: PathBuf,
    asset_hash: String,
}

const INDEX: &str = "index.json";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CacheError + '_ {
    move |source| CacheError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Write to a sibling temporary file, then rename over the target.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CacheError> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

impl EhrCache {
    pub fn open(dir: impl Into<PathBuf>, asset_hash: impl Into<String>) -> Result<Self, CacheError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(Self {
            dir,
            asset_hash: asset_hash.into(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn file_name(&self, patient_iri: &str) -> String {
        let digest = Sha256::new()
            .chain_update(patient_iri)
            .chain_update([0])
            .chain_update(&self.asset_hash)
            .finalize();
        let hex: String = digest.iter().take(12).map(|b| format!("{b:02x}")).collect();
        format!("{hex}.n3")
    }

    /// Writes one graph; safe to call concurrently for different patients.
    pub fn put(&self, patient_id: &str, patient_iri: &str, graph: &Graph) -> Result<CacheEntry, CacheError> {
        let file = self.file_name(patient_iri);
        write_atomic(&self.dir.join(&file), serialize_n3(graph).as_bytes())?;
        Ok(CacheEntry {
            patient_id: patient_id.to_string(),
            file,
            asset_hash: self.asset_hash.clone(),
            triples: graph.len(),
        })
    }

    /// Full index, keyed by patient IRI, including stale entries.
    pub fn index(&self) -> Result<BTreeMap<String, CacheEntry>, CacheError> {
        let path = self.dir.join(INDEX);
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|source| CacheError::Index { path, source }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(BTreeMap::new()),
            Err(source) => Err(CacheError::Io { path, source }),
        }
    }

    /// Adds entries to the index and rewrites it atomically.
    pub fn record(&self, entries: impl IntoIterator<Item = (String, CacheEntry)>) -> Result<(), CacheError> {
        let mut index = self.index()?;
        index.extend(entries);
        let json = serde_json::to_string_pretty(&index).expect("index serializes");
        write_atomic(&self.dir.join(INDEX), json.as_bytes())
    }

    /// Up-to-date entries sorted by patient IRI.
    pub fn entries(&self) -> Result<Vec<(String, CacheEntry)>, CacheError> {
        Ok(self
            .index()?
            .into_iter()
            .filter(|(_, e)| e.asset_hash == self.asset_hash)
            .collect())
    }

    pub fn load(&self, entry: &CacheEntry) -> Result<Graph, CacheError> {
        let path = self.dir.join(&entry.file);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        parse_n3(&text, None)
            .map(|d| d.graph)
            .map_err(|source| CacheError::Parse { path, source })
    }

    /// The first `n` up-to-date graphs, or [`CacheError::Missing`].
    pub fn load_first(&self, n: usize) -> Result<Vec<Graph>, CacheError> {
        let entries = self.entries()?;
        if entries.len() < n {
            return Err(CacheError::Missing {
                dir: self.dir.clone(),
                available: entries.len(),
                needed: n,
            });
        }
        entries[..n].iter().map(|(_, e)| self.load(e)).collect()
    }
}
