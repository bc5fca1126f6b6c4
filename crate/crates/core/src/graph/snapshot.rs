//! Binary snapshot: magic, format version, corpus and config hashes, payload
//! length and SHA-256, then the bincode-encoded graph.

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{BuildMeta, Edge, Graph, Vertex};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CMDKGSNP";
pub const FORMAT_VERSION: u32 = 1;

const HEADER_LEN: usize = 8 + 4 + 8 + 8 + 8 + 32;

pub fn snapshot_bytes(graph: &Graph) -> Vec<u8> {
    let payload = bincode::serialize(&(&graph.meta, &graph.vertices, &graph.edges)).expect("graph serializes");
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&graph.meta.corpus_hash.to_le_bytes());
    out.extend_from_slice(&graph.meta.config_hash.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&Sha256::digest(&payload));
    out.extend_from_slice(&payload);
    out
}

pub fn snapshot_from_bytes(bytes: &[u8]) -> Result<Graph> {
    let bad = |m: &str| Error::Snapshot(m.to_string());
    if bytes.len() < HEADER_LEN {
        return Err(bad("file too short"));
    }
    if &bytes[..8] != MAGIC {
        return Err(bad("not a graph snapshot (bad magic)"));
    }
    let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Snapshot(format!("unsupported format version {version}")));
    }
    let (corpus_hash, config_hash, len) = (u64_at(12), u64_at(20), u64_at(28));
    let payload = &bytes[HEADER_LEN..];
    if payload.len() as u64 != len {
        return Err(bad("payload length mismatch"));
    }
    if Sha256::digest(payload).as_slice() != &bytes[36..HEADER_LEN] {
        return Err(bad("checksum mismatch"));
    }
    let (meta, vertices, edges): (BuildMeta, Vec<Vertex>, Vec<Edge>) =
        bincode::deserialize(payload).map_err(|e| Error::Snapshot(format!("payload: {e}")))?;
    if meta.corpus_hash != corpus_hash || meta.config_hash != config_hash {
        return Err(bad("header hashes disagree with payload"));
    }
    Graph::from_parts(vertices, edges, meta).map_err(|e| Error::Snapshot(e.to_string()))
}

/// Writes the snapshot next to `path` and renames it into place.
pub fn snapshot_save(graph: &Graph, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&snapshot_bytes(graph))?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn snapshot_load(path: &Path) -> Result<Graph> {
    snapshot_from_bytes(&fs::read(path)?)
}
