//! Persistent exact-match score cache.
//!
//! File layout: the 8-byte magic `BCSCACHE`, a little-endian u32 format
//! version, then records. Each record is
//!
//! ```text
//! u32 payload_len | payload | sha256(payload) (32 bytes)
//! payload = field(backend_id) | sha256(context) | sha256(continuation)
//!         | field(temperature) | field(context) | field(continuation)
//!         | field(response_json)
//! field   = u32 len | bytes
//! ```
//!
//! All lengths are little-endian u32. Temperatures are rendered as shortest
//! round-trip decimals. Records are appended with a single write; on open,
//! a truncated tail or a record failing its checksum, its request hashes, or
//! the result invariants is dropped with a warning and the file is rewritten
//! without it.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use sha2::{Digest, Sha256};

use super::{score, BackendError, ModelBackend, ScoreRequest, ScoreResult};

const MAGIC: &[u8; 8] = b"BCSCACHE";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub backend_id: String,
    pub context_sha: [u8; 32],
    pub continuation_sha: [u8; 32],
    pub temperature: String,
}

fn sha(bytes: &[u8]) -> [u8; 32] {
    let mut out = [0u8; 32];
    out.copy_from_slice(&Sha256::digest(bytes));
    out
}

impl CacheKey {
    pub fn new(backend_id: &str, request: &ScoreRequest) -> Self {
        Self {
            backend_id: backend_id.to_string(),
            context_sha: sha(request.context.as_bytes()),
            continuation_sha: sha(request.continuation.as_bytes()),
            temperature: format!("{}", request.temperature),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub entries: usize,
    pub hits: u64,
    pub misses: u64,
    /// Records dropped while opening the store.
    pub evicted: u64,
}

pub struct CacheStore {
    path: PathBuf,
    file: Mutex<File>,
    index: RwLock<HashMap<CacheKey, ScoreResult>>,
    hits: AtomicU64,
    misses: AtomicU64,
    evicted: u64,
}

fn put_field(buf: &mut Vec<u8>, bytes: &[u8]) {
    buf.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    buf.extend_from_slice(bytes);
}

fn encode_record(key: &CacheKey, request: &ScoreRequest, result: &ScoreResult) -> Vec<u8> {
    let mut payload = Vec::new();
    put_field(&mut payload, key.backend_id.as_bytes());
    payload.extend_from_slice(&key.context_sha);
    payload.extend_from_slice(&key.continuation_sha);
    put_field(&mut payload, key.temperature.as_bytes());
    put_field(&mut payload, request.context.as_bytes());
    put_field(&mut payload, request.continuation.as_bytes());
    put_field(&mut payload, result.to_json().as_bytes());

    let mut rec = Vec::with_capacity(payload.len() + 36);
    rec.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    rec.extend_from_slice(&payload);
    rec.extend_from_slice(&sha(&payload));
    rec
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.buf.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u32(&mut self) -> Option<usize> {
        let b = self.take(4)?;
        Some(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn field(&mut self) -> Option<&'a [u8]> {
        let n = self.u32()?;
        self.take(n)
    }

    fn hash(&mut self) -> Option<[u8; 32]> {
        let mut h = [0u8; 32];
        h.copy_from_slice(self.take(32)?);
        Some(h)
    }
}

fn decode_payload(payload: &[u8]) -> Result<(CacheKey, ScoreResult), String> {
    let mut r = Reader {
        buf: payload,
        pos: 0,
    };
    let truncated = || "truncated field".to_string();
    let utf8 = |b: &[u8]| String::from_utf8(b.to_vec()).map_err(|e| e.to_string());
    let backend_id = utf8(r.field().ok_or_else(truncated)?)?;
    let context_sha = r.hash().ok_or_else(truncated)?;
    let continuation_sha = r.hash().ok_or_else(truncated)?;
    let temperature = utf8(r.field().ok_or_else(truncated)?)?;
    let context = r.field().ok_or_else(truncated)?;
    let continuation = r.field().ok_or_else(truncated)?;
    let response = utf8(r.field().ok_or_else(truncated)?)?;
    if r.pos != payload.len() {
        return Err("trailing bytes in payload".into());
    }
    if sha(context) != context_sha || sha(continuation) != continuation_sha {
        return Err("stored request does not match its key".into());
    }
    let result = ScoreResult::from_json(&response).map_err(|e| e.to_string())?;
    Ok((
        CacheKey {
            backend_id,
            context_sha,
            continuation_sha,
            temperature,
        },
        result,
    ))
}

fn store_err(e: impl std::fmt::Display) -> BackendError {
    BackendError::Store(e.to_string())
}

impl CacheStore {
    /// Open or create the cache file at `path`.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref().to_path_buf();
        let mut bytes = Vec::new();
        if path.exists() {
            File::open(&path)
                .and_then(|mut f| f.read_to_end(&mut bytes))
                .map_err(store_err)?;
        }

        let mut index = HashMap::new();
        let mut good_records: Vec<&[u8]> = Vec::new();
        let mut evicted = 0u64;
        let mut rewrite = false;

        if bytes.is_empty() {
            rewrite = true;
        } else if bytes.len() < HEADER_LEN
            || &bytes[..8] != MAGIC
            || bytes[8..12] != VERSION.to_le_bytes()
        {
            log::warn!(
                "{}: not a score cache (bad header); starting empty",
                path.display()
            );
            rewrite = true;
        } else {
            let mut pos = HEADER_LEN;
            while pos < bytes.len() {
                let mut r = Reader { buf: &bytes, pos };
                let Some(len) = r.u32() else {
                    log::warn!(
                        "{}: truncated record at byte {pos}; dropping tail",
                        path.display()
                    );
                    evicted += 1;
                    rewrite = true;
                    break;
                };
                let (Some(payload), Some(check)) = (r.take(len), r.take(32)) else {
                    log::warn!(
                        "{}: truncated record at byte {pos}; dropping tail",
                        path.display()
                    );
                    evicted += 1;
                    rewrite = true;
                    break;
                };
                let record = &bytes[pos..r.pos];
                pos = r.pos;
                if sha(payload) != check {
                    log::warn!("{}: checksum mismatch; evicting entry", path.display());
                    evicted += 1;
                    rewrite = true;
                    continue;
                }
                match decode_payload(payload) {
                    Ok((key, result)) => {
                        index.insert(key, result);
                        good_records.push(record);
                    }
                    Err(e) => {
                        log::warn!("{}: corrupt entry ({e}); evicting", path.display());
                        evicted += 1;
                        rewrite = true;
                    }
                }
            }
        }

        if rewrite {
            let dir = path
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or(Path::new("."));
            std::fs::create_dir_all(dir).map_err(store_err)?;
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(store_err)?;
            tmp.write_all(MAGIC).map_err(store_err)?;
            tmp.write_all(&VERSION.to_le_bytes()).map_err(store_err)?;
            for rec in &good_records {
                tmp.write_all(rec).map_err(store_err)?;
            }
            tmp.as_file().sync_all().map_err(store_err)?;
            tmp.persist(&path).map_err(store_err)?;
        }

        let file = OpenOptions::new()
            .read(true)
            .append(true)
            .open(&path)
            .map_err(store_err)?;
        Ok(Self {
            path,
            file: Mutex::new(file),
            index: RwLock::new(index),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            evicted,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, key: &CacheKey) -> Option<ScoreResult> {
        self.index
            .read()
            .expect("cache index lock")
            .get(key)
            .cloned()
    }

    pub fn insert(
        &self,
        key: CacheKey,
        request: &ScoreRequest,
        result: &ScoreResult,
    ) -> Result<(), BackendError> {
        let rec = encode_record(&key, request, result);
        {
            let mut f = self.file.lock().expect("cache file lock");
            let before = f.seek(SeekFrom::End(0)).map_err(store_err)?;
            if let Err(e) = f.write_all(&rec).and_then(|_| f.flush()) {
                // roll back a partial append so earlier records stay readable
                let _ = f.set_len(before);
                return Err(store_err(e));
            }
        }
        self.index
            .write()
            .expect("cache index lock")
            .insert(key, result.clone());
        Ok(())
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            entries: self.index.read().expect("cache index lock").len(),
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            evicted: self.evicted,
        }
    }
}

/// `inner` behind a [`CacheStore`]. Hits never reach `inner`.
pub struct Cached<B> {
    inner: B,
    store: Arc<CacheStore>,
}

impl<B: ModelBackend> Cached<B> {
    pub fn new(inner: B, store: Arc<CacheStore>) -> Self {
        Self { inner, store }
    }

    pub fn store(&self) -> &CacheStore {
        &self.store
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: ModelBackend> ModelBackend for Cached<B> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn supports_temperature(&self, temperature: f64) -> bool {
        self.inner.supports_temperature(temperature)
    }

    fn score(&self, request: &ScoreRequest) -> Result<ScoreResult, BackendError> {
        let key = CacheKey::new(self.inner.id(), request);
        if let Some(hit) = self.store.get(&key) {
            self.store.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit);
        }
        self.store.misses.fetch_add(1, Ordering::Relaxed);
        let result = score(&self.inner, request)?;
        self.store.insert(key, request, &result)?;
        Ok(result)
    }
}
