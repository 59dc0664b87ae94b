//! Feature-map cache keyed by `(video_id, backend_id, stride, hws)`.
//!
//! One file per entry: a small header followed by row-major little-endian
//! f32 values. Writes go through a temp file and rename, so readers never
//! see a half-written entry. A file that fails to decode is reported as a
//! miss with a warning and gets recomputed.

use std::path::{Path, PathBuf};

use super::{FeatureMap, Stream};
use crate::error::{Error, Result};
use crate::io::write_atomic;

const MAGIC: &[u8; 4] = b"ADFM";
const VERSION: u16 = 1;
const DTYPE_F32: u8 = 0;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub video_id: String,
    pub backend_id: String,
    pub stride: usize,
    pub hws: usize,
}

impl CacheKey {
    pub fn new(video_id: &str, backend_id: &str, stride: usize, hws: usize) -> Self {
        Self {
            video_id: video_id.to_string(),
            backend_id: backend_id.to_string(),
            stride,
            hws,
        }
    }

    fn file_name(&self) -> String {
        format!(
            "{}__{}__s{}_h{}.fmap",
            escape(&self.video_id),
            escape(&self.backend_id),
            self.stride,
            self.hws
        )
    }
}

/// Filename-safe, injective: anything outside `[A-Za-z0-9.-]` becomes `_XX`.
fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || b == b'.' || b == b'-' {
            out.push(b as char);
        } else {
            out.push_str(&format!("_{b:02x}"));
        }
    }
    out
}

#[derive(Debug)]
pub enum CacheLookup {
    Hit(FeatureMap),
    Miss { warning: Option<String> },
}

#[derive(Debug, Clone)]
pub struct FeatureCache {
    dir: PathBuf,
}

impl FeatureCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(key.file_name())
    }

    pub fn put(&self, key: &CacheKey, fm: &FeatureMap) -> Result<()> {
        if fm.backend_id != key.backend_id {
            return Err(Error::invalid(format!(
                "feature map from `{}` stored under backend `{}`",
                fm.backend_id, key.backend_id
            )));
        }
        write_atomic(&self.path_for(key), &encode(key, fm))
    }

    pub fn get(&self, key: &CacheKey) -> Result<CacheLookup> {
        let path = self.path_for(key);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Ok(CacheLookup::Miss { warning: None })
            }
            Err(e) => return Err(Error::io(&path, e)),
        };
        match decode(key, &bytes) {
            Ok(fm) => Ok(CacheLookup::Hit(fm)),
            Err(why) => {
                let warning = format!("ignoring corrupt cache entry {}: {why}", path.display());
                log::warn!("{warning}");
                Ok(CacheLookup::Miss {
                    warning: Some(warning),
                })
            }
        }
    }
}

fn encode(key: &CacheKey, fm: &FeatureMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + fm.values.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(match fm.stream {
        Stream::Visual => 0,
        Stream::Audio => 1,
    });
    out.push(DTYPE_F32);
    out.extend_from_slice(&(fm.num_clips as u32).to_le_bytes());
    out.extend_from_slice(&(fm.dim as u32).to_le_bytes());
    out.extend_from_slice(&(key.stride as u32).to_le_bytes());
    out.extend_from_slice(&(key.hws as u32).to_le_bytes());
    for s in [&key.video_id, &fm.backend_id] {
        out.extend_from_slice(&(s.len() as u16).to_le_bytes());
        out.extend_from_slice(s.as_bytes());
    }
    for v in &fm.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        if self.buf.len() < n {
            return Err("truncated".into());
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u16(&mut self) -> Result<u16, String> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<usize, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn string(&mut self) -> Result<String, String> {
        let n = self.u16()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| "bad utf-8".to_string())
    }
}

fn decode(key: &CacheKey, bytes: &[u8]) -> Result<FeatureMap, String> {
    let mut r = Reader { buf: bytes };
    if r.take(4)? != MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let stream = match r.take(1)?[0] {
        0 => Stream::Visual,
        1 => Stream::Audio,
        s => return Err(format!("bad stream tag {s}")),
    };
    if r.take(1)?[0] != DTYPE_F32 {
        return Err("unsupported dtype".into());
    }
    let (rows, cols, stride, hws) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
    let (video_id, backend_id) = (r.string()?, r.string()?);
    if video_id != key.video_id || backend_id != key.backend_id || stride != key.stride || hws != key.hws
    {
        return Err("header does not match its key".into());
    }
    let n = rows.checked_mul(cols).ok_or("shape overflow")?;
    if r.buf.len() != n * 4 {
        return Err(format!("expected {} value bytes, found {}", n * 4, r.buf.len()));
    }
    let values = r
        .buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureMap::new(stream, backend_id, rows, cols, values).map_err(|e| e.to_string())
}
