//! JSON manifest: a list of pairs, each with both videos' shot lists and the
//! optional `[short_id, long_id, similarity]` mapping. Frame indices are
//! 0-based and inclusive; video paths are relative to the manifest.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{shots_from_ranges, AdPair, MappingEntry, ShotMapping, VideoRef, VideoSide};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct RawVideo {
    video_id: String,
    file: PathBuf,
    fps: f64,
    frame_count: usize,
    shots: Vec<(usize, usize)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawPair {
    pair_id: String,
    long: RawVideo,
    short: RawVideo,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mapping: Option<Vec<(usize, usize, f64)>>,
}

impl From<RawVideo> for VideoSide {
    fn from(r: RawVideo) -> Self {
        VideoSide {
            shots: shots_from_ranges(&r.shots),
            video: VideoRef {
                video_id: r.video_id,
                file: r.file,
                fps: r.fps,
                frame_count: r.frame_count,
            },
        }
    }
}

impl From<&VideoSide> for RawVideo {
    fn from(v: &VideoSide) -> Self {
        RawVideo {
            video_id: v.video.video_id.clone(),
            file: v.video.file.clone(),
            fps: v.video.fps,
            frame_count: v.video.frame_count,
            shots: v.shots.iter().map(|s| (s.start_frame, s.end_frame)).collect(),
        }
    }
}

/// A loaded manifest; relative video paths resolve against `base_dir`.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub base_dir: PathBuf,
    pub pairs: Vec<AdPair>,
}

impl Manifest {
    pub fn video_path(&self, video: &VideoRef) -> PathBuf {
        self.base_dir.join(&video.file)
    }

    pub fn pair(&self, pair_id: &str) -> Option<&AdPair> {
        self.pairs.iter().find(|p| p.pair_id == pair_id)
    }
}

/// Parse and validate manifest text without touching the filesystem.
pub fn parse_manifest(text: &str, what: &str) -> Result<Vec<AdPair>> {
    let raw: Vec<RawPair> = serde_json::from_str(text).map_err(|e| Error::parse(what, e))?;
    let mut seen = HashSet::new();
    let mut pairs = Vec::with_capacity(raw.len());
    for r in raw {
        if !seen.insert(r.pair_id.clone()) {
            return Err(Error::parse(what, format!("duplicate pair_id `{}`", r.pair_id)));
        }
        for v in [&r.long, &r.short] {
            if !(v.fps > 0.0 && v.fps.is_finite()) {
                return Err(Error::parse(what, format!("{}: bad fps {}", v.video_id, v.fps)));
            }
        }
        let pair = AdPair {
            pair_id: r.pair_id,
            long: r.long.into(),
            short: r.short.into(),
            mapping: r.mapping.map(|m| ShotMapping {
                entries: m
                    .into_iter()
                    .map(|(short_shot, long_shot, similarity)| MappingEntry {
                        short_shot,
                        long_shot,
                        similarity,
                    })
                    .collect(),
            }),
        };
        pair.validate()?;
        pairs.push(pair);
    }
    Ok(pairs)
}

/// Load, validate, and check that every referenced video file exists.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let pairs = parse_manifest(&text, &path.display().to_string())?;
    let manifest = Manifest {
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        pairs,
    };
    for p in &manifest.pairs {
        for v in [&p.long.video, &p.short.video] {
            let file = manifest.video_path(v);
            if !file.exists() {
                return Err(Error::MissingFile(file));
            }
        }
    }
    Ok(manifest)
}

pub fn manifest_to_string(pairs: &[AdPair]) -> String {
    let raw: Vec<RawPair> = pairs
        .iter()
        .map(|p| RawPair {
            pair_id: p.pair_id.clone(),
            long: (&p.long).into(),
            short: (&p.short).into(),
            mapping: p.mapping.as_ref().map(|m| {
                m.entries
                    .iter()
                    .map(|e| (e.short_shot, e.long_shot, e.similarity))
                    .collect()
            }),
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&raw).expect("manifest serializes");
    s.push('\n');
    s
}

/// Write atomically so a failed run never leaves a partial manifest.
pub fn save_manifest(path: &Path, pairs: &[AdPair]) -> Result<()> {
    crate::io::write_atomic(path, manifest_to_string(pairs).as_bytes())
}
