//! Decoded video access.
//!
//! Everything downstream works on an in-memory [`Video`]: 8-bit grayscale
//! frames plus an optional mono PCM track. Two loaders exist:
//!
//! * the `.rav` raw container, a trivial uncompressed format used for
//!   fixtures and for videos pre-decoded by an external tool;
//! * any other extension, decoded by spawning `ffmpeg`/`ffprobe`.

use std::fs;
use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};

use crate::error::{Error, Result};

const RAV_MAGIC: &[u8; 4] = b"RAVV";
const RAV_VERSION: u16 = 1;

/// Sample rate used when decoding audio through ffmpeg.
pub const DECODE_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), width * height, "frame buffer size");
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn black(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![0; width * height])
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioTrack {
    pub sample_rate: u32,
    pub samples: Vec<f32>,
}

impl AudioTrack {
    /// Samples covering `[start_s, end_s)`, clamped to the track.
    pub fn span(&self, start_s: f64, end_s: f64) -> &[f32] {
        let sr = self.sample_rate as f64;
        let n = self.samples.len();
        let a = ((start_s * sr).round().max(0.0) as usize).min(n);
        let b = ((end_s * sr).round().max(0.0) as usize).clamp(a, n);
        &self.samples[a..b]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VideoInfo {
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub fps: f64,
}

/// Random access to frames of one video.
pub trait FrameSource {
    fn info(&self) -> VideoInfo;
    fn frame(&self, index: usize) -> Result<GrayFrame>;
}

/// A fully decoded video.
#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    info: VideoInfo,
    frames: Vec<u8>,
    audio: Option<AudioTrack>,
}

impl Video {
    pub fn from_frames(fps: f64, frames: Vec<GrayFrame>, audio: Option<AudioTrack>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::invalid("video has no frames"))?;
        let (width, height) = (first.width, first.height);
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::invalid(format!("fps must be positive, got {fps}")));
        }
        let mut buf = Vec::with_capacity(width * height * frames.len());
        for f in &frames {
            if f.width != width || f.height != height {
                return Err(Error::invalid("frames of differing size"));
            }
            buf.extend_from_slice(&f.pixels);
        }
        Ok(Self {
            info: VideoInfo {
                width,
                height,
                frame_count: frames.len(),
                fps,
            },
            frames: buf,
            audio,
        })
    }

    pub fn audio(&self) -> Option<&AudioTrack> {
        self.audio.as_ref()
    }

    pub fn frame_slice(&self, index: usize) -> &[u8] {
        let sz = self.info.width * self.info.height;
        &self.frames[index * sz..(index + 1) * sz]
    }

    /// Open a video by extension: `.rav` natively, anything else via ffmpeg.
    pub fn open(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        match path.extension().and_then(|e| e.to_str()) {
            Some("rav") => read_rav(path),
            _ => decode_with_ffmpeg(path),
        }
    }

    pub fn write_rav(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(self.frames.len() + 64);
        out.extend_from_slice(RAV_MAGIC);
        out.extend_from_slice(&RAV_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.info.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.info.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.info.frame_count as u32).to_le_bytes());
        out.extend_from_slice(&self.info.fps.to_le_bytes());
        let (sr, samples): (u32, &[f32]) = match &self.audio {
            Some(a) => (a.sample_rate, &a.samples),
            None => (0, &[]),
        };
        out.extend_from_slice(&sr.to_le_bytes());
        out.extend_from_slice(&(samples.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.frames);
        for s in samples {
            out.extend_from_slice(&s.to_le_bytes());
        }
        crate::io::write_atomic(path, &out)
    }

    /// Resample to `target_fps` by frame dropping/duplication. Output frame `i`
    /// shows source frame `floor(i * src / dst)`; audio is untouched.
    pub fn resample_fps(&self, target_fps: f64) -> Video {
        let src = self.info.fps;
        let n_out = resampled_frame_count(self.info.frame_count, src, target_fps);
        let sz = self.info.width * self.info.height;
        let mut frames = Vec::with_capacity(n_out * sz);
        for i in 0..n_out {
            let j = resample_source_index(i, src, target_fps, self.info.frame_count);
            frames.extend_from_slice(self.frame_slice(j));
        }
        Video {
            info: VideoInfo {
                frame_count: n_out,
                fps: target_fps,
                ..self.info
            },
            frames,
            audio: self.audio.clone(),
        }
    }
}

impl FrameSource for Video {
    fn info(&self) -> VideoInfo {
        self.info
    }

    fn frame(&self, index: usize) -> Result<GrayFrame> {
        if index >= self.info.frame_count {
            return Err(Error::invalid(format!(
                "frame {index} out of range (frame count {})",
                self.info.frame_count
            )));
        }
        Ok(GrayFrame::new(
            self.info.width,
            self.info.height,
            self.frame_slice(index).to_vec(),
        ))
    }
}

pub fn resampled_frame_count(frame_count: usize, src_fps: f64, dst_fps: f64) -> usize {
    ((frame_count as f64 * dst_fps / src_fps).round() as usize).max(1)
}

pub fn resample_source_index(i: usize, src_fps: f64, dst_fps: f64, src_count: usize) -> usize {
    ((i as f64 * src_fps / dst_fps + 1e-9).floor() as usize).min(src_count - 1)
}

/// Carry per-frame boundary probabilities onto a resampled timeline. Output
/// frame `i` takes the max over the source frames it stands in for, so a
/// source shot end lands on the last output frame showing that shot.
pub fn resample_probabilities(probs: &[f64], src_fps: f64, dst_fps: f64) -> Vec<f64> {
    let n_src = probs.len();
    if n_src == 0 {
        return Vec::new();
    }
    let n_out = resampled_frame_count(n_src, src_fps, dst_fps);
    (0..n_out)
        .map(|i| {
            let a = resample_source_index(i, src_fps, dst_fps, n_src);
            let b = if i + 1 == n_out {
                n_src
            } else {
                resample_source_index(i + 1, src_fps, dst_fps, n_src)
            };
            probs[a..b.max(a)].iter().copied().fold(0.0, f64::max)
        })
        .collect()
}

fn read_rav(path: &Path) -> Result<Video> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let what = path.display().to_string();
    let mut cur = Cursor {
        buf: &bytes,
        pos: 0,
        what: &what,
    };
    if cur.take(4)? != RAV_MAGIC {
        return Err(Error::parse(what, "bad magic"));
    }
    let version = u16::from_le_bytes(cur.take(2)?.try_into().unwrap());
    if version != RAV_VERSION {
        return Err(Error::parse(what, format!("unsupported version {version}")));
    }
    let width = cur.u32()? as usize;
    let height = cur.u32()? as usize;
    let frame_count = cur.u32()? as usize;
    let fps = f64::from_le_bytes(cur.take(8)?.try_into().unwrap());
    let sample_rate = cur.u32()?;
    let audio_len = u64::from_le_bytes(cur.take(8)?.try_into().unwrap()) as usize;
    if width == 0 || height == 0 || frame_count == 0 || !(fps > 0.0) {
        return Err(Error::parse(what, "degenerate header"));
    }
    let frames = cur.take(width * height * frame_count)?.to_vec();
    let audio = if sample_rate > 0 {
        let raw = cur.take(audio_len * 4)?;
        let samples = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Some(AudioTrack {
            sample_rate,
            samples,
        })
    } else {
        None
    };
    Ok(Video {
        info: VideoInfo {
            width,
            height,
            frame_count,
            fps,
        },
        frames,
        audio,
    })
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'a str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::parse(self.what, "truncated file"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn run_tool(tool: &str, args: &[&str]) -> Result<Vec<u8>> {
    let out = Command::new(tool)
        .args(args)
        .stdin(Stdio::null())
        .output()
        .map_err(|e| Error::ToolMissing {
            tool: tool.to_string(),
            reason: e.to_string(),
        })?;
    if !out.status.success() {
        return Err(Error::ToolFailed {
            tool: tool.to_string(),
            message: String::from_utf8_lossy(&out.stderr).trim().to_string(),
        });
    }
    Ok(out.stdout)
}

fn parse_rate(r: &str) -> Option<f64> {
    match r.split_once('/') {
        Some((n, d)) => {
            let (n, d): (f64, f64) = (n.parse().ok()?, d.parse().ok()?);
            (d != 0.0).then(|| n / d)
        }
        None => r.parse().ok(),
    }
}

fn decode_with_ffmpeg(path: &Path) -> Result<Video> {
    let p = path.to_string_lossy();
    let probe = run_tool(
        "ffprobe",
        &[
            "-v",
            "error",
            "-select_streams",
            "v:0",
            "-show_entries",
            "stream=width,height,r_frame_rate",
            "-of",
            "json",
            &p,
        ],
    )?;
    let v: serde_json::Value =
        serde_json::from_slice(&probe).map_err(|e| Error::parse("ffprobe output", e))?;
    let stream = &v["streams"][0];
    let width = stream["width"].as_u64().unwrap_or(0) as usize;
    let height = stream["height"].as_u64().unwrap_or(0) as usize;
    let fps = stream["r_frame_rate"]
        .as_str()
        .and_then(parse_rate)
        .unwrap_or(0.0);
    if width == 0 || height == 0 || fps <= 0.0 {
        return Err(Error::parse(p.to_string(), "no decodable video stream"));
    }
    let raw = run_tool(
        "ffmpeg",
        &["-v", "error", "-i", &p, "-f", "rawvideo", "-pix_fmt", "gray", "-"],
    )?;
    let sz = width * height;
    if raw.is_empty() || raw.len() % sz != 0 {
        return Err(Error::parse(p.to_string(), "decoded frame data has unexpected size"));
    }
    let frame_count = raw.len() / sz;
    let sr = DECODE_SAMPLE_RATE.to_string();
    // Missing audio stream is not an error; callers substitute silence.
    let audio = run_tool(
        "ffmpeg",
        &["-v", "error", "-i", &p, "-vn", "-ac", "1", "-ar", &sr, "-f", "f32le", "-"],
    )
    .ok()
    .filter(|b| !b.is_empty())
    .map(|b| AudioTrack {
        sample_rate: DECODE_SAMPLE_RATE,
        samples: b
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    });
    Ok(Video {
        info: VideoInfo {
            width,
            height,
            frame_count,
            fps,
        },
        frames: raw,
        audio,
    })
}
