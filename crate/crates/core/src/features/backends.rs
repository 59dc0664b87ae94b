//! Embedding backends, selected by string id.
//!
//! Synthetic backends are pure functions of clip content and carry their
//! dimension in the id. `pixel-proj-D` / `spectrum-proj-D` (and the per-frame
//! `frame-pixel-proj-D`) behave like learned encoders statistically: a fixed
//! seeded random projection of a clip thumbnail or log spectrum, layer
//! normalised to zero mean and unit RMS. `mean-pixel-D`, `frame-mean-pixel-D`
//! and `rms-bands-D` are raw, interpretable descriptors in [0,1] / RMS units. The reference encoders are listed with their 1024-d
//! output but are not run in-process: their feature maps must be written into
//! the feature cache by an external extractor, and asking this crate to
//! compute them is a load error.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{EmbeddingBackendSpec, Stream};
use crate::error::{Error, Result};
use crate::media::GrayFrame;

/// Clip-level video encoder with its default pooled output.
pub const REFERENCE_VISUAL: &str = "swin3d-b-pooled";
/// Speech encoder, mean-pooled over time.
pub const REFERENCE_AUDIO: &str = "w2v-bert-2.0-meanpool";
/// Frame-level image encoder used by the averaged 2D baseline.
pub const REFERENCE_FRAME_2D: &str = "googlenet-pool5";
const REFERENCE_DIM: usize = 1024;

pub trait ClipEmbedder {
    fn spec(&self) -> &EmbeddingBackendSpec;
    fn embed_clip(&mut self, frames: &[GrayFrame]) -> Result<Vec<f32>>;
}

pub trait FrameEmbedder {
    fn spec(&self) -> &EmbeddingBackendSpec;
    fn embed_frame(&mut self, frame: &GrayFrame) -> Result<Vec<f32>>;
}

pub trait SpanEmbedder {
    fn spec(&self) -> &EmbeddingBackendSpec;
    fn embed_span(&mut self, samples: &[f32], sample_rate: u32) -> Result<Vec<f32>>;
}

pub enum VisualBackend {
    Clip(Box<dyn ClipEmbedder>),
    Frame(Box<dyn FrameEmbedder>),
}

impl VisualBackend {
    pub fn spec(&self) -> &EmbeddingBackendSpec {
        match self {
            VisualBackend::Clip(b) => b.spec(),
            VisualBackend::Frame(b) => b.spec(),
        }
    }
}

fn synthetic_dim(id: &str, prefix: &str) -> Option<usize> {
    id.strip_prefix(prefix)?
        .strip_prefix('-')?
        .parse()
        .ok()
        .filter(|&d| d > 0)
}

/// Describe a backend id without instantiating it.
pub fn backend_spec(id: &str) -> Result<EmbeddingBackendSpec> {
    let spec = |stream, dim, frame_level| EmbeddingBackendSpec {
        backend_id: id.to_string(),
        stream,
        dim,
        deterministic: true,
        frame_level,
    };
    if let Some(d) = synthetic_dim(id, "frame-mean-pixel") {
        return Ok(spec(Stream::Visual, d, true));
    }
    if let Some(d) = synthetic_dim(id, "frame-pixel-proj") {
        return Ok(spec(Stream::Visual, d, true));
    }
    if let Some(d) = synthetic_dim(id, "pixel-proj") {
        return Ok(spec(Stream::Visual, d, false));
    }
    if let Some(d) = synthetic_dim(id, "spectrum-proj") {
        return Ok(spec(Stream::Audio, d, false));
    }
    if let Some(d) = synthetic_dim(id, "mean-pixel") {
        return Ok(spec(Stream::Visual, d, false));
    }
    if let Some(d) = synthetic_dim(id, "rms-bands") {
        return Ok(spec(Stream::Audio, d, false));
    }
    match id {
        REFERENCE_VISUAL => Ok(spec(Stream::Visual, REFERENCE_DIM, false)),
        REFERENCE_FRAME_2D => Ok(spec(Stream::Visual, REFERENCE_DIM, true)),
        REFERENCE_AUDIO => Ok(spec(Stream::Audio, REFERENCE_DIM, false)),
        _ => Err(Error::invalid(format!("unknown embedding backend `{id}`"))),
    }
}

fn unavailable(id: &str) -> Error {
    Error::BackendUnavailable {
        backend: id.to_string(),
        reason: "pretrained weights are not bundled; write its feature maps into the \
                 feature cache with an external extractor"
            .into(),
    }
}

pub fn create_visual_backend(id: &str) -> Result<VisualBackend> {
    let spec = backend_spec(id)?;
    if spec.stream != Stream::Visual {
        return Err(Error::invalid(format!("`{id}` is not a visual backend")));
    }
    if let Some(d) = synthetic_dim(id, "frame-mean-pixel") {
        return Ok(VisualBackend::Frame(Box::new(FrameMeanPixel::new(d))));
    }
    if let Some(d) = synthetic_dim(id, "frame-pixel-proj") {
        return Ok(VisualBackend::Frame(Box::new(PixelProjection::new(d, true))));
    }
    if let Some(d) = synthetic_dim(id, "pixel-proj") {
        return Ok(VisualBackend::Clip(Box::new(PixelProjection::new(d, false))));
    }
    if let Some(d) = synthetic_dim(id, "mean-pixel") {
        return Ok(VisualBackend::Clip(Box::new(MeanPixel::new(d))));
    }
    Err(unavailable(id))
}

pub fn create_audio_backend(id: &str) -> Result<Box<dyn SpanEmbedder>> {
    let spec = backend_spec(id)?;
    if spec.stream != Stream::Audio {
        return Err(Error::invalid(format!("`{id}` is not an audio backend")));
    }
    if let Some(d) = synthetic_dim(id, "spectrum-proj") {
        return Ok(Box::new(SpectrumProjection::new(d)));
    }
    match synthetic_dim(id, "rms-bands") {
        Some(d) => Ok(Box::new(RmsBands::new(d))),
        None => Err(unavailable(id)),
    }
}

/// Mean intensity (in [0,1]) of `dim` contiguous row-major pixel bands.
fn band_means(frame: &GrayFrame, dim: usize, out: &mut [f64]) -> Result<()> {
    let n = frame.pixels.len();
    if dim > n {
        return Err(Error::invalid(format!(
            "{dim} bands requested from a {n}-pixel frame"
        )));
    }
    for (b, slot) in out.iter_mut().enumerate() {
        let (lo, hi) = (b * n / dim, (b + 1) * n / dim);
        let sum: u64 = frame.pixels[lo..hi].iter().map(|&p| p as u64).sum();
        *slot += sum as f64 / ((hi - lo) as f64 * 255.0);
    }
    Ok(())
}

/// Band means pooled over every frame of the clip.
pub struct MeanPixel {
    spec: EmbeddingBackendSpec,
}

impl MeanPixel {
    pub fn new(dim: usize) -> Self {
        Self {
            spec: backend_spec(&format!("mean-pixel-{dim}")).expect("valid id"),
        }
    }
}

impl ClipEmbedder for MeanPixel {
    fn spec(&self) -> &EmbeddingBackendSpec {
        &self.spec
    }

    fn embed_clip(&mut self, frames: &[GrayFrame]) -> Result<Vec<f32>> {
        if frames.is_empty() {
            return Err(Error::invalid("empty clip"));
        }
        let mut acc = vec![0.0f64; self.spec.dim];
        for f in frames {
            band_means(f, self.spec.dim, &mut acc)?;
        }
        Ok(acc.iter().map(|v| (v / frames.len() as f64) as f32).collect())
    }
}

/// Band means of a single frame.
pub struct FrameMeanPixel {
    spec: EmbeddingBackendSpec,
}

impl FrameMeanPixel {
    pub fn new(dim: usize) -> Self {
        Self {
            spec: backend_spec(&format!("frame-mean-pixel-{dim}")).expect("valid id"),
        }
    }
}

impl FrameEmbedder for FrameMeanPixel {
    fn spec(&self) -> &EmbeddingBackendSpec {
        &self.spec
    }

    fn embed_frame(&mut self, frame: &GrayFrame) -> Result<Vec<f32>> {
        let mut acc = vec![0.0f64; self.spec.dim];
        band_means(frame, self.spec.dim, &mut acc)?;
        Ok(acc.into_iter().map(|v| v as f32).collect())
    }
}

/// RMS amplitude in `dim` equal-width frequency bands. The squared band
/// values sum to the span's mean square (Parseval), so silence maps to zero.
pub struct RmsBands {
    spec: EmbeddingBackendSpec,
    planner: FftPlanner<f64>,
    plan: Option<(usize, Arc<dyn Fft<f64>>)>,
}

impl RmsBands {
    pub fn new(dim: usize) -> Self {
        Self {
            spec: backend_spec(&format!("rms-bands-{dim}")).expect("valid id"),
            planner: FftPlanner::new(),
            plan: None,
        }
    }
}

impl SpanEmbedder for RmsBands {
    fn spec(&self) -> &EmbeddingBackendSpec {
        &self.spec
    }

    fn embed_span(&mut self, samples: &[f32], _sample_rate: u32) -> Result<Vec<f32>> {
        let dim = self.spec.dim;
        let len = samples.len();
        if len == 0 {
            return Ok(vec![0.0; dim]);
        }
        let nfft = len.max(2).next_power_of_two();
        let fft = match &self.plan {
            Some((n, f)) if *n == nfft => f.clone(),
            _ => {
                let f = self.planner.plan_fft_forward(nfft);
                self.plan = Some((nfft, f.clone()));
                f
            }
        };
        let mut buf: Vec<Complex<f64>> = samples
            .iter()
            .map(|&s| Complex::new(s as f64, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(nfft)
            .collect();
        fft.process(&mut buf);
        let half = nfft / 2;
        let norm = 2.0 / (nfft as f64 * len as f64);
        let out = (0..dim)
            .map(|b| {
                let (lo, hi) = (1 + b * half / dim, 1 + (b + 1) * half / dim);
                let power: f64 = buf[lo.min(half + 1)..hi.min(half + 1)]
                    .iter()
                    .map(|c| c.norm_sqr() * norm)
                    .sum();
                power.sqrt() as f32
            })
            .collect();
        Ok(out)
    }
}

/// Fixed `out x inp` matrix with entries uniform on +-sqrt(3 / inp), seeded by `tag`.
fn projection(tag: &str, inp: usize, out: usize) -> Vec<f32> {
    let seed = tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = (3.0 / inp as f64).sqrt();
    (0..inp * out).map(|_| rng.gen_range(-a..a) as f32).collect()
}

fn project(matrix: &[f32], x: &[f64], out: usize) -> Vec<f64> {
    (0..out)
        .map(|r| {
            matrix[r * x.len()..(r + 1) * x.len()]
                .iter()
                .zip(x)
                .map(|(&w, &v)| w as f64 * v)
                .sum()
        })
        .collect()
}

/// Zero mean, unit RMS; a constant vector maps to zeros.
fn layer_norm(v: &[f64]) -> Vec<f32> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let rms = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
    if rms < 1e-12 {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| ((x - mean) / rms) as f32).collect()
}

const THUMB_W: usize = 16;
const THUMB_H: usize = 12;

/// Block means over a `THUMB_W x THUMB_H` grid, in [0,1].
fn thumbnail(frame: &GrayFrame, out: &mut [f64]) -> Result<()> {
    let (w, h) = (frame.width, frame.height);
    if w < THUMB_W || h < THUMB_H {
        return Err(Error::invalid(format!(
            "frame {w}x{h} is smaller than the {THUMB_W}x{THUMB_H} thumbnail"
        )));
    }
    for by in 0..THUMB_H {
        let (y0, y1) = (by * h / THUMB_H, (by + 1) * h / THUMB_H);
        for bx in 0..THUMB_W {
            let (x0, x1) = (bx * w / THUMB_W, (bx + 1) * w / THUMB_W);
            let mut sum = 0u64;
            for y in y0..y1 {
                sum += frame.pixels[y * w + x0..y * w + x1].iter().map(|&p| p as u64).sum::<u64>();
            }
            out[by * THUMB_W + bx] += sum as f64 / (((y1 - y0) * (x1 - x0)) as f64 * 255.0);
        }
    }
    Ok(())
}

/// Random projection of the brightness-centred clip thumbnail (mean over the
/// clip's frames), layer normalised.
pub struct PixelProjection {
    spec: EmbeddingBackendSpec,
    matrix: Vec<f32>,
}

impl PixelProjection {
    pub fn new(dim: usize, frame_level: bool) -> Self {
        let id = if frame_level {
            format!("frame-pixel-proj-{dim}")
        } else {
            format!("pixel-proj-{dim}")
        };
        Self {
            matrix: projection("pixel-proj", THUMB_W * THUMB_H, dim),
            spec: backend_spec(&id).expect("valid id"),
        }
    }

    fn embed(&self, frames: &[GrayFrame]) -> Result<Vec<f32>> {
        if frames.is_empty() {
            return Err(Error::invalid("empty clip"));
        }
        let mut thumb = vec![0.0; THUMB_W * THUMB_H];
        for f in frames {
            thumbnail(f, &mut thumb)?;
        }
        let mean = thumb.iter().sum::<f64>() / thumb.len() as f64;
        thumb.iter_mut().for_each(|v| *v -= mean);
        Ok(layer_norm(&project(&self.matrix, &thumb, self.spec.dim)))
    }
}

impl ClipEmbedder for PixelProjection {
    fn spec(&self) -> &EmbeddingBackendSpec {
        &self.spec
    }

    fn embed_clip(&mut self, frames: &[GrayFrame]) -> Result<Vec<f32>> {
        self.embed(frames)
    }
}

impl FrameEmbedder for PixelProjection {
    fn spec(&self) -> &EmbeddingBackendSpec {
        &self.spec
    }

    fn embed_frame(&mut self, frame: &GrayFrame) -> Result<Vec<f32>> {
        self.embed(std::slice::from_ref(frame))
    }
}

const SPECTRUM_BANDS: usize = 64;

/// Random projection of the 64-band log power spectrum, layer normalised.
/// Silence (zero energy) maps to the zero vector.
pub struct SpectrumProjection {
    spec: EmbeddingBackendSpec,
    bands: RmsBands,
    matrix: Vec<f32>,
}

impl SpectrumProjection {
    pub fn new(dim: usize) -> Self {
        Self {
            spec: backend_spec(&format!("spectrum-proj-{dim}")).expect("valid id"),
            bands: RmsBands::new(SPECTRUM_BANDS),
            matrix: projection("spectrum-proj", SPECTRUM_BANDS, dim),
        }
    }
}

impl SpanEmbedder for SpectrumProjection {
    fn spec(&self) -> &EmbeddingBackendSpec {
        &self.spec
    }

    fn embed_span(&mut self, samples: &[f32], sample_rate: u32) -> Result<Vec<f32>> {
        let rms = self.bands.embed_span(samples, sample_rate)?;
        if rms.iter().all(|&v| v == 0.0) {
            return Ok(vec![0.0; self.spec.dim]);
        }
        let log: Vec<f64> = rms.iter().map(|&v| (v as f64 * v as f64 + 1e-10).ln()).collect();
        Ok(layer_norm(&project(&self.matrix, &log, self.spec.dim)))
    }
}
