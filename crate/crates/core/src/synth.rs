//! Synthetic long/short ad pairs with a known shot correspondence.
//!
//! Each long-ad shot is a distinct procedurally drawn scene (gradient
//! background, filled shapes, a slow pan) with its own tonal audio. The short
//! ad is built by excerpting a subset of long shots, lightly trimmed, in
//! temporal order, optionally with foreign shots that never occur in the long
//! ad. Boundary probability tracks mimic a detector: high on the last frame of
//! each shot, low noise elsewhere, with rare weak spurious peaks.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{shots_from_ranges, AdPair, MappingEntry, ShotMapping, VideoRef, VideoSide};
use crate::error::Result;
use crate::media::{AudioTrack, GrayFrame, Video};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub long_frames: usize,
    pub sample_rate: u32,
    pub min_shot_frames: usize,
    pub max_shot_frames: usize,
    /// The excerpted long shots sum to at least this long, and dropping any
    /// one of them falls below it.
    pub budget_seconds: f64,
    /// Up to this many frames are trimmed from each end of an excerpted shot.
    pub max_trim: usize,
    pub foreign_shots: usize,
    pub with_audio: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 96,
            height: 72,
            fps: 23.98,
            long_frames: 719,
            sample_rate: 8000,
            min_shot_frames: 36,
            max_shot_frames: 96,
            budget_seconds: 15.0,
            max_trim: 2,
            foreign_shots: 0,
            with_audio: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthPair {
    pub pair_id: String,
    pub long: Video,
    pub short: Video,
    pub long_shots: Vec<(usize, usize)>,
    pub short_shots: Vec<(usize, usize)>,
    /// For each short shot, the long shot it was cut from (`None` if foreign).
    pub construction: Vec<Option<usize>>,
    pub long_probs: Vec<f64>,
    pub short_probs: Vec<f64>,
}

impl SynthPair {
    /// The pair with its construction as mapping (similarity 1). Foreign
    /// short shots have no long counterpart and are left out.
    pub fn ad_pair(&self) -> AdPair {
        let side = |tag: &str, v: &Video, shots: &[(usize, usize)]| {
            let info = crate::media::FrameSource::info(v);
            let video_id = format!("{}_{tag}", self.pair_id);
            VideoSide {
                video: VideoRef {
                    file: PathBuf::from(format!("{video_id}.rav")),
                    video_id,
                    fps: info.fps,
                    frame_count: info.frame_count,
                },
                shots: shots_from_ranges(shots),
            }
        };
        let entries = self
            .construction
            .iter()
            .enumerate()
            .filter_map(|(s, l)| {
                l.map(|l| MappingEntry {
                    short_shot: s,
                    long_shot: l,
                    similarity: 1.0,
                })
            })
            .collect();
        AdPair {
            pair_id: self.pair_id.clone(),
            long: side("30s", &self.long, &self.long_shots),
            short: side("15s", &self.short, &self.short_shots),
            mapping: Some(ShotMapping { entries }),
        }
    }
}

const PAN_MARGIN: usize = 32;

struct Scene {
    canvas: Vec<u8>,
    cw: usize,
    pan: (f64, f64),
    tones: [(f64, f64); 2],
    am_rate: f64,
}

impl Scene {
    fn new(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Self {
        let (cw, ch) = (w + PAN_MARGIN, h + PAN_MARGIN);
        let base = rng.gen_range(20.0..120.0);
        let (gx, gy) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let mut canvas: Vec<u8> = (0..ch)
            .flat_map(|y| (0..cw).map(move |x| (x, y)))
            .map(|(x, y)| (base + gx * x as f64 + gy * y as f64).clamp(0.0, 255.0) as u8)
            .collect();
        for _ in 0..rng.gen_range(70..100) {
            let (cx, cy) = (rng.gen_range(0.0..cw as f64), rng.gen_range(0.0..ch as f64));
            let (rx, ry) = (rng.gen_range(1.5..9.0), rng.gen_range(1.5..9.0));
            let v: u8 = rng.gen_range(0..=255);
            let ellipse = rng.gen_bool(0.6);
            let y0 = (cy - ry).max(0.0) as usize;
            let y1 = ((cy + ry) as usize).min(ch - 1);
            let x0 = (cx - rx).max(0.0) as usize;
            let x1 = ((cx + rx) as usize).min(cw - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let (dx, dy) = ((x as f64 - cx) / rx, (y as f64 - cy) / ry);
                    if !ellipse || dx * dx + dy * dy <= 1.0 {
                        canvas[y * cw + x] = v;
                    }
                }
            }
        }
        let speed = PAN_MARGIN as f64 / 110.0;
        Self {
            canvas,
            cw,
            pan: (rng.gen_range(0.0..speed), rng.gen_range(0.0..speed)),
            tones: [
                (rng.gen_range(80.0..1500.0), rng.gen_range(0.05..0.4)),
                (rng.gen_range(80.0..3000.0), rng.gen_range(0.0..0.3)),
            ],
            am_rate: rng.gen_range(0.5..6.0),
        }
    }

    /// Frame `t` frames into the scene.
    fn frame(&self, t: usize, w: usize, h: usize) -> GrayFrame {
        let ox = ((self.pan.0 * t as f64) as usize).min(PAN_MARGIN);
        let oy = ((self.pan.1 * t as f64) as usize).min(PAN_MARGIN);
        let mut px = Vec::with_capacity(w * h);
        for y in 0..h {
            let row = (y + oy) * self.cw + ox;
            px.extend_from_slice(&self.canvas[row..row + w]);
        }
        GrayFrame::new(w, h, px)
    }

    fn sample(&self, t_seconds: f64) -> f32 {
        let env = 0.6 + 0.4 * (2.0 * std::f64::consts::PI * self.am_rate * t_seconds).sin();
        let s: f64 = self
            .tones
            .iter()
            .map(|(f, a)| a * (2.0 * std::f64::consts::PI * f * t_seconds).sin())
            .sum();
        (env * s) as f32
    }
}

/// One rendered shot: which scene, and which scene-local frames it shows.
#[derive(Clone, Copy)]
struct Segment {
    scene: usize,
    first: usize,
    len: usize,
}

fn render(scenes: &[Scene], segs: &[Segment], cfg: &SynthConfig) -> Result<Video> {
    let mut frames = Vec::new();
    let mut samples = Vec::new();
    let sr = cfg.sample_rate as f64;
    for seg in segs {
        let scene = &scenes[seg.scene];
        for t in seg.first..seg.first + seg.len {
            frames.push(scene.frame(t, cfg.width, cfg.height));
        }
        if cfg.with_audio {
            // audio runs on the scene's own clock so excerpts stay in sync
            let start = frames.len() - seg.len;
            let a = (start as f64 / cfg.fps * sr).round() as usize;
            let b = (frames.len() as f64 / cfg.fps * sr).round() as usize;
            let scene_t0 = seg.first as f64 / cfg.fps;
            for (k, _) in (a..b).enumerate() {
                samples.push(scene.sample(scene_t0 + k as f64 / sr));
            }
        }
    }
    let audio = cfg.with_audio.then(|| AudioTrack {
        sample_rate: cfg.sample_rate,
        samples,
    });
    Video::from_frames(cfg.fps, frames, audio)
}

fn boundary_probs(rng: &mut ChaCha8Rng, shots: &[(usize, usize)], n: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen_bool(0.004) {
                rng.gen_range(0.12..0.25)
            } else {
                rng.gen_range(0.0..0.05)
            }
        })
        .collect();
    for &(_, e) in shots {
        p[e] = rng.gen_range(0.6..0.99);
    }
    p
}

fn ranges(segs: &[Segment]) -> Vec<(usize, usize)> {
    let mut at = 0;
    segs.iter()
        .map(|s| {
            let r = (at, at + s.len - 1);
            at += s.len;
            r
        })
        .collect()
}

pub fn pair_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index as u64 + 1)
}

/// Build pair `index` of a fixture set.
pub fn synth_pair(cfg: &SynthConfig, index: usize, seed: u64) -> Result<SynthPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(pair_seed(seed, index));

    let mut lens = Vec::new();
    let mut total = 0;
    while total < cfg.long_frames {
        let l = rng.gen_range(cfg.min_shot_frames..=cfg.max_shot_frames);
        lens.push(l);
        total += l;
    }
    let over = total - cfg.long_frames;
    let last = lens.len() - 1;
    lens[last] -= over.min(lens[last] - 1);
    if lens[last] < cfg.min_shot_frames && lens.len() > 1 {
        let tail = lens.pop().unwrap();
        *lens.last_mut().unwrap() += tail;
    }
    debug_assert_eq!(lens.iter().sum::<usize>(), cfg.long_frames);

    let scenes: Vec<Scene> = (0..lens.len() + cfg.foreign_shots)
        .map(|_| Scene::new(&mut rng, cfg.width, cfg.height))
        .collect();
    let long_segs: Vec<Segment> = lens
        .iter()
        .enumerate()
        .map(|(i, &len)| Segment {
            scene: i,
            first: 0,
            len,
        })
        .collect();

    let budget_frames = (cfg.budget_seconds * cfg.fps).ceil() as usize;
    let mut chosen = pick_positives(&mut rng, &lens, budget_frames);
    chosen.sort_unstable();

    let mut short_segs = Vec::new();
    let mut construction = Vec::new();
    for &i in &chosen {
        let len = lens[i];
        let room = len.saturating_sub(12) / 2;
        let head = rng.gen_range(0..=cfg.max_trim.min(room));
        let tail = rng.gen_range(0..=cfg.max_trim.min(room));
        short_segs.push(Segment {
            scene: i,
            first: head,
            len: len - head - tail,
        });
        construction.push(Some(i));
    }
    for f in 0..cfg.foreign_shots {
        let at = rng.gen_range(0..=short_segs.len());
        short_segs.insert(
            at,
            Segment {
                scene: lens.len() + f,
                first: 0,
                len: rng.gen_range(cfg.min_shot_frames..=cfg.max_shot_frames),
            },
        );
        construction.insert(at, None);
    }

    let long_shots = ranges(&long_segs);
    let short_shots = ranges(&short_segs);
    let long = render(&scenes, &long_segs, cfg)?;
    let short = render(&scenes, &short_segs, cfg)?;
    let long_probs = boundary_probs(&mut rng, &long_shots, cfg.long_frames);
    let short_n = short_shots.last().unwrap().1 + 1;
    let short_probs = boundary_probs(&mut rng, &short_shots, short_n);
    Ok(SynthPair {
        pair_id: format!("pair{index:03}"),
        long,
        short,
        long_shots,
        short_shots,
        construction,
        long_probs,
        short_probs,
    })
}

/// A subset whose frame total reaches `budget` and drops below it when any
/// member is removed; falls back to the first subset reaching the budget.
fn pick_positives(rng: &mut ChaCha8Rng, lens: &[usize], budget: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..lens.len()).collect();
    let mut fallback = None;
    for _ in 0..1000 {
        order.shuffle(rng);
        let mut sum = 0;
        let mut picked = Vec::new();
        for &i in &order {
            if sum >= budget {
                break;
            }
            sum += lens[i];
            picked.push(i);
        }
        let min = picked.iter().map(|&i| lens[i]).min().unwrap_or(0);
        if sum >= budget && sum - min < budget {
            return picked;
        }
        fallback.get_or_insert(picked);
    }
    fallback.unwrap_or_default()
}

/// Entry of the `build-dataset` input list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawVideoInput {
    pub video_id: String,
    pub file: PathBuf,
    pub boundaries: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPairInput {
    pub pair_id: String,
    pub long: RawVideoInput,
    pub short: RawVideoInput,
}

/// Ground truth of a written fixture set, keyed by pair id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureTruth {
    pub pair_id: String,
    pub long_shots: Vec<(usize, usize)>,
    pub short_shots: Vec<(usize, usize)>,
    pub construction: Vec<Option<usize>>,
}

/// Write `n` pairs as `.rav` videos plus newline-delimited boundary files,
/// an input list `pairs.json` and the construction truth `truth.json`.
pub fn write_fixture_set(dir: &Path, n: usize, cfg: &SynthConfig, seed: u64) -> Result<Vec<FixtureTruth>> {
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
    let mut inputs = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for i in 0..n {
        let p = synth_pair(cfg, i, seed)?;
        let side = |tag: &str, video: &Video, probs: &[f64]| -> Result<RawVideoInput> {
            let video_id = format!("{}_{tag}", p.pair_id);
            let file = PathBuf::from(format!("{video_id}.rav"));
            let boundaries = PathBuf::from(format!("{video_id}.probs.txt"));
            video.write_rav(&dir.join(&file))?;
            let text: String = probs.iter().map(|v| format!("{v:.6}\n")).collect();
            crate::io::write_atomic(&dir.join(&boundaries), text.as_bytes())?;
            Ok(RawVideoInput {
                video_id,
                file,
                boundaries,
            })
        };
        let long = side("30s", &p.long, &p.long_probs)?;
        let short = side("15s", &p.short, &p.short_probs)?;
        inputs.push(RawPairInput {
            pair_id: p.pair_id.clone(),
            long,
            short,
        });
        truth.push(FixtureTruth {
            pair_id: p.pair_id,
            long_shots: p.long_shots,
            short_shots: p.short_shots,
            construction: p.construction,
        });
    }
    crate::io::write_json(&dir.join("pairs.json"), &inputs)?;
    crate::io::write_json(&dir.join("truth.json"), &truth)?;
    Ok(truth)
}
