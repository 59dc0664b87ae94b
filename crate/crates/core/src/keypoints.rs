//! Scale-invariant keypoints (difference-of-Gaussians detector with gradient
//! histogram descriptors) and ratio-test matching.
//!
//! Follows Lowe's construction: a Gaussian pyramid with `layers + 3` images
//! per octave, extrema of the DoG stack refined by a quadratic fit, low
//! contrast and edge responses rejected, dominant orientations from a 36-bin
//! histogram and a 4x4x8 descriptor sampled in the rotated frame.

use std::f32::consts::PI;

use crate::media::GrayFrame;

pub const DESCRIPTOR_LEN: usize = 128;
const DESC_WIDTH: usize = 4;
const DESC_BINS: usize = 8;
const ORI_BINS: usize = 36;
const IMG_BORDER: usize = 5;
const MAX_INTERP_STEPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiftParams {
    pub layers_per_octave: usize,
    pub contrast_threshold: f32,
    pub edge_threshold: f32,
    pub sigma: f32,
    /// Double the input first; finds more small-scale keypoints on small frames.
    pub upsample: bool,
    /// Keep only the strongest responses; 0 keeps everything.
    pub max_keypoints: usize,
}

impl Default for SiftParams {
    fn default() -> Self {
        Self {
            layers_per_octave: 3,
            contrast_threshold: 0.04,
            edge_threshold: 10.0,
            sigma: 1.6,
            upsample: true,
            max_keypoints: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    /// Position in input-image pixels.
    pub x: f32,
    pub y: f32,
    /// Gaussian scale in input-image pixels.
    pub scale: f32,
    /// Dominant gradient direction, radians in [0, 2π).
    pub angle: f32,
    pub response: f32,
}

#[derive(Debug, Clone, Default)]
pub struct FrameFeatures {
    pub keypoints: Vec<Keypoint>,
    pub descriptors: Vec<[f32; DESCRIPTOR_LEN]>,
}

impl FrameFeatures {
    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }
}

#[derive(Clone)]
struct Image {
    w: usize,
    h: usize,
    data: Vec<f32>,
}

impl Image {
    fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.w + x]
    }

    fn from_frame(f: &GrayFrame) -> Self {
        Self {
            w: f.width,
            h: f.height,
            data: f.pixels.iter().map(|&p| p as f32 / 255.0).collect(),
        }
    }

    fn upsample2(&self) -> Self {
        let (w, h) = (self.w * 2, self.h * 2);
        let mut data = vec![0.0; w * h];
        for y in 0..h {
            let sy = (y as f32 * 0.5).min((self.h - 1) as f32);
            let y0 = sy.floor() as usize;
            let y1 = (y0 + 1).min(self.h - 1);
            let fy = sy - y0 as f32;
            for x in 0..w {
                let sx = (x as f32 * 0.5).min((self.w - 1) as f32);
                let x0 = sx.floor() as usize;
                let x1 = (x0 + 1).min(self.w - 1);
                let fx = sx - x0 as f32;
                let top = self.at(x0, y0) * (1.0 - fx) + self.at(x1, y0) * fx;
                let bot = self.at(x0, y1) * (1.0 - fx) + self.at(x1, y1) * fx;
                data[y * w + x] = top * (1.0 - fy) + bot * fy;
            }
        }
        Self { w, h, data }
    }

    fn downsample2(&self) -> Self {
        let (w, h) = (self.w / 2, self.h / 2);
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                data.push(self.at(2 * x, 2 * y));
            }
        }
        Self { w, h, data }
    }

    fn blur(&self, sigma: f32) -> Self {
        if sigma <= 0.0 {
            return self.clone();
        }
        let radius = (3.0 * sigma).ceil().max(1.0) as isize;
        let mut kernel: Vec<f32> = (-radius..=radius)
            .map(|i| (-(i * i) as f32 / (2.0 * sigma * sigma)).exp())
            .collect();
        let sum: f32 = kernel.iter().sum();
        kernel.iter_mut().for_each(|k| *k /= sum);
        let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

        let mut tmp = vec![0.0; self.data.len()];
        for y in 0..self.h {
            let row = &self.data[y * self.w..(y + 1) * self.w];
            for x in 0..self.w {
                let mut acc = 0.0;
                for (k, &kv) in kernel.iter().enumerate() {
                    acc += kv * row[clamp(x as isize + k as isize - radius, self.w)];
                }
                tmp[y * self.w + x] = acc;
            }
        }
        let mut out = vec![0.0; self.data.len()];
        for y in 0..self.h {
            for x in 0..self.w {
                let mut acc = 0.0;
                for (k, &kv) in kernel.iter().enumerate() {
                    acc += kv * tmp[clamp(y as isize + k as isize - radius, self.h) * self.w + x];
                }
                out[y * self.w + x] = acc;
            }
        }
        Self {
            w: self.w,
            h: self.h,
            data: out,
        }
    }

    fn sub(&self, other: &Image) -> Self {
        Self {
            w: self.w,
            h: self.h,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

struct Pyramid {
    gauss: Vec<Vec<Image>>,
    dog: Vec<Vec<Image>>,
}

fn build_pyramid(base: Image, p: &SiftParams) -> Pyramid {
    let s = p.layers_per_octave;
    let min_dim = base.w.min(base.h);
    let octaves = ((min_dim as f32).log2() - 3.0).floor().max(1.0) as usize;
    let k = 2f32.powf(1.0 / s as f32);
    let mut incr = vec![p.sigma];
    for i in 1..s + 3 {
        let prev = p.sigma * k.powi(i as i32 - 1);
        let total = prev * k;
        incr.push((total * total - prev * prev).sqrt());
    }
    let mut gauss: Vec<Vec<Image>> = Vec::with_capacity(octaves);
    for o in 0..octaves {
        let mut layer = Vec::with_capacity(s + 3);
        if o == 0 {
            layer.push(base.clone());
        } else {
            layer.push(gauss[o - 1][s].downsample2());
        }
        for i in 1..s + 3 {
            let next = layer[i - 1].blur(incr[i]);
            layer.push(next);
        }
        gauss.push(layer);
    }
    let dog = gauss
        .iter()
        .map(|layer| layer.windows(2).map(|w| w[1].sub(&w[0])).collect())
        .collect();
    Pyramid { gauss, dog }
}

/// Detect keypoints and compute descriptors for one grayscale frame.
pub fn detect_and_describe(frame: &GrayFrame, p: &SiftParams) -> FrameFeatures {
    let img = Image::from_frame(frame);
    if img.w < 16 || img.h < 16 {
        return FrameFeatures::default();
    }
    let (base, pre_sigma, coord_scale) = if p.upsample {
        (img.upsample2(), 1.0f32, 0.5f32)
    } else {
        (img, 0.5f32, 1.0f32)
    };
    let base = base.blur((p.sigma * p.sigma - pre_sigma * pre_sigma).max(0.01).sqrt());
    let pyr = build_pyramid(base, p);

    let s = p.layers_per_octave;
    let prelim = 0.5 * p.contrast_threshold / s as f32;
    let mut found: Vec<(Keypoint, [f32; DESCRIPTOR_LEN])> = Vec::new();

    for (o, dogs) in pyr.dog.iter().enumerate() {
        let (w, h) = (dogs[0].w, dogs[0].h);
        if w <= 2 * IMG_BORDER || h <= 2 * IMG_BORDER {
            break;
        }
        for layer in 1..=s {
            let cur = &dogs[layer];
            for y in IMG_BORDER..h - IMG_BORDER {
                for x in IMG_BORDER..w - IMG_BORDER {
                    let v = cur.at(x, y);
                    if v.abs() <= prelim || !is_extremum(dogs, layer, x, y, v) {
                        continue;
                    }
                    let Some(ext) = refine(dogs, layer, x, y, p) else {
                        continue;
                    };
                    let octave_scale = 2f32.powi(o as i32);
                    let scl_octv = p.sigma * 2f32.powf((ext.layer as f32 + ext.dl) / s as f32);
                    let gimg = &pyr.gauss[o][ext.layer];
                    for angle in orientations(gimg, ext.x, ext.y, scl_octv) {
                        let desc = describe(
                            gimg,
                            ext.x as f32 + ext.dx,
                            ext.y as f32 + ext.dy,
                            scl_octv,
                            angle,
                        );
                        let kp = Keypoint {
                            x: (ext.x as f32 + ext.dx) * octave_scale * coord_scale,
                            y: (ext.y as f32 + ext.dy) * octave_scale * coord_scale,
                            scale: scl_octv * octave_scale * coord_scale,
                            angle,
                            response: ext.contrast.abs(),
                        };
                        found.push((kp, desc));
                    }
                }
            }
        }
    }

    // strongest first; position breaks ties so the order is deterministic
    found.sort_by(|a, b| {
        b.0.response
            .total_cmp(&a.0.response)
            .then(a.0.y.total_cmp(&b.0.y))
            .then(a.0.x.total_cmp(&b.0.x))
    });
    if p.max_keypoints > 0 {
        found.truncate(p.max_keypoints);
    }
    let (keypoints, descriptors) = found.into_iter().unzip();
    FrameFeatures {
        keypoints,
        descriptors,
    }
}

fn is_extremum(dogs: &[Image], layer: usize, x: usize, y: usize, v: f32) -> bool {
    let positive = v > 0.0;
    for img in &dogs[layer - 1..=layer + 1] {
        for yy in y - 1..=y + 1 {
            for xx in x - 1..=x + 1 {
                let n = img.at(xx, yy);
                if positive && n > v || !positive && n < v {
                    return false;
                }
            }
        }
    }
    true
}

struct Extremum {
    x: usize,
    y: usize,
    layer: usize,
    dx: f32,
    dy: f32,
    dl: f32,
    contrast: f32,
}

fn refine(dogs: &[Image], layer: usize, x: usize, y: usize, p: &SiftParams) -> Option<Extremum> {
    let s = p.layers_per_octave;
    let (w, h) = (dogs[0].w, dogs[0].h);
    let (mut x, mut y, mut l) = (x, y, layer);
    let mut offset = [0.0f32; 3];
    let mut converged = false;
    for _ in 0..MAX_INTERP_STEPS {
        let (g, hess) = derivatives(dogs, l, x, y);
        offset = solve3(&hess, &g)?.map(|v| -v);
        if offset.iter().all(|v| v.abs() < 0.5) {
            converged = true;
            break;
        }
        if offset.iter().any(|v| v.abs() > 1e6) {
            return None;
        }
        let nx = x as isize + offset[0].round() as isize;
        let ny = y as isize + offset[1].round() as isize;
        let nl = l as isize + offset[2].round() as isize;
        if nl < 1
            || nl > s as isize
            || nx < IMG_BORDER as isize
            || nx >= (w - IMG_BORDER) as isize
            || ny < IMG_BORDER as isize
            || ny >= (h - IMG_BORDER) as isize
        {
            return None;
        }
        (x, y, l) = (nx as usize, ny as usize, nl as usize);
    }
    if !converged {
        return None;
    }
    let (g, hess) = derivatives(dogs, l, x, y);
    let contrast = dogs[l].at(x, y) + 0.5 * (g[0] * offset[0] + g[1] * offset[1] + g[2] * offset[2]);
    if contrast.abs() * (s as f32) < p.contrast_threshold {
        return None;
    }
    let tr = hess[0][0] + hess[1][1];
    let det = hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0];
    let r = p.edge_threshold;
    if det <= 0.0 || tr * tr * r >= (r + 1.0) * (r + 1.0) * det {
        return None;
    }
    Some(Extremum {
        x,
        y,
        layer: l,
        dx: offset[0],
        dy: offset[1],
        dl: offset[2],
        contrast,
    })
}

fn derivatives(dogs: &[Image], l: usize, x: usize, y: usize) -> ([f32; 3], [[f32; 3]; 3]) {
    let (prev, cur, next) = (&dogs[l - 1], &dogs[l], &dogs[l + 1]);
    let v2 = 2.0 * cur.at(x, y);
    let dx = 0.5 * (cur.at(x + 1, y) - cur.at(x - 1, y));
    let dy = 0.5 * (cur.at(x, y + 1) - cur.at(x, y - 1));
    let ds = 0.5 * (next.at(x, y) - prev.at(x, y));
    let dxx = cur.at(x + 1, y) + cur.at(x - 1, y) - v2;
    let dyy = cur.at(x, y + 1) + cur.at(x, y - 1) - v2;
    let dss = next.at(x, y) + prev.at(x, y) - v2;
    let dxy = 0.25
        * (cur.at(x + 1, y + 1) - cur.at(x - 1, y + 1) - cur.at(x + 1, y - 1) + cur.at(x - 1, y - 1));
    let dxs = 0.25 * (next.at(x + 1, y) - next.at(x - 1, y) - prev.at(x + 1, y) + prev.at(x - 1, y));
    let dys = 0.25 * (next.at(x, y + 1) - next.at(x, y - 1) - prev.at(x, y + 1) + prev.at(x, y - 1));
    (
        [dx, dy, ds],
        [[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]],
    )
}

/// Cramer's rule; `None` for a (near) singular matrix.
fn solve3(m: &[[f32; 3]; 3], b: &[f32; 3]) -> Option<[f32; 3]> {
    let det3 = |a: &[[f32; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det3(m);
    if d.abs() < 1e-12 {
        return None;
    }
    let mut out = [0.0; 3];
    for (c, slot) in out.iter_mut().enumerate() {
        let mut mc = *m;
        for r in 0..3 {
            mc[r][c] = b[r];
        }
        *slot = det3(&mc) / d;
    }
    Some(out)
}

fn gradient(img: &Image, x: usize, y: usize) -> (f32, f32) {
    (
        img.at(x + 1, y) - img.at(x - 1, y),
        img.at(x, y + 1) - img.at(x, y - 1),
    )
}

fn orientations(img: &Image, x: usize, y: usize, scl_octv: f32) -> Vec<f32> {
    let sigma = 1.5 * scl_octv;
    let radius = (3.0 * sigma).round() as isize;
    let mut hist = [0.0f32; ORI_BINS];
    for j in -radius..=radius {
        let yy = y as isize + j;
        if yy <= 0 || yy >= img.h as isize - 1 {
            continue;
        }
        for i in -radius..=radius {
            let xx = x as isize + i;
            if xx <= 0 || xx >= img.w as isize - 1 {
                continue;
            }
            let (gx, gy) = gradient(img, xx as usize, yy as usize);
            let mag = (gx * gx + gy * gy).sqrt();
            let ang = gy.atan2(gx).rem_euclid(2.0 * PI);
            let weight = (-((i * i + j * j) as f32) / (2.0 * sigma * sigma)).exp();
            let bin = ((ang / (2.0 * PI) * ORI_BINS as f32).round() as usize) % ORI_BINS;
            hist[bin] += weight * mag;
        }
    }
    let mut smooth = [0.0f32; ORI_BINS];
    for b in 0..ORI_BINS {
        let at = |d: isize| hist[(b as isize + d).rem_euclid(ORI_BINS as isize) as usize];
        smooth[b] = (at(-2) + at(2)) / 16.0 + (at(-1) + at(1)) * 4.0 / 16.0 + at(0) * 6.0 / 16.0;
    }
    let max = smooth.iter().copied().fold(0.0, f32::max);
    if max <= 0.0 {
        return vec![0.0];
    }
    let mut out = Vec::new();
    for b in 0..ORI_BINS {
        let l = smooth[(b + ORI_BINS - 1) % ORI_BINS];
        let r = smooth[(b + 1) % ORI_BINS];
        let c = smooth[b];
        if c > l && c > r && c >= 0.8 * max {
            let off = 0.5 * (l - r) / (l - 2.0 * c + r);
            let bin = (b as f32 + off).rem_euclid(ORI_BINS as f32);
            out.push(bin * 2.0 * PI / ORI_BINS as f32);
        }
    }
    if out.is_empty() {
        out.push(0.0);
    }
    out
}

fn describe(img: &Image, x: f32, y: f32, scl_octv: f32, angle: f32) -> [f32; DESCRIPTOR_LEN] {
    let d = DESC_WIDTH as isize;
    let n = DESC_BINS;
    let hist_width = 3.0 * scl_octv;
    let radius = (hist_width * std::f32::consts::SQRT_2 * (d as f32 + 1.0) * 0.5).round() as isize;
    let (sin_t, cos_t) = angle.sin_cos();
    let exp_scale = -1.0 / (0.5 * (d * d) as f32);
    let (cx, cy) = (x.round() as isize, y.round() as isize);

    // (d+2)^2 * (n+2) bins with a guard ring, folded back afterwards
    let stride_r = (d as usize + 2) * (n + 2);
    let stride_c = n + 2;
    let mut hist = vec![0.0f32; (d as usize + 2) * stride_r];

    for i in -radius..=radius {
        for j in -radius..=radius {
            let c_rot = (j as f32 * cos_t + i as f32 * sin_t) / hist_width;
            let r_rot = (-(j as f32) * sin_t + i as f32 * cos_t) / hist_width;
            let rbin = r_rot + d as f32 / 2.0 - 0.5;
            let cbin = c_rot + d as f32 / 2.0 - 0.5;
            let (px, py) = (cx + j, cy + i);
            if rbin <= -1.0
                || rbin >= d as f32
                || cbin <= -1.0
                || cbin >= d as f32
                || px <= 0
                || py <= 0
                || px >= img.w as isize - 1
                || py >= img.h as isize - 1
            {
                continue;
            }
            let (gx, gy) = gradient(img, px as usize, py as usize);
            let mag = (gx * gx + gy * gy).sqrt()
                * ((c_rot * c_rot + r_rot * r_rot) * exp_scale).exp();
            let ori = (gy.atan2(gx) - angle).rem_euclid(2.0 * PI);
            let obin = ori * n as f32 / (2.0 * PI);

            let (r0, c0, o0) = (rbin.floor(), cbin.floor(), obin.floor());
            let (dr, dc, dob) = (rbin - r0, cbin - c0, obin - o0);
            let (r0, c0, o0) = (r0 as isize + 1, c0 as isize + 1, o0 as usize % n);
            for (ri, rw) in [(0, 1.0 - dr), (1, dr)] {
                for (ci, cw) in [(0, 1.0 - dc), (1, dc)] {
                    for (oi, ow) in [(0, 1.0 - dob), (1, dob)] {
                        let idx = (r0 + ri) as usize * stride_r
                            + (c0 + ci) as usize * stride_c
                            + (o0 + oi) % n;
                        hist[idx] += mag * rw * cw * ow;
                    }
                }
            }
        }
    }

    let mut desc = [0.0f32; DESCRIPTOR_LEN];
    for r in 0..DESC_WIDTH {
        for c in 0..DESC_WIDTH {
            for o in 0..n {
                desc[(r * DESC_WIDTH + c) * n + o] = hist[(r + 1) * stride_r + (c + 1) * stride_c + o];
            }
        }
    }
    normalize(&mut desc);
    desc.iter_mut().for_each(|v| *v = v.min(0.2));
    normalize(&mut desc);
    desc
}

fn normalize(v: &mut [f32]) {
    let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    if norm > f32::EPSILON {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

fn dist2(a: &[f32; DESCRIPTOR_LEN], b: &[f32; DESCRIPTOR_LEN]) -> f32 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest_two(d: &[f32; DESCRIPTOR_LEN], set: &[[f32; DESCRIPTOR_LEN]]) -> (usize, f32, f32) {
    let (mut idx, mut best, mut second) = (0, f32::INFINITY, f32::INFINITY);
    for (j, other) in set.iter().enumerate() {
        let dd = dist2(d, other);
        if dd < best {
            second = best;
            best = dd;
            idx = j;
        } else if dd < second {
            second = dd;
        }
    }
    (idx, best, second)
}

/// Number of descriptors in `a` whose nearest neighbour in `b` is closer than
/// `ratio` times the second nearest and which is, in turn, the nearest
/// neighbour of that descriptor of `b` within `a`.
pub fn ratio_matches(a: &FrameFeatures, b: &FrameFeatures, ratio: f32) -> usize {
    if b.descriptors.len() < 2 {
        return 0;
    }
    let r2 = ratio * ratio;
    a.descriptors
        .iter()
        .enumerate()
        .filter(|(i, da)| {
            let (j, best, second) = nearest_two(da, &b.descriptors);
            best < r2 * second && nearest_two(&b.descriptors[j], &a.descriptors).0 == *i
        })
        .count()
}

/// Good ratio-test matches over the larger keypoint count, in [0, 1].
/// Frames without keypoints have similarity 0.
pub fn similarity(a: &FrameFeatures, b: &FrameFeatures, ratio: f32) -> f64 {
    let denom = a.len().max(b.len());
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    (ratio_matches(a, b, ratio) as f64 / denom as f64).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blobs(seed: u64, w: usize, h: usize) -> GrayFrame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut px = vec![40u8; w * h];
        for _ in 0..25 {
            let (cx, cy) = (rng.gen_range(0..w) as f32, rng.gen_range(0..h) as f32);
            let (rx, ry) = (rng.gen_range(2.0..9.0f32), rng.gen_range(2.0..9.0f32));
            let v: u8 = rng.gen_range(90..255);
            for y in 0..h {
                for x in 0..w {
                    let (dx, dy) = ((x as f32 - cx) / rx, (y as f32 - cy) / ry);
                    if dx * dx + dy * dy <= 1.0 {
                        px[y * w + x] = v;
                    }
                }
            }
        }
        GrayFrame::new(w, h, px)
    }

    fn shift(f: &GrayFrame, dx: usize) -> GrayFrame {
        let mut px = vec![40u8; f.pixels.len()];
        for y in 0..f.height {
            for x in dx..f.width {
                px[y * f.width + x] = f.get(x - dx, y);
            }
        }
        GrayFrame::new(f.width, f.height, px)
    }

    #[test]
    fn flat_frame_has_no_keypoints() {
        let f = GrayFrame::new(64, 48, vec![128; 64 * 48]);
        assert!(detect_and_describe(&f, &SiftParams::default()).is_empty());
    }

    #[test]
    fn descriptors_are_unit_length() {
        let feats = detect_and_describe(&blobs(1, 96, 72), &SiftParams::default());
        assert!(feats.len() > 10, "only {} keypoints", feats.len());
        for d in &feats.descriptors {
            let n: f32 = d.iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-3);
            assert!(d.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn identical_frames_match_and_distinct_frames_do_not() {
        let p = SiftParams::default();
        let a = detect_and_describe(&blobs(1, 96, 72), &p);
        let a2 = detect_and_describe(&shift(&blobs(1, 96, 72), 3), &p);
        let b = detect_and_describe(&blobs(2, 96, 72), &p);
        assert!(similarity(&a, &a, 0.75) > 0.8);
        let shifted = similarity(&a, &a2, 0.75);
        let other = similarity(&a, &b, 0.75);
        assert!(shifted > 0.3, "shifted {shifted}");
        assert!(other < 0.1, "other {other}");
    }

    #[test]
    fn detection_is_deterministic() {
        let p = SiftParams::default();
        let f = blobs(5, 80, 60);
        let a = detect_and_describe(&f, &p);
        let b = detect_and_describe(&f, &p);
        assert_eq!(a.keypoints, b.keypoints);
        assert_eq!(a.descriptors, b.descriptors);
    }

    #[test]
    fn solve3_inverts() {
        let m = [[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]];
        let x = solve3(&m, &[1.0, 2.0, 3.0]).unwrap();
        for r in 0..3 {
            let v: f32 = (0..3).map(|c| m[r][c] * x[c]).sum();
            assert!((v - [1.0, 2.0, 3.0][r]).abs() < 1e-5);
        }
        assert!(solve3(&[[0.0; 3]; 3], &[1.0; 3]).is_none());
    }
}
