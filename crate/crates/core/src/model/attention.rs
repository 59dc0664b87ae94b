//! Attention backbones: map a `T x D` feature map, viewed as a one-channel
//! image, to a same-shaped gating map in (0,1).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Per-element learned gate `sigmoid(g_d * x + h_d)`; depends on its row only.
pub const ROW_LOCAL: &str = "row-local";
/// One learned 3x3 kernel over the map with zero padding.
pub const CONV3X3: &str = "conv3x3";
/// Inception-v1 ImageNet classifier, last spatial activation (inception 5b).
pub const GOOGLENET: &str = "googlenet-inception5b";

/// Spatial activation `channels x height x width`, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Activation {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

/// A frozen pretrained image network, seen up to its last pre-classifier
/// spatial activation.
pub trait ImageBackbone: Send + Sync {
    fn id(&self) -> &str;
    /// `(height, width)` of the expected input.
    fn input_size(&self) -> (usize, usize);
    fn input_channels(&self) -> usize;
    /// `image` is `input_channels x height x width`, channel-major.
    fn forward(&self, image: &[f32]) -> Result<Activation>;
}

#[derive(Clone)]
pub enum AttentionBackbone {
    RowLocal,
    Conv3x3,
    Pretrained(Arc<dyn ImageBackbone>),
}

impl fmt::Debug for AttentionBackbone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl AttentionBackbone {
    pub fn id(&self) -> &str {
        match self {
            AttentionBackbone::RowLocal => ROW_LOCAL,
            AttentionBackbone::Conv3x3 => CONV3X3,
            AttentionBackbone::Pretrained(b) => b.id(),
        }
    }

    /// Resolve a built-in id. Pretrained ids need weights this crate does not
    /// ship; pass an [`ImageBackbone`] through `Pretrained` instead.
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            ROW_LOCAL => Ok(AttentionBackbone::RowLocal),
            CONV3X3 => Ok(AttentionBackbone::Conv3x3),
            GOOGLENET => Err(Error::BackendUnavailable {
                backend: id.to_string(),
                reason: "pretrained image weights are not bundled".into(),
            }),
            _ => Err(Error::invalid(format!("unknown attention backbone `{id}`"))),
        }
    }

    pub fn param_count(&self, dim: usize) -> usize {
        match self {
            AttentionBackbone::RowLocal => 2 * dim,
            AttentionBackbone::Conv3x3 => 10,
            AttentionBackbone::Pretrained(_) => 0,
        }
    }

    /// Attention map for `fm` (`t x d`), using trainable `params`.
    pub fn forward(&self, fm: &[f64], t: usize, d: usize, params: &[f64]) -> Result<Vec<f64>> {
        match self {
            AttentionBackbone::RowLocal => {
                let (g, h) = params.split_at(d);
                Ok(fm
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| sigmoid(g[i % d] * x + h[i % d]))
                    .collect())
            }
            AttentionBackbone::Conv3x3 => Ok(conv3x3(fm, t, d, params)
                .into_iter()
                .map(sigmoid)
                .collect()),
            AttentionBackbone::Pretrained(b) => pretrained_attention(b.as_ref(), fm, t, d),
        }
    }

    /// Gradient of the attention parameters given `d_att = dL/dA`.
    pub fn backward(
        &self,
        fm: &[f64],
        t: usize,
        d: usize,
        att: &[f64],
        d_att: &[f64],
        out: &mut [f64],
    ) {
        match self {
            AttentionBackbone::RowLocal => {
                let (dg, dh) = out.split_at_mut(d);
                for i in 0..t * d {
                    let dpre = d_att[i] * att[i] * (1.0 - att[i]);
                    dg[i % d] += dpre * fm[i];
                    dh[i % d] += dpre;
                }
            }
            AttentionBackbone::Conv3x3 => {
                for r in 0..t {
                    for c in 0..d {
                        let i = r * d + c;
                        let dpre = d_att[i] * att[i] * (1.0 - att[i]);
                        if dpre == 0.0 {
                            continue;
                        }
                        for (k, (dr, dc)) in KERNEL_OFFSETS.iter().enumerate() {
                            if let Some(x) = at(fm, t, d, r as isize + dr, c as isize + dc) {
                                out[k] += dpre * x;
                            }
                        }
                        out[9] += dpre;
                    }
                }
            }
            AttentionBackbone::Pretrained(_) => {}
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

const KERNEL_OFFSETS: [(isize, isize); 9] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 0),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

fn at(m: &[f64], t: usize, d: usize, r: isize, c: isize) -> Option<f64> {
    (r >= 0 && c >= 0 && (r as usize) < t && (c as usize) < d).then(|| m[r as usize * d + c as usize])
}

fn conv3x3(fm: &[f64], t: usize, d: usize, params: &[f64]) -> Vec<f64> {
    let mut out = vec![params[9]; t * d];
    for r in 0..t {
        for c in 0..d {
            for (k, (dr, dc)) in KERNEL_OFFSETS.iter().enumerate() {
                if let Some(x) = at(fm, t, d, r as isize + dr, c as isize + dc) {
                    out[r * d + c] += params[k] * x;
                }
            }
        }
    }
    out
}

/// Bilinear resize with half-pixel centres, edges clamped.
pub fn resize_bilinear(src: &[f64], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    let sample = |pos: f64, n: usize| {
        let x = pos.clamp(0.0, (n - 1) as f64);
        let i0 = x.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, x - i0 as f64)
    };
    let mut out = Vec::with_capacity(out_h * out_w);
    for r in 0..out_h {
        let (r0, r1, fr) = sample((r as f64 + 0.5) * h as f64 / out_h as f64 - 0.5, h);
        for c in 0..out_w {
            let (c0, c1, fc) = sample((c as f64 + 0.5) * w as f64 / out_w as f64 - 0.5, w);
            let top = src[r0 * w + c0] * (1.0 - fc) + src[r0 * w + c1] * fc;
            let bot = src[r1 * w + c0] * (1.0 - fc) + src[r1 * w + c1] * fc;
            out.push(top * (1.0 - fr) + bot * fr);
        }
    }
    out
}

/// Replicate the map to the network's channel count at its input size, read
/// the last spatial activation, average its channels to one, resize back to
/// `t x d` and squash.
fn pretrained_attention(b: &dyn ImageBackbone, fm: &[f64], t: usize, d: usize) -> Result<Vec<f64>> {
    let (ih, iw) = b.input_size();
    let plane: Vec<f32> = resize_bilinear(fm, t, d, ih, iw)
        .into_iter()
        .map(|v| v as f32)
        .collect();
    let image = plane.repeat(b.input_channels());
    let act = b.forward(&image)?;
    let hw = act.height * act.width;
    if act.channels == 0 || act.data.len() != act.channels * hw {
        return Err(Error::invalid(format!(
            "backbone `{}` returned a malformed activation",
            b.id()
        )));
    }
    let mut pooled = vec![0.0f64; hw];
    for ch in act.data.chunks_exact(hw) {
        for (p, &v) in pooled.iter_mut().zip(ch) {
            *p += v as f64;
        }
    }
    pooled.iter_mut().for_each(|p| *p /= act.channels as f64);
    Ok(resize_bilinear(&pooled, act.height, act.width, t, d)
        .into_iter()
        .map(sigmoid)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Returns its first channel, optionally 2x average-pooled.
    struct Mock {
        size: (usize, usize),
        pool: bool,
    }

    impl ImageBackbone for Mock {
        fn id(&self) -> &str {
            "mock"
        }
        fn input_size(&self) -> (usize, usize) {
            self.size
        }
        fn input_channels(&self) -> usize {
            3
        }
        fn forward(&self, image: &[f32]) -> Result<Activation> {
            let (h, w) = self.size;
            assert_eq!(image.len(), 3 * h * w);
            let ch = &image[..h * w];
            if !self.pool {
                return Ok(Activation { channels: 1, height: h, width: w, data: ch.to_vec() });
            }
            let (oh, ow) = (h / 2, w / 2);
            let mut data = Vec::new();
            for r in 0..oh {
                for c in 0..ow {
                    let s = ch[2 * r * w + 2 * c] + ch[2 * r * w + 2 * c + 1]
                        + ch[(2 * r + 1) * w + 2 * c] + ch[(2 * r + 1) * w + 2 * c + 1];
                    data.push(s / 4.0);
                }
            }
            Ok(Activation { channels: 2, height: oh, width: ow, data: data.repeat(2) })
        }
    }

    #[test]
    fn identity_backbone_gives_sigmoid_of_input() {
        let fm: Vec<f64> = (0..12).map(|i| i as f64 * 0.25 - 1.5).collect();
        let b = AttentionBackbone::Pretrained(Arc::new(Mock { size: (3, 4), pool: false }));
        let a = b.forward(&fm, 3, 4, &[]).unwrap();
        for (x, y) in fm.iter().zip(&a) {
            assert!((sigmoid(*x) - y).abs() < 1e-6);
        }
    }

    #[test]
    fn resized_backbone_keeps_shape_and_range() {
        let fm: Vec<f64> = (0..60 * 16).map(|i| ((i * 37) % 11) as f64 / 11.0).collect();
        let b = AttentionBackbone::Pretrained(Arc::new(Mock { size: (32, 32), pool: true }));
        let a = b.forward(&fm, 60, 16, &[]).unwrap();
        assert_eq!(a.len(), 60 * 16);
        assert!(a.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn resize_identity_and_constant() {
        let src: Vec<f64> = (0..6).map(f64::from).collect();
        assert_eq!(resize_bilinear(&src, 2, 3, 2, 3), src);
        assert!(resize_bilinear(&[2.0; 4], 2, 2, 5, 7).iter().all(|&v| v == 2.0));
    }

    #[test]
    fn googlenet_is_not_bundled() {
        assert!(AttentionBackbone::from_id(GOOGLENET).unwrap_err().is_missing_dependency());
        assert!(AttentionBackbone::from_id("nope").is_err());
    }

    #[test]
    fn conv_zero_kernel_is_bias() {
        let mut p = vec![0.0; 10];
        p[9] = 0.3;
        p[4] = 1.0;
        let fm = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(conv3x3(&fm, 2, 2, &p), vec![1.3, 2.3, 3.3, 4.3]);
    }
}
