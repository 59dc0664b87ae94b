use super::AdPair;
use crate::error::{Error, Result};

/// Binary per-frame ground truth over the long video: 1 where the frame's
/// shot was reused in the short ad.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameLabels {
    pub labels: Vec<u8>,
}

impl FrameLabels {
    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| l as f64).collect()
    }

    /// Label of each focal frame, used as the clip-level target.
    pub fn at_frames(&self, frames: &[usize]) -> Vec<f64> {
        frames.iter().map(|&f| self.labels[f] as f64).collect()
    }
}

pub fn labels_from_mapping(pair: &AdPair) -> Result<FrameLabels> {
    let mapping = pair
        .mapping
        .as_ref()
        .ok_or_else(|| Error::invalid(format!("{}: pair has no shot mapping", pair.pair_id)))?;
    let mut labels = vec![0u8; pair.long.video.frame_count];
    for long_id in mapping.positive_long_shots() {
        let shot = pair.long.shots.get(long_id).ok_or_else(|| Error::UnknownShot {
            video: pair.long.video.video_id.clone(),
            shot_id: long_id,
        })?;
        labels[shot.start_frame..=shot.end_frame].fill(1);
    }
    Ok(FrameLabels { labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{shots_from_ranges, MappingEntry, ShotMapping, VideoRef, VideoSide};

    fn pair(long: &[(usize, usize)], entries: &[(usize, usize)]) -> AdPair {
        let frames = long.last().unwrap().1 + 1;
        let side = |id: &str, ranges: &[(usize, usize)], n| VideoSide {
            video: VideoRef {
                video_id: id.into(),
                file: "x.rav".into(),
                fps: 24.0,
                frame_count: n,
            },
            shots: shots_from_ranges(ranges),
        };
        let short: Vec<_> = (0..entries.len().max(1)).map(|i| (i, i)).collect();
        AdPair {
            pair_id: "p".into(),
            long: side("l", long, frames),
            short: side("s", &short, short.len()),
            mapping: Some(ShotMapping {
                entries: entries
                    .iter()
                    .map(|&(s, l)| MappingEntry {
                        short_shot: s,
                        long_shot: l,
                        similarity: 1.0,
                    })
                    .collect(),
            }),
        }
    }

    #[test]
    fn empty_mapping_is_all_zero() {
        let l = labels_from_mapping(&pair(&[(0, 9), (10, 19)], &[])).unwrap();
        assert_eq!(l.labels, vec![0; 20]);
    }

    #[test]
    fn mapped_shot_is_positive() {
        let l = labels_from_mapping(&pair(&[(0, 9), (10, 19)], &[(0, 1)])).unwrap();
        let mut expected = vec![0u8; 10];
        expected.extend(vec![1u8; 10]);
        assert_eq!(l.labels, expected);
    }

    #[test]
    fn shared_long_shot_counts_once() {
        let p = pair(&[(0, 4), (5, 9), (10, 14), (15, 24)], &[(0, 3), (1, 3)]);
        let l = labels_from_mapping(&p).unwrap();
        assert_eq!(l.positives(), 10);
        assert!(l.labels[15..].iter().all(|&v| v == 1));
    }

    #[test]
    fn unknown_shot_and_missing_mapping_error() {
        let p = pair(&[(0, 9)], &[(0, 4)]);
        assert!(matches!(labels_from_mapping(&p), Err(Error::UnknownShot { shot_id: 4, .. })));
        let mut p = pair(&[(0, 9)], &[]);
        p.mapping = None;
        assert!(labels_from_mapping(&p).is_err());
    }
}
