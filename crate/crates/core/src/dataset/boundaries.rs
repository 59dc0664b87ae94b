use std::path::Path;

use super::Shot;
use crate::error::{Error, Result};

/// Cut a video into shots from per-frame boundary probabilities.
///
/// A frame whose probability is `>= threshold` is the last frame of its shot.
/// With `collapse_runs`, a run of consecutive boundary frames yields a single
/// cut at the run's last frame; without it every boundary frame cuts, which
/// keeps the shot count non-increasing in `threshold`.
pub fn boundaries_from_probabilities(
    probs: &[f64],
    threshold: f64,
    collapse_runs: bool,
) -> Result<Vec<Shot>> {
    if probs.is_empty() {
        return Err(Error::invalid("empty boundary probability vector"));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!(
            "threshold must lie in (0,1), got {threshold}"
        )));
    }
    let n = probs.len();
    let is_cut = |f: usize| probs[f] >= threshold;
    let mut shots = Vec::new();
    let mut start = 0;
    for f in 0..n - 1 {
        if !is_cut(f) || (collapse_runs && is_cut(f + 1)) {
            continue;
        }
        shots.push(Shot {
            shot_id: shots.len(),
            start_frame: start,
            end_frame: f,
        });
        start = f + 1;
    }
    shots.push(Shot {
        shot_id: shots.len(),
        start_frame: start,
        end_frame: n - 1,
    });
    Ok(shots)
}

/// Shot counts produced by each threshold.
pub fn shot_count_sweep(probs: &[f64], thresholds: &[f64], collapse_runs: bool) -> Result<Vec<(f64, usize)>> {
    thresholds
        .iter()
        .map(|&t| Ok((t, boundaries_from_probabilities(probs, t, collapse_runs)?.len())))
        .collect()
}

/// Read one probability per frame: a JSON array for `.json`, otherwise
/// newline-delimited text.
pub fn read_probabilities(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let what = path.display().to_string();
    let probs: Vec<f64> = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| Error::parse(&what, e))?
    } else {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::parse(format!("{what}:{}", i + 1), e))
            })
            .collect::<Result<_>>()?
    };
    if let Some(i) = probs.iter().position(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::parse(
            what,
            format!("probability {} at frame {i} outside [0,1]", probs[i]),
        ));
    }
    Ok(probs)
}
