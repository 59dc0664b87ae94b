//! Frame-level ranking metrics. `None` means undefined for the input (no
//! positives, one class only, constant vector) and must be excluded from
//! averages rather than counted as zero.

use crate::error::{Error, Result};

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            what: "metric inputs",
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

fn is_pos(l: f64) -> bool {
    l > 0.5
}

/// Sum over positives of precision at their rank, divided by the positive
/// count. Ranking is by descending score, ties by original index.
pub fn average_precision(scores: &[f64], labels: &[f64]) -> Result<Option<f64>> {
    same_len(scores, labels)?;
    let total = labels.iter().filter(|&&l| is_pos(l)).count();
    if total == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &i) in order.iter().enumerate() {
        if is_pos(labels[i]) {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    Ok(Some(sum / total as f64))
}

/// 1-based ranks, ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Mann-Whitney U over `P * N`: P(pos > neg) + P(pos == neg) / 2.
pub fn auroc(scores: &[f64], labels: &[f64]) -> Result<Option<f64>> {
    same_len(scores, labels)?;
    let p = labels.iter().filter(|&&l| is_pos(l)).count();
    let n = labels.len() - p;
    if p == 0 || n == 0 {
        return Ok(None);
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &l)| is_pos(l))
        .map(|(r, _)| r)
        .sum();
    let u = rank_sum - (p * (p + 1)) as f64 / 2.0;
    Ok(Some(u / (p as f64 * n as f64)))
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn constant(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[0] == w[1])
}

/// Pearson correlation of average ranks.
pub fn spearman(scores: &[f64], reference: &[f64]) -> Result<Option<f64>> {
    same_len(scores, reference)?;
    if scores.len() < 2 || constant(scores) || constant(reference) {
        return Ok(None);
    }
    Ok(pearson(&average_ranks(scores), &average_ranks(reference)))
}

/// Counts pairs tied in `v` among runs of equal values; `v` must be sorted.
fn tied_pairs(v: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for i in 1..=v.len() {
        if i < v.len() && v[i] == v[i - 1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total
}

/// Sorts `v` ascending, returning the number of inversions.
fn merge_count(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall tau-b in O(n log n): sort by x then y, count ties, then count
/// discordant pairs as inversions of y.
pub fn kendall(scores: &[f64], reference: &[f64]) -> Result<Option<f64>> {
    same_len(scores, reference)?;
    let n = scores.len();
    if n < 2 || constant(scores) || constant(reference) {
        return Ok(None);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        scores[a]
            .total_cmp(&scores[b])
            .then(reference[a].total_cmp(&reference[b]))
    });
    let xs: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
    let mut ys: Vec<f64> = idx.iter().map(|&i| reference[i]).collect();

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let n1 = tied_pairs(&xs);
    // pairs tied in both
    let mut n3 = 0u64;
    let mut start = 0;
    for i in 1..=n {
        if i == n || xs[i] != xs[start] {
            n3 += tied_pairs(&ys[start..i]);
            start = i;
        }
    }
    let swaps = merge_count(&mut ys, &mut Vec::with_capacity(n));
    let n2 = tied_pairs(&ys);
    // concordant - discordant over pairs untied in both
    let untied = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64;
    let diff = untied - 2.0 * swaps as f64;
    let denom = ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt();
    if denom == 0.0 {
        return Ok(None);
    }
    Ok(Some((diff / denom).clamp(-1.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hand_values() {
        assert_eq!(average_precision(&[0.9, 0.1], &[1.0, 0.0]).unwrap(), Some(1.0));
        assert_eq!(average_precision(&[0.1, 0.9], &[1.0, 0.0]).unwrap(), Some(0.5));
        assert_eq!(average_precision(&[0.1, 0.9], &[0.0, 0.0]).unwrap(), None);
        assert_eq!(auroc(&[0.9, 0.8, 0.1], &[1.0, 1.0, 0.0]).unwrap(), Some(1.0));
        assert_eq!(auroc(&[0.5; 4], &[1.0, 0.0, 1.0, 0.0]).unwrap(), Some(0.5));
        assert_eq!(auroc(&[0.5, 0.2], &[1.0, 1.0]).unwrap(), None);
        let up = [1.0, 2.0, 3.0, 4.0];
        let down = [4.0, 3.0, 2.0, 1.0];
        assert_abs_diff_eq!(spearman(&up, &up).unwrap().unwrap(), 1.0);
        assert_abs_diff_eq!(kendall(&up, &up).unwrap().unwrap(), 1.0);
        assert_abs_diff_eq!(spearman(&up, &down).unwrap().unwrap(), -1.0);
        assert_abs_diff_eq!(kendall(&up, &down).unwrap().unwrap(), -1.0);
        assert_eq!(kendall(&[1.0; 3], &up[..3]).unwrap(), None);
        assert_eq!(spearman(&up[..3], &[0.0; 3]).unwrap(), None);
        assert!(kendall(&up, &up[..2]).is_err());
    }

    #[test]
    fn average_ranks_share_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }
}
