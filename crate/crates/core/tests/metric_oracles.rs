use adsum_core::evaluation::{auroc, average_precision, kendall, spearman};
use proptest::prelude::*;

fn ap_oracle(scores: &[f64], labels: &[f64]) -> Option<f64> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let pos = labels.iter().filter(|&&l| l > 0.5).count();
    if pos == 0 {
        return None;
    }
    // area under the step precision/recall curve
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for k in 1..=idx.len() {
        let hits = idx[..k].iter().filter(|&&i| labels[i] > 0.5).count();
        let recall = hits as f64 / pos as f64;
        area += hits as f64 / k as f64 * (recall - prev_recall);
        prev_recall = recall;
    }
    Some(area)
}

fn auroc_oracle(scores: &[f64], labels: &[f64]) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] > 0.5 && labels[j] <= 0.5 {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    (pairs > 0.0).then(|| wins / pairs)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let less = v.iter().filter(|y| *y < x).count() as f64;
            let eq = v.iter().filter(|y| *y == x).count() as f64;
            less + (eq + 1.0) / 2.0
        })
        .collect()
}

fn spearman_oracle(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}

fn kendall_oracle(a: &[f64], b: &[f64]) -> Option<f64> {
    let (mut c, mut d, mut ta, mut tb) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let (x, y) = (a[i] - a[j], b[i] - b[j]);
            if x == 0.0 && y == 0.0 {
                continue;
            } else if x == 0.0 {
                ta += 1.0;
            } else if y == 0.0 {
                tb += 1.0;
            } else if x * y > 0.0 {
                c += 1.0;
            } else {
                d += 1.0;
            }
        }
    }
    let denom = ((c + d + ta) * (c + d + tb)).sqrt();
    (denom > 0.0 && c + d + ta > 0.0 && c + d + tb > 0.0).then(|| (c - d) / denom)
}

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() < 1e-9,
        (None, None) => true,
        _ => false,
    }
}

// Coarse grids make ties common.
fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..=20).prop_flat_map(|n| {
        (
            prop::collection::vec((0u8..6).prop_map(|v| v as f64 / 5.0), n),
            prop::collection::vec(prop::bool::ANY.prop_map(|b| b as u8 as f64), n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn ap_matches_curve_oracle((s, l) in instance()) {
        prop_assert!(close(average_precision(&s, &l).unwrap(), ap_oracle(&s, &l)));
    }

    #[test]
    fn auroc_matches_pair_oracle((s, l) in instance()) {
        prop_assert!(close(auroc(&s, &l).unwrap(), auroc_oracle(&s, &l)));
    }

    #[test]
    fn correlations_match_pair_oracles((s, l) in instance(), g in prop::collection::vec(0u8..4, 20)) {
        let graded: Vec<f64> = g[..s.len()].iter().map(|&v| v as f64).collect();
        for r in [&l, &graded] {
            prop_assert!(close(spearman(&s, r).unwrap(), spearman_oracle(&s, r)));
            prop_assert!(close(kendall(&s, r).unwrap(), kendall_oracle(&s, r)));
        }
    }

    #[test]
    fn monotone_transforms_change_nothing((s, l) in instance()) {
        let t: Vec<f64> = s.iter().map(|x| (3.0 * x).exp() - 7.0).collect();
        prop_assert!(close(average_precision(&s, &l).unwrap(), average_precision(&t, &l).unwrap()));
        prop_assert!(close(auroc(&s, &l).unwrap(), auroc(&t, &l).unwrap()));
        prop_assert!(close(spearman(&s, &l).unwrap(), spearman(&t, &l).unwrap()));
        prop_assert!(close(kendall(&s, &l).unwrap(), kendall(&t, &l).unwrap()));
    }

    #[test]
    fn auroc_complement(v in prop::collection::btree_set(0u32..10_000, 2..20), bits in prop::collection::vec(prop::bool::ANY, 20)) {
        let s: Vec<f64> = v.into_iter().map(f64::from).collect();
        let l: Vec<f64> = bits[..s.len()].iter().map(|&b| b as u8 as f64).collect();
        let neg: Vec<f64> = s.iter().map(|x| -x).collect();
        if let (Some(a), Some(b)) = (auroc(&s, &l).unwrap(), auroc(&neg, &l).unwrap()) {
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ranges((s, l) in instance()) {
        if let Some(v) = average_precision(&s, &l).unwrap() { prop_assert!((0.0..=1.0 + 1e-12).contains(&v)); }
        if let Some(v) = auroc(&s, &l).unwrap() { prop_assert!((0.0..=1.0).contains(&v)); }
        if let Some(v) = kendall(&s, &l).unwrap() { prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&v)); }
    }
}

#[test]
fn undefined_cases() {
    assert_eq!(average_precision(&[0.3, 0.2], &[0.0, 0.0]).unwrap(), None);
    assert_eq!(auroc(&[0.3, 0.2], &[1.0, 1.0]).unwrap(), None);
    assert_eq!(spearman(&[0.3, 0.3], &[1.0, 0.0]).unwrap(), None);
    assert_eq!(kendall(&[0.3, 0.3], &[1.0, 0.0]).unwrap(), None);
    assert!(auroc(&[0.3], &[1.0, 0.0]).is_err());
}
