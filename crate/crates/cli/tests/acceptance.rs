//! Acceptance criteria 1-9. Each prints one PASS/FAIL line; the test fails
//! if any criterion does.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use adsum_core::dataset::{labels_from_mapping, match_shots, shots_from_ranges, FoldSplit, MatchOptions, Shot};
use adsum_core::evaluation::{auroc, average_precision, kendall, spearman, CvVideo};
use adsum_core::features::{create_audio_backend, create_visual_backend, embed_audio, embed_visual, FeatureMap, Stream};
use adsum_core::model::{
    bce_grad, bce_loss, fuse_early, fuse_late, train, AttentionBackbone, AttentionScorerConfig, FusionConfig,
    ImportanceVector, Scorer, TrainConfig,
};
use adsum_core::sampling::clips_for_video;
use adsum_core::selection::{aggregate_shot_scores, assign_ranks, select_shots, ShotScore};
use adsum_core::synth::{synth_pair, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:.1?}, limit {limit:?}"))
}

// ---- 1: metric oracles --------------------------------------------------

fn ap_oracle(s: &[f64], l: &[f64]) -> Option<f64> {
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap().then(a.cmp(&b)));
    let pos = l.iter().filter(|&&x| x == 1.0).count() as f64;
    if pos == 0.0 {
        return None;
    }
    let (mut area, mut prev) = (0.0, 0.0);
    for k in 1..=idx.len() {
        let hits = idx[..k].iter().filter(|&&i| l[i] == 1.0).count() as f64;
        area += hits / k as f64 * (hits / pos - prev);
        prev = hits / pos;
    }
    Some(area)
}

fn auroc_oracle(s: &[f64], l: &[f64]) -> Option<f64> {
    let (mut w, mut n) = (0.0, 0.0);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if l[i] == 1.0 && l[j] == 0.0 {
                n += 1.0;
                w += if s[i] > s[j] { 1.0 } else if s[i] == s[j] { 0.5 } else { 0.0 };
            }
        }
    }
    (n > 0.0).then(|| w / n)
}

fn spearman_oracle(a: &[f64], b: &[f64]) -> Option<f64> {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|x| {
                let lt = v.iter().filter(|y| *y < x).count() as f64;
                let eq = v.iter().filter(|y| *y == x).count() as f64;
                lt + (eq + 1.0) / 2.0
            })
            .collect()
    };
    let (ra, rb) = (rank(a), rank(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let c: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    (va > 0.0 && vb > 0.0).then(|| c / (va * vb).sqrt())
}

fn kendall_oracle(a: &[f64], b: &[f64]) -> Option<f64> {
    let (mut c, mut d, mut ta, mut tb) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let (x, y) = (a[i] - a[j], b[i] - b[j]);
            match (x == 0.0, y == 0.0) {
                (true, true) => {}
                (true, false) => ta += 1.0,
                (false, true) => tb += 1.0,
                _ if x * y > 0.0 => c += 1.0,
                _ => d += 1.0,
            }
        }
    }
    let (n1, n2) = (c + d + ta, c + d + tb);
    (n1 > 0.0 && n2 > 0.0).then(|| (c - d) / (n1 * n2).sqrt())
}

fn agree(name: &str, got: Option<f64>, want: Option<f64>) -> Result<(), String> {
    match (got, want) {
        (Some(g), Some(w)) if (g - w).abs() < 1e-9 => Ok(()),
        (None, None) => Ok(()),
        _ => Err(format!("{name}: got {got:?}, oracle {want:?}")),
    }
}

fn criterion_1() -> Result<(), String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut defined = 0;
    for _ in 0..100 {
        let n = rng.gen_range(2..=20);
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64 / 5.0).collect();
        let l: Vec<f64> = (0..n).map(|_| rng.gen_bool(0.4) as u8 as f64).collect();
        let m = |r: adsum_core::Result<Option<f64>>| r.map_err(|e| e.to_string());
        agree("ap", m(average_precision(&s, &l))?, ap_oracle(&s, &l))?;
        agree("auroc", m(auroc(&s, &l))?, auroc_oracle(&s, &l))?;
        agree("spearman", m(spearman(&s, &l))?, spearman_oracle(&s, &l))?;
        agree("kendall", m(kendall(&s, &l))?, kendall_oracle(&s, &l))?;
        defined += auroc_oracle(&s, &l).is_some() as usize;
    }
    ensure(defined > 80, || format!("only {defined} instances had both classes"))?;
    within(Duration::from_secs(10), start)
}

// ---- 2: greedy selection ------------------------------------------------

fn ranked(means: &[f64], durs: &[f64]) -> Vec<ShotScore> {
    let mut v: Vec<ShotScore> = means
        .iter()
        .zip(durs)
        .enumerate()
        .map(|(i, (&m, &d))| ShotScore {
            shot_id: i,
            start_frame: i,
            mean_score: m,
            duration_seconds: d,
            rank: 0,
        })
        .collect();
    assign_ranks(&mut v);
    v
}

fn criterion_2() -> Result<(), String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..1000 {
        let m = rng.gen_range(1..=38);
        let means: Vec<f64> = (0..m).map(|_| rng.gen_range(0..10) as f64 / 10.0).collect();
        let durs: Vec<f64> = (0..m).map(|_| rng.gen_range(1..80) as f64 / 10.0).collect();
        let budget = rng.gen_range(1..40) as f64;
        let v = ranked(&means, &durs);
        let sel = select_shots(&v, budget).map_err(|e| e.to_string())?;

        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| means[b].partial_cmp(&means[a]).unwrap().then(a.cmp(&b)));
        // every prefix length, shortest one that reaches the budget
        let k = (1..=m)
            .find(|&k| order[..k].iter().map(|&i| durs[i]).sum::<f64>() >= budget)
            .unwrap_or(m);
        ensure(sel.selected_shot_ids == order[..k], || {
            format!("case {case}: {:?} != {:?}", sel.selected_shot_ids, &order[..k])
        })?;

        let warped: Vec<f64> = means.iter().map(|x| (5.0 * x).exp() / 3.0 - 2.0).collect();
        let sel2 = select_shots(&ranked(&warped, &durs), budget).map_err(|e| e.to_string())?;
        ensure(sel2.selected_shot_ids == sel.selected_shot_ids, || {
            format!("case {case}: selection changed under a monotone transform")
        })?;
    }
    within(Duration::from_secs(30), start)
}

// ---- 3: fusion identities -----------------------------------------------

fn criterion_3() -> Result<(), String> {
    let e = |r: adsum_core::Error| r.to_string();
    let iv = ImportanceVector::new(vec![0.1, 0.7, 0.33, 0.9]);
    let ia = ImportanceVector::new(vec![0.6, 0.2, 0.5, 0.05]);
    ensure(fuse_late(&iv, &ia, 1.0).map_err(e)? == iv, || "alpha=1 is not visual".into())?;
    ensure(fuse_late(&iv, &ia, 0.0).map_err(e)? == ia, || "alpha=0 is not audio".into())?;
    let half = fuse_late(&iv, &ia, 0.5).map_err(e)?;
    let hand = [0.35, 0.45, 0.415, 0.475];
    for (g, w) in half.scores.iter().zip(hand) {
        ensure((g - w).abs() < 1e-12, || format!("late fusion {g} != {w}"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut fm = |s| {
        let v: Vec<f32> = (0..5 * 7).map(|_| rng.gen_range(-2.0..2.0)).collect();
        FeatureMap::new(s, "x", 5, 7, v).unwrap()
    };
    let (fv, fa) = (fm(Stream::Visual), fm(Stream::Audio));
    ensure(fuse_early(&fv, &fa, 1.0).map_err(e)?.values == fv.values, || "beta=1 is not visual".into())?;
    ensure(fuse_early(&fv, &fa, 0.0).map_err(e)?.values == fa.values, || "beta=0 is not audio".into())?;
    for beta in [0.0, 0.13, 0.5, 0.77, 1.0] {
        ensure(fuse_early(&fv, &fv, beta).map_err(e)?.values == fv.values, || {
            format!("fv=fa is not the identity at beta={beta}")
        })?;
    }
    Ok(())
}

// ---- 4: loss and gradients ----------------------------------------------

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn criterion_4() -> Result<(), String> {
    let l = bce_loss(&[0.5, 0.5], &[1.0, 0.0]).map_err(|e| e.to_string())?;
    ensure((l - std::f64::consts::LN_2).abs() < 1e-9, || format!("bce = {l}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..50 {
        // loss gradient with respect to predictions
        let n = rng.gen_range(1..10);
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.02..0.98)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.gen_bool(0.5) as u8 as f64).collect();
        let an = bce_grad(&p, &g).unwrap();
        for i in 0..n {
            let h = 1e-6;
            let (mut up, mut dn) = (p.clone(), p.clone());
            up[i] += h;
            dn[i] -= h;
            let fd = (bce_loss(&up, &g).unwrap() - bce_loss(&dn, &g).unwrap()) / (2.0 * h);
            ensure(rel_err(an[i], fd) < 1e-4, || format!("case {case}: dL/dp {} vs {fd}", an[i]))?;
        }

        // end-to-end through attention, merge and head
        let (t, d) = (rng.gen_range(2..6), rng.gen_range(2..6));
        let x: Vec<f32> = (0..t * d).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let fm = FeatureMap::new(Stream::Visual, "x", t, d, x).unwrap();
        let y: Vec<f64> = (0..t).map(|_| rng.gen_bool(0.5) as u8 as f64).collect();
        let mut sc = Scorer::new(AttentionBackbone::RowLocal, d, true, case);
        for p in sc.params.iter_mut() {
            *p += rng.gen_range(-0.5..0.5);
        }
        let fw = sc.forward(&fm).unwrap();
        let grad = sc.backward(&fw, &bce_grad(&fw.scores, &y).unwrap()).unwrap();
        for k in 0..sc.params.len() {
            let h = 1e-5;
            let base = sc.params[k];
            sc.params[k] = base + h;
            let up = bce_loss(&sc.forward(&fm).unwrap().scores, &y).unwrap();
            sc.params[k] = base - h;
            let dn = bce_loss(&sc.forward(&fm).unwrap().scores, &y).unwrap();
            sc.params[k] = base;
            let fd = (up - dn) / (2.0 * h);
            if grad[k].abs().max(fd.abs()) < 1e-7 {
                continue;
            }
            ensure(rel_err(grad[k], fd) < 1e-4, || format!("case {case}: param {k}: {} vs {fd}", grad[k]))?;
        }
    }
    Ok(())
}

// ---- 5: overfit ---------------------------------------------------------

fn cv_video(index: usize, seed: u64) -> CvVideo {
    let p = synth_pair(&SynthConfig::default(), index, seed).unwrap();
    let pair = p.ad_pair();
    let v = &pair.long.video;
    let clips = clips_for_video(&v.video_id, &pair.long.shots, v.frame_count, v.fps, 12, 3).unwrap();
    let mut vb = create_visual_backend("pixel-proj-1024").unwrap();
    let mut ab = create_audio_backend("spectrum-proj-1024").unwrap();
    CvVideo {
        labels: labels_from_mapping(&pair).unwrap(),
        visual: Some(embed_visual(&clips, &p.long, &mut vb).unwrap()),
        audio: Some(embed_audio(&clips, p.long.audio(), ab.as_mut()).unwrap().features),
        pair,
        stride: 12,
    }
}

fn criterion_5() -> Result<(), String> {
    let start = Instant::now();
    let vids = [cv_video(0, 5), cv_video(1, 5)];
    let set: Vec<_> = vids.iter().map(CvVideo::training_video).collect();
    let tc = TrainConfig {
        epochs: 200,
        learning_rate: 0.001,
        batch_size: 1,
        ..Default::default()
    };
    let (model, report) = train(
        &set,
        &AttentionScorerConfig::default(),
        AttentionBackbone::RowLocal,
        FusionConfig::default(),
        &tc,
    )
    .map_err(|e| e.to_string())?;
    let loss = report.final_loss().unwrap_or(f64::NAN);
    ensure(loss < 0.05, || format!("final BCE {loss}"))?;
    for v in &vids {
        let long = &v.pair.long;
        let clip = model.predict(v.visual.as_ref(), v.audio.as_ref()).unwrap();
        let frames = clip.expand(long.video.frame_count, 12).unwrap();
        let scores = aggregate_shot_scores(&frames, &long.shots, long.video.fps).unwrap();
        let mut got = select_shots(&scores, 15.0).unwrap().selected_shot_ids;
        got.sort_unstable();
        let want: Vec<usize> = v.pair.mapping.as_ref().unwrap().positive_long_shots().into_iter().collect();
        ensure(got == want, || format!("{}: selected {got:?}, truth {want:?}", v.pair.pair_id))?;
    }
    within(Duration::from_secs(120), start)
}

// ---- 6: dataset construction oracle -------------------------------------

fn criterion_6() -> Result<(), String> {
    let cfg = SynthConfig {
        foreign_shots: 1,
        ..Default::default()
    };
    let (mut present, mut recovered) = (0, 0);
    for i in 0..10 {
        let p = synth_pair(&cfg, i, 6).map_err(|e| e.to_string())?;
        let mut pair = p.ad_pair();
        let out = match_shots(&pair.short, &pair.long, &p.short, &p.long, &MatchOptions::default())
            .map_err(|e| e.to_string())?;
        let got: BTreeMap<usize, usize> = out.mapping.entries.iter().map(|e| (e.short_shot, e.long_shot)).collect();
        for (s, l) in p.construction.iter().enumerate() {
            if let Some(l) = l {
                present += 1;
                recovered += (got.get(&s) == Some(l)) as usize;
            }
        }
        pair.mapping = Some(out.mapping);
        let labels = labels_from_mapping(&pair).map_err(|e| e.to_string())?;
        let frames: usize = pair
            .mapping
            .as_ref()
            .unwrap()
            .positive_long_shots()
            .iter()
            .map(|&l| pair.long.shots[l].frame_count())
            .sum();
        ensure(labels.positives() == frames, || {
            format!("pair {i}: {} positive frames, mapped shots hold {frames}", labels.positives())
        })?;
    }
    ensure(recovered == present, || format!("recovered {recovered} of {present} present shots"))
}

// ---- 7: sampling --------------------------------------------------------

fn criterion_7() -> Result<(), String> {
    let shots = shots_from_ranges(&[(0, 718)]);
    let set = clips_for_video("v", &shots, 719, 23.98, 12, 3).map_err(|e| e.to_string())?;
    ensure(set.len() == 60, || format!("T = {}", set.len()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..1000 {
        let n = rng.gen_range(1..800);
        let mut ranges = Vec::new();
        let mut s = 0;
        while s < n {
            let e = (s + rng.gen_range(0..40)).min(n - 1);
            ranges.push((s, e));
            s = e + 1;
        }
        let shots: Vec<Shot> = shots_from_ranges(&ranges);
        let hws = rng.gen_range(0..6);
        let stride = rng.gen_range(1..20);
        let set = clips_for_video("v", &shots, n, 25.0, stride, hws).map_err(|e| e.to_string())?;
        ensure(set.len() == n.div_ceil(stride), || format!("case {case}: {} clips", set.len()))?;
        for c in &set.clips {
            let shot = &shots[c.shot_id];
            ensure(c.frame_indices.len() == 2 * hws + 1, || format!("case {case}: window size"))?;
            ensure(shot.contains(c.focal_frame), || format!("case {case}: focal outside its shot"))?;
            ensure(c.frame_indices.iter().all(|&f| shot.contains(f)), || {
                format!("case {case}: clip {} leaves shot {}", c.clip_index, c.shot_id)
            })?;
            ensure(c.frame_indices.windows(2).all(|w| w[0] <= w[1]), || format!("case {case}: unordered"))?;
        }
    }
    Ok(())
}

// ---- 8: end-to-end reproducibility --------------------------------------

fn adsum(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_adsum"))
        .current_dir(dir)
        .env_remove("ADSUM_CACHE_DIR")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("adsum {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })
}

fn run_pipeline(dir: &Path) -> Result<(), String> {
    let common = ["--manifest", "data/manifest.json", "--cache-dir", "cache", "--output-dir", "out", "--seed", "8"];
    adsum(dir, &["synth", "--out", "in", "--pairs", "10", "--fixture-seed", "8"])?;
    adsum(dir, &["build-dataset", "--inputs", "in/pairs.json", "--out", "data", "--seed", "8"])?;
    for stage in [&["extract"][..], &["train"], &["predict"], &["clip", "--render"], &["evaluate", "--cv"]] {
        let args: Vec<&str> = common.iter().chain(stage).copied().collect();
        adsum(dir, &args)?;
    }
    Ok(())
}

fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_8() -> Result<(), String> {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    // same absolute location both times, since manifests record video paths
    let work = tmp.path().join("run");
    let mut runs = Vec::new();
    for _ in 0..2 {
        std::fs::create_dir_all(&work).unwrap();
        run_pipeline(&work)?;
        runs.push(snapshot(&work));
        std::fs::remove_dir_all(&work).unwrap();
    }
    let (a, b) = (&runs[0], &runs[1]);
    ensure(a.keys().eq(b.keys()), || "different file sets".into())?;
    let differing: Vec<&String> = a.iter().filter(|(k, v)| b[*k] != **v).map(|(k, _)| k).collect();
    ensure(differing.is_empty(), || format!("differ: {differing:?}"))?;
    for want in ["data/manifest.json", "out/checkpoint.json", "out/cv_report.json", "out/clips/pair000.cutlist.json"] {
        ensure(a.contains_key(want), || format!("missing {want}"))?;
    }
    within(Duration::from_secs(300), start)
}

// ---- 9: five-fold split -------------------------------------------------

fn criterion_9() -> Result<(), String> {
    let ids: Vec<String> = (0..102).map(|i| format!("pair{i:03}")).collect();
    let f = FoldSplit::from_ids(&ids, 5, 0).map_err(|e| e.to_string())?;
    let mut sizes: Vec<usize> = f.folds.iter().map(Vec::len).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    ensure(sizes == [21, 21, 20, 20, 20], || format!("sizes {sizes:?}"))?;
    let mut all: Vec<&String> = f.folds.iter().flatten().collect();
    all.sort();
    ensure(all.len() == 102 && all.iter().copied().eq(ids.iter()), || "not a partition".into())
}

// Written to the raw stream so the lines show up without --nocapture.
fn report(line: String) {
    use std::io::Write;
    let _ = writeln!(std::io::stderr(), "{line}");
}

#[test]
fn acceptance() {
    let checks: [(&str, Check); 9] = [
        ("metric oracles", criterion_1),
        ("greedy selection law", criterion_2),
        ("fusion identities", criterion_3),
        ("loss and gradients", criterion_4),
        ("overfit two videos", criterion_5),
        ("shot matching oracle", criterion_6),
        ("sampling arithmetic", criterion_7),
        ("pipeline reproducibility", criterion_8),
        ("five-fold split", criterion_9),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in checks.iter().enumerate() {
        let start = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let took = start.elapsed();
        match r {
            Ok(()) => report(format!("criterion {}: PASS  {name} ({took:.2?})", i + 1)),
            Err(e) => {
                report(format!("criterion {}: FAIL  {name} ({took:.2?}): {e}", i + 1));
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
