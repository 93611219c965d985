use std::collections::BTreeMap;

use btcxr_core::ingest::{DatasetManifest, ImageRecord, Provenance, Source};
use btcxr_core::wbf::{fuse_image, fuse_manifest, FusionConfig, ScoreMode};
use btcxr_core::BBox;
use btcxr_oracles::gen::{rater_scene, TestRng};
use btcxr_oracles::wbf::{connected_clusters, replay, InBox};
use proptest::prelude::*;

fn to_boxes(raw: &[(u32, [f64; 4], f64, Option<String>)]) -> Vec<BBox> {
    raw.iter()
        .map(|(c, coords, s, r)| BBox::new(*c, *coords, *s).unwrap().with_rater_opt(r.clone()))
        .collect()
}

fn to_oracle(raw: &[(u32, [f64; 4], f64, Option<String>)]) -> Vec<InBox> {
    raw.iter()
        .map(|(c, coords, s, r)| InBox {
            class_id: *c,
            coords: *coords,
            score: *s,
            rater: r.clone(),
        })
        .collect()
}

fn check_against_replay(seed: u64, cfg: &FusionConfig) {
    let mut rng = TestRng::new(seed);
    let raw = rater_scene(&mut rng, 8, 3);
    let got = fuse_image(&to_boxes(&raw), cfg).unwrap();
    let weights = cfg.rater_weights().clone();
    let weight = move |r: Option<&str>| r.and_then(|r| weights.get(r)).copied().unwrap_or(1.0);
    let want = replay(
        &to_oracle(&raw),
        cfg.iou_threshold(),
        &weight,
        cfg.score_mode() == ScoreMode::MeanScaledByRaterCount,
    );
    assert_eq!(got.len(), want.len(), "seed {seed}: cluster count");
    for (g, w) in got.iter().zip(&want) {
        assert_eq!(g.fused.class_id(), w.class_id, "seed {seed}");
        assert_eq!(g.member_indices, w.members, "seed {seed}");
        for (a, b) in g.fused.coords().iter().zip(w.coords) {
            assert!((a - b).abs() <= 1e-12, "seed {seed}: {a} vs {b}");
        }
        assert!((g.fused.score() - w.score).abs() <= 1e-12, "seed {seed}");
    }
}

#[test]
fn matches_greedy_replay_default_config() {
    let cfg = FusionConfig::default();
    for seed in 0..1000 {
        check_against_replay(seed, &cfg);
    }
}

#[test]
fn matches_greedy_replay_with_weights_and_scaling() {
    let weights = BTreeMap::from([("R0".to_string(), 2.0), ("R2".to_string(), 0.5)]);
    for (thr, mode) in [(0.2, ScoreMode::MeanScaledByRaterCount), (0.55, ScoreMode::Mean), (1.0, ScoreMode::Mean)] {
        let cfg = FusionConfig::new(thr, weights.clone(), mode).unwrap();
        for seed in 0..300 {
            check_against_replay(seed + 10_000, &cfg);
        }
    }
}

#[test]
fn three_raters_on_one_lesion_fuse_to_one_box() {
    let mut images = Vec::new();
    for i in 0..5 {
        let base = [0.1 + 0.05 * i as f64, 0.2, 0.5 + 0.05 * i as f64, 0.6];
        let mut rec = ImageRecord::new(format!("img{i}"), 512, 512);
        for (r, d) in [("R8", 0.0), ("R9", 0.01), ("R10", -0.01)] {
            let c = [base[0] + d, base[1] - d, base[2] + d, base[3]];
            rec.boxes.push(BBox::new(1, c, 1.0).unwrap().with_rater(r));
        }
        let oracle: Vec<InBox> = rec
            .boxes
            .iter()
            .map(|b| InBox {
                class_id: b.class_id(),
                coords: b.coords(),
                score: b.score(),
                rater: b.rater_id().map(String::from),
            })
            .collect();
        assert_eq!(connected_clusters(&oracle, 0.4), 1);
        images.push(rec);
    }
    let m = DatasetManifest::new(vec!["A".into(), "B".into()], images, Provenance::new(Source::Vindr)).unwrap();
    let fused = fuse_manifest(&m, &FusionConfig::default()).unwrap();
    for rec in &fused.images {
        assert_eq!(rec.boxes.len(), 1);
        assert_eq!(rec.boxes[0].rater_id(), None);
        assert_eq!(rec.boxes[0].score(), 1.0);
    }
}

#[test]
fn histogram_never_grows_on_rater_scenes() {
    let mut rng = TestRng::new(77);
    let images: Vec<ImageRecord> = (0..200)
        .map(|i| {
            let mut rec = ImageRecord::new(format!("img{i:03}"), 1024, 1024);
            rec.boxes = to_boxes(&rater_scene(&mut rng, 12, 4));
            rec
        })
        .collect();
    let names = (0..4).map(|k| format!("c{k}")).collect();
    let m = DatasetManifest::new(names, images, Provenance::new(Source::Vindr)).unwrap();
    let fused = fuse_manifest(&m, &FusionConfig::default()).unwrap();
    let (before, after) = (m.box_histogram(), fused.box_histogram());
    for (b, a) in before.iter().zip(&after) {
        assert!(a <= b, "{before:?} -> {after:?}");
    }
    assert!(after.iter().sum::<usize>() < before.iter().sum::<usize>());
    assert_eq!(fused.provenance.entries["wbf.iou_threshold"], "0.4");
}

#[test]
fn images_without_boxes_pass_through() {
    let mut rec = ImageRecord::new("a", 10, 10);
    rec.labels.insert(0);
    let m = DatasetManifest::new(vec!["A".into()], vec![rec.clone()], Provenance::new(Source::Nih)).unwrap();
    let fused = fuse_manifest(&m, &FusionConfig::default()).unwrap();
    assert_eq!(fused.images[0], rec);
}

fn raw_scene() -> impl Strategy<Value = Vec<(u32, [f64; 4], f64, Option<String>)>> {
    any::<u64>().prop_map(|s| rater_scene(&mut TestRng::new(s), 10, 3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fused_box_inside_member_envelope(raw in raw_scene()) {
        for cl in fuse_image(&to_boxes(&raw), &FusionConfig::default()).unwrap() {
            let f = cl.fused.coords();
            for k in 0..4 {
                let lo = cl.members.iter().map(|m| m.coords()[k]).fold(f64::INFINITY, f64::min);
                let hi = cl.members.iter().map(|m| m.coords()[k]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(lo <= f[k] && f[k] <= hi);
            }
            prop_assert!(cl.members.iter().all(|m| m.class_id() == cl.fused.class_id()));
        }
    }

    #[test]
    fn count_is_monotone_and_partitions_input(raw in raw_scene()) {
        let boxes = to_boxes(&raw);
        let out = fuse_image(&boxes, &FusionConfig::default()).unwrap();
        prop_assert!(out.len() <= boxes.len());
        let mut seen: Vec<usize> = out.iter().flat_map(|c| c.member_indices.clone()).collect();
        seen.sort();
        prop_assert_eq!(seen, (0..boxes.len()).collect::<Vec<_>>());
        for w in out.windows(2) {
            prop_assert!(w[0].fused.score() >= w[1].fused.score());
        }
    }

    #[test]
    fn equal_weights_give_arithmetic_mean(raw in raw_scene()) {
        let boxes: Vec<BBox> = to_boxes(&raw).into_iter().map(|b| b.with_score(0.5).unwrap()).collect();
        for cl in fuse_image(&boxes, &FusionConfig::default()).unwrap() {
            let n = cl.members.len() as f64;
            for k in 0..4 {
                let mean = cl.members.iter().map(|m| m.coords()[k]).sum::<f64>() / n;
                prop_assert!((cl.fused.coords()[k] - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn count_equal_iff_nothing_merged(raw in raw_scene()) {
        let boxes = to_boxes(&raw);
        let out = fuse_image(&boxes, &FusionConfig::default()).unwrap();
        let merged = out.iter().any(|c| c.members.len() > 1);
        prop_assert_eq!(out.len() == boxes.len(), !merged);
    }
}
