//! Acceptance criteria 1-11. Run with
//! `cargo test -p btcxr-validation --test acceptance`; prints one line per
//! criterion and exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::ffi::{OsStr, OsString};
use std::path::{Path, PathBuf};

use ndarray::Array2;

use btcxr_cli::format_metric_cell;
use btcxr_core::barlow::fixture::toy_config;
use btcxr_core::barlow::loss::{bt_loss, bt_loss_gradient, DEFAULT_EPS};
use btcxr_core::barlow::{bt_train_toy, SampleSet};
use btcxr_core::ingest::{load_manifest, DatasetManifest, ImageRecord, Provenance, Source};
use btcxr_core::lineval::{evaluate_protocol, load_btfx, LinearConfig};
use btcxr_core::metrics::{average_precision, roc_auc, ApMode, DetectionScene};
use btcxr_core::stratify::{stratified_split, SplitSpec};
use btcxr_core::wbf::{fuse_image, FusionConfig};
use btcxr_core::{iou, BBox};
use btcxr_oracles::ap::{exhaustive_ap, Image};
use btcxr_oracles::gen::{detection_scene, rater_scene, unit_box, TestRng};
use btcxr_oracles::wbf::{replay, InBox};
use btcxr_oracles::{central_difference, pairwise_auc, raster};
use btcxr_validation::{run_all, Criterion, Outcome};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cli(args: &[&OsStr]) -> Result<(), String> {
    let mut argv: Vec<OsString> = vec!["btcxr".into()];
    argv.extend(args.iter().map(|a| a.to_os_string()));
    match btcxr_cli::run(&argv) {
        0 => Ok(()),
        code => Err(format!("`{}` exited {code}", argv.iter().map(|a| a.to_string_lossy()).collect::<Vec<_>>().join(" "))),
    }
}

macro_rules! args {
    ($($a:expr),* $(,)?) => { &[$(AsRef::<OsStr>::as_ref(&$a)),*] };
}

// 1

fn random_box(rng: &mut TestRng) -> [f64; 4] {
    loop {
        let (x0, x1) = (rng.unit(), rng.unit());
        let (y0, y1) = (rng.unit(), rng.unit());
        let c = [x0.min(x1), y0.min(y1), x0.max(x1), y0.max(y1)];
        if c[2] > c[0] && c[3] > c[1] {
            return c;
        }
    }
}

fn bbox(c: [f64; 4]) -> BBox {
    BBox::new(0, c, 1.0).unwrap()
}

fn iou_oracle() -> Outcome {
    let grid = 1024;
    let tol = 2.0 / grid as f64;
    let mut rng = TestRng::new(1);
    let (mut worst, mut over) = (0.0f64, 0);
    for _ in 0..10_000 {
        let (a, b) = (random_box(&mut rng), random_box(&mut rng));
        let err = (iou(&bbox(a), &bbox(b)) - raster::iou_separable(&a, &b, grid)).abs();
        worst = worst.max(err);
        over += (err > tol) as usize;
    }
    for _ in 0..1000 {
        let a = unit_box(&mut rng, 0.01);
        ensure(iou(&bbox(a), &bbox(a)) == 1.0 && raster::iou_separable(&a, &a, grid) == 1.0, || {
            format!("identity {a:?}")
        })?;
        // left and right halves of the square
        let (l, r) = (unit_box(&mut rng, 0.01), unit_box(&mut rng, 0.01));
        let left = [l[0] / 2.0, l[1], l[2] / 2.0, l[3]];
        let right = [0.5 + r[0] / 2.0, r[1], 0.5 + r[2] / 2.0, r[3]];
        ensure(iou(&bbox(left), &bbox(right)) == 0.0 && raster::iou_separable(&left, &right, grid) == 0.0, || {
            format!("disjoint {left:?} {right:?}")
        })?;
    }
    ensure(over == 0, || {
        format!("{over} of 10000 pairs exceed 2/1024 against the raster oracle; worst {:.1} cells", worst * grid as f64)
    })?;
    Ok(format!("worst {:.3} cells", worst * grid as f64))
}

// 2

fn wbf_oracle() -> Outcome {
    let cfg = FusionConfig::default();
    let mut clusters = 0;
    for seed in 0..1000u64 {
        let mut rng = TestRng::new(seed);
        let raw = rater_scene(&mut rng, 8, 3);
        let boxes: Vec<BBox> = raw
            .iter()
            .map(|(c, x, s, r)| BBox::new(*c, *x, *s).unwrap().with_rater_opt(r.clone()))
            .collect();
        let oracle: Vec<InBox> = raw
            .iter()
            .map(|(c, x, s, r)| InBox {
                class_id: *c,
                coords: *x,
                score: *s,
                rater: r.clone(),
            })
            .collect();
        let got = fuse_image(&boxes, &cfg).map_err(|e| e.to_string())?;
        let want = replay(&oracle, cfg.iou_threshold(), &|_| 1.0, false);
        ensure(got.len() == want.len(), || format!("scene {seed}: {} vs {} clusters", got.len(), want.len()))?;
        for (g, w) in got.iter().zip(&want) {
            ensure(g.fused.class_id() == w.class_id && g.member_indices == w.members, || {
                format!("scene {seed}: cluster membership differs")
            })?;
            for (a, b) in g.fused.coords().iter().zip(w.coords) {
                ensure((a - b).abs() <= 1e-12, || format!("scene {seed}: coordinate {a} vs {b}"))?;
            }
        }
        clusters += got.len();
    }
    Ok(format!("1000 scenes, {clusters} clusters identical"))
}

// 3

fn to_scene(images: &[Image]) -> DetectionScene {
    DetectionScene::from_pairs(
        images
            .iter()
            .map(|(g, d)| {
                (
                    g.iter().map(|(c, x)| BBox::new(*c, *x, 1.0).unwrap()).collect(),
                    d.iter().map(|(c, x, s)| BBox::new(*c, *x, *s).unwrap()).collect(),
                )
            })
            .collect(),
    )
}

fn map_oracle() -> Outcome {
    let mut compared = 0;
    for seed in 0..500u64 {
        let mut rng = TestRng::new(seed);
        let images = detection_scene(&mut rng, 10, 3);
        let scene = to_scene(&images);
        for class in 0..3 {
            let got = average_precision(&scene, class, 0.5, ApMode::Continuous);
            let want = exhaustive_ap(&images, class, 0.5);
            match (got, want) {
                (Some(g), Some(w)) => {
                    ensure((g - w).abs() <= 1e-9, || format!("scene {seed} class {class}: {g} vs {w}"))?;
                    compared += 1;
                }
                (None, None) => {}
                other => return Err(format!("scene {seed} class {class}: {other:?}")),
            }
        }
    }

    let gt = [0.0, 0.0, 0.5, 0.5];
    let one = |dets: Vec<([f64; 4], f64)>| {
        let scene = DetectionScene::from_pairs(vec![(
            vec![bbox(gt)],
            dets.into_iter().map(|(c, s)| BBox::new(0, c, s).unwrap()).collect(),
        )]);
        average_precision(&scene, 0, 0.5, ApMode::Continuous)
    };
    ensure(one(vec![([0.0, 0.0, 0.5, 0.45], 0.9)]) == Some(1.0), || "perfect detection".into())?;
    ensure(one(vec![]) == Some(0.0), || "no detections".into())?;
    // IoU 0.2 at score 0.9, IoU 0.8 at score 0.5
    ensure(one(vec![([0.0, 0.0, 0.5, 0.1], 0.9), ([0.0, 0.0, 0.5, 0.4], 0.5)]) == Some(0.5), || {
        "low-IoU detection ranked first".into()
    })?;
    Ok(format!("{compared} class APs within 1e-9; 3 worked examples exact"))
}

// 4

fn auc_mann_whitney() -> Outcome {
    let mut rng = TestRng::new(4);
    let (mut checked, mut worst) = (0, 0.0f64);
    while checked < 1000 {
        let n = 2 + rng.index(199);
        let labels: Vec<bool> = (0..n).map(|_| rng.chance(0.4)).collect();
        let scores: Vec<f64> = (0..n)
            .map(|_| if rng.chance(0.5) { rng.index(6) as f64 / 5.0 } else { rng.unit() })
            .collect();
        if let Some(want) = pairwise_auc(&labels, &scores) {
            let got = roc_auc(&labels, &scores).map_err(|e| e.to_string())?;
            worst = worst.max((got - want).abs());
            checked += 1;
        }
    }
    ensure(worst <= 1e-12, || format!("worst difference {worst:e}"))?;
    Ok(format!("1000 sets, worst difference {worst:e}"))
}

// 5

fn gradient_check() -> Outcome {
    let mut worst = 0.0f64;
    for t in 0..100u64 {
        let mut rng = TestRng::new(t + 5000);
        let (n, d) = (4 + rng.index(61), 2 + rng.index(31));
        let lambda = [0.0, 5e-3, 1.0][t as usize % 3];
        let za = Array2::from_shape_simple_fn((n, d), || rng.range(-1.0, 1.0));
        let zb = Array2::from_shape_simple_fn((n, d), || rng.range(-1.0, 1.0));
        let (ga, gb) = bt_loss_gradient(&za, &zb, lambda, DEFAULT_EPS).map_err(|e| e.to_string())?;
        let x: Vec<f64> = za.iter().chain(zb.iter()).copied().collect();
        let f = |v: &[f64]| {
            let a = Array2::from_shape_vec((n, d), v[..n * d].to_vec()).unwrap();
            let b = Array2::from_shape_vec((n, d), v[n * d..].to_vec()).unwrap();
            bt_loss(&a, &b, lambda, DEFAULT_EPS).unwrap().loss_total
        };
        let num = central_difference(&f, &x, 1e-6);
        let ana: Vec<f64> = ga.iter().chain(gb.iter()).copied().collect();
        let scale = ana.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, nu) in ana.iter().zip(&num) {
            let e = (a - nu).abs() / a.abs().max(nu.abs()).max(scale).max(f64::MIN_POSITIVE);
            worst = worst.max(e);
        }
    }
    ensure(worst < 1e-5, || format!("max relative error {worst:e}"))?;
    Ok(format!("100 instances, max relative error {worst:e}"))
}

// 6

fn toy_pretraining() -> Outcome {
    let data = SampleSet::load(&fixtures().join("bt_toy.bin")).map_err(|e| e.to_string())?;
    ensure((data.n, data.h * data.w) == (256, 16), || format!("fixture is {}x{}", data.n, data.h * data.w))?;
    let cfg = toy_config();
    let trace = bt_train_toy(&data, &cfg).map_err(|e| e.to_string())?;
    let (diag, off) = (trace.final_cc.mean_abs_diag_error(), trace.final_cc.mean_abs_offdiag());
    ensure(diag < 0.05, || format!("mean |C_ii - 1| = {diag:.4}"))?;
    ensure(off < 0.1, || format!("mean |C_ij| = {off:.4}"))?;
    for w in trace.epochs.windows(2) {
        ensure(w[1].loss_total <= w[0].loss_total, || format!("loss rose at epoch {}", w[1].epoch))?;
    }
    let again = bt_train_toy(&data, &cfg).map_err(|e| e.to_string())?;
    ensure(again == trace, || "second run differs".into())?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let csv = dir.path().join("trace.csv");
    cli(args![
        "bt-train", "--data", fixtures().join("bt_toy.bin"), "--dims", "16,8", "--lambda", "5e-3", "--lr", "0.05",
        "--epochs", "500", "--seed", "1", "--trace", csv,
    ])?;
    let from_cli = std::fs::read_to_string(&csv).map_err(|e| e.to_string())?;
    ensure(from_cli == trace.to_csv(), || "CLI trace differs from library trace".into())?;
    let golden = std::fs::read_to_string(fixtures().join("bt_toy_trace.csv")).map_err(|e| e.to_string())?;
    ensure(from_cli == golden, || "trace differs from the recorded golden trace".into())?;
    Ok(format!("diag {diag:.4}, off-diagonal {off:.4}, loss non-increasing over 500 epochs"))
}

// 7

fn stratified_fixture(rng: &mut TestRng) -> DatasetManifest {
    let n = 20 + rng.index(481);
    let n_labels = 1 + rng.index(14);
    let freq: Vec<f64> = (0..n_labels).map(|_| 0.02 + 0.4 * rng.unit() * rng.unit()).collect();
    let images = (0..n)
        .map(|i| {
            let mut r = ImageRecord::new(format!("img{i:04}"), 1, 1);
            r.labels = (0..n_labels as u32).filter(|&l| rng.chance(freq[l as usize])).collect();
            r
        })
        .collect();
    let names = (0..n_labels).map(|k| format!("L{k}")).collect();
    DatasetManifest::new(names, images, Provenance::new(Source::Nih)).unwrap()
}

fn stratification() -> Outcome {
    let fold_sets: [&[f64]; 3] = [&[0.8, 0.1, 0.1], &[0.7, 0.3], &[0.6, 0.2, 0.2]];
    let mut worst = 0.0f64;
    for trial in 0..50u64 {
        let mut rng = TestRng::new(trial + 7000);
        let m = stratified_fixture(&mut rng);
        let fractions = fold_sets[trial as usize % fold_sets.len()].to_vec();
        let names: Vec<String> = (0..fractions.len()).map(|k| format!("f{k}")).collect();
        let spec = SplitSpec::new(names.clone(), fractions.clone(), trial).map_err(|e| e.to_string())?;
        let split = stratified_split(&m, &spec).map_err(|e| e.to_string())?;

        let ids: BTreeSet<&str> = m.images.iter().map(|r| r.image_id.as_str()).collect();
        let assigned: BTreeSet<&str> = split.assignment.keys().map(String::as_str).collect();
        ensure(ids == assigned, || format!("trial {trial}: assignment is not a partition"))?;
        let fold_total: usize = names.iter().map(|f| split.fold(f).len()).sum();
        ensure(fold_total == m.len(), || format!("trial {trial}: folds overlap"))?;

        let mut totals: BTreeMap<u32, usize> = BTreeMap::new();
        for r in &m.images {
            for &l in &r.labels {
                *totals.entry(l).or_insert(0) += 1;
            }
        }
        for (&l, &total) in &totals {
            for (name, f) in names.iter().zip(&fractions) {
                let got = split.assignment.iter().filter(|(id, fold)| *fold == name && m.find(id).unwrap().labels.contains(&l)).count();
                let dev = (got as f64 - f * total as f64).abs();
                worst = worst.max(dev);
                ensure(dev <= 2.0, || format!("trial {trial} label {l} fold {name}: {got} vs {:.2}", f * total as f64))?;
            }
        }
        let rerun = stratified_split(&m, &spec).map_err(|e| e.to_string())?;
        ensure(rerun.to_json().unwrap() == split.to_json().unwrap(), || format!("trial {trial}: rerun differs"))?;
    }
    Ok(format!("50 fixtures, worst deviation {worst:.2}"))
}

// 8

fn linear_eval_trend() -> Outcome {
    let train = load_btfx(&fixtures().join("lineval_train.btfx")).map_err(|e| e.to_string())?;
    let test = load_btfx(&fixtures().join("lineval_test.btfx")).map_err(|e| e.to_string())?;
    let fractions = [0.01, 0.1, 1.0];
    let cfg = LinearConfig::default();
    let r = evaluate_protocol(&train, &test, &fractions, 5, &cfg, cfg.seed).map_err(|e| e.to_string())?;
    let means: Vec<f64> = r.summary.iter().map(|s| s.macro_auc.mean).collect();
    ensure(means.windows(2).all(|w| w[0] < w[1]), || format!("means not increasing: {means:?}"))?;
    let untrained = LinearConfig { epochs: 0, ..cfg };
    let u = evaluate_protocol(&train, &test, &fractions, 5, &untrained, cfg.seed).map_err(|e| e.to_string())?;
    ensure(u.cells.iter().all(|c| c.macro_auc == 0.5), || "untrained head macro AUC is not 0.5".into())?;
    Ok(format!(
        "macro AUC {} < {} < {}; untrained 0.5",
        format_metric_cell(means[0], (r.summary[0].macro_auc.min, r.summary[0].macro_auc.max)),
        format_metric_cell(means[1], (r.summary[1].macro_auc.min, r.summary[1].macro_auc.max)),
        format_metric_cell(means[2], (r.summary[2].macro_auc.min, r.summary[2].macro_auc.max)),
    ))
}

// 9

fn report_format() -> Outcome {
    let cases = [
        ((0.2502, (0.2476, 0.2528)), "0.2502 (0.2476,0.2528)"),
        ((0.13423, (0.13058, 0.13781)), "0.1342 (0.1306,0.1378)"),
    ];
    for ((v, ci), want) in cases {
        let got = format_metric_cell(v, ci);
        ensure(got == want, || format!("{got} != {want}"))?;
    }
    Ok("both table strings reproduced".into())
}

// 10

fn data_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().skip(1).map(str::to_string).collect()
}

fn check_schema(m: &DatasetManifest) -> Result<(), String> {
    m.validate().map_err(|e| e.to_string())?;
    for r in &m.images {
        for b in &r.boxes {
            let c = b.coords();
            ensure(c.iter().all(|v| (0.0..=1.0).contains(v)), || format!("{}: box outside unit square", r.image_id))?;
        }
    }
    Ok(())
}

fn ingest_counts() -> Outcome {
    let f = fixtures();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (vindr, nih) = (dir.path().join("vindr.json"), dir.path().join("nih.json"));
    cli(args!["ingest", "vindr", "--csv", f.join("vindr_mini.csv"), "--dims", f.join("vindr_mini_dims.csv"), "--out", vindr])?;
    cli(args!["ingest", "nih", "--csv", f.join("nih_mini.csv"), "--out", nih])?;

    let rows = data_rows(&f.join("vindr_mini.csv"));
    ensure(rows.len() == 10, || format!("VinDr fixture has {} rows", rows.len()))?;
    let distinct: HashSet<&str> = rows.iter().map(|r| r.split(',').next().unwrap()).collect();
    let boxed = rows.iter().filter(|r| !r.contains("No finding")).count();
    let mv = load_manifest(&vindr).map_err(|e| e.to_string())?;
    check_schema(&mv)?;
    ensure(mv.len() == distinct.len(), || format!("VinDr manifest has {} images, CSV {}", mv.len(), distinct.len()))?;
    ensure(mv.box_count() == boxed, || format!("VinDr manifest has {} boxes, CSV {boxed}", mv.box_count()))?;

    let rows = data_rows(&f.join("nih_mini.csv"));
    ensure(rows.len() == 10, || format!("NIH fixture has {} rows", rows.len()))?;
    let mn = load_manifest(&nih).map_err(|e| e.to_string())?;
    check_schema(&mn)?;
    ensure(mn.len() == rows.len(), || format!("NIH manifest has {} images", mn.len()))?;
    let mut detail = format!("fixtures: {} VinDr images, {} NIH images", mv.len(), mn.len());

    // full public tables, when provided
    if let (Ok(csv), Ok(dims)) = (std::env::var("BTCXR_VINDR_CSV"), std::env::var("BTCXR_VINDR_DIMS")) {
        let out = dir.path().join("vindr_full.json");
        cli(args!["ingest", "vindr", "--csv", csv, "--dims", dims, "--out", out])?;
        let n = load_manifest(&out).map_err(|e| e.to_string())?.len();
        ensure(n == 15_000, || format!("full VinDr manifest has {n} images"))?;
        detail.push_str("; full VinDr 15000");
    }
    if let Ok(csv) = std::env::var("BTCXR_NIH_CSV") {
        let out = dir.path().join("nih_full.json");
        cli(args!["ingest", "nih", "--csv", csv, "--out", out])?;
        let n = load_manifest(&out).map_err(|e| e.to_string())?.len();
        ensure(n == 112_120, || format!("full NIH manifest has {n} images"))?;
        detail.push_str("; full NIH 112120");
    }
    Ok(detail)
}

// 11

fn determinism_sweep() -> Outcome {
    let f = fixtures();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let p = |name: &str, tag: &str| d.join(format!("{tag}_{name}"));
    let runs = [("t1a", "1"), ("t1b", "1"), ("t8a", "8"), ("t8b", "8")];
    // inputs for downstream steps come from the first run
    let base = "t1a";
    let steps: Vec<(&str, Vec<&str>, Box<dyn Fn(&str) -> Vec<OsString>>)> = vec![
        ("ingest vindr", vec!["vindr.json"], Box::new(|t| {
            vec!["ingest".into(), "vindr".into(), "--csv".into(), f.join("vindr_mini.csv").into(), "--dims".into(),
                 f.join("vindr_mini_dims.csv").into(), "--out".into(), p("vindr.json", t).into()]
        })),
        ("ingest nih", vec!["nih.json"], Box::new(|t| {
            vec!["ingest".into(), "nih".into(), "--csv".into(), f.join("nih_mini.csv").into(), "--out".into(), p("nih.json", t).into()]
        })),
        ("fuse", vec!["fused.json"], Box::new(|t| {
            vec!["fuse".into(), "--in".into(), p("vindr.json", base).into(), "--out".into(), p("fused.json", t).into()]
        })),
        ("split", vec!["split.json"], Box::new(|t| {
            vec!["split".into(), "--in".into(), p("nih.json", base).into(), "--out".into(), p("split.json", t).into()]
        })),
        ("eval-det", vec!["det.json"], Box::new(|t| {
            vec!["eval-det".into(), "--gt".into(), p("fused.json", base).into(), "--pred".into(), f.join("det_preds.jsonl").into(),
                 "--out".into(), p("det.json", t).into()]
        })),
        ("eval-cls", vec!["cls.json"], Box::new(|t| {
            vec!["eval-cls".into(), "--gt".into(), p("nih.json", base).into(), "--pred".into(), f.join("cls_scores.jsonl").into(),
                 "--out".into(), p("cls.json", t).into()]
        })),
        ("bt-train", vec!["bt.json", "trace.csv"], Box::new(|t| {
            vec!["bt-train".into(), "--data".into(), f.join("bt_toy.bin").into(), "--trace".into(), p("trace.csv", t).into(),
                 "--out".into(), p("bt.json", t).into()]
        })),
        ("linear-eval", vec!["lin.json"], Box::new(|t| {
            vec!["linear-eval".into(), "--features".into(), f.join("lineval_train.btfx").into(), "--test".into(),
                 f.join("lineval_test.btfx").into(), "--out".into(), p("lin.json", t).into()]
        })),
        ("report", vec!["table.md"], Box::new(|t| {
            vec!["report".into(), "--in".into(), p("det.json", base).into(), "--out".into(), p("table.md", t).into()]
        })),
    ];
    for (name, outputs, argv) in &steps {
        for (tag, threads) in runs {
            let mut a = argv(tag);
            a.extend(["--threads".into(), threads.into()]);
            let refs: Vec<&OsStr> = a.iter().map(|s| s.as_os_str()).collect();
            cli(&refs).map_err(|e| format!("{name}: {e}"))?;
        }
        for out in outputs {
            let first = std::fs::read(p(out, base)).map_err(|e| e.to_string())?;
            for (tag, _) in &runs[1..] {
                let other = std::fs::read(p(out, tag)).map_err(|e| e.to_string())?;
                ensure(first == other, || format!("{name}: {out} differs between {base} and {tag}"))?;
            }
        }
    }
    Ok(format!("{} subcommands, 4 runs each (threads 1, 1, 8, 8), outputs byte-identical", steps.len()))
}

fn main() {
    let criteria = vec![
        Criterion::new(1, "IoU vs raster oracle", iou_oracle).within(5),
        Criterion::new(2, "WBF vs greedy replay", wbf_oracle).within(10),
        Criterion::new(3, "AP vs exhaustive enumeration", map_oracle).within(10),
        Criterion::new(4, "ROC-AUC vs pairwise count", auc_mann_whitney).within(5),
        Criterion::new(5, "loss gradient vs finite differences", gradient_check).within(30),
        Criterion::new(6, "toy pretraining", toy_pretraining).within(60),
        Criterion::new(7, "stratification quality", stratification),
        Criterion::new(8, "linear-eval trend", linear_eval_trend).within(120),
        Criterion::new(9, "report cell format", report_format),
        Criterion::new(10, "ingest schema and counts", ingest_counts),
        Criterion::new(11, "CLI determinism sweep", determinism_sweep),
    ];
    // numeric arguments select criteria by id
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: Vec<Criterion> = criteria.into_iter().filter(|c| wanted.is_empty() || wanted.contains(&c.id)).collect();
    if !run_all(&criteria) {
        std::process::exit(1);
    }
}
