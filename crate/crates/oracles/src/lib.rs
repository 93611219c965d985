//! Deliberately naive reference implementations. Nothing here depends on
//! `btcxr-core`; inputs are plain tuples so the two sides share no code.

/// `[x_min, y_min, x_max, y_max]`
pub type Coords = [f64; 4];

pub mod raster {
    use super::Coords;

    fn covers(b: &Coords, x: f64, y: f64) -> bool {
        b[0] <= x && x <= b[2] && b[1] <= y && y <= b[3]
    }

    /// IoU from counting the cell centres of a `grid` x `grid` raster of the
    /// unit square covered by each box.
    pub fn iou(a: &Coords, b: &Coords, grid: usize) -> f64 {
        let (mut inter, mut union) = (0u64, 0u64);
        for i in 0..grid {
            let y = (i as f64 + 0.5) / grid as f64;
            if !(covers(a, a[0], y) || covers(b, b[0], y)) {
                continue;
            }
            for j in 0..grid {
                let x = (j as f64 + 0.5) / grid as f64;
                let (ia, ib) = (covers(a, x, y), covers(b, x, y));
                inter += (ia && ib) as u64;
                union += (ia || ib) as u64;
            }
        }
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Number of cell centres `(j + 0.5) / grid` inside `[lo, hi]`.
    fn centres(lo: f64, hi: f64, grid: usize) -> u64 {
        (0..grid)
            .filter(|&j| {
                let c = (j as f64 + 0.5) / grid as f64;
                lo <= c && c <= hi
            })
            .count() as u64
    }

    /// Same count as [`iou`], taken per axis: a centre lies in a rectangle
    /// iff its x and y coordinates each lie in the rectangle's extent.
    pub fn iou_separable(a: &Coords, b: &Coords, grid: usize) -> f64 {
        let area = |x0: f64, y0: f64, x1: f64, y1: f64| centres(x0, x1, grid) * centres(y0, y1, grid);
        let inter = area(a[0].max(b[0]), a[1].max(b[1]), a[2].min(b[2]), a[3].min(b[3]));
        let union = area(a[0], a[1], a[2], a[3]) + area(b[0], b[1], b[2], b[3]) - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    #[cfg(test)]
    mod tests {
        use super::*;
        use crate::gen::{unit_box, TestRng};

        #[test]
        fn separable_count_equals_cell_loop() {
            let mut rng = TestRng::new(5);
            for _ in 0..200 {
                let a = unit_box(&mut rng, 0.01);
                let b = unit_box(&mut rng, 0.01);
                assert_eq!(iou(&a, &b, 128), iou_separable(&a, &b, 128));
            }
        }
    }
}

/// IoU straight from the definition, for the other oracles.
pub fn plain_iou(a: &Coords, b: &Coords) -> f64 {
    let w = a[2].min(b[2]) - a[0].max(b[0]);
    let h = a[3].min(b[3]) - a[1].max(b[1]);
    if w <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let inter = w * h;
    let union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter;
    inter / union
}

pub mod wbf {
    use super::{plain_iou, Coords};

    #[derive(Debug, Clone)]
    pub struct InBox {
        pub class_id: u32,
        pub coords: Coords,
        pub score: f64,
        pub rater: Option<String>,
    }

    #[derive(Debug, Clone, PartialEq)]
    pub struct OutCluster {
        pub class_id: u32,
        /// Input positions in join order.
        pub members: Vec<usize>,
        pub coords: Coords,
        pub score: f64,
    }

    /// Replays the greedy definition one box at a time: pick the unvisited box
    /// with the highest `score * weight` (lowest index on ties), compare it
    /// against every cluster's current fused box of the same class, join the
    /// first cluster with the highest IoU above `thr` or open a new one, then
    /// recompute that cluster from all of its members.
    pub fn replay(boxes: &[InBox], thr: f64, weight: &dyn Fn(Option<&str>) -> f64, scaled: bool) -> Vec<OutCluster> {
        let w: Vec<f64> = boxes.iter().map(|b| b.score * weight(b.rater.as_deref())).collect();
        let mut raters: Vec<&str> = boxes.iter().filter_map(|b| b.rater.as_deref()).collect();
        raters.sort();
        raters.dedup();
        let r = raters.len().max(1);

        let mut classes: Vec<u32> = boxes.iter().map(|b| b.class_id).collect();
        classes.sort();
        classes.dedup();

        let mut all: Vec<OutCluster> = Vec::new();
        for c in classes {
            let mut visited = vec![false; boxes.len()];
            let mut clusters: Vec<OutCluster> = Vec::new();
            loop {
                let mut pick: Option<usize> = None;
                for i in 0..boxes.len() {
                    if visited[i] || boxes[i].class_id != c {
                        continue;
                    }
                    if pick.is_none() || w[i] > w[pick.unwrap()] {
                        pick = Some(i);
                    }
                }
                let Some(i) = pick else { break };
                visited[i] = true;

                let mut target: Option<usize> = None;
                let mut best = thr;
                for (k, cl) in clusters.iter().enumerate() {
                    let v = plain_iou(&boxes[i].coords, &cl.coords);
                    if v > best {
                        best = v;
                        target = Some(k);
                    }
                }
                let k = match target {
                    Some(k) => {
                        clusters[k].members.push(i);
                        k
                    }
                    None => {
                        clusters.push(OutCluster {
                            class_id: c,
                            members: vec![i],
                            coords: boxes[i].coords,
                            score: 0.0,
                        });
                        clusters.len() - 1
                    }
                };
                let cl = &mut clusters[k];
                let total: f64 = cl.members.iter().map(|&m| w[m]).sum();
                for d in 0..4 {
                    let num: f64 = cl
                        .members
                        .iter()
                        .map(|&m| if total > 0.0 { w[m] } else { 1.0 } * boxes[m].coords[d])
                        .sum();
                    let den = if total > 0.0 { total } else { cl.members.len() as f64 };
                    cl.coords[d] = num / den;
                }
            }
            for cl in &mut clusters {
                let n = cl.members.len();
                let mean = cl.members.iter().map(|&m| boxes[m].score).sum::<f64>() / n as f64;
                cl.score = if scaled { mean * n.min(r) as f64 / r as f64 } else { mean };
            }
            all.extend(clusters);
        }
        // descending score; equal scores keep class then creation order
        let mut ranked: Vec<(usize, OutCluster)> = all.into_iter().enumerate().collect();
        ranked.sort_by(|a, b| b.1.score.partial_cmp(&a.1.score).unwrap().then(a.0.cmp(&b.0)));
        ranked.into_iter().map(|(_, c)| c).collect()
    }

    /// Number of connected components of the graph linking same-class boxes
    /// whose pairwise IoU exceeds `thr`.
    pub fn connected_clusters(boxes: &[InBox], thr: f64) -> usize {
        let n = boxes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn root(p: &mut Vec<usize>, mut i: usize) -> usize {
            while p[i] != i {
                i = p[i];
            }
            i
        }
        for i in 0..n {
            for j in i + 1..n {
                if boxes[i].class_id == boxes[j].class_id && plain_iou(&boxes[i].coords, &boxes[j].coords) > thr {
                    let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
        (0..n).filter(|&i| root(&mut parent, i) == i).count()
    }
}

pub mod ap {
    use super::{plain_iou, Coords};

    /// Ground truth `(class, coords)` and detections `(class, coords, score)`
    /// for one image. Detection input order runs across images in sequence.
    pub type Image = (Vec<(u32, Coords)>, Vec<(u32, Coords, f64)>);

    /// Label the first `keep` detections of `ranked` (global ids) by matching
    /// them from scratch, image by image.
    fn label_prefix(scene: &[Image], ranked: &[(usize, usize)], keep: usize, class_id: u32, thr: f64) -> Vec<bool> {
        let mut taken: Vec<Vec<bool>> = scene.iter().map(|(g, _)| vec![false; g.len()]).collect();
        let mut out = Vec::new();
        for &(img, det) in &ranked[..keep] {
            let (gts, dets) = &scene[img];
            let d = &dets[det];
            let mut best: Option<usize> = None;
            let mut best_v = -1.0;
            for (g, gt) in gts.iter().enumerate() {
                if gt.0 != class_id || taken[img][g] {
                    continue;
                }
                let v = plain_iou(&d.1, &gt.1);
                if v >= thr && v > best_v {
                    best_v = v;
                    best = Some(g);
                }
            }
            if let Some(g) = best {
                taken[img][g] = true;
            }
            out.push(best.is_some());
        }
        out
    }

    /// Continuous AP by enumerating every score cut-off: for each prefix of
    /// the ranked detections the matching is redone from nothing and one
    /// (recall, precision) point recorded. The area uses the VOC sentinel
    /// construction. `None` when the class has no ground truth.
    pub fn exhaustive_ap(scene: &[Image], class_id: u32, thr: f64) -> Option<f64> {
        let npos: usize = scene.iter().map(|(g, _)| g.iter().filter(|x| x.0 == class_id).count()).sum();
        if npos == 0 {
            return None;
        }
        let mut ranked: Vec<(usize, usize, f64, usize)> = Vec::new();
        let mut global = 0;
        for (i, (_, dets)) in scene.iter().enumerate() {
            for (j, d) in dets.iter().enumerate() {
                if d.0 == class_id {
                    ranked.push((i, j, d.2, global));
                }
                global += 1;
            }
        }
        ranked.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.3.cmp(&b.3)));
        let ranked: Vec<(usize, usize)> = ranked.iter().map(|r| (r.0, r.1)).collect();

        let mut rec = vec![0.0];
        let mut prec = vec![0.0];
        for k in 1..=ranked.len() {
            let flags = label_prefix(scene, &ranked, k, class_id, thr);
            let tp = flags.iter().filter(|&&f| f).count();
            rec.push(tp as f64 / npos as f64);
            prec.push(tp as f64 / k as f64);
        }
        rec.push(1.0);
        prec.push(0.0);
        for i in (0..prec.len() - 1).rev() {
            prec[i] = prec[i].max(prec[i + 1]);
        }
        let mut area = 0.0;
        for i in 1..rec.len() {
            if rec[i] != rec[i - 1] {
                area += (rec[i] - rec[i - 1]) * prec[i];
            }
        }
        Some(area)
    }
}

/// Mann-Whitney statistic by comparing every positive with every negative.
pub fn pairwise_auc(labels: &[bool], scores: &[f64]) -> Option<f64> {
    let (mut wins, mut ties, mut pairs) = (0u64, 0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                wins += 1;
            } else if scores[i] == scores[j] {
                ties += 1;
            }
        }
    }
    if pairs == 0 {
        None
    } else {
        Some((wins as f64 + 0.5 * ties as f64) / pairs as f64)
    }
}

/// Central finite differences of `f` at `x` with step `h`.
pub fn central_difference(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Barlow Twins loss straight from the formula on row-major `n x d` inputs.
pub fn barlow_loss(za: &[f64], zb: &[f64], n: usize, d: usize, lambda: f64, eps: f64) -> f64 {
    let standardize = |z: &[f64]| {
        let mut out = vec![0.0; n * d];
        for j in 0..d {
            let mean = (0..n).map(|i| z[i * d + j]).sum::<f64>() / n as f64;
            let var = (0..n).map(|i| (z[i * d + j] - mean).powi(2)).sum::<f64>() / n as f64;
            for i in 0..n {
                out[i * d + j] = (z[i * d + j] - mean) / (var.sqrt() + eps);
            }
        }
        out
    };
    let (a, b) = (standardize(za), standardize(zb));
    let mut loss = 0.0;
    for p in 0..d {
        for q in 0..d {
            let c = (0..n).map(|i| a[i * d + p] * b[i * d + q]).sum::<f64>() / n as f64;
            loss += if p == q { (1.0 - c).powi(2) } else { lambda * c * c };
        }
    }
    loss
}

/// Random test-case generators with their own small generator, so test data
/// does not depend on the crate under test.
pub mod gen {
    use super::Coords;

    /// xorshift64*
    #[derive(Debug, Clone)]
    pub struct TestRng(u64);

    impl TestRng {
        pub fn new(seed: u64) -> Self {
            Self(seed.wrapping_mul(0x2545_F491_4F6C_DD1D) | 1)
        }

        pub fn next_u64(&mut self) -> u64 {
            self.0 ^= self.0 >> 12;
            self.0 ^= self.0 << 25;
            self.0 ^= self.0 >> 27;
            self.0.wrapping_mul(0x2545_F491_4F6C_DD1D)
        }

        /// Uniform in [0, 1).
        pub fn unit(&mut self) -> f64 {
            (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
        }

        pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
            lo + (hi - lo) * self.unit()
        }

        /// Uniform in 0..n.
        pub fn index(&mut self, n: usize) -> usize {
            (self.next_u64() % n as u64) as usize
        }

        pub fn chance(&mut self, p: f64) -> bool {
            self.unit() < p
        }
    }

    /// A valid box inside the unit square with sides in [min_side, 1).
    pub fn unit_box(rng: &mut TestRng, min_side: f64) -> Coords {
        let w = rng.range(min_side, 1.0);
        let h = rng.range(min_side, 1.0);
        let x = rng.range(0.0, 1.0 - w);
        let y = rng.range(0.0, 1.0 - h);
        [x, y, x + w, y + h]
    }

    /// A box jittered around `base`, clipped to the unit square.
    pub fn jittered(rng: &mut TestRng, base: &Coords, amount: f64) -> Coords {
        let mut c = [0.0; 4];
        for k in 0..4 {
            c[k] = (base[k] + rng.range(-amount, amount)).clamp(0.0, 1.0);
        }
        if c[2] - c[0] < 0.01 {
            c[2] = (c[0] + 0.01).min(1.0);
            c[0] = c[2] - 0.01;
        }
        if c[3] - c[1] < 0.01 {
            c[3] = (c[1] + 0.01).min(1.0);
            c[1] = c[3] - 0.01;
        }
        c
    }

    /// Scores drawn from a coarse grid half of the time so that ties occur.
    pub fn score(rng: &mut TestRng) -> f64 {
        if rng.chance(0.5) {
            rng.index(5) as f64 / 4.0
        } else {
            rng.unit()
        }
    }

    /// `(class, coords, score, rater)` for a multi-rater annotation scene:
    /// a few lesion centres, each drawn by several raters with jitter.
    pub fn rater_scene(rng: &mut TestRng, max_boxes: usize, max_classes: u32) -> Vec<(u32, Coords, f64, Option<String>)> {
        let n = 1 + rng.index(max_boxes);
        let anchors: Vec<(u32, Coords)> = (0..1 + rng.index(3))
            .map(|_| (rng.index(max_classes as usize) as u32, unit_box(rng, 0.05)))
            .collect();
        (0..n)
            .map(|_| {
                let (class, base) = anchors[rng.index(anchors.len())];
                let class = if rng.chance(0.15) { rng.index(max_classes as usize) as u32 } else { class };
                let rater = if rng.chance(0.9) { Some(format!("R{}", rng.index(4))) } else { None };
                (class, jittered(rng, &base, 0.08), score(rng), rater)
            })
            .collect()
    }

    /// A detection scene of 1 to 4 images with at most `max_boxes` boxes
    /// (ground truth plus detections) in total.
    pub fn detection_scene(rng: &mut TestRng, max_boxes: usize, max_classes: u32) -> Vec<super::ap::Image> {
        let n_images = 1 + rng.index(4);
        let mut scene: Vec<super::ap::Image> = vec![(Vec::new(), Vec::new()); n_images];
        let total = 1 + rng.index(max_boxes);
        let mut anchors: Vec<(usize, u32, Coords)> = Vec::new();
        for _ in 0..total {
            let img = rng.index(n_images);
            if anchors.is_empty() || rng.chance(0.4) {
                let class = rng.index(max_classes as usize) as u32;
                let c = unit_box(rng, 0.05);
                scene[img].0.push((class, c));
                anchors.push((img, class, c));
            } else {
                let (img, class, base) = anchors[rng.index(anchors.len())];
                let class = if rng.chance(0.1) { rng.index(max_classes as usize) as u32 } else { class };
                let c = if rng.chance(0.2) { unit_box(rng, 0.05) } else { jittered(rng, &base, 0.1) };
                scene[img].1.push((class, c, score(rng)));
            }
        }
        scene
    }
}
