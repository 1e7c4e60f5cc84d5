//! Geometric IoU and semantic mIoU over occupancy grids.
//!
//! Ground-truth noise voxels are excluded from every count. Classes absent
//! from both prediction and ground truth are left out of the mIoU mean
//! unless `strict_n_classes` is set, in which case they count as zero.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{OccError, Result};
use crate::grid::{LabelMap, OccupancyGrid, EMPTY, NOISE};

/// `counts[g][p]` over labels `0..n`, row = ground truth, column = prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n: usize,
    counts: Vec<u64>,
    ignored: u64,
}

impl ConfusionMatrix {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            counts: vec![0; n * n],
            ignored: 0,
        }
    }

    /// Number of labels tracked, empty included.
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        if gt < self.n && pred < self.n {
            self.counts[gt * self.n + pred]
        } else {
            0
        }
    }

    pub fn ignored_count(&self) -> u64 {
        self.ignored
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.ignored
    }

    fn add(&mut self, other: &Self) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.ignored += other.ignored;
    }

    /// (TP, FP, FN) of one class.
    pub fn class_counts(&self, class: usize) -> (u64, u64, u64) {
        let tp = self.get(class, class);
        let row: u64 = (0..self.n).map(|p| self.get(class, p)).sum();
        let col: u64 = (0..self.n).map(|g| self.get(g, class)).sum();
        (tp, col - tp, row - tp)
    }
}

/// Accumulates `pred` against `gt`. `pred` must not contain noise.
pub fn confusion(pred: &OccupancyGrid, gt: &OccupancyGrid) -> Result<ConfusionMatrix> {
    if pred.spec() != gt.spec() {
        return Err(OccError::IncompatibleGrid(format!(
            "prediction lattice {:?} differs from ground truth {:?}",
            pred.spec(),
            gt.spec()
        )));
    }
    if pred.labels().contains(&NOISE) {
        return Err(OccError::Precondition("prediction contains noise labels".into()));
    }
    let max = |g: &OccupancyGrid| {
        g.labels()
            .iter()
            .filter(|&&l| l != NOISE)
            .max()
            .copied()
            .unwrap_or(0)
    };
    let n = max(pred).max(max(gt)) as usize + 1;
    const CHUNK: usize = 1 << 16;
    let cm = pred
        .labels()
        .par_chunks(CHUNK)
        .zip(gt.labels().par_chunks(CHUNK))
        .map(|(p, g)| {
            let mut cm = ConfusionMatrix::new(n);
            for (&p, &g) in p.iter().zip(g) {
                if g == NOISE {
                    cm.ignored += 1;
                } else {
                    cm.counts[g as usize * n + p as usize] += 1;
                }
            }
            cm
        })
        .reduce(
            || ConfusionMatrix::new(n),
            |mut a, b| {
                a.add(&b);
                a
            },
        );
    Ok(cm)
}

/// Occupied-vs-empty IoU. Returns 1.0 when neither grid has any occupied
/// (non-ignored) voxel.
pub fn geometric_iou(cm: &ConfusionMatrix) -> f64 {
    let e = EMPTY as usize;
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    for g in 0..cm.n {
        for p in 0..cm.n {
            let c = cm.get(g, p);
            match (g != e, p != e) {
                (true, true) => tp += c,
                (false, true) => fp += c,
                (true, false) => fn_ += c,
                _ => {}
            }
        }
    }
    let denom = tp + fp + fn_;
    if denom == 0 {
        1.0
    } else {
        tp as f64 / denom as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanIou {
    pub miou: f64,
    /// IoU of classes `1..=N`; `None` for classes absent from both grids.
    pub per_class: Vec<Option<f64>>,
}

/// Mean IoU over the classes of `labels`, skipping absent classes.
pub fn mean_iou(cm: &ConfusionMatrix, labels: &LabelMap) -> Result<MeanIou> {
    mean_iou_with(cm, labels, false)
}

/// With `strict_n_classes`, absent classes contribute IoU 0 and the mean is
/// over all `N` classes.
pub fn mean_iou_with(cm: &ConfusionMatrix, labels: &LabelMap, strict_n_classes: bool) -> Result<MeanIou> {
    let n = labels.num_classes();
    if let Some(extra) = (n + 1..cm.n).find(|&c| {
        let (tp, fp, fn_) = cm.class_counts(c);
        tp + fp + fn_ > 0
    }) {
        return Err(OccError::Precondition(format!(
            "class {extra} is not in the label map ({n} classes)"
        )));
    }
    let per_class: Vec<Option<f64>> = (1..=n)
        .map(|c| {
            let (tp, fp, fn_) = cm.class_counts(c);
            let denom = tp + fp + fn_;
            (denom > 0).then(|| tp as f64 / denom as f64)
        })
        .collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(OccError::UndefinedMetric(
            "no class occurs in either grid".into(),
        ));
    }
    let miou = if strict_n_classes {
        present.iter().sum::<f64>() / n as f64
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };
    Ok(MeanIou { miou, per_class })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassIou {
    pub id: u8,
    pub name: String,
    pub iou: Option<f64>,
}

/// Everything `eval` reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub iou: f64,
    pub miou: f64,
    pub strict_n_classes: bool,
    pub compared_voxels: u64,
    pub ignored_voxels: u64,
    pub classes: Vec<ClassIou>,
}

impl EvalReport {
    pub fn from_grids(pred: &OccupancyGrid, gt: &OccupancyGrid, labels: &LabelMap, strict_n_classes: bool) -> Result<Self> {
        let cm = confusion(pred, gt)?;
        let m = mean_iou_with(&cm, labels, strict_n_classes)?;
        Ok(Self {
            iou: geometric_iou(&cm),
            miou: m.miou,
            strict_n_classes,
            compared_voxels: cm.total() - cm.ignored_count(),
            ignored_voxels: cm.ignored_count(),
            classes: m
                .per_class
                .iter()
                .enumerate()
                .map(|(i, &iou)| {
                    let id = (i + 1) as u8;
                    ClassIou {
                        id,
                        name: labels.name_of(id).unwrap_or_default().to_string(),
                        iou,
                    }
                })
                .collect(),
        })
    }

    /// One `key=value` per line; absent classes print `nan`.
    pub fn to_key_value(&self) -> String {
        let mut out = format!(
            "iou={}\nmiou={}\nstrict_n_classes={}\ncompared_voxels={}\nignored_voxels={}\n",
            self.iou, self.miou, self.strict_n_classes, self.compared_voxels, self.ignored_voxels
        );
        for c in &self.classes {
            match c.iou {
                Some(v) => out.push_str(&format!("iou.{}={}\n", c.name, v)),
                None => out.push_str(&format!("iou.{}=nan\n", c.name)),
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::Point3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn grid(labels: Vec<u8>) -> OccupancyGrid {
        let spec = GridSpec::new(Point3::origin(), [labels.len(), 1, 1], 0.2).unwrap();
        OccupancyGrid::from_labels(spec, labels).unwrap()
    }

    fn random_pair(seed: u64, n: usize) -> (OccupancyGrid, OccupancyGrid) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pred = (0..n).map(|_| if rng.gen_bool(0.5) { 0 } else { rng.gen_range(1..=7) }).collect();
        let gt = (0..n)
            .map(|_| match rng.gen_range(0..10) {
                0 => NOISE,
                1..=4 => 0,
                _ => rng.gen_range(1..=7),
            })
            .collect();
        (grid(pred), grid(gt))
    }

    #[test]
    fn diagonal_and_ignored() {
        let g = grid(vec![0, 1, 2, 2, 3]);
        let cm = confusion(&g, &g).unwrap();
        for a in 0..cm.size() {
            for b in 0..cm.size() {
                if a != b {
                    assert_eq!(cm.get(a, b), 0);
                }
            }
        }
        assert_eq!(cm.get(2, 2), 2);
        let noise = grid(vec![NOISE; 5]);
        let cm = confusion(&g, &noise).unwrap();
        assert_eq!((cm.ignored_count(), cm.total()), (5, 5));
        assert!(confusion(&noise, &g).is_err());
        assert!(matches!(confusion(&g, &grid(vec![0; 4])), Err(OccError::IncompatibleGrid(_))));
    }

    #[test]
    fn hand_four_voxel_case() {
        let map = LabelMap::default();
        let cm = confusion(&grid(vec![1, 1, 1, 1]), &grid(vec![1, 1, 2, 2])).unwrap();
        let m = mean_iou(&cm, &map).unwrap();
        assert_eq!(m.per_class[0], Some(0.5));
        assert_eq!(m.per_class[1], Some(0.0));
        assert_eq!(m.miou, 0.25);
        let strict = mean_iou_with(&cm, &map, true).unwrap();
        assert_eq!(strict.miou, 0.5 / 7.0);
    }

    #[test]
    fn simple_iou_cases() {
        let map = LabelMap::default();
        let g = grid(vec![0, 1, 2, 0]);
        let cm = confusion(&g, &g).unwrap();
        assert_eq!(geometric_iou(&cm), 1.0);
        assert_eq!(mean_iou(&cm, &map).unwrap().miou, 1.0);
        let cm = confusion(&grid(vec![1, 1, 0, 0]), &grid(vec![0, 0, 3, 3])).unwrap();
        assert_eq!(geometric_iou(&cm), 0.0);
        let empty = grid(vec![0; 4]);
        let cm = confusion(&empty, &empty).unwrap();
        assert_eq!(geometric_iou(&cm), 1.0);
        assert!(matches!(mean_iou(&cm, &map), Err(OccError::UndefinedMetric(_))));
    }

    #[test]
    fn set_oracles() {
        let map = LabelMap::default();
        for seed in 0..20 {
            let (pred, gt) = random_pair(seed, 3000);
            let cm = confusion(&pred, &gt).unwrap();
            // loop oracle for the matrix
            let mut counts = vec![[0u64; 8]; 8];
            let mut ignored = 0;
            for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
                if g == NOISE {
                    ignored += 1;
                } else {
                    counts[g as usize][p as usize] += 1;
                }
            }
            assert_eq!(cm.ignored_count(), ignored);
            for g in 0..8 {
                for p in 0..8 {
                    assert_eq!(cm.get(g, p), counts[g][p]);
                }
            }
            let keep: Vec<usize> = (0..gt.labels().len()).filter(|&i| gt.labels()[i] != NOISE).collect();
            let set = |g: &OccupancyGrid, f: &dyn Fn(u8) -> bool| -> HashSet<usize> {
                keep.iter().copied().filter(|&i| f(g.labels()[i])).collect()
            };
            let a = set(&pred, &|l| l != 0);
            let b = set(&gt, &|l| l != 0);
            let want = a.intersection(&b).count() as f64 / a.union(&b).count() as f64;
            assert!((geometric_iou(&cm) - want).abs() < 1e-12);
            let mut ious = Vec::new();
            for c in 1..=7u8 {
                let a = set(&pred, &|l| l == c);
                let b = set(&gt, &|l| l == c);
                let u = a.union(&b).count();
                if u > 0 {
                    ious.push(a.intersection(&b).count() as f64 / u as f64);
                }
            }
            let want = ious.iter().sum::<f64>() / ious.len() as f64;
            assert!((mean_iou(&cm, &map).unwrap().miou - want).abs() < 1e-12);
        }
    }

    #[test]
    fn report_formats() {
        let map = LabelMap::default();
        let r = EvalReport::from_grids(&grid(vec![1, 1, 1, 1]), &grid(vec![1, 1, 2, 2]), &map, false).unwrap();
        let kv = r.to_key_value();
        assert!(kv.contains("miou=0.25\n"));
        assert!(kv.contains("iou.grass=0.5\n"));
        assert!(kv.contains("iou.bush=nan\n"));
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["miou"], 0.25);
        assert_eq!(v["classes"][0]["name"], "grass");
        assert!(v["classes"][2]["iou"].is_null());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn iou_is_symmetric(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = grid((0..500).map(|_| rng.gen_range(0..4)).collect());
            let b = grid((0..500).map(|_| rng.gen_range(0..4)).collect());
            prop_assert_eq!(geometric_iou(&confusion(&a, &b).unwrap()), geometric_iou(&confusion(&b, &a).unwrap()));
        }

        #[test]
        fn storage_order_does_not_matter(seed in 0u64..10_000) {
            let (pred, gt) = random_pair(seed, 400);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let mut perm: Vec<usize> = (0..400).collect();
            for i in (1..400).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            let p2 = grid(perm.iter().map(|&i| pred.labels()[i]).collect());
            let g2 = grid(perm.iter().map(|&i| gt.labels()[i]).collect());
            prop_assert_eq!(confusion(&pred, &gt).unwrap(), confusion(&p2, &g2).unwrap());
        }

        #[test]
        fn fixing_a_voxel_never_hurts_its_class(seed in 0u64..10_000) {
            let (pred, gt) = random_pair(seed, 300);
            let map = LabelMap::default();
            let wrong = (0..300).find(|&i| gt.labels()[i] != NOISE && gt.labels()[i] != 0 && pred.labels()[i] != gt.labels()[i]);
            if let Some(i) = wrong {
                let c = gt.labels()[i];
                let before = mean_iou(&confusion(&pred, &gt).unwrap(), &map).unwrap();
                let mut fixed = pred.labels().to_vec();
                fixed[i] = c;
                let after = mean_iou(&confusion(&grid(fixed), &gt).unwrap(), &map).unwrap();
                prop_assert!(after.per_class[c as usize - 1].unwrap() >= before.per_class[c as usize - 1].unwrap());
            }
        }
    }
}
