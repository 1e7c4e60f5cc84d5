//! Voxel-space feature kernels: pose-based temporal alignment, temporal
//! concatenation, the Conv3d-BN-ReLU voxel encoder, sigmoid-gated fusion,
//! the masked cosine distillation loss, cross-entropy and the total loss.
//!
//! All kernels are pure and computed in `f64`.

use rayon::prelude::*;

use crate::error::{OccError, Result};
use crate::grid::{FeatureVolume, GridSpec, OccupancyGrid, EMPTY, NOISE};
use crate::pose::RigidPose;

/// Vectors with a norm below this contribute zero cosine similarity.
pub const ZERO_NORM: f64 = 1e-12;

/// History used by temporal alignment: `frames` volumes (current included)
/// spaced `interval` seconds apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalWindowConfig {
    pub frames: usize,
    pub interval: f64,
}

impl Default for TemporalWindowConfig {
    fn default() -> Self {
        Self {
            frames: 4,
            interval: 0.5,
        }
    }
}

impl TemporalWindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 || !(self.interval > 0.0) {
            return Err(OccError::Config(format!(
                "temporal window needs frames >= 1 and interval > 0, got {} / {}",
                self.frames, self.interval
            )));
        }
        Ok(())
    }

    /// Frame indices for the window ending at `current`, oldest first. Each
    /// history slot takes the frame closest to `t - i·interval` that is older
    /// than the slot after it; slots before the sequence start repeat the
    /// oldest frame.
    pub fn select(&self, timestamps: &[f64], current: usize) -> Result<Vec<usize>> {
        self.validate()?;
        if current >= timestamps.len() {
            return Err(OccError::Precondition(format!(
                "frame {current} outside sequence of {}",
                timestamps.len()
            )));
        }
        let t = timestamps[current];
        let mut out = vec![current];
        let mut newest = current;
        for i in 1..self.frames {
            let target = t - i as f64 * self.interval;
            let pick = (0..newest)
                .min_by(|&a, &b| {
                    (timestamps[a] - target)
                        .abs()
                        .total_cmp(&(timestamps[b] - target).abs())
                        .then(b.cmp(&a))
                })
                .unwrap_or(newest);
            out.push(pick);
            newest = pick;
        }
        out.reverse();
        Ok(out)
    }
}

/// Inference-mode Conv3d(3×3×3, stride 1, padding 1) + BatchNorm + ReLU.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConvBnReluWeights {
    pub c_out: usize,
    pub c_in: usize,
    /// `c_out × c_in × 3 × 3 × 3`, taps ordered x, y, z.
    pub kernel: Vec<f64>,
    pub bias: Vec<f64>,
    pub bn_mean: Vec<f64>,
    pub bn_var: Vec<f64>,
    pub bn_gamma: Vec<f64>,
    pub bn_beta: Vec<f64>,
    pub eps: f64,
}

impl ConvBnReluWeights {
    /// Center tap 1 on the diagonal, zero bias, unit BN.
    pub fn identity(channels: usize) -> Self {
        let mut kernel = vec![0.0; channels * channels * 27];
        for c in 0..channels {
            kernel[(c * channels + c) * 27 + 13] = 1.0;
        }
        Self {
            c_out: channels,
            c_in: channels,
            kernel,
            bias: vec![0.0; channels],
            bn_mean: vec![0.0; channels],
            bn_var: vec![1.0; channels],
            bn_gamma: vec![1.0; channels],
            bn_beta: vec![0.0; channels],
            eps: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let shape_ok = self.kernel.len() == self.c_out * self.c_in * 27
            && [&self.bias, &self.bn_mean, &self.bn_var, &self.bn_gamma, &self.bn_beta]
                .iter()
                .all(|v| v.len() == self.c_out);
        if !shape_ok || self.c_out == 0 || self.c_in == 0 {
            return Err(OccError::IncompatibleShape(format!(
                "encoder weights inconsistent with c_out={} c_in={}",
                self.c_out, self.c_in
            )));
        }
        if self.bn_var.iter().any(|&v| !(v >= 0.0)) || !(self.eps >= 0.0) {
            return Err(OccError::IncompatibleShape("BN variance and eps must be non-negative".into()));
        }
        if self
            .bn_var
            .iter()
            .any(|&v| v + self.eps <= 0.0)
        {
            return Err(OccError::IncompatibleShape("BN variance + eps must be positive".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn tap(&self, o: usize, c: usize, dx: usize, dy: usize, dz: usize) -> f64 {
        self.kernel[(((o * self.c_in + c) * 3 + dx) * 3 + dy) * 3 + dz]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub lambda: f64,
    /// Multiplies the masked cosine mean; `-1` makes minimization increase
    /// similarity.
    pub distill_sign: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda: 0.8,
            distill_sign: -1.0,
        }
    }
}

/// Per-voxel boolean volume.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelMask {
    pub spec: GridSpec,
    pub mask: Vec<bool>,
}

impl VoxelMask {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Re-expresses `src` (observed at ego pose `pose_src`) in the ego frame of
/// `pose_tgt`. Both poses map ego to world. Each target voxel copies the
/// source voxel containing its back-projected center; centers that fall
/// outside the source grid get zeros.
pub fn align_volume(src: &FeatureVolume, pose_src: &RigidPose, pose_tgt: &RigidPose) -> FeatureVolume {
    align_volume_to(src, pose_src, pose_tgt, src.spec()).expect("same spec")
}

/// [`align_volume`] with an explicit target lattice, which must equal the
/// source lattice.
pub fn align_volume_to(
    src: &FeatureVolume,
    pose_src: &RigidPose,
    pose_tgt: &RigidPose,
    target: &GridSpec,
) -> Result<FeatureVolume> {
    let spec = *src.spec();
    if spec != *target {
        return Err(OccError::IncompatibleGrid(format!(
            "source lattice {spec:?} differs from target {target:?}"
        )));
    }
    let tgt_to_src = pose_src.inverse().compose(pose_tgt);
    let n = spec.num_voxels();
    let c = src.channels();
    let source: Vec<Option<usize>> = (0..n)
        .into_par_iter()
        .map(|l| {
            let center = spec.voxel_center_unchecked(spec.unlinear(l));
            spec.voxel_of(&tgt_to_src.apply(&center)).map(|i| spec.linear(i))
        })
        .collect();
    let mut out = FeatureVolume::zeros(spec, c);
    let data = out.data_mut();
    let src_data = src.data();
    for (l, s) in source.iter().enumerate() {
        if let Some(s) = *s {
            for ch in 0..c {
                data[ch * n + l] = src_data[ch * n + s];
            }
        }
    }
    Ok(out)
}

/// Stacks volumes along channels, in the given (oldest → current) order.
pub fn temporal_concat(volumes: &[FeatureVolume]) -> Result<FeatureVolume> {
    let first = volumes
        .first()
        .ok_or_else(|| OccError::EmptyInput("no volumes to concatenate".into()))?;
    for v in &volumes[1..] {
        if v.spec() != first.spec() {
            return Err(OccError::IncompatibleGrid("volumes have different lattices".into()));
        }
        if v.channels() != first.channels() {
            return Err(OccError::IncompatibleGrid(format!(
                "channel counts differ ({} vs {})",
                first.channels(),
                v.channels()
            )));
        }
    }
    let mut data = Vec::with_capacity(first.data().len() * volumes.len());
    for v in volumes {
        data.extend_from_slice(v.data());
    }
    FeatureVolume::from_data(*first.spec(), first.channels() * volumes.len(), data)
}

/// Aligns each history volume to the current pose, then concatenates
/// oldest → current. `history` is ordered oldest first.
pub fn align_and_concat(
    history: &[(FeatureVolume, RigidPose)],
    current: &FeatureVolume,
    current_pose: &RigidPose,
) -> Result<FeatureVolume> {
    let mut vols: Vec<FeatureVolume> = history
        .iter()
        .map(|(v, p)| align_volume_to(v, p, current_pose, current.spec()))
        .collect::<Result<_>>()?;
    vols.push(current.clone());
    temporal_concat(&vols)
}

/// Conv3d (zero padding 1) → inference BatchNorm → ReLU.
pub fn voxel_encoder_forward(v: &FeatureVolume, w: &ConvBnReluWeights) -> Result<FeatureVolume> {
    w.validate()?;
    if v.channels() != w.c_in {
        return Err(OccError::IncompatibleShape(format!(
            "input has {} channels, encoder expects {}",
            v.channels(),
            w.c_in
        )));
    }
    let spec = *v.spec();
    let [nx, ny, nz] = spec.dims;
    let n = spec.num_voxels();
    let input = v.data();
    let mut out = vec![0.0; w.c_out * n];
    out.par_chunks_mut(n).enumerate().for_each(|(o, plane)| {
        let scale = w.bn_gamma[o] / (w.bn_var[o] + w.eps).sqrt();
        for (l, slot) in plane.iter_mut().enumerate() {
            let [x, y, z] = spec.unlinear(l);
            let mut acc = w.bias[o];
            for c in 0..w.c_in {
                let base = c * n;
                for dx in 0..3 {
                    let xi = x as i64 + dx as i64 - 1;
                    if xi < 0 || xi >= nx as i64 {
                        continue;
                    }
                    for dy in 0..3 {
                        let yi = y as i64 + dy as i64 - 1;
                        if yi < 0 || yi >= ny as i64 {
                            continue;
                        }
                        for dz in 0..3 {
                            let zi = z as i64 + dz as i64 - 1;
                            if zi < 0 || zi >= nz as i64 {
                                continue;
                            }
                            let src = (xi as usize * ny + yi as usize) * nz + zi as usize;
                            acc += w.tap(o, c, dx, dy, dz) * input[base + src];
                        }
                    }
                }
            }
            let y = scale * (acc - w.bn_mean[o]) + w.bn_beta[o];
            *slot = y.max(0.0);
        }
    });
    FeatureVolume::from_data(spec, w.c_out, out)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `σ(w) ⊙ f_l + (1 − σ(w)) ⊙ f_i`, elementwise.
pub fn adaptive_fuse(f_i: &FeatureVolume, f_l: &FeatureVolume, w: &FeatureVolume) -> Result<FeatureVolume> {
    if !f_i.same_shape(f_l) || !f_i.same_shape(w) {
        return Err(OccError::IncompatibleShape(
            "fusion inputs must share lattice and channel count".into(),
        ));
    }
    let data = f_i
        .data()
        .iter()
        .zip(f_l.data())
        .zip(w.data())
        .map(|((&a, &b), &g)| {
            if a == b {
                return a;
            }
            let s = sigmoid(g);
            s * b + (1.0 - s) * a
        })
        .collect();
    FeatureVolume::from_data(*f_i.spec(), f_i.channels(), data)
}

/// Voxels that are neither empty nor noise.
pub fn occupancy_mask(gt: &OccupancyGrid) -> VoxelMask {
    VoxelMask {
        spec: *gt.spec(),
        mask: gt.labels().iter().map(|&l| l != EMPTY && l != NOISE).collect(),
    }
}

fn check_pair(f_i: &FeatureVolume, f_l: &FeatureVolume, mask: &VoxelMask) -> Result<()> {
    if !f_i.same_shape(f_l) {
        return Err(OccError::IncompatibleShape(
            "student and teacher volumes differ in shape".into(),
        ));
    }
    if mask.spec != *f_i.spec() || mask.mask.len() != f_i.num_voxels() {
        return Err(OccError::IncompatibleShape("mask lattice differs from features".into()));
    }
    Ok(())
}

/// Masked mean of the per-voxel cosine similarity, normalized by the total
/// voxel count (not the masked count).
pub fn masked_cosine_mean(f_i: &FeatureVolume, f_l: &FeatureVolume, mask: &VoxelMask) -> Result<f64> {
    check_pair(f_i, f_l, mask)?;
    let n = f_i.num_voxels();
    let c = f_i.channels();
    let (a, b) = (f_i.data(), f_l.data());
    let sum: f64 = (0..n)
        .filter(|&v| mask.mask[v])
        .map(|v| {
            let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
            for ch in 0..c {
                let (x, y) = (a[ch * n + v], b[ch * n + v]);
                dot += x * y;
                na += x * x;
                nb += y * y;
            }
            let (na, nb) = (na.sqrt(), nb.sqrt());
            if na < ZERO_NORM || nb < ZERO_NORM {
                0.0
            } else {
                dot / (na * nb)
            }
        })
        .sum();
    Ok(sum / n as f64)
}

/// Distillation loss: `cfg.distill_sign × masked_cosine_mean`.
pub fn distill_loss(f_i: &FeatureVolume, f_l: &FeatureVolume, mask: &VoxelMask, cfg: &LossConfig) -> Result<f64> {
    Ok(cfg.distill_sign * masked_cosine_mean(f_i, f_l, mask)?)
}

/// Gradient of [`distill_loss`] with respect to the student volume `f_i`.
pub fn distill_loss_grad(
    f_i: &FeatureVolume,
    f_l: &FeatureVolume,
    mask: &VoxelMask,
    cfg: &LossConfig,
) -> Result<FeatureVolume> {
    check_pair(f_i, f_l, mask)?;
    let n = f_i.num_voxels();
    let c = f_i.channels();
    let (a, b) = (f_i.data(), f_l.data());
    let mut grad = vec![0.0; a.len()];
    let scale = cfg.distill_sign / n as f64;
    for v in (0..n).filter(|&v| mask.mask[v]) {
        let (mut dot, mut na2, mut nb2) = (0.0, 0.0, 0.0);
        for ch in 0..c {
            let (x, y) = (a[ch * n + v], b[ch * n + v]);
            dot += x * y;
            na2 += x * x;
            nb2 += y * y;
        }
        let (na, nb) = (na2.sqrt(), nb2.sqrt());
        if na < ZERO_NORM || nb < ZERO_NORM {
            continue;
        }
        let cos = dot / (na * nb);
        for ch in 0..c {
            let (x, y) = (a[ch * n + v], b[ch * n + v]);
            grad[ch * n + v] = scale * (y / (na * nb) - cos * x / na2);
        }
    }
    FeatureVolume::from_data(*f_i.spec(), c, grad)
}

fn check_logits(logits: &FeatureVolume, gt: &OccupancyGrid) -> Result<()> {
    if logits.spec() != gt.spec() {
        return Err(OccError::IncompatibleShape("logits and labels differ in lattice".into()));
    }
    if let Some(&bad) = gt
        .labels()
        .iter()
        .find(|&&l| l != NOISE && l as usize >= logits.channels())
    {
        return Err(OccError::IncompatibleShape(format!(
            "label {bad} has no logit channel (channels = {})",
            logits.channels()
        )));
    }
    Ok(())
}

/// Per-voxel softmax probabilities with max subtraction.
fn softmax_at(logits: &FeatureVolume, v: usize, out: &mut [f64]) -> f64 {
    let n = logits.num_voxels();
    let d = logits.data();
    let max = (0..out.len()).map(|c| d[c * n + v]).fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (c, o) in out.iter_mut().enumerate() {
        *o = (d[c * n + v] - max).exp();
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
    max + z.ln()
}

/// Mean over non-noise voxels of `−log softmax(logits)[label]`. Channel 0 is
/// the empty class.
pub fn cross_entropy_loss(logits: &FeatureVolume, gt: &OccupancyGrid) -> Result<f64> {
    check_logits(logits, gt)?;
    let n = logits.num_voxels();
    let c = logits.channels();
    let d = logits.data();
    let mut probs = vec![0.0; c];
    let mut total = 0.0;
    let mut count = 0usize;
    for (v, &label) in gt.labels().iter().enumerate() {
        if label == NOISE {
            continue;
        }
        let log_z = softmax_at(logits, v, &mut probs);
        total += log_z - d[label as usize * n + v];
        count += 1;
    }
    if count == 0 {
        return Err(OccError::UndefinedLoss("every voxel is ignored".into()));
    }
    Ok(total / count as f64)
}

/// Gradient of [`cross_entropy_loss`] with respect to the logits.
pub fn cross_entropy_grad(logits: &FeatureVolume, gt: &OccupancyGrid) -> Result<FeatureVolume> {
    check_logits(logits, gt)?;
    let n = logits.num_voxels();
    let c = logits.channels();
    let count = gt.labels().iter().filter(|&&l| l != NOISE).count();
    if count == 0 {
        return Err(OccError::UndefinedLoss("every voxel is ignored".into()));
    }
    let mut grad = vec![0.0; c * n];
    let mut probs = vec![0.0; c];
    for (v, &label) in gt.labels().iter().enumerate() {
        if label == NOISE {
            continue;
        }
        softmax_at(logits, v, &mut probs);
        for ch in 0..c {
            let target = if ch == label as usize { 1.0 } else { 0.0 };
            grad[ch * n + v] = (probs[ch] - target) / count as f64;
        }
    }
    FeatureVolume::from_data(*logits.spec(), c, grad)
}

/// `ce + ls + λ·distill + d`; `ls` and `d` come from outside.
pub fn total_loss(ce: f64, ls: f64, distill: f64, d: f64, cfg: &LossConfig) -> Result<f64> {
    if [ce, ls, distill, d, cfg.lambda].iter().any(|v| !v.is_finite()) {
        return Err(OccError::InvalidLoss("non-finite loss term".into()));
    }
    Ok(ce + ls + cfg.lambda * distill + d)
}
