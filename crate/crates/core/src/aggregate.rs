//! Multi-frame aggregation: ego → world → current-ego.

use std::ops::Range;
use std::str::FromStr;

use crate::cloud::SemanticPointCloud;
use crate::error::{OccError, Result};
use crate::pose::RigidPose;

/// One LiDAR sweep in its own ego frame with its ego→world pose.
#[derive(Debug, Clone)]
pub struct PosedFrame {
    pub cloud: SemanticPointCloud,
    pub pose_world: RigidPose,
    pub timestamp: f64,
    pub frame_index: u32,
}

impl PosedFrame {
    pub fn new(cloud: SemanticPointCloud, pose_world: RigidPose, timestamp: f64, frame_index: u32) -> Self {
        Self {
            cloud,
            pose_world,
            timestamp,
            frame_index,
        }
    }
}

/// Checks timestamps are strictly increasing.
pub fn check_sequence(frames: &[PosedFrame]) -> Result<()> {
    for w in frames.windows(2) {
        if !(w[1].timestamp > w[0].timestamp) {
            return Err(OccError::Precondition(format!(
                "timestamps not strictly increasing at frame {} ({} then {})",
                w[1].frame_index, w[0].timestamp, w[1].timestamp
            )));
        }
    }
    Ok(())
}

/// Expresses a frame's cloud in world coordinates. Points without frame ids
/// are tagged with the frame's index.
pub fn frame_to_world(frame: &PosedFrame) -> SemanticPointCloud {
    let out = frame.cloud.transformed(&frame.pose_world);
    if out.frame_ids().is_none() {
        out.with_frame_id(frame.frame_index)
    } else {
        out
    }
}

/// Concatenates the first `window` frames in world coordinates and maps them
/// through `current` (world → current ego). Output order is frame order, then
/// point order.
pub fn aggregate_window(
    frames: &[PosedFrame],
    current: &RigidPose,
    window: usize,
) -> Result<SemanticPointCloud> {
    if window == 0 || frames.is_empty() {
        return Err(OccError::EmptyInput("aggregation window has no frames".into()));
    }
    if window > frames.len() {
        return Err(OccError::Precondition(format!(
            "window {window} exceeds the {} available frames",
            frames.len()
        )));
    }
    let world: Vec<SemanticPointCloud> = frames[..window].iter().map(frame_to_world).collect();
    Ok(SemanticPointCloud::concat(world.iter()).transformed(current))
}

/// World → ego transform of a frame, the `current` argument of
/// [`aggregate_window`].
pub fn world_to_ego(frame: &PosedFrame) -> RigidPose {
    frame.pose_world.inverse()
}

/// Placement of the aggregation window relative to its keyframe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowOffset {
    #[default]
    Centered,
    /// Keyframe is the newest frame.
    Trailing,
    /// Keyframe is the oldest frame.
    Leading,
}

impl FromStr for WindowOffset {
    type Err = OccError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "centered" | "center" => Ok(Self::Centered),
            "trailing" => Ok(Self::Trailing),
            "leading" => Ok(Self::Leading),
            other => Err(OccError::Config(format!("unknown window_offset '{other}'"))),
        }
    }
}

impl WindowOffset {
    fn start(self, anchor: usize, len: usize) -> i64 {
        match self {
            Self::Centered => anchor as i64 - (len / 2) as i64,
            Self::Trailing => anchor as i64 + 1 - len as i64,
            Self::Leading => anchor as i64,
        }
    }
}

/// Frame range aggregated for keyframe `anchor`. A window longer than the
/// sequence is shrunk to the sequence; near the ends it is shifted to stay
/// inside it.
pub fn window_range(n_frames: usize, anchor: usize, len: usize, offset: WindowOffset) -> Result<Range<usize>> {
    if n_frames == 0 || len == 0 {
        return Err(OccError::EmptyInput("no frames to aggregate".into()));
    }
    if anchor >= n_frames {
        return Err(OccError::Precondition(format!(
            "keyframe {anchor} outside sequence of {n_frames} frames"
        )));
    }
    let len = len.min(n_frames);
    let start = offset.start(anchor, len).clamp(0, (n_frames - len) as i64) as usize;
    Ok(start..start + len)
}

/// Keyframes whose window fits without shifting.
pub fn interior_keyframes(n_frames: usize, len: usize, offset: WindowOffset) -> Vec<usize> {
    let len = len.min(n_frames);
    (0..n_frames)
        .filter(|&a| {
            let s = offset.start(a, len);
            s >= 0 && s as usize + len <= n_frames
        })
        .collect()
}
