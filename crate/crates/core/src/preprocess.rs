//! Frame-gap filtering and centered moving-average smoothing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Trajectory, VehicleId};

/// How the averaging window behaves within `(w-1)/2` frames of either end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMode {
    /// Frame `i` averages `[i-k, i+k]` with `k = min(i, n-1-i, (w-1)/2)`.
    /// End frames keep their recorded values and linear motion stays linear.
    #[default]
    Symmetric,
    /// Frame `i` averages whatever part of `[i-(w-1)/2, i+(w-1)/2]` was recorded.
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub max_frame_gap: i64,
    pub ma_window_seconds: f64,
    pub edge_mode: EdgeMode,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            max_frame_gap: 1,
            ma_window_seconds: 0.5,
            edge_mode: EdgeMode::Symmetric,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_frame_gap < 1 {
            return Err(Error::config("preprocess.max_frame_gap", "must be >= 1"));
        }
        if !(self.ma_window_seconds.is_finite() && self.ma_window_seconds > 0.0) {
            return Err(Error::config("preprocess.ma_window_seconds", "must be > 0"));
        }
        Ok(())
    }

    /// Window length in frames, forced odd.
    pub fn window_frames(&self, fps: f64) -> usize {
        let w = (self.ma_window_seconds * fps).round().max(1.0) as usize;
        if w % 2 == 0 {
            w + 1
        } else {
            w
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dropped {
    pub vehicle_id: VehicleId,
    pub reason: String,
}

pub fn filter_frame_gaps(
    trajectories: Vec<Trajectory>,
    config: &PreprocessConfig,
) -> (Vec<Trajectory>, Vec<Dropped>) {
    let mut kept = Vec::with_capacity(trajectories.len());
    let mut dropped = Vec::new();
    for traj in trajectories {
        let gap = traj
            .frames
            .windows(2)
            .enumerate()
            .map(|(i, w)| (i + 1, w[1].frame - w[0].frame))
            .find(|&(_, g)| g > config.max_frame_gap);
        match gap {
            Some((index, g)) => dropped.push(Dropped {
                vehicle_id: traj.vehicle_id,
                reason: format!("frame gap {g} at index {index}"),
            }),
            None => kept.push(traj),
        }
    }
    (kept, dropped)
}

/// Centered moving average over center, head and tail coordinates.
/// Frame indices, vehicle id and lane id are untouched.
pub fn smooth(traj: &Trajectory, config: &PreprocessConfig, fps: f64) -> Result<Trajectory> {
    let n = traj.frames.len();
    if n < 3 {
        return Err(Error::TooShort {
            vehicle_id: traj.vehicle_id,
            message: "too short to smooth".into(),
        });
    }
    let half = (config.window_frames(fps) - 1) / 2;
    let mut out = traj.clone();

    type Field = fn(&mut crate::ingest::TrackFrame) -> &mut f64;
    let fields: [Field; 6] = [
        |f| &mut f.center_x,
        |f| &mut f.center_y,
        |f| &mut f.head_x,
        |f| &mut f.head_y,
        |f| &mut f.tail_x,
        |f| &mut f.tail_y,
    ];
    let mut series = vec![0.0; n];
    for field in fields {
        for (s, f) in series.iter_mut().zip(traj.frames.iter()) {
            let mut f = *f;
            *s = *field(&mut f);
        }
        let smoothed = moving_average(&series, half, config.edge_mode);
        for (f, v) in out.frames.iter_mut().zip(smoothed) {
            *field(f) = v;
        }
    }
    Ok(out)
}

/// Mean over the centered window around each sample. Deviations are summed
/// relative to the centre sample so constant runs come back bit-identical.
pub fn moving_average(values: &[f64], half: usize, edge: EdgeMode) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let (lo, hi) = match edge {
                EdgeMode::Symmetric => {
                    let k = half.min(i).min(n - 1 - i);
                    (i - k, i + k)
                }
                EdgeMode::Truncated => (i.saturating_sub(half), (i + half).min(n - 1)),
            };
            let anchor = values[i];
            let dev: f64 = values[lo..=hi].iter().map(|v| v - anchor).sum();
            anchor + dev / (hi - lo + 1) as f64
        })
        .collect()
}
