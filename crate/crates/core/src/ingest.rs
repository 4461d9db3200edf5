//! Lane-aligned trajectory records.
//!
//! Input files are CSV with the fixed header
//! `frame,vehicle_id,center_x,center_y,head_x,head_y,tail_x,tail_y,lane_id`.
//! Coordinates are feet. After parsing, `x` is always the longitudinal axis;
//! [`SceneConfig::longitudinal_axis`] says which file column carries it.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Class;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 9] = [
    "frame",
    "vehicle_id",
    "center_x",
    "center_y",
    "head_x",
    "head_y",
    "tail_x",
    "tail_y",
    "lane_id",
];

pub type VehicleId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub fps: f64,
    pub longitudinal_axis: Axis,
    /// How `lane_id` changes on a left lane change: `+1` or `-1`.
    pub left_lane_delta: i32,
    pub lane_width: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            fps: 30.0,
            longitudinal_axis: Axis::X,
            left_lane_delta: -1,
            lane_width: 12.0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::config("scene.fps", "must be > 0"));
        }
        if self.left_lane_delta != 1 && self.left_lane_delta != -1 {
            return Err(Error::config("scene.left_lane_delta", "must be +1 or -1"));
        }
        if !(self.lane_width.is_finite() && self.lane_width > 0.0) {
            return Err(Error::config("scene.lane_width", "must be > 0"));
        }
        Ok(())
    }
}

/// One bounding-box observation. `x` is longitudinal, `y` lateral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackFrame {
    pub frame: i64,
    pub vehicle_id: VehicleId,
    pub center_x: f64,
    pub center_y: f64,
    pub head_x: f64,
    pub head_y: f64,
    pub tail_x: f64,
    pub tail_y: f64,
    pub lane_id: i32,
}

impl TrackFrame {
    fn coords(&self) -> [f64; 6] {
        [
            self.center_x,
            self.center_y,
            self.head_x,
            self.head_y,
            self.tail_x,
            self.tail_y,
        ]
    }

    fn swap_axes(&mut self) {
        std::mem::swap(&mut self.center_x, &mut self.center_y);
        std::mem::swap(&mut self.head_x, &mut self.head_y);
        std::mem::swap(&mut self.tail_x, &mut self.tail_y);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub vehicle_id: VehicleId,
    pub frames: Vec<TrackFrame>,
    pub class_hint: Option<Class>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn first_frame(&self) -> Option<i64> {
        self.frames.first().map(|f| f.frame)
    }

    pub fn last_frame(&self) -> Option<i64> {
        self.frames.last().map(|f| f.frame)
    }

    /// Position of `frame` in `frames`, if recorded.
    pub fn index_of(&self, frame: i64) -> Option<usize> {
        self.frames.binary_search_by_key(&frame, |f| f.frame).ok()
    }
}

pub fn parse_trajectories(path: impl AsRef<Path>, config: &SceneConfig) -> Result<Vec<Trajectory>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_trajectories(file, config)
}

/// Parse the trajectory CSV from any reader. One [`Trajectory`] per vehicle,
/// ordered by vehicle id, frames sorted by frame index.
pub fn read_trajectories<R: Read>(reader: R, config: &SceneConfig) -> Result<Vec<Trajectory>> {
    config.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr.headers()?.clone();
    if header.len() != CSV_HEADER.len() || header.iter().zip(CSV_HEADER).any(|(a, b)| a != b) {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "header must be `{}`, found `{}`",
                CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut by_vehicle: BTreeMap<VehicleId, Vec<TrackFrame>> = BTreeMap::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        let mut frame = parse_record(&record, line)?;
        if config.longitudinal_axis == Axis::Y {
            frame.swap_axes();
        }
        by_vehicle.entry(frame.vehicle_id).or_default().push(frame);
    }

    let mut out = Vec::with_capacity(by_vehicle.len());
    for (vehicle_id, mut frames) in by_vehicle {
        frames.sort_by_key(|f| f.frame);
        if let Some(w) = frames.windows(2).find(|w| w[0].frame == w[1].frame) {
            return Err(Error::InvalidData(format!(
                "duplicate (vehicle_id, frame) = ({vehicle_id}, {})",
                w[0].frame
            )));
        }
        out.push(Trajectory {
            vehicle_id,
            frames,
            class_hint: None,
        });
    }
    Ok(out)
}

fn parse_record(record: &csv::StringRecord, line: u64) -> Result<TrackFrame> {
    if record.len() != CSV_HEADER.len() {
        return Err(Error::Parse {
            line,
            message: format!("expected {} fields, found {}", CSV_HEADER.len(), record.len()),
        });
    }
    let field = |i: usize| &record[i];
    let int = |i: usize| -> Result<i64> {
        field(i).parse::<i64>().map_err(|e| Error::Parse {
            line,
            message: format!("column `{}`: {e}", CSV_HEADER[i]),
        })
    };
    let float = |i: usize| -> Result<f64> {
        let v = field(i).parse::<f64>().map_err(|e| Error::Parse {
            line,
            message: format!("column `{}`: {e}", CSV_HEADER[i]),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("column `{}`: non-finite coordinate", CSV_HEADER[i]),
            });
        }
        Ok(v)
    };

    let vehicle_id = field(1).parse::<u64>().map_err(|e| Error::Parse {
        line,
        message: format!("column `vehicle_id`: {e}"),
    })?;
    let lane_id = i32::try_from(int(8)?).map_err(|_| Error::Parse {
        line,
        message: "column `lane_id`: out of range".into(),
    })?;
    let frame = TrackFrame {
        frame: int(0)?,
        vehicle_id,
        center_x: float(2)?,
        center_y: float(3)?,
        head_x: float(4)?,
        head_y: float(5)?,
        tail_x: float(6)?,
        tail_y: float(7)?,
        lane_id,
    };
    if frame.head_x == frame.tail_x && frame.head_y == frame.tail_y {
        return Err(Error::Parse {
            line,
            message: "head and tail points coincide (zero vehicle length)".into(),
        });
    }
    Ok(frame)
}

pub fn write_trajectories(
    path: impl AsRef<Path>,
    trajectories: &[Trajectory],
    config: &SceneConfig,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = std::io::BufWriter::new(file);
    write_trajectories_to(&mut buf, trajectories, config)?;
    buf.flush().map_err(|e| Error::io(path, e))
}

/// Inverse of [`read_trajectories`]. Values are written with the shortest
/// representation that parses back to the same `f64`.
pub fn write_trajectories_to<W: Write>(
    writer: W,
    trajectories: &[Trajectory],
    config: &SceneConfig,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CSV_HEADER)?;
    let swap = config.longitudinal_axis == Axis::Y;
    for traj in trajectories {
        for f in &traj.frames {
            let mut f = *f;
            if swap {
                f.swap_axes();
            }
            let c = f.coords();
            wtr.write_record([
                f.frame.to_string(),
                f.vehicle_id.to_string(),
                c[0].to_string(),
                c[1].to_string(),
                c[2].to_string(),
                c[3].to_string(),
                c[4].to_string(),
                c[5].to_string(),
                f.lane_id.to_string(),
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
