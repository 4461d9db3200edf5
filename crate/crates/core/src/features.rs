//! Interaction features of an ego vehicle at each frame.
//!
//! A [`FeatureFrame`] holds 54 values in a fixed order:
//!
//! | positions | content                                                     |
//! |-----------|-------------------------------------------------------------|
//! | 0..42     | `[E, P, F, LP, LF, RP, RF]` x `[v_x, v_y, a_x, a_y, θ, Δθ]`  |
//! | 42..48    | headways `dw0..dw5` for `[P, F, LP, LF, RP, RF]` (ft)        |
//! | 48..54    | missing flags for `[P, F, LP, LF, RP, RF]` (1 = missing)     |
//!
//! A missing neighbor contributes six zero indicators, a zero headway and a
//! flag of 1.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{SceneConfig, TrackFrame, Trajectory, VehicleId};
use crate::kinematics::{kinematic_series, KinematicFrame, KinematicsConfig};

pub const FEATURE_COUNT: usize = 54;
pub const INDICATORS: usize = 6;
pub const NEIGHBOR_SLOTS: usize = 6;
pub const HEADWAY_OFFSET: usize = 42;
pub const FLAG_OFFSET: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Slot {
    P,
    F,
    LP,
    LF,
    RP,
    RF,
}

impl Slot {
    pub const ALL: [Slot; NEIGHBOR_SLOTS] = [Slot::P, Slot::F, Slot::LP, Slot::LF, Slot::RP, Slot::RF];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Closest preceding/following vehicle in the current, left and right lanes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborSet {
    pub slots: [Option<VehicleId>; NEIGHBOR_SLOTS],
}

impl NeighborSet {
    pub fn get(&self, slot: Slot) -> Option<VehicleId> {
        self.slots[slot.index()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    pub frame: i64,
    pub values: [f64; FEATURE_COUNT],
}

impl FeatureFrame {
    pub fn flag(&self, slot: Slot) -> f64 {
        self.values[FLAG_OFFSET + slot.index()]
    }

    pub fn headway(&self, slot: Slot) -> f64 {
        self.values[HEADWAY_OFFSET + slot.index()]
    }

    /// The six indicator slots of the ego (`None`) or a neighbor.
    pub fn indicators(&self, slot: Option<Slot>) -> &[f64] {
        let block = slot.map_or(0, |s| s.index() + 1);
        &self.values[block * INDICATORS..(block + 1) * INDICATORS]
    }
}

/// Canonical column names `f00..f53`.
pub fn feature_names() -> Vec<String> {
    (0..FEATURE_COUNT).map(|i| format!("f{i:02}")).collect()
}

struct VehicleEntry {
    traj: Trajectory,
    /// Kinematics indexed by position in `traj.frames`; `None` near the ends.
    kin: Vec<Option<KinematicFrame>>,
}

/// Immutable index of all vehicles of a scene by frame.
pub struct Scene {
    config: SceneConfig,
    vehicles: Vec<VehicleEntry>,
    by_id: HashMap<VehicleId, usize>,
    /// frame -> (vehicle index, position in that vehicle's frames)
    by_frame: BTreeMap<i64, Vec<(usize, usize)>>,
}

impl Scene {
    /// Index `trajectories` and compute kinematics for every vehicle long
    /// enough to have them. Trajectories should already be smoothed.
    pub fn new(
        trajectories: Vec<Trajectory>,
        scene: &SceneConfig,
        kinematics: &KinematicsConfig,
    ) -> Result<Self> {
        scene.validate()?;
        kinematics.validate()?;
        let mut vehicles = Vec::with_capacity(trajectories.len());
        let mut by_id = HashMap::with_capacity(trajectories.len());
        let mut by_frame: BTreeMap<i64, Vec<(usize, usize)>> = BTreeMap::new();
        for traj in trajectories {
            let idx = vehicles.len();
            if by_id.insert(traj.vehicle_id, idx).is_some() {
                return Err(Error::InvalidData(format!(
                    "vehicle {} appears twice in the scene",
                    traj.vehicle_id
                )));
            }
            let mut kin = vec![None; traj.len()];
            if traj.len() >= 5 {
                for k in kinematic_series(&traj, kinematics)? {
                    // kinematic frames start at position 2
                    let pos = traj.index_of(k.frame).expect("frame from this trajectory");
                    kin[pos] = Some(k);
                }
            }
            for (pos, f) in traj.frames.iter().enumerate() {
                by_frame.entry(f.frame).or_default().push((idx, pos));
            }
            vehicles.push(VehicleEntry { traj, kin });
        }
        Ok(Scene {
            config: scene.clone(),
            vehicles,
            by_id,
            by_frame,
        })
    }

    pub fn config(&self) -> &SceneConfig {
        &self.config
    }

    pub fn trajectory(&self, id: VehicleId) -> Option<&Trajectory> {
        self.by_id.get(&id).map(|&i| &self.vehicles[i].traj)
    }

    pub fn vehicle_ids(&self) -> impl Iterator<Item = VehicleId> + '_ {
        self.vehicles.iter().map(|v| v.traj.vehicle_id)
    }

    pub fn track(&self, id: VehicleId, frame: i64) -> Option<&TrackFrame> {
        let v = &self.vehicles[*self.by_id.get(&id)?];
        v.traj.index_of(frame).map(|p| &v.traj.frames[p])
    }

    pub fn kinematics(&self, id: VehicleId, frame: i64) -> Option<&KinematicFrame> {
        let v = &self.vehicles[*self.by_id.get(&id)?];
        v.traj.index_of(frame).and_then(|p| v.kin[p].as_ref())
    }

    /// Track frames of every vehicle recorded at `frame`.
    pub fn at_frame(&self, frame: i64) -> impl Iterator<Item = &TrackFrame> + '_ {
        self.by_frame
            .get(&frame)
            .into_iter()
            .flatten()
            .map(move |&(v, p)| &self.vehicles[v].traj.frames[p])
    }
}

pub fn find_neighbors(scene: &Scene, ego_id: VehicleId, frame: i64) -> Result<NeighborSet> {
    let ego = scene
        .track(ego_id, frame)
        .ok_or(Error::VehicleAbsent {
            vehicle_id: ego_id,
            frame,
        })?;
    let left_lane = ego.lane_id + scene.config.left_lane_delta;
    let right_lane = ego.lane_id - scene.config.left_lane_delta;

    // best candidate per slot: (|dx|, id); smaller wins
    let mut best: [Option<(f64, VehicleId)>; NEIGHBOR_SLOTS] = [None; NEIGHBOR_SLOTS];
    for other in scene.at_frame(frame) {
        if other.vehicle_id == ego_id {
            continue;
        }
        let dx = other.center_x - ego.center_x;
        let ahead = dx >= 0.0;
        let slot = match (other.lane_id, ahead) {
            (l, true) if l == ego.lane_id => Slot::P,
            (l, false) if l == ego.lane_id => Slot::F,
            (l, true) if l == left_lane => Slot::LP,
            (l, false) if l == left_lane => Slot::LF,
            (l, true) if l == right_lane => Slot::RP,
            (l, false) if l == right_lane => Slot::RF,
            _ => continue,
        };
        let cand = (dx.abs(), other.vehicle_id);
        let entry = &mut best[slot.index()];
        let replace = match entry {
            None => true,
            Some((d, id)) => cand.0 < *d || (cand.0 == *d && cand.1 < *id),
        };
        if replace {
            *entry = Some(cand);
        }
    }
    Ok(NeighborSet {
        slots: best.map(|b| b.map(|(_, id)| id)),
    })
}

/// Longitudinal center-to-center distances, 0 for empty slots.
pub fn headways(
    scene: &Scene,
    ego_id: VehicleId,
    neighbors: &NeighborSet,
    frame: i64,
) -> Result<[f64; NEIGHBOR_SLOTS]> {
    let ego = scene.track(ego_id, frame).ok_or(Error::VehicleAbsent {
        vehicle_id: ego_id,
        frame,
    })?;
    let mut dw = [0.0; NEIGHBOR_SLOTS];
    for (d, id) in dw.iter_mut().zip(neighbors.slots) {
        if let Some(id) = id {
            let other = scene.track(id, frame).ok_or(Error::VehicleAbsent {
                vehicle_id: id,
                frame,
            })?;
            *d = (other.center_x - ego.center_x).abs();
        }
    }
    Ok(dw)
}

pub fn assemble_frame(
    ego: &KinematicFrame,
    neighbors: [Option<&KinematicFrame>; NEIGHBOR_SLOTS],
    headways: [f64; NEIGHBOR_SLOTS],
    frame: i64,
) -> Result<FeatureFrame> {
    let mut values = [0.0; FEATURE_COUNT];
    values[..INDICATORS].copy_from_slice(&ego.indicators());
    for (i, nb) in neighbors.iter().enumerate() {
        match nb {
            Some(k) => {
                let block = (i + 1) * INDICATORS;
                values[block..block + INDICATORS].copy_from_slice(&k.indicators());
                values[HEADWAY_OFFSET + i] = headways[i];
            }
            None => values[FLAG_OFFSET + i] = 1.0,
        }
    }
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("feature {pos} at frame {frame}")));
    }
    if values[HEADWAY_OFFSET..FLAG_OFFSET].iter().any(|&d| d < 0.0) {
        return Err(Error::InvalidData(format!("negative headway at frame {frame}")));
    }
    Ok(FeatureFrame { frame, values })
}

/// One feature frame per frame at which the ego's own kinematics exist.
pub fn feature_series(scene: &Scene, ego_id: VehicleId) -> Result<Vec<FeatureFrame>> {
    let traj = scene.trajectory(ego_id).ok_or(Error::InvalidData(format!(
        "vehicle {ego_id} is not in the scene"
    )))?;
    let mut out = Vec::with_capacity(traj.len());
    for f in &traj.frames {
        let Some(ego_kin) = scene.kinematics(ego_id, f.frame) else {
            continue;
        };
        let nbs = find_neighbors(scene, ego_id, f.frame)?;
        let dws = headways(scene, ego_id, &nbs, f.frame)?;
        let kins = nbs
            .slots
            .map(|id| id.and_then(|id| scene.kinematics(id, f.frame)));
        out.push(assemble_frame(ego_kin, kins, dws, f.frame)?);
    }
    if out.is_empty() {
        return Err(Error::TooShort {
            vehicle_id: ego_id,
            message: "no frame with computable kinematics".into(),
        });
    }
    Ok(out)
}

/// Write `frame,ego_id,f00..f53` rows.
pub fn write_feature_csv<W: Write>(
    writer: W,
    series: &[(VehicleId, Vec<FeatureFrame>)],
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["frame".to_string(), "ego_id".to_string()];
    header.extend(feature_names());
    wtr.write_record(&header)?;
    let mut row = Vec::with_capacity(FEATURE_COUNT + 2);
    for (ego, frames) in series {
        for f in frames {
            row.clear();
            row.push(f.frame.to_string());
            row.push(ego.to_string());
            row.extend(f.values.iter().map(|v| v.to_string()));
            wtr.write_record(&row)?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<feature csv>", e))?;
    Ok(())
}

pub fn save_feature_csv(path: impl AsRef<Path>, series: &[(VehicleId, Vec<FeatureFrame>)]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_feature_csv(std::io::BufWriter::new(file), series)
}
