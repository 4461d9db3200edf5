//! Trajectories to labelled, balanced and split window samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    self, balance, class_counts, counts_map, extract_windows, kfold, label_trajectory, split, Class,
    DatasetConfig, Manifest, SequenceSample,
};
use crate::error::{Error, Result};
use crate::features::{feature_series, FeatureFrame, Scene};
use crate::ingest::{SceneConfig, Trajectory, VehicleId};
use crate::kinematics::KinematicsConfig;
use crate::preprocess::{filter_frame_gaps, smooth, Dropped, PreprocessConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub scene: SceneConfig,
    pub preprocess: PreprocessConfig,
    pub kinematics: KinematicsConfig,
    pub dataset: DatasetConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.preprocess.validate()?;
        self.kinematics.validate()?;
        if self.kinematics.fps != self.scene.fps {
            return Err(Error::config("kinematics.fps", "must equal scene.fps"));
        }
        self.dataset.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EgoSeries {
    pub vehicle_id: VehicleId,
    pub class: Class,
    pub cross_frame: Option<i64>,
    pub frames: Vec<FeatureFrame>,
}

/// Feature series of every usable ego, plus the vehicles left out and why.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureSet {
    pub egos: Vec<EgoSeries>,
    pub dropped: Vec<Dropped>,
}

/// Egos are `egos` when given, else the vehicles carrying a class hint,
/// else every vehicle.
pub fn ego_ids(trajectories: &[Trajectory], egos: Option<&[VehicleId]>) -> Vec<VehicleId> {
    if let Some(ids) = egos {
        return ids.to_vec();
    }
    let hinted: Vec<VehicleId> = trajectories
        .iter()
        .filter(|t| t.class_hint.is_some())
        .map(|t| t.vehicle_id)
        .collect();
    if hinted.is_empty() {
        trajectories.iter().map(|t| t.vehicle_id).collect()
    } else {
        hinted
    }
}

fn drop(vehicle_id: VehicleId, reason: impl Into<String>) -> Dropped {
    Dropped {
        vehicle_id,
        reason: reason.into(),
    }
}

/// Gap filter, smoothing and scene indexing.
pub fn prepare_scene(trajectories: Vec<Trajectory>, config: &PipelineConfig) -> Result<(Scene, Vec<Dropped>)> {
    config.validate()?;
    let (kept, mut dropped) = filter_frame_gaps(trajectories, &config.preprocess);
    let smoothed: Vec<std::result::Result<Trajectory, Dropped>> = kept
        .par_iter()
        .map(|t| smooth(t, &config.preprocess, config.scene.fps).map_err(|e| drop(t.vehicle_id, e.to_string())))
        .collect();
    let mut ready = Vec::with_capacity(smoothed.len());
    for s in smoothed {
        match s {
            Ok(t) => ready.push(t),
            Err(d) => dropped.push(d),
        }
    }
    let scene = Scene::new(ready, &config.scene, &config.kinematics)?;
    Ok((scene, dropped))
}

pub fn ego_features(scene: &Scene, egos: &[VehicleId]) -> FeatureSet {
    let results: Vec<std::result::Result<EgoSeries, Dropped>> = egos
        .par_iter()
        .map(|&id| {
            let traj = scene.trajectory(id).ok_or_else(|| drop(id, "not in the scene after preprocessing"))?;
            let (class, cross_frame) = label_trajectory(traj, scene.config()).map_err(|e| drop(id, e.to_string()))?;
            let frames = feature_series(scene, id).map_err(|e| drop(id, e.to_string()))?;
            Ok(EgoSeries {
                vehicle_id: id,
                class,
                cross_frame,
                frames,
            })
        })
        .collect();
    let mut set = FeatureSet::default();
    for r in results {
        match r {
            Ok(e) => set.egos.push(e),
            Err(d) => set.dropped.push(d),
        }
    }
    set
}

pub fn extract_features(
    trajectories: Vec<Trajectory>,
    egos: Option<&[VehicleId]>,
    config: &PipelineConfig,
) -> Result<FeatureSet> {
    let ids = ego_ids(&trajectories, egos);
    let (scene, dropped) = prepare_scene(trajectories, config)?;
    let mut set = ego_features(&scene, &ids);
    set.dropped.splice(0..0, dropped);
    Ok(set)
}

/// Every window of every ego, in ego order.
pub fn windows(set: &FeatureSet, config: &DatasetConfig) -> Result<Vec<SequenceSample>> {
    config.validate()?;
    let per_ego: Vec<Vec<SequenceSample>> = set
        .egos
        .par_iter()
        .map(|e| extract_windows(e.vehicle_id, &e.frames, e.class, e.cross_frame, config))
        .collect::<Result<_>>()?;
    Ok(per_ego.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSamples {
    pub train: Vec<SequenceSample>,
    pub test: Vec<SequenceSample>,
    pub manifest: Manifest,
}

/// Balance, split into train/test and record the fold assignment of the
/// training part.
pub fn build_dataset(samples: &[SequenceSample], config: &DatasetConfig, dropped: Vec<Dropped>) -> Result<SplitSamples> {
    config.validate()?;
    let balanced = balance(samples, |s| s.label, &config.balance_target, config.rng_seed)?;
    let total = balanced.len();
    let counts = class_counts(balanced.iter().map(|s| s.label));
    let (train, test) = split(balanced, config.train_fraction, config.rng_seed)?;
    let folds = kfold(train.len(), config.folds, config.rng_seed)?;
    let manifest = Manifest {
        config: config.clone(),
        seed: config.rng_seed,
        total,
        class_counts: counts_map(counts),
        train_counts: counts_map(class_counts(train.iter().map(|s| s.label))),
        test_counts: counts_map(class_counts(test.iter().map(|s| s.label))),
        fold_checksum: dataset::fold_checksum(&folds, train.len()),
        dropped,
    };
    Ok(SplitSamples { train, test, manifest })
}

/// The whole chain from raw trajectories to split samples.
pub fn run(trajectories: Vec<Trajectory>, egos: Option<&[VehicleId]>, config: &PipelineConfig) -> Result<SplitSamples> {
    let set = extract_features(trajectories, egos, config)?;
    let samples = windows(&set, &config.dataset)?;
    build_dataset(&samples, &config.dataset, set.dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FEATURE_COUNT;
    use crate::synthgen::{generate, SynthConfig};

    fn corpus() -> (Vec<Trajectory>, PipelineConfig) {
        let synth = SynthConfig {
            n_lk: 3,
            n_llc: 2,
            n_rlc: 2,
            rng_seed: 11,
            ..SynthConfig::default()
        };
        let c = generate(&synth).unwrap();
        let cfg = PipelineConfig {
            scene: synth.scene(),
            dataset: DatasetConfig {
                window_frames: 30,
                stride: 10,
                label_horizon: 60,
                folds: 3,
                ..DatasetConfig::default()
            },
            ..PipelineConfig::default()
        };
        (c.trajectories, cfg)
    }

    #[test]
    fn labels_match_hints() {
        let (trajs, cfg) = corpus();
        let hints: Vec<(VehicleId, Class)> = trajs
            .iter()
            .filter_map(|t| t.class_hint.map(|c| (t.vehicle_id, c)))
            .collect();
        let set = extract_features(trajs, None, &cfg).unwrap();
        assert!(set.dropped.is_empty(), "{:?}", set.dropped);
        assert_eq!(set.egos.len(), hints.len());
        for (e, (id, c)) in set.egos.iter().zip(hints) {
            assert_eq!((e.vehicle_id, e.class), (id, c));
            assert!(e.frames.iter().all(|f| f.values.iter().all(|v| v.is_finite())));
        }
    }

    #[test]
    fn windows_have_expected_shape() {
        let (trajs, cfg) = corpus();
        let set = extract_features(trajs, None, &cfg).unwrap();
        let samples = windows(&set, &cfg.dataset).unwrap();
        assert!(samples.iter().all(|s| s.values.len() == 30 * FEATURE_COUNT));
        for s in samples.iter().filter(|s| s.label != Class::LK) {
            let e = set.egos.iter().find(|e| e.vehicle_id == s.ego_id).unwrap();
            let cross = e.cross_frame.unwrap();
            assert!(s.end_frame <= cross && s.end_frame >= cross - 60);
            assert_eq!((cross - s.end_frame) % 10, 0);
        }
    }

    #[test]
    fn run_is_balanced_and_deterministic() {
        let (trajs, cfg) = corpus();
        let a = run(trajs.clone(), None, &cfg).unwrap();
        let b = run(trajs, None, &cfg).unwrap();
        assert_eq!(a, b);
        let m = &a.manifest;
        assert_eq!(m.total, a.train.len() + a.test.len());
        let lc = m.class_counts[&Class::LLC].min(m.class_counts[&Class::RLC]);
        assert!(m.class_counts.values().all(|&n| n == lc));
    }

    #[test]
    fn unknown_ego_is_dropped() {
        let (trajs, cfg) = corpus();
        let set = extract_features(trajs, Some(&[0, 999_999]), &cfg).unwrap();
        assert_eq!(set.egos.len(), 1);
        assert_eq!(set.dropped.len(), 1);
        assert_eq!(set.dropped[0].vehicle_id, 999_999);
    }
}
