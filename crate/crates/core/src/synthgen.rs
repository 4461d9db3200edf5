//! Deterministic synthetic freeway corpora.
//!
//! Every ego vehicle gets its own scene on a disjoint block of frames, so a
//! whole corpus can be written to one trajectory file. Lanes are numbered
//! `1..=lanes` from left to right (`left_lane_delta = -1`) and lane `l` is
//! centred at `y = (l - 0.5) * lane_width`.
//!
//! Lane-changing egos drive behind a slower leader, with an open gap in the
//! target lane and a vehicle keeping them from the other side. Lane keepers
//! follow a leader at their own pace with random traffic alongside.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Class;
use crate::error::{Error, Result};
use crate::ingest::{self, SceneConfig, TrackFrame, Trajectory, VehicleId};

/// Frames reserved per ego scene.
pub const FRAME_BLOCK: i64 = 10_000;
/// Vehicle ids reserved per ego scene; the ego takes the first.
pub const ID_BLOCK: u64 = 16;

pub const PAPER_COUNTS: [(Class, usize); 3] = [(Class::LK, 478), (Class::LLC, 240), (Class::RLC, 305)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub lanes: i32,
    pub lane_width: f64,
    pub segment_length: f64,
    pub n_lk: usize,
    pub n_llc: usize,
    pub n_rlc: usize,
    pub speed_mean: f64,
    pub speed_std: f64,
    pub lc_duration_s: (f64, f64),
    pub position_noise_std: f64,
    pub fps: f64,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            lanes: 3,
            lane_width: 12.0,
            segment_length: 2230.0,
            n_lk: 48,
            n_llc: 24,
            n_rlc: 31,
            speed_mean: 95.0,
            speed_std: 8.0,
            lc_duration_s: (3.0, 6.0),
            position_noise_std: 0.1,
            fps: 30.0,
            rng_seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lanes < 2 {
            return Err(Error::config("synth.lanes", "must be >= 2"));
        }
        if !(self.lane_width.is_finite() && self.lane_width > 0.0) {
            return Err(Error::config("synth.lane_width", "must be > 0"));
        }
        if !(self.segment_length.is_finite() && self.segment_length >= 500.0) {
            return Err(Error::config("synth.segment_length", "must be >= 500 ft"));
        }
        if !(self.speed_mean.is_finite() && self.speed_mean >= 30.0) {
            return Err(Error::config("synth.speed_mean", "must be >= 30 ft/s"));
        }
        if !(self.speed_std.is_finite() && self.speed_std >= 0.0) {
            return Err(Error::config("synth.speed_std", "must be >= 0"));
        }
        let (lo, hi) = self.lc_duration_s;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi >= lo) {
            return Err(Error::config("synth.lc_duration_s", "must be positive and ordered"));
        }
        if !(self.position_noise_std.is_finite() && self.position_noise_std >= 0.0) {
            return Err(Error::config("synth.position_noise_std", "must be >= 0"));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::config("synth.fps", "must be > 0"));
        }
        Ok(())
    }

    /// Scene settings matching the generated corpus.
    pub fn scene(&self) -> SceneConfig {
        SceneConfig {
            fps: self.fps,
            left_lane_delta: -1,
            lane_width: self.lane_width,
            ..SceneConfig::default()
        }
    }

    fn lane_center(&self, lane: i32) -> f64 {
        (lane as f64 - 0.5) * self.lane_width
    }
}

/// `round(count * scale)` with halves rounded up.
pub fn scaled_count(count: usize, scale: f64) -> usize {
    (count as f64 * scale + 0.5).floor().max(0.0) as usize
}

/// Counts (478 LK, 240 LLC, 305 RLC) scaled for desk runs.
pub fn paperlike_config(scale: f64, seed: u64) -> Result<SynthConfig> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::config("scale", "must be > 0"));
    }
    Ok(SynthConfig {
        n_lk: scaled_count(478, scale),
        n_llc: scaled_count(240, scale),
        n_rlc: scaled_count(305, scale),
        rng_seed: seed,
        ..SynthConfig::default()
    })
}

pub fn generate_paperlike(scale: f64, seed: u64) -> Result<Corpus> {
    generate(&paperlike_config(scale, seed)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoTruth {
    pub vehicle_id: VehicleId,
    pub class: Class,
    pub cross_frame: Option<i64>,
    pub start_lane: i32,
    pub end_lane: i32,
    pub first_frame: i64,
    pub last_frame: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub seed: u64,
    pub config: SynthConfig,
    pub counts: BTreeMap<Class, usize>,
    pub egos: Vec<EgoTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub trajectories: Vec<Trajectory>,
    pub manifest: SynthManifest,
}

pub const CORPUS_FILE: &str = "trajectories.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

impl Corpus {
    /// Write `trajectories.csv` and `manifest.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        ingest::write_trajectories(dir.join(CORPUS_FILE), &self.trajectories, &self.manifest.config.scene())?;
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(&path, json + "\n").map_err(|e| Error::io(path, e))
    }
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<SynthManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Longitudinal motion `x(t) = x0 + v s + amp P/2π (cos φ − cos(2π s/P + φ))`
/// with `s = t + shift`.
#[derive(Debug, Clone, Copy)]
struct Longitudinal {
    x0: f64,
    v: f64,
    amp: f64,
    period: f64,
    phase: f64,
    shift: f64,
}

impl Longitudinal {
    fn constant(x0: f64, v: f64) -> Self {
        Longitudinal {
            x0,
            v,
            amp: 0.0,
            period: 1.0,
            phase: 0.0,
            shift: 0.0,
        }
    }

    fn x(&self, t: f64) -> f64 {
        let s = t + self.shift;
        let k = self.amp * self.period / TAU;
        self.x0 + self.v * s + k * (self.phase.cos() - (TAU * s / self.period + self.phase).cos())
    }

    fn vx(&self, t: f64) -> f64 {
        let s = t + self.shift;
        self.v + self.amp * (TAU * s / self.period + self.phase).sin()
    }

    /// Same motion `dt` seconds ahead in time and `dx` feet further along.
    fn newell(&self, dt: f64, dx: f64) -> Self {
        Longitudinal {
            x0: self.x0 + dx,
            shift: self.shift + dt,
            ..*self
        }
    }
}

/// Lateral motion: lane centre, slow wander, optional smoothstep lane change.
#[derive(Debug, Clone, Copy)]
struct Lateral {
    y0: f64,
    wander_amp: f64,
    wander_period: f64,
    wander_phase: f64,
    /// Scene length over which the wander fades in and out as `sin²(πt/T)`.
    envelope: Option<f64>,
    /// (signed offset, crossing time, duration)
    change: Option<(f64, f64, f64)>,
}

impl Lateral {
    fn lane(y0: f64) -> Self {
        Lateral {
            y0,
            wander_amp: 0.0,
            wander_period: 1.0,
            wander_phase: 0.0,
            envelope: None,
            change: None,
        }
    }

    fn progress(&self, t: f64) -> (f64, f64) {
        match self.change {
            None => (0.0, 0.0),
            Some((dy, tc, dur)) => {
                let u = ((t - tc) / dur + 0.5).clamp(0.0, 1.0);
                let s = u * u * (3.0 - 2.0 * u);
                let ds = if u > 0.0 && u < 1.0 { 6.0 * u * (1.0 - u) / dur } else { 0.0 };
                (dy * s, dy * ds)
            }
        }
    }

    fn base_y(&self, t: f64) -> f64 {
        self.y0 + self.progress(t).0
    }

    fn envelope(&self, t: f64) -> (f64, f64) {
        match self.envelope {
            None => (1.0, 0.0),
            Some(len) => {
                let a = std::f64::consts::PI * t / len;
                (a.sin().powi(2), std::f64::consts::PI / len * (2.0 * a).sin())
            }
        }
    }

    fn y(&self, t: f64) -> f64 {
        let (e, _) = self.envelope(t);
        self.base_y(t) + e * self.wander_amp * (TAU * t / self.wander_period + self.wander_phase).sin()
    }

    fn vy(&self, t: f64) -> f64 {
        let (e, de) = self.envelope(t);
        let arg = TAU * t / self.wander_period + self.wander_phase;
        self.progress(t).1
            + self.wander_amp * (e * TAU / self.wander_period * arg.cos() + de * arg.sin())
    }
}

struct Vehicle {
    id: VehicleId,
    lon: Longitudinal,
    lat: Lateral,
    length: f64,
    /// Fixed lane; `None` derives it from the noise-free lateral position.
    lane: Option<i32>,
}

pub fn generate(config: &SynthConfig) -> Result<Corpus> {
    config.validate()?;
    let classes: Vec<Class> = [(Class::LK, config.n_lk), (Class::LLC, config.n_llc), (Class::RLC, config.n_rlc)]
        .iter()
        .flat_map(|&(c, n)| std::iter::repeat_n(c, n))
        .collect();
    let scenes: Vec<(Vec<Trajectory>, EgoTruth)> = classes
        .par_iter()
        .enumerate()
        .map(|(k, &class)| ego_scene(config, k, class))
        .collect::<Result<_>>()?;
    let mut trajectories = Vec::new();
    let mut egos = Vec::with_capacity(scenes.len());
    for (trajs, truth) in scenes {
        trajectories.extend(trajs);
        egos.push(truth);
    }
    let counts = Class::ALL
        .iter()
        .map(|&c| (c, classes.iter().filter(|&&x| x == c).count()))
        .collect();
    Ok(Corpus {
        trajectories,
        manifest: SynthManifest {
            seed: config.rng_seed,
            config: config.clone(),
            counts,
            egos,
        },
    })
}

fn ego_scene(cfg: &SynthConfig, k: usize, class: Class) -> Result<(Vec<Trajectory>, EgoTruth)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(k as u64 + 1);
    let fps = cfg.fps;
    let base_frame = k as i64 * FRAME_BLOCK;
    let base_id = k as u64 * ID_BLOCK;
    let lanes = cfg.lanes;

    // left of lane l is l - 1
    let lane = match class {
        Class::LK => rng.random_range(1..=lanes),
        Class::LLC => rng.random_range(2..=lanes),
        Class::RLC => rng.random_range(1..lanes),
    };
    let target = match class {
        Class::LK => lane,
        Class::LLC => lane - 1,
        Class::RLC => lane + 1,
    };

    let mean = cfg.speed_mean;
    let v0 = if cfg.speed_std > 0.0 {
        Normal::new(mean, cfg.speed_std)
            .expect("validated")
            .sample(&mut rng)
            .clamp(0.75 * mean, 1.25 * mean)
    } else {
        mean
    };
    let ego_lon = Longitudinal {
        x0: 0.0,
        v: v0,
        amp: rng.random_range(0.5..2.5),
        period: rng.random_range(8.0..16.0),
        phase: rng.random_range(0.0..TAU),
        shift: 0.0,
    };

    let mut n_frames = 0usize;
    while ego_lon.x(n_frames as f64 / fps) <= cfg.segment_length {
        n_frames += 1;
        if n_frames as i64 >= FRAME_BLOCK {
            return Err(Error::InvalidData("ego scene longer than its frame block".into()));
        }
    }
    let duration = n_frames as f64 / fps;

    let wander = if class == Class::LK { 1.2 } else { 0.4 };
    let mut ego_lat = Lateral {
        wander_amp: rng.random_range(0.0..wander),
        wander_period: rng.random_range(4.0..10.0),
        wander_phase: rng.random_range(0.0..TAU),
        envelope: Some((n_frames - 1) as f64 / fps),
        ..Lateral::lane(cfg.lane_center(lane))
    };
    let mut t_c = 0.0;
    if class != Class::LK {
        let dur = rng.random_range(cfg.lc_duration_s.0..=cfg.lc_duration_s.1);
        // room for a full window plus labelling horizon before the crossing
        let lo = 10.5f64.min(duration * 0.5);
        let hi = (duration - dur / 2.0 - 1.0).max(lo);
        t_c = rng.random_range(lo..=hi);
        let dy = (target - lane) as f64 * cfg.lane_width;
        ego_lat.change = Some((dy, t_c, dur));
    }

    let mut vehicles = vec![Vehicle {
        id: base_id,
        lon: ego_lon,
        lat: ego_lat,
        length: rng.random_range(14.0..18.0),
        lane: None,
    }];
    let mut next_id = base_id + 1;
    let mut add = |vehicles: &mut Vec<Vehicle>, rng: &mut ChaCha8Rng, lon: Longitudinal, lane: i32| {
        vehicles.push(Vehicle {
            id: next_id,
            lon,
            lat: Lateral {
                wander_amp: rng.random_range(0.0..0.4),
                wander_period: rng.random_range(4.0..10.0),
                wander_phase: rng.random_range(0.0..TAU),
                ..Lateral::lane(cfg.lane_center(lane))
            },
            length: rng.random_range(14.0..18.0),
            lane: Some(lane),
        });
        next_id += 1;
    };

    // follower in the ego lane, trailing the ego's own motion
    if rng.random_bool(0.85) {
        let tau = rng.random_range(1.0..2.0);
        let d = rng.random_range(20.0..40.0);
        add(&mut vehicles, &mut rng, ego_lon.newell(-tau, -d), lane);
    }

    let sides: Vec<i32> = [lane - 1, lane + 1].into_iter().filter(|l| (1..=lanes).contains(l)).collect();
    match class {
        Class::LK => {
            if rng.random_bool(0.4) {
                // a slower leader the ego closes in on without changing lanes
                let v_p = v0 - rng.random_range(2.0..10.0);
                let gap_end = rng.random_range(30.0..90.0);
                let x0 = ego_lon.x(duration) + gap_end - v_p * duration;
                add(&mut vehicles, &mut rng, Longitudinal::constant(x0, v_p), lane);
            } else if rng.random_bool(0.6) {
                let tau = rng.random_range(1.0..2.0);
                let d = rng.random_range(20.0..40.0);
                add(&mut vehicles, &mut rng, ego_lon.newell(tau, d), lane);
            }
            let t_mid = duration / 2.0;
            for &side in &sides {
                for ahead in [true, false] {
                    if !rng.random_bool(0.6) {
                        continue;
                    }
                    let dx = rng.random_range(20.0..300.0) * if ahead { 1.0 } else { -1.0 };
                    let v = v0 + rng.random_range(-8.0..8.0);
                    let x0 = ego_lon.x(t_mid) + dx - v * t_mid;
                    add(&mut vehicles, &mut rng, Longitudinal::constant(x0, v), side);
                }
            }
        }
        Class::LLC | Class::RLC => {
            let x_c = ego_lon.x(t_c);
            // usually a slower leader the ego is closing in on
            let v_p = if rng.random_bool(0.75) {
                let v_p = v0 - rng.random_range(8.0..16.0);
                let gap = rng.random_range(60.0..110.0);
                add(&mut vehicles, &mut rng, Longitudinal::constant(x_c + gap - v_p * t_c, v_p), lane);
                v_p
            } else {
                let tau = rng.random_range(1.0..2.0);
                let d = rng.random_range(20.0..40.0);
                add(&mut vehicles, &mut rng, ego_lon.newell(tau, d), lane);
                v0
            };
            // usually a gap in the target lane
            if rng.random_bool(0.8) {
                let v_lp = v0 + rng.random_range(-4.0..8.0);
                let d_lp = rng.random_range(60.0..300.0);
                add(&mut vehicles, &mut rng, Longitudinal::constant(x_c + d_lp - v_lp * t_c, v_lp), target);
            }
            if rng.random_bool(0.8) {
                let v_lf = v0 - rng.random_range(-4.0..6.0);
                let d_lf = rng.random_range(60.0..250.0);
                add(&mut vehicles, &mut rng, Longitudinal::constant(x_c - d_lf - v_lf * t_c, v_lf), target);
            }
            // the other side is often occupied near the ego
            for &side in sides.iter().filter(|&&s| s != target) {
                for _ in 0..2 {
                    if rng.random_bool(0.6) {
                        let v = v_p + rng.random_range(-4.0..4.0);
                        let dx = rng.random_range(-150.0..150.0);
                        add(&mut vehicles, &mut rng, Longitudinal::constant(x_c + dx - v * t_c, v), side);
                    }
                }
            }
        }
    }

    let noise = Normal::new(0.0, cfg.position_noise_std.max(f64::MIN_POSITIVE)).expect("validated");
    let mut trajectories = Vec::with_capacity(vehicles.len());
    for veh in &vehicles {
        let mut frames = Vec::new();
        for i in 0..n_frames {
            let t = i as f64 / fps;
            let x = veh.lon.x(t);
            if !(0.0..=cfg.segment_length).contains(&x) {
                continue;
            }
            let y = veh.lat.y(t);
            let psi = veh.lat.vy(t).atan2(veh.lon.vx(t));
            let (hx, hy) = (0.5 * veh.length * psi.cos(), 0.5 * veh.length * psi.sin());
            let (nx, ny) = if cfg.position_noise_std > 0.0 {
                (noise.sample(&mut rng), noise.sample(&mut rng))
            } else {
                (0.0, 0.0)
            };
            let (cx, cy) = (x + nx, y + ny);
            let lane_id = veh
                .lane
                .unwrap_or_else(|| (veh.lat.base_y(t) / cfg.lane_width).floor() as i32 + 1);
            frames.push(TrackFrame {
                frame: base_frame + i as i64,
                vehicle_id: veh.id,
                center_x: cx,
                center_y: cy,
                head_x: cx + hx,
                head_y: cy + hy,
                tail_x: cx - hx,
                tail_y: cy - hy,
                lane_id,
            });
        }
        if frames.is_empty() {
            continue;
        }
        trajectories.push(Trajectory {
            vehicle_id: veh.id,
            frames,
            class_hint: (veh.id == base_id).then_some(class),
        });
    }

    let ego = &trajectories[0];
    let cross_frame = ego
        .frames
        .windows(2)
        .find(|w| w[0].lane_id != w[1].lane_id)
        .map(|w| w[1].frame);
    let truth = EgoTruth {
        vehicle_id: base_id,
        class,
        cross_frame,
        start_lane: lane,
        end_lane: ego.frames.last().map_or(lane, |f| f.lane_id),
        first_frame: ego.first_frame().unwrap_or(base_frame),
        last_frame: ego.last_frame().unwrap_or(base_frame),
    };
    if class != Class::LK && cross_frame.is_none() {
        return Err(Error::InvalidData(format!("ego {base_id} never crossed its lane boundary")));
    }
    Ok((trajectories, truth))
}
