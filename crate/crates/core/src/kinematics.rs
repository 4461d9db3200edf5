//! Per-vehicle kinematic indicators from smoothed positions.
//!
//! Velocity at frame `t` is the median of the central differences
//! `(s(t+n) - s(t-n)) / (2nT)` for `n = 1..=n_eff`, with
//! `n_eff = min(n_max, t, last - t)`. The median makes the estimate immune to
//! isolated position outliers. Acceleration and yaw rate are plain central
//! differences of velocity and heading; heading uses the same median-of-`n`
//! treatment on the head(t+n) - tail(t-n) displacement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KinematicsConfig {
    pub n_max: usize,
    pub fps: f64,
}

impl Default for KinematicsConfig {
    fn default() -> Self {
        KinematicsConfig {
            n_max: 8,
            fps: 30.0,
        }
    }
}

impl KinematicsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_max < 1 {
            return Err(Error::config("kinematics.n_max", "must be >= 1"));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::config("kinematics.fps", "must be > 0"));
        }
        Ok(())
    }
}

/// The six indicators of one vehicle at one frame. Velocities in ft/s,
/// accelerations in ft/s², heading in degrees, yaw rate in degrees/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicFrame {
    pub frame: i64,
    pub v_x: f64,
    pub v_y: f64,
    pub a_x: f64,
    pub a_y: f64,
    pub theta: f64,
    pub yaw_rate: f64,
}

impl KinematicFrame {
    pub fn indicators(&self) -> [f64; 6] {
        [self.v_x, self.v_y, self.a_x, self.a_y, self.theta, self.yaw_rate]
    }
}

fn effective_n(len: usize, t: usize, n_max: usize) -> Result<usize> {
    if t >= len {
        return Err(Error::NoCentralDifference { index: t });
    }
    let n_eff = n_max.min(t).min(len - 1 - t);
    if n_eff == 0 {
        return Err(Error::NoCentralDifference { index: t });
    }
    Ok(n_eff)
}

/// Median; an even count averages the two central order statistics.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    values.sort_by(|a, b| a.total_cmp(b));
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

pub fn median_velocity(positions: &[f64], t: usize, n_max: usize, fps: f64) -> Result<f64> {
    let n_eff = effective_n(positions.len(), t, n_max)?;
    let mut v: Vec<f64> = (1..=n_eff)
        .map(|n| (positions[t + n] - positions[t - n]) * fps / (2 * n) as f64)
        .collect();
    Ok(median(&mut v))
}

/// Central difference of a velocity series.
pub fn accel(velocities: &[f64], t: usize, fps: f64) -> Result<f64> {
    if t == 0 || t + 1 >= velocities.len() {
        return Err(Error::NoCentralDifference { index: t });
    }
    Ok((velocities[t + 1] - velocities[t - 1]) * fps / 2.0)
}

/// Wrap an angle difference in degrees to `(-180, 180]`.
pub fn wrap_degrees(d: f64) -> f64 {
    let mut r = d.rem_euclid(360.0);
    if r > 180.0 {
        r -= 360.0;
    }
    r
}

/// Heading in degrees from the longitudinal axis, range `(-180, 180]`.
pub fn heading(traj: &Trajectory, t: usize, n_max: usize) -> Result<f64> {
    let frames = &traj.frames;
    let n_eff = effective_n(frames.len(), t, n_max)?;
    let mut angles = Vec::with_capacity(n_eff);
    for n in 1..=n_eff {
        let head = &frames[t + n];
        let tail = &frames[t - n];
        let dx = head.head_x - tail.tail_x;
        let dy = head.head_y - tail.tail_y;
        if dx == 0.0 && dy == 0.0 {
            return Err(Error::DegenerateHeading { index: t });
        }
        angles.push(wrap_degrees(dy.atan2(dx).to_degrees()));
    }
    // median of offsets from the first estimate keeps headings near ±180° coherent
    let anchor = angles[0];
    let mut offsets: Vec<f64> = angles.iter().map(|a| wrap_degrees(a - anchor)).collect();
    Ok(wrap_degrees(anchor + median(&mut offsets)))
}

/// Central difference of a heading series on the shortest arc, degrees/s.
pub fn yaw_rate(thetas: &[f64], t: usize, fps: f64) -> Result<f64> {
    if t == 0 || t + 1 >= thetas.len() {
        return Err(Error::NoCentralDifference { index: t });
    }
    Ok(wrap_degrees(thetas[t + 1] - thetas[t - 1]) * fps / 2.0)
}

/// Kinematic frames for every index where all six indicators exist, i.e.
/// indices `2..=len-3` of the trajectory.
pub fn kinematic_series(traj: &Trajectory, config: &KinematicsConfig) -> Result<Vec<KinematicFrame>> {
    config.validate()?;
    let len = traj.frames.len();
    if len < 5 {
        return Err(Error::TooShort {
            vehicle_id: traj.vehicle_id,
            message: format!("{len} frames, kinematics need at least 5"),
        });
    }
    let xs: Vec<f64> = traj.frames.iter().map(|f| f.center_x).collect();
    let ys: Vec<f64> = traj.frames.iter().map(|f| f.center_y).collect();

    // velocity and heading exist on 1..=len-2; keep index-aligned buffers
    let mut vx = vec![0.0; len];
    let mut vy = vec![0.0; len];
    let mut th = vec![0.0; len];
    for t in 1..len - 1 {
        vx[t] = median_velocity(&xs, t, config.n_max, config.fps)?;
        vy[t] = median_velocity(&ys, t, config.n_max, config.fps)?;
        th[t] = heading(traj, t, config.n_max)?;
    }
    let vx = &vx[1..len - 1];
    let vy = &vy[1..len - 1];
    let th = &th[1..len - 1];

    (2..len - 2)
        .map(|t| {
            let k = t - 1;
            let frame = KinematicFrame {
                frame: traj.frames[t].frame,
                v_x: vx[k],
                v_y: vy[k],
                a_x: accel(vx, k, config.fps)?,
                a_y: accel(vy, k, config.fps)?,
                theta: th[k],
                yaw_rate: yaw_rate(th, k, config.fps)?,
            };
            if frame.indicators().iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "kinematics of vehicle {} at frame {}",
                    traj.vehicle_id, frame.frame
                )));
            }
            Ok(frame)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::TrackFrame;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn straight(n: usize, speed_ft_per_frame: f64, len: f64) -> Trajectory {
        Trajectory {
            vehicle_id: 1,
            frames: (0..n)
                .map(|i| {
                    let x = i as f64 * speed_ft_per_frame;
                    TrackFrame {
                        frame: i as i64 + 100,
                        vehicle_id: 1,
                        center_x: x,
                        center_y: 18.0,
                        head_x: x + len / 2.0,
                        head_y: 18.0,
                        tail_x: x - len / 2.0,
                        tail_y: 18.0,
                        lane_id: 2,
                    }
                })
                .collect(),
            class_hint: None,
        }
    }

    #[test]
    fn constant_series_has_zero_velocity() {
        let s = vec![7.0; 30];
        assert_eq!(median_velocity(&s, 15, 8, 30.0).unwrap(), 0.0);
    }

    #[test]
    fn linear_series_velocity() {
        let s: Vec<f64> = (0..40).map(|k| 0.1 * k as f64).collect();
        assert_abs_diff_eq!(median_velocity(&s, 20, 8, 30.0).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn median_rejects_single_outlier() {
        let mut s: Vec<f64> = (0..41).map(|k| k as f64).collect();
        let t = 20;
        s[t + 2] += 5.0;
        // hand enumeration: v_n = 30 for n != 2, v_2 = (4 + 5) * 30 / 4 = 67.5
        let v2 = (s[t + 2] - s[t - 2]) * 30.0 / 4.0;
        assert_eq!(v2, 67.5);
        assert_eq!(median_velocity(&s, t, 8, 30.0).unwrap(), 30.0);
    }

    #[test]
    fn boundary_has_no_central_difference() {
        let s = vec![0.0; 10];
        assert!(matches!(
            median_velocity(&s, 0, 8, 30.0),
            Err(Error::NoCentralDifference { index: 0 })
        ));
        assert!(median_velocity(&s, 9, 8, 30.0).is_err());
        assert!(median_velocity(&s, 1, 8, 30.0).is_ok());
    }

    #[test]
    fn even_count_median_is_midpoint() {
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&mut [5.0]), 5.0);
    }

    #[test]
    fn accel_cases() {
        assert_eq!(accel(&[5.0; 5], 2, 30.0).unwrap(), 0.0);
        let v: Vec<f64> = (0..10).map(|k| 3.0 * k as f64 / 30.0).collect();
        assert_abs_diff_eq!(accel(&v, 5, 30.0).unwrap(), 3.0, epsilon = 1e-12);
        let v = [10.0, 10.0, 16.0, 10.0, 10.0];
        assert_eq!(accel(&v, 1, 30.0).unwrap(), 90.0);
        assert_eq!(accel(&v, 3, 30.0).unwrap(), -90.0);
        assert!(accel(&v, 0, 30.0).is_err());
        assert!(accel(&v, 4, 30.0).is_err());
    }

    #[test]
    fn heading_straight_is_zero() {
        let t = straight(30, 3.0, 15.0);
        assert_eq!(heading(&t, 15, 8).unwrap(), 0.0);
    }

    #[test]
    fn heading_diagonal_is_45() {
        let mut t = straight(30, 3.0, 15.0);
        for f in &mut t.frames {
            let d = f.center_x;
            f.center_y = d;
            f.head_x = d + 5.0;
            f.head_y = d + 5.0;
            f.tail_x = d - 5.0;
            f.tail_y = d - 5.0;
        }
        assert_abs_diff_eq!(heading(&t, 15, 8).unwrap(), 45.0, epsilon = 1e-12);
    }

    #[test]
    fn heading_single_difference() {
        let mut t = straight(3, 0.0, 4.0);
        t.frames[0].tail_x = 0.0;
        t.frames[0].tail_y = 0.0;
        t.frames[2].head_x = 10.0;
        t.frames[2].head_y = -1.0;
        let expected = (-1.0f64).atan2(10.0).to_degrees();
        let got = heading(&t, 1, 8).unwrap();
        assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(got, -5.7106, epsilon = 1e-4);
    }

    #[test]
    fn degenerate_heading() {
        let mut t = straight(3, 0.0, 4.0);
        t.frames[2].head_x = t.frames[0].tail_x;
        t.frames[2].head_y = t.frames[0].tail_y;
        assert!(matches!(heading(&t, 1, 8), Err(Error::DegenerateHeading { .. })));
    }

    #[test]
    fn heading_mirrors_with_lateral_reflection() {
        let mut t = straight(30, 3.0, 15.0);
        for (i, f) in t.frames.iter_mut().enumerate() {
            let y = 0.4 * i as f64;
            f.center_y = y;
            f.head_y = y + 1.0;
            f.tail_y = y - 1.0;
        }
        let mut m = t.clone();
        for f in &mut m.frames {
            f.center_y = -f.center_y;
            f.head_y = -f.head_y;
            f.tail_y = -f.tail_y;
        }
        for k in 1..29 {
            let a = heading(&t, k, 8).unwrap();
            let b = heading(&m, k, 8).unwrap();
            assert_abs_diff_eq!(a, -b, epsilon = 1e-12);
            assert!(a > 0.0);
        }
    }

    #[test]
    fn yaw_rate_cases() {
        assert_eq!(yaw_rate(&[12.0; 5], 2, 30.0).unwrap(), 0.0);
        let th: Vec<f64> = (0..10).map(|k| 0.3 * k as f64).collect();
        assert_abs_diff_eq!(yaw_rate(&th, 4, 30.0).unwrap(), 9.0, epsilon = 1e-9);
        let th = [179.0, 0.0, -179.0];
        assert_abs_diff_eq!(yaw_rate(&th, 1, 30.0).unwrap(), 30.0, epsilon = 1e-9);
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_degrees(-180.0), 180.0);
        assert_eq!(wrap_degrees(180.0), 180.0);
        assert_eq!(wrap_degrees(-358.0), 2.0);
        assert_eq!(wrap_degrees(190.0), -170.0);
    }

    #[test]
    fn series_length_and_frames() {
        let t = straight(100, 1.0, 15.0);
        let ks = kinematic_series(&t, &KinematicsConfig::default()).unwrap();
        assert_eq!(ks.len(), 96);
        assert_eq!(ks[0].frame, 102);
        assert_eq!(ks[95].frame, 197);
    }

    #[test]
    fn series_too_short() {
        let t = straight(4, 1.0, 15.0);
        assert!(matches!(
            kinematic_series(&t, &KinematicsConfig::default()),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn uniform_motion_is_exact() {
        let t = straight(60, 1.0, 15.0);
        for k in kinematic_series(&t, &KinematicsConfig::default()).unwrap() {
            assert_eq!(k.indicators(), [30.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn stationary_vehicle() {
        let t = straight(20, 0.0, 15.0);
        for k in kinematic_series(&t, &KinematicsConfig::default()).unwrap() {
            assert_eq!([k.v_x, k.v_y, k.a_x, k.a_y, k.yaw_rate], [0.0; 5]);
            assert_eq!(k.theta, 0.0);
        }
    }

    #[test]
    fn quadratic_acceleration_is_exact() {
        let fps = 30.0;
        let xs: Vec<f64> = (0..300)
            .map(|k| {
                let t = k as f64 / fps;
                0.5 * 3.0 * t * t
            })
            .collect();
        let v: Vec<f64> = (1..299).map(|t| median_velocity(&xs, t, 8, fps).unwrap()).collect();
        for k in 1..v.len() - 1 {
            assert!((accel(&v, k, fps).unwrap() - 3.0).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn constant_heading_has_zero_yaw(theta in -179.0f64..180.0, n in 3usize..30) {
            let th = vec![theta; n];
            for t in 1..n - 1 {
                prop_assert_eq!(yaw_rate(&th, t, 30.0).unwrap(), 0.0);
            }
        }

        #[test]
        fn median_beats_mean_on_outliers(delta in 0.5f64..50.0, t in 10usize..30) {
            let mut s: Vec<f64> = (0..41).map(|k| k as f64).collect();
            s[t + 2] += delta;
            let med = median_velocity(&s, t, 8, 30.0).unwrap();
            let mean: f64 = (1..=8)
                .map(|n| (s[t + n] - s[t - n]) * 30.0 / (2 * n) as f64)
                .sum::<f64>() / 8.0;
            prop_assert_eq!(med, 30.0);
            prop_assert!((mean - 30.0).abs() > 1e-6);
        }
    }
}
