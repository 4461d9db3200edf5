//! Labels, sliding windows, class balancing, splits and folds.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{FeatureFrame, FEATURE_COUNT};
use crate::ingest::{SceneConfig, Trajectory, VehicleId};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Class {
    LK = 0,
    RLC = 1,
    LLC = 2,
}

impl Class {
    pub const ALL: [Class; 3] = [Class::LK, Class::RLC, Class::LLC];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Class> {
        Class::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::InvalidData(format!("invalid class label {i}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Class::LK => "LK",
            Class::RLC => "RLC",
            Class::LLC => "LLC",
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Class {
    type Err = Error;

    fn from_str(s: &str) -> Result<Class> {
        match s {
            "LK" => Ok(Class::LK),
            "RLC" => Ok(Class::RLC),
            "LLC" => Ok(Class::LLC),
            _ => Err(Error::InvalidData(format!("unknown class '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub window_frames: usize,
    pub stride: usize,
    pub label_horizon: usize,
    pub train_fraction: f64,
    pub folds: usize,
    pub rng_seed: u64,
    /// Per-class caps; classes without a cap are left alone. Empty means
    /// "cap every class at the smaller lane-change class".
    pub balance_target: BTreeMap<Class, usize>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            window_frames: 150,
            stride: 1,
            label_horizon: 150,
            train_fraction: 0.8,
            folds: 10,
            rng_seed: 0,
            balance_target: BTreeMap::new(),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_frames < 1 {
            return Err(Error::config("dataset.window_frames", "must be >= 1"));
        }
        if self.stride < 1 {
            return Err(Error::config("dataset.stride", "must be >= 1"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config("dataset.train_fraction", "must be in (0, 1)"));
        }
        if self.folds < 2 {
            return Err(Error::config("dataset.folds", "must be >= 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    /// `window_frames x 54`, time-major.
    pub values: Vec<f64>,
    pub label: Class,
    pub ego_id: VehicleId,
    pub end_frame: i64,
}

impl SequenceSample {
    pub fn steps(&self) -> usize {
        self.values.len() / FEATURE_COUNT
    }

    pub fn frame_values(&self, step: usize) -> &[f64] {
        &self.values[step * FEATURE_COUNT..(step + 1) * FEATURE_COUNT]
    }
}

pub fn label_trajectory(traj: &Trajectory, config: &SceneConfig) -> Result<(Class, Option<i64>)> {
    let transitions: Vec<_> = traj
        .frames
        .windows(2)
        .filter(|w| w[0].lane_id != w[1].lane_id)
        .collect();
    match transitions.as_slice() {
        [] => Ok((Class::LK, None)),
        [w] => {
            let delta = w[1].lane_id - w[0].lane_id;
            let class = if delta.signum() == config.left_lane_delta.signum() {
                Class::LLC
            } else {
                Class::RLC
            };
            Ok((class, Some(w[1].frame)))
        }
        many => Err(Error::MultiLaneChange {
            vehicle_id: traj.vehicle_id,
            transitions: many.len(),
        }),
    }
}

/// Sliding windows over one ego's feature series. LK windows start at the
/// first frame; LC windows are aligned so that one of them ends exactly at
/// the crossing frame whenever coverage allows.
pub fn extract_windows(
    ego_id: VehicleId,
    features: &[FeatureFrame],
    class: Class,
    cross_frame: Option<i64>,
    config: &DatasetConfig,
) -> Result<Vec<SequenceSample>> {
    let w = config.window_frames;
    let n = features.len();
    if n < w {
        return Ok(Vec::new());
    }
    if features.windows(2).any(|p| p[1].frame != p[0].frame + 1) {
        return Err(Error::InvalidData(format!(
            "feature frames of vehicle {ego_id} are not contiguous"
        )));
    }
    let first_end = features[w - 1].frame;
    let last_end = features[n - 1].frame;
    let stride = config.stride as i64;

    let ends: Vec<i64> = match (class, cross_frame) {
        (Class::LK, _) => (first_end..=last_end).step_by(config.stride).collect(),
        (_, None) => {
            return Err(Error::InvalidData(format!(
                "lane-change sample of vehicle {ego_id} without crossing frame"
            )))
        }
        (_, Some(cross)) => {
            let hi = cross.min(last_end);
            let lo = (cross - config.label_horizon as i64).max(first_end);
            if hi < lo {
                Vec::new()
            } else {
                // latest end on the stride grid anchored at the crossing
                let r = (cross - hi) % stride;
                let mut e = if r == 0 { hi } else { hi - (stride - r) };
                let mut ends = Vec::new();
                while e >= lo {
                    ends.push(e);
                    e -= stride;
                }
                ends.reverse();
                ends
            }
        }
    };

    let base = features[0].frame;
    Ok(ends
        .into_iter()
        .map(|end| {
            let last = (end - base) as usize;
            let mut values = Vec::with_capacity(w * FEATURE_COUNT);
            for f in &features[last + 1 - w..=last] {
                values.extend_from_slice(&f.values);
            }
            SequenceSample {
                values,
                label: class,
                ego_id,
                end_frame: end,
            }
        })
        .collect())
}

pub fn class_counts(labels: impl IntoIterator<Item = Class>) -> [usize; Class::COUNT] {
    let mut counts = [0; Class::COUNT];
    for c in labels {
        counts[c.index()] += 1;
    }
    counts
}

/// Subsample classes above their cap and shuffle the result.
pub fn balance<T: Clone>(
    samples: &[T],
    label: impl Fn(&T) -> Class,
    target: &BTreeMap<Class, usize>,
    seed: u64,
) -> Result<Vec<T>> {
    let counts = class_counts(samples.iter().map(&label));
    let caps: [Option<usize>; Class::COUNT] = if target.is_empty() {
        let lc = counts[Class::RLC.index()].min(counts[Class::LLC.index()]);
        if lc == 0 {
            [None; Class::COUNT]
        } else {
            [Some(lc); Class::COUNT]
        }
    } else {
        let mut caps = [None; Class::COUNT];
        for (&c, &t) in target {
            if t > counts[c.index()] {
                return Err(Error::InvalidData(format!(
                    "balance target {t} for {c} exceeds the {} available samples",
                    counts[c.index()]
                )));
            }
            caps[c.index()] = Some(t);
        }
        caps
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![true; samples.len()];
    for class in Class::ALL {
        let Some(cap) = caps[class.index()] else {
            continue;
        };
        let idx: Vec<usize> = (0..samples.len()).filter(|&i| label(&samples[i]) == class).collect();
        if idx.len() <= cap {
            continue;
        }
        let chosen = rand::seq::index::sample(&mut rng, idx.len(), cap);
        let mut selected = vec![false; idx.len()];
        for j in chosen.iter() {
            selected[j] = true;
        }
        for (&i, s) in idx.iter().zip(selected) {
            keep[i] = s;
        }
    }
    let mut out: Vec<T> = samples
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(s, _)| s.clone())
        .collect();
    out.shuffle(&mut rng);
    Ok(out)
}

/// Train size for `n` samples: `floor(fraction * n)`, kept within `[1, n-1]`.
pub fn train_size(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).floor() as usize).clamp(1, n.saturating_sub(1).max(1))
}

/// Seeded permutation split into `(train_idx, test_idx)`.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::InvalidData(format!("cannot split {n} samples")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = perm.split_off(train_size(n, fraction));
    Ok((perm, test))
}

pub fn split<T>(samples: Vec<T>, fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    let (train_idx, test_idx) = split_indices(samples.len(), fraction, seed)?;
    let mut slots: Vec<Option<T>> = samples.into_iter().map(Some).collect();
    let mut take = |idx: &[usize]| -> Vec<T> { idx.iter().map(|&i| slots[i].take().unwrap()).collect() };
    let train = take(&train_idx);
    let test = take(&test_idx);
    Ok((train, test))
}

pub type Fold = (Vec<usize>, Vec<usize>);

/// `folds` groups of a seeded permutation of `0..n`, sizes differing by at
/// most one. Index lists are sorted ascending.
pub fn kfold(n: usize, folds: usize, seed: u64) -> Result<Vec<Fold>> {
    if folds < 2 {
        return Err(Error::config("dataset.folds", "must be >= 2"));
    }
    if folds > n {
        return Err(Error::InvalidData(format!("{folds} folds for {n} samples")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let assignment = fold_assignment(&perm, folds);
    Ok((0..folds)
        .map(|k| {
            let (val, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| assignment[i] == k);
            (train, val)
        })
        .collect())
}

fn fold_assignment(perm: &[usize], folds: usize) -> Vec<usize> {
    let n = perm.len();
    let (base, extra) = (n / folds, n % folds);
    let mut assignment = vec![0; n];
    let mut pos = 0;
    for k in 0..folds {
        let size = base + usize::from(k < extra);
        for &i in &perm[pos..pos + size] {
            assignment[i] = k;
        }
        pos += size;
    }
    assignment
}

/// Hex SHA-256 over the fold id of every sample in index order.
pub fn fold_checksum(folds: &[Fold], n: usize) -> String {
    let mut assignment = vec![u32::MAX; n];
    for (k, (_, val)) in folds.iter().enumerate() {
        for &i in val {
            assignment[i] = k as u32;
        }
    }
    let mut hasher = Sha256::new();
    for a in assignment {
        hasher.update(a.to_le_bytes());
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Flattened design matrix, one row per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub steps: usize,
    pub channels: usize,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<usize>, steps: usize, channels: usize) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::Dimension {
                expected: x.rows(),
                got: y.len(),
            });
        }
        if steps * channels != x.cols() {
            return Err(Error::Dimension {
                expected: x.cols(),
                got: steps * channels,
            });
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= Class::COUNT) {
            return Err(Error::InvalidData(format!("invalid class label {bad}")));
        }
        Ok(Dataset { x, y, steps, channels })
    }

    pub fn from_samples(samples: &[SequenceSample]) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::InvalidData("no samples".into()));
        };
        let cols = first.values.len();
        let mut data = Vec::with_capacity(samples.len() * cols);
        for s in samples {
            if s.values.len() != cols {
                return Err(Error::Dimension {
                    expected: cols,
                    got: s.values.len(),
                });
            }
            data.extend_from_slice(&s.values);
        }
        let x = Matrix::from_vec(samples.len(), cols, data)?;
        let y = samples.iter().map(|s| s.label.index()).collect();
        Dataset::new(x, y, cols / FEATURE_COUNT, FEATURE_COUNT)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        Class::COUNT
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            steps: self.steps,
            channels: self.channels,
        }
    }

    pub fn class_counts(&self) -> [usize; Class::COUNT] {
        let mut c = [0; Class::COUNT];
        for &y in &self.y {
            c[y] += 1;
        }
        c
    }
}

const TABLE_MAGIC: &[u8; 8] = b"LCSAMP01";

/// Binary table: magic, `window`, `channels`, `count` as u64 LE, then per
/// sample `label: u8, ego_id: u64, end_frame: i64, values: f64 x W*54`.
pub fn write_samples_binary<W: Write>(mut w: W, samples: &[SequenceSample]) -> Result<()> {
    let steps = samples.first().map_or(0, SequenceSample::steps);
    let io = |e| Error::io("<sample table>", e);
    w.write_all(TABLE_MAGIC).map_err(io)?;
    for v in [steps as u64, FEATURE_COUNT as u64, samples.len() as u64] {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    for s in samples {
        if s.steps() != steps || s.values.len() != steps * FEATURE_COUNT {
            return Err(Error::Dimension {
                expected: steps * FEATURE_COUNT,
                got: s.values.len(),
            });
        }
        w.write_all(&[s.label as u8]).map_err(io)?;
        w.write_all(&s.ego_id.to_le_bytes()).map_err(io)?;
        w.write_all(&s.end_frame.to_le_bytes()).map_err(io)?;
        for v in &s.values {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_samples_binary<R: Read>(mut r: R) -> Result<Vec<SequenceSample>> {
    let io = |e| Error::io("<sample table>", e);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != TABLE_MAGIC {
        return Err(Error::InvalidData("not a sample table".into()));
    }
    let mut u64_buf = [0u8; 8];
    let mut read_u64 = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut u64_buf).map_err(io)?;
        Ok(u64::from_le_bytes(u64_buf))
    };
    let steps = read_u64(&mut r)? as usize;
    let channels = read_u64(&mut r)? as usize;
    let count = read_u64(&mut r)? as usize;
    if channels != FEATURE_COUNT {
        return Err(Error::Dimension {
            expected: FEATURE_COUNT,
            got: channels,
        });
    }
    let width = steps * channels;
    let mut out = Vec::with_capacity(count);
    let mut buf = vec![0u8; 17 + 8 * width];
    for _ in 0..count {
        r.read_exact(&mut buf).map_err(io)?;
        let label = Class::from_index(buf[0] as usize)?;
        let ego_id = u64::from_le_bytes(buf[1..9].try_into().unwrap());
        let end_frame = i64::from_le_bytes(buf[9..17].try_into().unwrap());
        let values = buf[17..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push(SequenceSample {
            values,
            label,
            ego_id,
            end_frame,
        });
    }
    Ok(out)
}

/// CSV table `label,ego_id,end_frame,t0_f0..t{W-1}_f53`.
pub fn write_samples_csv<W: Write>(w: W, samples: &[SequenceSample]) -> Result<()> {
    let steps = samples.first().map_or(0, SequenceSample::steps);
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["label".to_string(), "ego_id".into(), "end_frame".into()];
    for t in 0..steps {
        for c in 0..FEATURE_COUNT {
            header.push(format!("t{t}_f{c}"));
        }
    }
    wtr.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for s in samples {
        if s.values.len() != steps * FEATURE_COUNT {
            return Err(Error::Dimension {
                expected: steps * FEATURE_COUNT,
                got: s.values.len(),
            });
        }
        row.clear();
        row.push(s.label.name().to_string());
        row.push(s.ego_id.to_string());
        row.push(s.end_frame.to_string());
        row.extend(s.values.iter().map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<sample table>", e))
}

pub fn read_samples_csv<R: Read>(r: R) -> Result<Vec<SequenceSample>> {
    let mut rdr = csv::Reader::from_reader(BufReader::new(r));
    let width = rdr.headers()?.len().saturating_sub(3);
    if width % FEATURE_COUNT != 0 {
        return Err(Error::Parse {
            line: 1,
            message: format!("{width} value columns is not a multiple of {FEATURE_COUNT}"),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec?;
        let parse_err = |m: String| Error::Parse { line, message: m };
        if rec.len() != width + 3 {
            return Err(parse_err(format!("expected {} fields, got {}", width + 3, rec.len())));
        }
        let label: Class = rec[0].parse().map_err(|_| parse_err(format!("bad label '{}'", &rec[0])))?;
        let ego_id = rec[1].parse().map_err(|_| parse_err("bad ego_id".into()))?;
        let end_frame = rec[2].parse().map_err(|_| parse_err("bad end_frame".into()))?;
        let values = rec
            .iter()
            .skip(3)
            .map(|v| v.parse::<f64>().map_err(|_| parse_err(format!("bad value '{v}'"))))
            .collect::<Result<Vec<_>>>()?;
        out.push(SequenceSample {
            values,
            label,
            ego_id,
            end_frame,
        });
    }
    Ok(out)
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Save as CSV when the extension is `.csv`, binary otherwise.
pub fn save_samples(path: impl AsRef<Path>, samples: &[SequenceSample]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let w = BufWriter::new(file);
    if is_csv(path) {
        write_samples_csv(w, samples)
    } else {
        write_samples_binary(w, samples)
    }
}

pub fn load_samples(path: impl AsRef<Path>) -> Result<Vec<SequenceSample>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    if is_csv(path) {
        read_samples_csv(r)
    } else {
        // peek so a CSV without the extension still fails cleanly
        if r.fill_buf().map_err(|e| Error::io(path, e))?.starts_with(TABLE_MAGIC) {
            read_samples_binary(r)
        } else {
            Err(Error::InvalidData(format!("{} is not a sample table", path.display())))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: DatasetConfig,
    pub seed: u64,
    pub total: usize,
    pub class_counts: BTreeMap<Class, usize>,
    pub train_counts: BTreeMap<Class, usize>,
    pub test_counts: BTreeMap<Class, usize>,
    pub fold_checksum: String,
    pub dropped: Vec<crate::preprocess::Dropped>,
}

pub fn counts_map(counts: [usize; Class::COUNT]) -> BTreeMap<Class, usize> {
    Class::ALL.iter().map(|&c| (c, counts[c.index()])).collect()
}
