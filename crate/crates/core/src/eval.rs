//! Confusion matrices, metrics, error taxonomy, cross-validation, timing and
//! sweeps.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::{kfold, Class, Dataset, DatasetConfig};
use crate::error::{Error, Result};
use crate::gbdt::{self, GbdtConfig, SplitStrategy};
use crate::model::{train_model, Classifier, ModelConfigs, ModelKind, Trainer};
use crate::pipeline::{build_dataset, windows, FeatureSet};

/// Rows are true classes, columns predictions, both in `Class` index order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if counts.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidData("confusion matrix must be square".into()));
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }
}

pub fn confusion(truths: &[usize], predictions: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    if truths.len() != predictions.len() {
        return Err(Error::Dimension {
            expected: truths.len(),
            got: predictions.len(),
        });
    }
    let mut counts = vec![vec![0u64; num_classes]; num_classes];
    for (&t, &p) in truths.iter().zip(predictions) {
        if t >= num_classes || p >= num_classes {
            return Err(Error::InvalidData(format!("label out of range: truth {t}, prediction {p}")));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// A ratio whose denominator may be zero. Serialized as a number or the
/// string `"undefined"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio(pub Option<f64>);

impl Ratio {
    pub fn of(num: u64, den: u64) -> Ratio {
        Ratio((den > 0).then(|| num as f64 / den as f64))
    }

    pub fn value(self) -> Option<f64> {
        self.0
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v:.6}"),
            None => f.write_str("undefined"),
        }
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Some(v) => s.serialize_f64(v),
            None => s.serialize_str("undefined"),
        }
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Ratio(Some(v))),
            Repr::Str(s) if s == "undefined" => Ok(Ratio(None)),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("invalid ratio '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: Vec<Ratio>,
    pub recall: Vec<Ratio>,
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidData("empty confusion matrix".into()));
    }
    let k = cm.num_classes();
    Ok(Metrics {
        accuracy: cm.trace() as f64 / total as f64,
        precision: (0..k).map(|i| Ratio::of(cm.counts[i][i], cm.col_sum(i))).collect(),
        recall: (0..k).map(|i| Ratio::of(cm.counts[i][i], cm.row_sum(i))).collect(),
    })
}

/// Type I: LK taken for a lane change. Type II: a lane change taken for LK.
/// Type III: left and right lane changes confused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ErrorTypes {
    pub type1: u64,
    pub type2: u64,
    pub type3: u64,
}

impl ErrorTypes {
    pub fn total(&self) -> u64 {
        self.type1 + self.type2 + self.type3
    }
}

pub fn error_taxonomy(cm: &ConfusionMatrix) -> Result<ErrorTypes> {
    if cm.num_classes() != Class::COUNT {
        return Err(Error::Dimension {
            expected: Class::COUNT,
            got: cm.num_classes(),
        });
    }
    let c = &cm.counts;
    let (lk, rlc, llc) = (Class::LK.index(), Class::RLC.index(), Class::LLC.index());
    Ok(ErrorTypes {
        type1: c[lk][rlc] + c[lk][llc],
        type2: c[rlc][lk] + c[llc][lk],
        type3: c[rlc][llc] + c[llc][rlc],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: Vec<Ratio>,
    pub recall: Vec<Ratio>,
    pub errors: ErrorTypes,
    /// Wall-clock seconds of one training call.
    pub training_seconds: f64,
    pub config: serde_json::Value,
}

impl EvalReport {
    pub fn from_predictions(
        model: impl Into<String>,
        truths: &[usize],
        predictions: &[usize],
        training_seconds: f64,
        config: serde_json::Value,
    ) -> Result<Self> {
        let cm = confusion(truths, predictions, Class::COUNT)?;
        let m = metrics(&cm)?;
        Ok(EvalReport {
            model: model.into(),
            errors: error_taxonomy(&cm)?,
            confusion: cm,
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            training_seconds,
            config,
        })
    }

    pub fn evaluate(
        model: impl Into<String>,
        classifier: &dyn Classifier,
        data: &Dataset,
        training_seconds: f64,
        config: serde_json::Value,
    ) -> Result<Self> {
        let pred = classifier.predict_batch(&data.x)?;
        EvalReport::from_predictions(model, &data.y, &pred, training_seconds, config)
    }
}

/// Flat table: one row per class with `model,type,precision,recall,accuracy,training_time`.
pub fn write_report_csv<W: Write>(w: W, reports: &[EvalReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["model", "type", "precision", "recall", "accuracy", "training_time"])?;
    for r in reports {
        for c in Class::ALL {
            let i = c.index();
            out.write_record([
                r.model.clone(),
                c.name().to_string(),
                r.precision[i].to_string(),
                r.recall[i].to_string(),
                format!("{:.6}", r.accuracy),
                format!("{:.6}", r.training_seconds),
            ])?;
        }
    }
    out.flush().map_err(|e| Error::io("<csv>", e))
}

/// Sample mean and sample standard deviation (`n - 1`); the deviation of
/// fewer than two values is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    // shifted by the first value so identical inputs give exactly zero spread
    let k = values[0];
    let d: f64 = values.iter().map(|v| v - k).sum();
    let mean = k + d / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let d2: f64 = values.iter().map(|v| (v - k) * (v - k)).sum();
    let ss = (d2 - d * d / n as f64).max(0.0);
    (mean, (ss / (n - 1) as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValReport {
    pub model: String,
    pub folds: Vec<EvalReport>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

/// Train on every fold's training part and score on its validation part.
/// Folds run in parallel when `parallel` is set.
pub fn crossval(trainer: &dyn Trainer, data: &Dataset, folds: usize, seed: u64, parallel: bool) -> Result<CrossValReport> {
    let splits = kfold(data.len(), folds, seed)?;
    let run = |(train, val): &(Vec<usize>, Vec<usize>)| -> Result<EvalReport> {
        let start = Instant::now();
        let model = trainer.fit(&data.subset(train))?;
        let secs = start.elapsed().as_secs_f64();
        EvalReport::evaluate(trainer.name(), model.as_ref(), &data.subset(val), secs, serde_json::Value::Null)
    };
    let reports: Vec<EvalReport> = if parallel {
        splits.par_iter().map(run).collect::<Result<_>>()?
    } else {
        splits.iter().map(run).collect::<Result<_>>()?
    };
    let acc: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
    let (mean, std) = mean_std(&acc);
    Ok(CrossValReport {
        model: trainer.name(),
        folds: reports,
        mean_accuracy: mean,
        std_accuracy: std,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Machine {
    pub os: String,
    pub arch: String,
    pub available_cpus: usize,
    pub threads_used: usize,
}

impl Machine {
    pub fn current(threads_used: usize) -> Machine {
        Machine {
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            available_cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
            threads_used,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub model: String,
    pub median_seconds: f64,
    pub runs: Vec<f64>,
    pub machine: Machine,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Run `f` on a dedicated one-thread pool.
pub fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::InvalidData(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Time `repeats` training calls on one thread. Returns the timings and the
/// model of the last run.
pub fn benchmark_training(
    trainer: &dyn Trainer,
    data: &Dataset,
    repeats: usize,
) -> Result<(Benchmark, Box<dyn Classifier>)> {
    if repeats < 1 {
        return Err(Error::config("repeats", "must be >= 1"));
    }
    single_threaded(|| {
        let mut runs = Vec::with_capacity(repeats);
        let mut last = None;
        for _ in 0..repeats {
            let start = Instant::now();
            let model = trainer.fit(data)?;
            runs.push(start.elapsed().as_secs_f64());
            last = Some(model);
        }
        Ok((
            Benchmark {
                model: trainer.name(),
                median_seconds: median(&runs),
                runs,
                machine: Machine::current(1),
            },
            last.expect("repeats >= 1"),
        ))
    })?
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSweepRow {
    pub strategy: SplitStrategy,
    pub trees: usize,
    pub accuracy: f64,
    pub seconds: f64,
}

/// Tree-count sweep on a fixed split. Training is deterministic and an
/// `r`-tree ensemble is exactly the first `r` rounds of a longer run, so each
/// strategy is fitted once per repeat up to the largest count on one thread,
/// and the time for `r` trees is the elapsed time when round `r` completes.
/// Reported times are medians over `repeats`.
pub fn sweep_trees(
    train: &Dataset,
    test: &Dataset,
    tree_counts: &[usize],
    strategies: &[SplitStrategy],
    base: &GbdtConfig,
    repeats: usize,
) -> Result<Vec<TreeSweepRow>> {
    if repeats < 1 {
        return Err(Error::config("repeats", "must be >= 1"));
    }
    let Some(&max_trees) = tree_counts.iter().max() else {
        return Ok(Vec::new());
    };
    let mut rows = Vec::with_capacity(tree_counts.len() * strategies.len());
    for &strategy in strategies {
        let cfg = GbdtConfig {
            strategy,
            num_trees_per_class: max_trees,
            ..base.clone()
        };
        let mut elapsed = vec![Vec::with_capacity(repeats); max_trees];
        let mut model = None;
        for _ in 0..repeats {
            let m = single_threaded(|| {
                let start = Instant::now();
                gbdt::train_with(&train.x, &train.y, train.num_classes(), &cfg, |info| {
                    elapsed[info.round].push(start.elapsed().as_secs_f64());
                })
            })??;
            model = Some(m);
        }
        let model = model.expect("repeats >= 1");
        for &trees in tree_counts {
            if trees == 0 {
                return Err(Error::config("tree_counts", "must be >= 1"));
            }
            let pred = model.truncated(trees).predict_batch(&test.x)?;
            let hits = pred.iter().zip(&test.y).filter(|(p, t)| p == t).count();
            rows.push(TreeSweepRow {
                strategy,
                trees,
                accuracy: hits as f64 / test.len() as f64,
                seconds: median(&elapsed[trees - 1]),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSweepRow {
    pub model: ModelKind,
    pub window: usize,
    pub accuracy: f64,
    pub seconds: f64,
}

/// Re-extract windows of each length from `features`, then train and score
/// every model family on the same split.
pub fn sweep_window(
    features: &FeatureSet,
    window_lengths: &[usize],
    kinds: &[ModelKind],
    dataset: &DatasetConfig,
    configs: &ModelConfigs,
) -> Result<Vec<WindowSweepRow>> {
    let mut rows = Vec::with_capacity(window_lengths.len() * kinds.len());
    for &window in window_lengths {
        let cfg = DatasetConfig {
            window_frames: window,
            ..dataset.clone()
        };
        let samples = windows(features, &cfg)?;
        let split = build_dataset(&samples, &cfg, Vec::new())?;
        let train = Dataset::from_samples(&split.train)?;
        let test = Dataset::from_samples(&split.test)?;
        for &kind in kinds {
            let start = Instant::now();
            let model = train_model(kind, &train, configs)?;
            let seconds = start.elapsed().as_secs_f64();
            let report = EvalReport::evaluate(kind.tag(), &model, &test, seconds, serde_json::Value::Null)?;
            rows.push(WindowSweepRow {
                model: kind,
                window,
                accuracy: report.accuracy,
                seconds,
            });
        }
    }
    Ok(rows)
}

pub fn write_tree_sweep_csv<W: Write>(w: W, rows: &[TreeSweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["strategy", "trees", "accuracy", "seconds"])?;
    for r in rows {
        let strategy = match r.strategy {
            SplitStrategy::Exact => "exact",
            SplitStrategy::Histogram => "histogram",
        };
        out.write_record([
            strategy.to_string(),
            r.trees.to_string(),
            format!("{:.6}", r.accuracy),
            format!("{:.6}", r.seconds),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn write_window_sweep_csv<W: Write>(w: W, rows: &[WindowSweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["model", "window", "accuracy", "seconds"])?;
    for r in rows {
        out.write_record([
            r.model.tag().to_string(),
            r.window.to_string(),
            format!("{:.6}", r.accuracy),
            format!("{:.6}", r.seconds),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))
}
