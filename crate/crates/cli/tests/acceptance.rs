//! Acceptance suite. Runs every criterion in order on one thread of the
//! harness so timing criteria are not disturbed by sibling tests, prints one
//! `criterion N: PASS|FAIL` line each and fails if any criterion failed.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use lc_intent_core::dataset::{self, Dataset, DatasetConfig};
use lc_intent_core::eval::{self, ConfusionMatrix};
use lc_intent_core::gbdt::split::{best_split_exact, gain, improves, midpoint, score, SplitParams};
use lc_intent_core::gbdt::tree::TreeNode;
use lc_intent_core::gbdt::{self, GbdtConfig, SplitStrategy};
use lc_intent_core::ingest::{TrackFrame, Trajectory};
use lc_intent_core::kinematics::{self, KinematicsConfig};
use lc_intent_core::lstm::{self, LstmParams};
use lc_intent_core::model::{Classifier, KindTrainer, ModelConfigs, ModelKind, Trainer};
use lc_intent_core::pipeline::{self, PipelineConfig};
use lc_intent_core::synthgen;
use lc_intent_core::{Matrix, Result as CoreResult};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn trajectory(xs: &[f64], ys: &[f64], len: f64) -> Trajectory {
    Trajectory {
        vehicle_id: 1,
        frames: xs
            .iter()
            .zip(ys)
            .enumerate()
            .map(|(i, (&x, &y))| TrackFrame {
                frame: i as i64,
                vehicle_id: 1,
                center_x: x,
                center_y: y,
                head_x: x + len / 2.0,
                head_y: y,
                tail_x: x - len / 2.0,
                tail_y: y,
                lane_id: 2,
            })
            .collect(),
        class_hint: None,
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let fps = 30.0;
    let xs: Vec<f64> = (0..300).map(|k| 0.5 * 3.0 * (k as f64 / fps).powi(2)).collect();
    let traj = trajectory(&xs, &vec![18.0; 300], 15.0);
    let series = kinematics::kinematic_series(&traj, &KinematicsConfig::default()).map_err(|e| e.to_string())?;
    let worst = series.iter().map(|k| (k.a_x - 3.0).abs()).fold(0.0, f64::max);
    // linear 1 ft/frame plus one outlier near every probed frame
    let mut exact = true;
    for t in 10..290 {
        let mut s: Vec<f64> = (0..300).map(|k| k as f64).collect();
        s[t + 1 + t % 7] += 5.0;
        exact &= kinematics::median_velocity(&s, t, 8, fps).map_err(|e| e.to_string())? == 30.0;
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        series.len() == 296 && worst < 1e-9 && exact && secs < 1.0,
        format!("{} frames, max |a_x - 3| = {worst:.2e}, outlier median exact: {exact}, {secs:.3}s", series.len()),
    )
}

fn criterion_2() -> Outcome {
    let mut s: Vec<f64> = (0..41).map(|k| k as f64).collect();
    s[22] += 5.0;
    let v = kinematics::median_velocity(&s, 20, 8, 30.0).map_err(|e| e.to_string())?;

    let mut traj = trajectory(&[0.0; 3], &[0.0; 3], 4.0);
    traj.frames[0].tail_x = 0.0;
    traj.frames[0].tail_y = 0.0;
    traj.frames[2].head_x = 10.0;
    traj.frames[2].head_y = -1.0;
    let theta = kinematics::heading(&traj, 1, 8).map_err(|e| e.to_string())?;

    let th: Vec<f64> = (0..10).map(|k| 0.3 * k as f64).collect();
    let yaw = kinematics::yaw_rate(&th, 4, 30.0).map_err(|e| e.to_string())?;
    let wrap = kinematics::yaw_rate(&[179.0, 0.0, -179.0], 1, 30.0).map_err(|e| e.to_string())?;

    let ok = (v - 30.0).abs() < 1e-6
        && (theta - -5.7106).abs() < 1e-4
        && (theta - (-1.0f64).atan2(10.0).to_degrees()).abs() < 1e-6
        && (yaw - 9.0).abs() < 1e-6
        && (wrap - 30.0).abs() < 1e-6;
    check(ok, format!("median {v:.6} ft/s, heading {theta:.6} deg, yaw {yaw:.6} deg/s, wrap {wrap:.6} deg/s"))
}

/// Every (feature, midpoint) candidate evaluated from scratch, earliest
/// candidate kept on ties.
fn brute_force_split(x: &Matrix, g: &[f64], h: &[f64], p: SplitParams) -> Option<(usize, f64, f64)> {
    let n = x.rows();
    let gt: f64 = g.iter().sum();
    let ht: f64 = h.iter().sum();
    let parent = score(gt, ht, p.lambda);
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x.cols() {
        let mut values: Vec<f64> = (0..n).map(|r| x.get(r, f)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let thr = midpoint(w[0], w[1]);
            let (mut gl, mut hl) = (0.0, 0.0);
            for r in 0..n {
                if x.get(r, f) <= thr {
                    gl += g[r];
                    hl += h[r];
                }
            }
            if hl < p.min_child_hessian || ht - hl < p.min_child_hessian {
                continue;
            }
            let cand = gain(gl, hl, gt, ht, p.lambda, p.gamma);
            if best.is_none_or(|b| improves(cand, b.2, parent)) {
                best = Some((f, thr, cand));
            }
        }
    }
    best.filter(|b| b.2 > 0.0 && b.2 > 1e-10 * parent)
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    let mut splits = 0;
    for case in 0..100 {
        let n = rng.random_range(2..=200);
        let d = rng.random_range(1..=10);
        // coarse grids force duplicate values and exact gain ties
        let levels = if case % 2 == 0 { 5 } else { 1000 };
        let data: Vec<f64> = (0..n * d).map(|_| rng.random_range(0..levels) as f64 / 4.0).collect();
        let x = Matrix::from_vec(n, d, data).unwrap();
        let g: Vec<f64> = (0..n)
            .map(|_| if case % 3 == 0 { rng.random_range(-2..=2) as f64 } else { rng.random_range(-1.0..1.0) })
            .collect();
        let h: Vec<f64> = (0..n).map(|_| if case % 3 == 0 { 1.0 } else { rng.random_range(0.05..1.0) }).collect();
        let p = SplitParams {
            lambda: [0.0, 1.0, 5.0][case % 3],
            gamma: [0.0, 0.1][case % 2],
            min_child_hessian: [0.0, 1.0][(case / 2) % 2],
        };
        let rows: Vec<usize> = (0..n).collect();
        let got = best_split_exact(&rows, &x, &g, &h, p).map(|s| (s.feature, s.threshold, s.gain));
        let want = brute_force_split(&x, &g, &h, p);
        let same = match (got, want) {
            (None, None) => true,
            (Some(a), Some(b)) => a.0 == b.0 && a.1 == b.1 && (a.2 - b.2).abs() <= 1e-9 * (1.0 + b.2.abs()),
            _ => false,
        };
        splits += usize::from(want.is_some());
        mismatches += usize::from(!same);
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        mismatches == 0 && secs < 30.0,
        format!("100 datasets, {splits} with a split, {mismatches} disagreements, {secs:.2}s"),
    )
}

/// Same features at every split, same training-row partition at every node
/// and leaf weights within `tol`.
fn same_tree(a: &TreeNode, b: &TreeNode, x: &Matrix, rows: &[usize], tol: f64) -> bool {
    match (a, b) {
        (TreeNode::Leaf { weight: wa }, TreeNode::Leaf { weight: wb }) => (wa - wb).abs() <= tol,
        (
            TreeNode::Split {
                feature: fa,
                threshold: ta,
                left: la,
                right: ra,
                ..
            },
            TreeNode::Split {
                feature: fb,
                threshold: tb,
                left: lb,
                right: rb,
                ..
            },
        ) => {
            if fa != fb {
                return false;
            }
            let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().copied().partition(|&r| x.get(r, *fa) <= *ta);
            let left_b: Vec<usize> = rows.iter().copied().filter(|&r| x.get(r, *fb) <= *tb).collect();
            left == left_b && same_tree(la, lb, x, &left, tol) && same_tree(ra, rb, x, &right, tol)
        }
        _ => false,
    }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = Vec::new();
    let mut nodes = 0;
    for case in 0..20 {
        let n = rng.random_range(60..=300);
        let d = rng.random_range(2..=8);
        let levels = rng.random_range(3..=60);
        let data: Vec<f64> = (0..n * d).map(|_| rng.random_range(0..levels) as f64 * 0.5).collect();
        let x = Matrix::from_vec(n, d, data).unwrap();
        let y: Vec<usize> = (0..n)
            .map(|r| {
                let s = x.get(r, 0) - x.get(r, 1 % d) + rng.random_range(-3.0..3.0);
                if s < -2.0 {
                    0
                } else if s < 2.0 {
                    1
                } else {
                    2
                }
            })
            .collect();
        let base = GbdtConfig {
            num_trees_per_class: 10,
            max_depth: 4,
            num_bins: 255,
            ..GbdtConfig::default()
        };
        let fit = |strategy| {
            gbdt::train(&x, &y, 3, &GbdtConfig { strategy, ..base.clone() }).map_err(|e| e.to_string())
        };
        let exact = fit(SplitStrategy::Exact)?;
        let hist = fit(SplitStrategy::Histogram)?;
        let rows: Vec<usize> = (0..n).collect();
        let trees_match = exact
            .trees
            .iter()
            .flatten()
            .zip(hist.trees.iter().flatten())
            .all(|(a, b)| same_tree(a, b, &x, &rows, 1e-9));
        let mut preds_match = true;
        for r in 0..n {
            let pa = exact.predict_proba(x.row(r)).map_err(|e| e.to_string())?;
            let pb = hist.predict_proba(x.row(r)).map_err(|e| e.to_string())?;
            preds_match &= pa.iter().zip(&pb).all(|(a, b)| (a - b).abs() <= 1e-9);
            preds_match &= exact.predict(x.row(r)).unwrap().0 == hist.predict(x.row(r)).unwrap().0;
        }
        nodes += exact.trees.iter().flatten().map(TreeNode::num_leaves).sum::<usize>();
        if !(trees_match && preds_match) {
            failures.push(case);
        }
    }
    check(
        failures.is_empty(),
        format!("20 datasets, {nodes} leaves compared, mismatching datasets: {failures:?}"),
    )
}

fn xorshift_dataset(n: usize, d: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = row[0] + 0.5 * row[1] - row[2] * row[3];
        let b = row[4] - row[5] + 0.3 * row[6].sin();
        y.push(if a > 0.2 {
            0
        } else if b > 0.0 {
            1
        } else {
            2
        });
        data.extend(row);
    }
    (Matrix::from_vec(n, d, data).unwrap(), y)
}

fn accuracy(model: &dyn Classifier, x: &Matrix, y: &[usize]) -> CoreResult<f64> {
    let p = model.predict_batch(x)?;
    Ok(p.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64)
}

struct FixedGbdt {
    x: Matrix,
    y: Vec<usize>,
    config: GbdtConfig,
}

struct GbdtClassifier(gbdt::GbdtEnsemble);

impl Classifier for GbdtClassifier {
    fn predict_class(&self, x: &[f64]) -> CoreResult<usize> {
        self.0.predict(x).map(|p| p.0)
    }
}

impl Trainer for FixedGbdt {
    fn name(&self) -> String {
        format!("{:?}", self.config.strategy)
    }

    fn fit(&self, _: &Dataset) -> CoreResult<Box<dyn Classifier>> {
        Ok(Box::new(GbdtClassifier(gbdt::train(&self.x, &self.y, 3, &self.config)?)))
    }
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let (x, y) = xorshift_dataset(50_000, 100, 5);
    let (xv, yv) = xorshift_dataset(10_000, 100, 6);
    let placeholder = Dataset::new(Matrix::zeros(1, 1), vec![0], 1, 1).map_err(|e| e.to_string())?;
    let mut medians = Vec::new();
    let mut accs = Vec::new();
    for strategy in [SplitStrategy::Histogram, SplitStrategy::Exact] {
        let trainer = FixedGbdt {
            x: x.clone(),
            y: y.clone(),
            config: GbdtConfig {
                strategy,
                num_trees_per_class: 120,
                max_depth: 6,
                ..GbdtConfig::default()
            },
        };
        let (bench, model) = eval::benchmark_training(&trainer, &placeholder, 3).map_err(|e| e.to_string())?;
        accs.push(accuracy(model.as_ref(), &xv, &yv).map_err(|e| e.to_string())?);
        medians.push(bench.median_seconds);
    }
    let ratio = medians[1] / medians[0];
    let gap = (accs[0] - accs[1]).abs() * 100.0;
    let secs = start.elapsed().as_secs_f64();
    check(
        ratio > 2.0 && gap < 1.0 && secs < 900.0,
        format!(
            "exact {:.1}s / histogram {:.1}s = ratio {ratio:.2}; accuracy exact {:.4} histogram {:.4} (gap {gap:.2} pt); {secs:.0}s",
            medians[1], medians[0], accs[1], accs[0]
        ),
    )
}

struct SmallCorpus {
    train: Dataset,
    test: Dataset,
}

fn small_corpus() -> CoreResult<SmallCorpus> {
    let corpus = synthgen::generate_paperlike(0.1, 3)?;
    let cfg = PipelineConfig {
        scene: corpus.manifest.config.scene(),
        dataset: DatasetConfig {
            window_frames: 30,
            stride: 6,
            ..DatasetConfig::default()
        },
        ..PipelineConfig::default()
    };
    let split = pipeline::run(corpus.trajectories, None, &cfg)?;
    Ok(SmallCorpus {
        train: Dataset::from_samples(&split.train)?,
        test: Dataset::from_samples(&split.test)?,
    })
}

fn criterion_6(data: &SmallCorpus) -> Outcome {
    let counts: Vec<usize> = (1..=10).map(|i| i * 20).collect();
    let strategies = [SplitStrategy::Histogram, SplitStrategy::Exact];
    let rows = eval::sweep_trees(&data.train, &data.test, &counts, &strategies, &GbdtConfig::default(), 3)
        .map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut lines = Vec::new();
    for strategy in strategies {
        let r: Vec<_> = rows.iter().filter(|r| r.strategy == strategy).collect();
        let increasing = r.windows(2).all(|w| w[1].seconds > w[0].seconds);
        let at_200 = r.last().unwrap().accuracy;
        let plateau = r.iter().filter(|r| r.trees >= 120).all(|r| (r.accuracy - at_200).abs() <= 0.005);
        ok &= increasing && plateau;
        let cells: Vec<String> = r.iter().map(|r| format!("{}:{:.4}/{:.2}s", r.trees, r.accuracy, r.seconds)).collect();
        lines.push(format!("{strategy:?} increasing={increasing} plateau={plateau} [{}]", cells.join(" ")));
    }
    check(ok, lines.join("; "))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let input = 6;
        let mut p = LstmParams::zeros(input, 4, 3);
        for v in &mut p.data {
            *v = rng.random_range(-0.8..0.8);
        }
        let window: Vec<f64> = (0..5 * input).map(|_| rng.random_range(-1.5..1.5)).collect();
        let err = lstm::gradient_check(&p, &window, i % 3, 1e-5, 1e-4).map_err(|e| e.to_string())?;
        worst = worst.max(err);
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst < 1e-5 && secs < 30.0,
        format!("20 instances, max relative error {worst:.2e}, {secs:.2}s"),
    )
}

fn criterion_8() -> Outcome {
    let cm = ConfusionMatrix::new(vec![vec![18, 1, 1], vec![2, 17, 1], vec![0, 2, 18]]).map_err(|e| e.to_string())?;
    let m = eval::metrics(&cm).map_err(|e| e.to_string())?;
    let e = eval::error_taxonomy(&cm).map_err(|e| e.to_string())?;
    let hand = m.accuracy == 53.0 / 60.0
        && m.precision[0].value() == Some(18.0 / 20.0)
        && m.recall[0].value() == Some(18.0 / 20.0)
        && m.precision[1].value() == Some(17.0 / 20.0)
        && m.recall[2].value() == Some(18.0 / 20.0)
        && (e.type1, e.type2, e.type3) == (2, 2, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut identity = true;
    for _ in 0..1000 {
        let counts: Vec<Vec<u64>> = (0..3).map(|_| (0..3).map(|_| rng.random_range(0..50)).collect()).collect();
        let cm = ConfusionMatrix::new(counts).map_err(|e| e.to_string())?;
        let e = eval::error_taxonomy(&cm).map_err(|e| e.to_string())?;
        identity &= cm.trace() + e.type1 + e.type2 + e.type3 == cm.total();
    }
    check(
        hand && identity,
        format!(
            "accuracy {:.5}, type I/II/III {}/{}/{}, partition identity on 1000 matrices: {identity}",
            m.accuracy, e.type1, e.type2, e.type3
        ),
    )
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let corpus = synthgen::generate_paperlike(0.2, 1).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig {
        scene: corpus.manifest.config.scene(),
        dataset: DatasetConfig {
            window_frames: 150,
            stride: 25,
            ..DatasetConfig::default()
        },
        ..PipelineConfig::default()
    };
    let split = pipeline::run(corpus.trajectories, None, &cfg).map_err(|e| e.to_string())?;
    let train = Dataset::from_samples(&split.train).map_err(|e| e.to_string())?;
    let test = Dataset::from_samples(&split.test).map_err(|e| e.to_string())?;
    let mut configs = ModelConfigs::default();
    configs.lstm.hidden_size = 32;
    configs.lstm.epochs = 10;
    let mut reports = Vec::new();
    for kind in ModelKind::ALL {
        let t = Instant::now();
        let model = lc_intent_core::model::train_model(kind, &train, &configs).map_err(|e| e.to_string())?;
        let secs = t.elapsed().as_secs_f64();
        let r = eval::EvalReport::evaluate(kind.tag(), &model, &test, secs, serde_json::Value::Null)
            .map_err(|e| e.to_string())?;
        reports.push((kind, r));
    }
    let get = |k: ModelKind| &reports.iter().find(|(kind, _)| *kind == k).unwrap().1;
    let svm = get(ModelKind::Svm);
    let mut ok = reports.iter().all(|(_, r)| r.accuracy >= 0.80);
    for k in [ModelKind::GbdtExact, ModelKind::GbdtHist] {
        let g = get(k);
        ok &= g.accuracy >= svm.accuracy;
        ok &= g.errors.type2 + g.errors.type3 <= svm.errors.type2 + svm.errors.type3;
    }
    let cells: Vec<String> = reports
        .iter()
        .map(|(k, r)| {
            format!(
                "{} {:.4} (I/II/III {}/{}/{})",
                k.tag(),
                r.accuracy,
                r.errors.type1,
                r.errors.type2,
                r.errors.type3
            )
        })
        .collect();
    check(
        ok,
        format!("{} train / {} test; {}; {:.0}s", train.len(), test.len(), cells.join(", "), start.elapsed().as_secs_f64()),
    )
}

struct Constant;

impl Classifier for Constant {
    fn predict_class(&self, _: &[f64]) -> CoreResult<usize> {
        Ok(0)
    }
}

struct ConstantTrainer;

impl Trainer for ConstantTrainer {
    fn name(&self) -> String {
        "constant".into()
    }

    fn fit(&self, _: &Dataset) -> CoreResult<Box<dyn Classifier>> {
        Ok(Box::new(Constant))
    }
}

fn criterion_10(data: &SmallCorpus) -> Outcome {
    let n = 55_570;
    let folds = dataset::kfold(n, 10, 10).map_err(|e| e.to_string())?;
    let mut seen = vec![0u32; n];
    for (train, val) in &folds {
        for &i in val {
            seen[i] += 1;
        }
        let mut all: Vec<usize> = train.iter().chain(val).copied().collect();
        all.sort_unstable();
        if all != (0..n).collect::<Vec<_>>() {
            return Err("a fold's train and validation sets do not partition the samples".into());
        }
    }
    let sizes: Vec<usize> = folds.iter().map(|f| f.1.len()).collect();
    let partition = seen.iter().all(|&c| c == 1) && sizes.iter().all(|&s| s == 5557);

    // labels cycle within each fold so every validation fold is balanced
    let m = 300;
    let folds = dataset::kfold(m, 10, 0).map_err(|e| e.to_string())?;
    let mut labels = vec![0; m];
    for (_, val) in &folds {
        for (j, &i) in val.iter().enumerate() {
            labels[i] = j % 3;
        }
    }
    let x = Matrix::from_vec(m, 1, (0..m).map(|i| i as f64).collect()).unwrap();
    let balanced = Dataset::new(x, labels, 1, 1).map_err(|e| e.to_string())?;
    let constant = eval::crossval(&ConstantTrainer, &balanced, 10, 0, true).map_err(|e| e.to_string())?;

    let trainer = KindTrainer {
        kind: ModelKind::GbdtHist,
        configs: ModelConfigs::default(),
    };
    let cv = eval::crossval(&trainer, &data.train, 10, 0, true).map_err(|e| e.to_string())?;
    check(
        partition && constant.std_accuracy == 0.0 && cv.std_accuracy <= 0.02,
        format!(
            "n=55570 fold sizes {:?}, disjoint+exhaustive {partition}; constant stddev {}; gbdt-hist mean {:.4} stddev {:.4}",
            sizes.iter().collect::<std::collections::BTreeSet<_>>(),
            constant.std_accuracy,
            cv.mean_accuracy,
            cv.std_accuracy
        ),
    )
}

fn run_cli(cwd: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_lc-intent"))
        .current_dir(cwd)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_11() -> Outcome {
    let config = serde_json::json!({
        "dataset": { "window_frames": 30, "stride": 15 },
        "models": {
            "gbdt": { "num_trees_per_class": 10 },
            "svm": { "epochs": 5 },
            "lstm": { "hidden_size": 8, "epochs": 2 }
        }
    });
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        std::fs::write(dir.path().join("config.json"), config.to_string()).map_err(|e| e.to_string())?;
        let common = ["--config", "config.json", "--seed", "11", "--reproducible", "--single-thread"];
        let with = |extra: &[&'static str]| -> Vec<&str> { extra.iter().copied().chain(common).collect() };
        run_cli(dir.path(), &with(&["synth", "--scale", "0.05", "--out", "corpus"]))?;
        run_cli(dir.path(), &with(&["dataset", "--corpus", "corpus", "--out", "samples"]))?;
        for model in ["gbdt-exact", "gbdt-hist", "svm", "lstm"] {
            let mut args = with(&["train", "--samples", "samples", "--out", "train"]);
            args.extend(["--model", model]);
            run_cli(dir.path(), &args)?;
        }
        let _ = std::fs::remove_file(dir.path().join("config.json"));
        runs.push(files(dir.path()));
    }
    let names: Vec<&str> = runs[0].iter().map(|f| f.0.as_str()).collect();
    let differing: Vec<&str> = runs[0]
        .iter()
        .zip(&runs[1])
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.as_str())
        .collect();
    check(
        runs[0].len() == runs[1].len() && differing.is_empty() && names.len() >= 12,
        format!("{} files compared, differing: {differing:?}", names.len()),
    )
}

fn report(n: usize, outcome: Outcome) -> bool {
    match &outcome {
        Ok(detail) => println!("criterion {n}: PASS  {detail}"),
        Err(detail) => println!("criterion {n}: FAIL  {detail}"),
    }
    outcome.is_ok()
}

#[test]
fn acceptance() {
    println!();
    let mut failed = Vec::new();
    let mut record = |n: usize, outcome: Outcome| {
        if !report(n, outcome) {
            failed.push(n);
        }
    };
    record(1, criterion_1());
    record(2, criterion_2());
    record(3, criterion_3());
    record(4, criterion_4());
    record(5, criterion_5());
    let small = small_corpus().map_err(|e| e.to_string());
    record(6, small.as_ref().map_err(Clone::clone).and_then(criterion_6));
    record(7, criterion_7());
    record(8, criterion_8());
    record(9, criterion_9());
    record(10, small.as_ref().map_err(Clone::clone).and_then(criterion_10));
    record(11, criterion_11());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
