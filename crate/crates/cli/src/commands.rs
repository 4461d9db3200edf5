use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use lc_intent_core::dataset::{load_samples, save_samples, Dataset};
use lc_intent_core::eval::{
    benchmark_training, crossval as run_crossval, sweep_trees, sweep_window, write_report_csv, write_tree_sweep_csv,
    write_window_sweep_csv, Benchmark, EvalReport,
};
use lc_intent_core::features::save_feature_csv;
use lc_intent_core::gbdt::SplitStrategy;
use lc_intent_core::ingest::{parse_trajectories, Trajectory, VehicleId};
use lc_intent_core::model::{train_model, KindTrainer, ModelKind};
use lc_intent_core::pipeline::{self, FeatureSet};
use lc_intent_core::synthgen::{self, read_manifest, CORPUS_FILE, MANIFEST_FILE};
use serde::Serialize;

use crate::config::RunConfig;
use crate::{BenchArgs, Common, CorpusArgs, Failure, ModelArgs, SweepArgs, SweepKind, SynthArgs};

const TRAIN_FILE: &str = "train.bin";
const TEST_FILE: &str = "test.bin";
const DATASET_MANIFEST: &str = "manifest.json";

struct Ctx {
    config: RunConfig,
    out: PathBuf,
    reproducible: bool,
    single_thread: bool,
}

fn thread_count(single_thread: bool) -> Result<Option<usize>, Failure> {
    if single_thread {
        return Ok(Some(1));
    }
    match std::env::var("LC_INTENT_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Failure::validation(format!(
                "invalid value for `LC_INTENT_THREADS`: expected a positive integer, got '{v}'"
            ))),
        },
    }
}

fn setup(common: &Common, seed_required: bool) -> Result<Ctx, Failure> {
    let mut config = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed.or(config.seed) {
        config.apply_seed(seed);
    } else if seed_required {
        return Err(Failure::validation("missing value for `seed`: pass --seed or set it in the config"));
    }
    if let Some(out) = &common.out {
        config.paths.out = Some(out.clone());
    }
    config.validate()?;
    let out = config
        .paths
        .out
        .clone()
        .ok_or_else(|| Failure::validation("missing value for `out`: pass --out or set paths.out"))?;
    if let Some(n) = thread_count(common.single_thread)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::runtime(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&out)
        .map_err(|e| Failure::runtime(format!("cannot create {}: {e}", out.display())))?;
    Ok(Ctx {
        config,
        out,
        reproducible: common.reproducible,
        single_thread: common.single_thread,
    })
}

fn parse_model(name: Option<&str>) -> Result<ModelKind, Failure> {
    let name = name.ok_or_else(|| Failure::validation("missing value for `model`: pass --model"))?;
    name.parse::<ModelKind>().map_err(Failure::from_core)
}

fn existing(path: Option<PathBuf>, key: &str) -> Result<PathBuf, Failure> {
    let path = path.ok_or_else(|| Failure::validation(format!("missing value for `{key}`")))?;
    if !path.exists() {
        return Err(Failure::validation(format!(
            "invalid value for `{key}`: {} does not exist",
            path.display()
        )));
    }
    Ok(path)
}

fn corpus_path(ctx: &Ctx, flag: &Option<PathBuf>) -> Result<PathBuf, Failure> {
    let path = existing(flag.clone().or(ctx.config.paths.corpus.clone()), "paths.corpus")?;
    if path.is_dir() && !path.join(CORPUS_FILE).exists() {
        return Err(Failure::validation(format!(
            "invalid value for `paths.corpus`: {} has no {CORPUS_FILE}",
            path.display()
        )));
    }
    Ok(path)
}

/// Trajectories plus the ego ids listed by a synthetic manifest next to them.
fn load_corpus(ctx: &Ctx, path: &Path) -> anyhow::Result<(Vec<Trajectory>, Option<Vec<VehicleId>>)> {
    let (csv, manifest) = if path.is_dir() {
        (path.join(CORPUS_FILE), Some(path.join(MANIFEST_FILE)))
    } else {
        (path.to_path_buf(), None)
    };
    let trajectories = parse_trajectories(&csv, &ctx.config.scene)?;
    let egos = match manifest.filter(|m| m.exists()) {
        Some(m) => Some(read_manifest(&m)?.egos.iter().map(|e| e.vehicle_id).collect()),
        None => None,
    };
    Ok((trajectories, egos))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn finish(ctx: &Ctx, summary: &str) -> anyhow::Result<()> {
    print!("{summary}");
    std::fs::write(ctx.out.join("summary.txt"), summary).context("writing summary.txt")
}

fn time(ctx: &Ctx, seconds: f64) -> f64 {
    if ctx.reproducible {
        0.0
    } else {
        seconds
    }
}

pub fn synth(args: SynthArgs) -> Result<(), Failure> {
    let ctx = setup(&args.common, false)?;
    let mut cfg = ctx.config.synth.clone();
    if let Some(scale) = args.scale {
        let base = synthgen::paperlike_config(scale, cfg.rng_seed)?;
        cfg.n_lk = base.n_lk;
        cfg.n_llc = base.n_llc;
        cfg.n_rlc = base.n_rlc;
    }
    let corpus = synthgen::generate(&cfg)?;
    corpus.write(&ctx.out)?;
    let m = &corpus.manifest;
    let mut s = String::new();
    writeln!(s, "synthetic corpus, seed {}", m.seed).unwrap();
    for (class, n) in &m.counts {
        writeln!(s, "  {class}: {n} egos").unwrap();
    }
    writeln!(s, "  {} trajectories in {}", corpus.trajectories.len(), ctx.out.join(CORPUS_FILE).display()).unwrap();
    finish(&ctx, &s)?;
    Ok(())
}

fn extract(ctx: &Ctx, corpus: &Option<PathBuf>) -> Result<FeatureSet, Failure> {
    let path = corpus_path(ctx, corpus)?;
    let (trajectories, egos) = load_corpus(ctx, &path)?;
    Ok(pipeline::extract_features(trajectories, egos.as_deref(), &ctx.config.pipeline())?)
}

#[derive(Serialize)]
struct FeatureSummary<'a> {
    egos: Vec<EgoSummary>,
    dropped: &'a [lc_intent_core::preprocess::Dropped],
}

#[derive(Serialize)]
struct EgoSummary {
    vehicle_id: VehicleId,
    class: lc_intent_core::Class,
    cross_frame: Option<i64>,
    frames: usize,
}

pub fn features(args: CorpusArgs) -> Result<(), Failure> {
    let ctx = setup(&args.common, false)?;
    let set = extract(&ctx, &args.corpus)?;
    let series: Vec<_> = set.egos.iter().map(|e| (e.vehicle_id, e.frames.clone())).collect();
    save_feature_csv(ctx.out.join("features.csv"), &series)?;
    let summary = FeatureSummary {
        egos: set
            .egos
            .iter()
            .map(|e| EgoSummary {
                vehicle_id: e.vehicle_id,
                class: e.class,
                cross_frame: e.cross_frame,
                frames: e.frames.len(),
            })
            .collect(),
        dropped: &set.dropped,
    };
    write_json(&ctx.out.join("features.json"), &summary)?;
    let mut s = String::new();
    writeln!(s, "features for {} egos, {} vehicles dropped", set.egos.len(), set.dropped.len()).unwrap();
    finish(&ctx, &s)?;
    Ok(())
}

fn counts_line(m: &std::collections::BTreeMap<lc_intent_core::Class, usize>) -> String {
    m.iter().map(|(c, n)| format!("{c} {n}")).collect::<Vec<_>>().join(", ")
}

pub fn dataset(args: CorpusArgs) -> Result<(), Failure> {
    let ctx = setup(&args.common, true)?;
    let path = corpus_path(&ctx, &args.corpus)?;
    let (trajectories, egos) = load_corpus(&ctx, &path)?;
    let split = pipeline::run(trajectories, egos.as_deref(), &ctx.config.pipeline())?;
    save_samples(ctx.out.join(TRAIN_FILE), &split.train)?;
    save_samples(ctx.out.join(TEST_FILE), &split.test)?;
    write_json(&ctx.out.join(DATASET_MANIFEST), &split.manifest)?;
    let m = &split.manifest;
    let mut s = String::new();
    writeln!(s, "{} samples of {} frames, seed {}", m.total, m.config.window_frames, m.seed).unwrap();
    writeln!(s, "  balanced: {}", counts_line(&m.class_counts)).unwrap();
    writeln!(s, "  train: {}", counts_line(&m.train_counts)).unwrap();
    writeln!(s, "  test: {}", counts_line(&m.test_counts)).unwrap();
    writeln!(s, "  dropped vehicles: {}", m.dropped.len()).unwrap();
    finish(&ctx, &s)?;
    Ok(())
}

/// Train and test sets from a sample directory, or built from a corpus.
fn load_split(ctx: &Ctx, samples: &Option<PathBuf>, corpus: &Option<PathBuf>) -> Result<(Dataset, Dataset), Failure> {
    let samples = samples.clone().or(ctx.config.paths.samples.clone());
    let (train, test) = match samples {
        Some(dir) => {
            let dir = existing(Some(dir), "paths.samples")?;
            let train = existing(Some(dir.join(TRAIN_FILE)), "paths.samples")?;
            let test = existing(Some(dir.join(TEST_FILE)), "paths.samples")?;
            (load_samples(train)?, load_samples(test)?)
        }
        None => {
            let path = corpus_path(ctx, corpus)?;
            let (trajectories, egos) = load_corpus(ctx, &path)?;
            let split = pipeline::run(trajectories, egos.as_deref(), &ctx.config.pipeline())?;
            (split.train, split.test)
        }
    };
    Ok((Dataset::from_samples(&train)?, Dataset::from_samples(&test)?))
}

fn model_config(ctx: &Ctx, kind: ModelKind) -> serde_json::Value {
    let m = &ctx.config.models;
    let v = match kind {
        ModelKind::GbdtExact => serde_json::to_value(m.gbdt_for(SplitStrategy::Exact)),
        ModelKind::GbdtHist => serde_json::to_value(m.gbdt_for(SplitStrategy::Histogram)),
        ModelKind::Svm => serde_json::to_value(&m.svm),
        ModelKind::Lstm => serde_json::to_value(&m.lstm),
    };
    v.expect("configs serialize")
}

fn report_lines(s: &mut String, r: &EvalReport) {
    writeln!(
        s,
        "{}: accuracy {:.4}, type I {}, type II {}, type III {}, training {:.3} s",
        r.model, r.accuracy, r.errors.type1, r.errors.type2, r.errors.type3, r.training_seconds
    )
    .unwrap();
    for c in lc_intent_core::Class::ALL {
        let i = c.index();
        writeln!(s, "  {c}: precision {}, recall {}", r.precision[i], r.recall[i]).unwrap();
    }
}

pub fn train(args: ModelArgs) -> Result<(), Failure> {
    let kind = parse_model(args.model.as_deref())?;
    let ctx = setup(&args.common, true)?;
    let (train, test) = load_split(&ctx, &args.samples, &args.corpus)?;
    let start = Instant::now();
    let model = train_model(kind, &train, &ctx.config.models)?;
    let seconds = time(&ctx, start.elapsed().as_secs_f64());
    let report = EvalReport::evaluate(kind.tag(), &model, &test, seconds, model_config(&ctx, kind))?;
    let tag = kind.tag();
    write_json(&ctx.out.join(format!("{tag}.model.json")), &model)?;
    write_json(&ctx.out.join(format!("{tag}.report.json")), &report)?;
    write_report_csv(create(&ctx.out.join(format!("{tag}.report.csv")))?, std::slice::from_ref(&report))?;
    let mut s = String::new();
    writeln!(s, "trained on {} samples, tested on {}", train.len(), test.len()).unwrap();
    report_lines(&mut s, &report);
    finish(&ctx, &s)?;
    Ok(())
}

pub fn crossval(args: ModelArgs) -> Result<(), Failure> {
    let kind = parse_model(args.model.as_deref())?;
    let ctx = setup(&args.common, true)?;
    let (train, _) = load_split(&ctx, &args.samples, &args.corpus)?;
    let trainer = KindTrainer {
        kind,
        configs: ctx.config.models.clone(),
    };
    let cfg = &ctx.config.dataset;
    let mut report = run_crossval(&trainer, &train, cfg.folds, cfg.rng_seed, !ctx.single_thread)?;
    for f in &mut report.folds {
        f.training_seconds = time(&ctx, f.training_seconds);
        f.config = model_config(&ctx, kind);
    }
    let tag = kind.tag();
    write_json(&ctx.out.join(format!("{tag}.crossval.json")), &report)?;
    let mut csv = String::from("fold,accuracy,type1,type2,type3,training_seconds\n");
    for (i, f) in report.folds.iter().enumerate() {
        writeln!(
            csv,
            "{i},{:.6},{},{},{},{:.6}",
            f.accuracy, f.errors.type1, f.errors.type2, f.errors.type3, f.training_seconds
        )
        .unwrap();
    }
    std::fs::write(ctx.out.join(format!("{tag}.crossval.csv")), csv).context("writing crossval csv")?;
    let mut s = String::new();
    writeln!(
        s,
        "{tag}: {}-fold accuracy {:.4} +/- {:.4}",
        report.folds.len(),
        report.mean_accuracy,
        report.std_accuracy
    )
    .unwrap();
    finish(&ctx, &s)?;
    Ok(())
}

#[derive(Serialize)]
struct BenchEntry {
    benchmark: Benchmark,
    report: EvalReport,
}

pub fn bench(args: BenchArgs) -> Result<(), Failure> {
    let kinds = match args.model.as_deref() {
        Some(name) => vec![parse_model(Some(name))?],
        None => ModelKind::ALL.to_vec(),
    };
    let ctx = setup(&args.common, true)?;
    let (train, test) = load_split(&ctx, &args.samples, &args.corpus)?;
    let mut entries = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let trainer = KindTrainer {
            kind,
            configs: ctx.config.models.clone(),
        };
        let (mut benchmark, model) = benchmark_training(&trainer, &train, ctx.config.bench.repeats)?;
        if ctx.reproducible {
            benchmark.median_seconds = 0.0;
            benchmark.runs.iter_mut().for_each(|t| *t = 0.0);
        }
        let report = EvalReport::evaluate(
            kind.tag(),
            model.as_ref(),
            &test,
            benchmark.median_seconds,
            model_config(&ctx, kind),
        )?;
        entries.push(BenchEntry { benchmark, report });
    }
    write_json(&ctx.out.join("bench.json"), &entries)?;
    let reports: Vec<EvalReport> = entries.iter().map(|e| e.report.clone()).collect();
    write_report_csv(create(&ctx.out.join("bench.csv"))?, &reports)?;
    let mut s = String::new();
    writeln!(s, "single-threaded training, median of {} runs", ctx.config.bench.repeats).unwrap();
    for r in &reports {
        report_lines(&mut s, r);
    }
    finish(&ctx, &s)?;
    Ok(())
}

pub fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let kinds = match args.model.as_deref() {
        Some(name) => vec![parse_model(Some(name))?],
        None => ModelKind::ALL.to_vec(),
    };
    let ctx = setup(&args.common, true)?;
    let sweep = &ctx.config.sweep;
    let mut s = String::new();
    match args.kind {
        SweepKind::Trees => {
            let (train, test) = load_split(&ctx, &args.samples, &args.corpus)?;
            let mut rows = sweep_trees(
                &train,
                &test,
                &sweep.tree_counts,
                &[SplitStrategy::Exact, SplitStrategy::Histogram],
                &ctx.config.models.gbdt,
                sweep.repeats,
            )?;
            rows.iter_mut().for_each(|r| r.seconds = time(&ctx, r.seconds));
            write_json(&ctx.out.join("sweep_trees.json"), &rows)?;
            write_tree_sweep_csv(create(&ctx.out.join("sweep_trees.csv"))?, &rows)?;
            for r in &rows {
                writeln!(s, "{:?} {:>4} trees: accuracy {:.4}, {:.3} s", r.strategy, r.trees, r.accuracy, r.seconds).unwrap();
            }
        }
        SweepKind::Window => {
            let set = extract(&ctx, &args.corpus)?;
            let mut rows = sweep_window(&set, &sweep.window_lengths, &kinds, &ctx.config.dataset, &ctx.config.models)?;
            rows.iter_mut().for_each(|r| r.seconds = time(&ctx, r.seconds));
            write_json(&ctx.out.join("sweep_window.json"), &rows)?;
            write_window_sweep_csv(create(&ctx.out.join("sweep_window.csv"))?, &rows)?;
            for r in &rows {
                writeln!(s, "{} window {:>4}: accuracy {:.4}", r.model, r.window, r.accuracy).unwrap();
            }
        }
    }
    finish(&ctx, &s)?;
    Ok(())
}
