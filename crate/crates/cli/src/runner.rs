//! Expands an experiment into runs, executes them and writes the reports.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use rbmim::drift::write_drift_log_csv;
use rbmim::eval::{
    detection_counts, drift_points, run_prequential, write_metrics_csv, write_summary_json, DetectionCounts,
    DetectionMetrics, DetectorSpec, DriftPoint, RunSummary,
};
use rbmim::gen::{inject_local_drift, GeneratorConfig};
use rbmim::stream::{read_csv, Batcher, CsvFormat, Instance, MiniBatch};
use serde::{Deserialize, Serialize};

use crate::config::{cap_generator, load_generator, ExperimentConfig, StreamSpec, Sweep};
use crate::CliError;

pub const SUMMARY_FILE: &str = "summary.json";
pub const PLOT_FILE: &str = "plot_data.csv";
pub const RUNS_DIR: &str = "runs";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replaces the configured seed list with this one seed.
    pub seed: Option<u64>,
    /// Replaces the configured length cap.
    pub length: Option<u64>,
    /// Replaces the configured output directory.
    pub output: Option<PathBuf>,
    /// Parallel runs; 0 uses every core.
    pub jobs: usize,
    pub quiet: bool,
}

#[derive(Debug, Clone)]
enum Source {
    Generated(GeneratorConfig),
    Csv {
        instances: Arc<Vec<Instance>>,
        drifts: Vec<DriftPoint>,
    },
}

/// One setting of the swept parameter.
#[derive(Debug, Clone)]
struct Point {
    label: String,
    value: Option<f64>,
    source: Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub point: String,
    pub sweep_value: Option<f64>,
    pub metrics_csv: String,
    pub drift_log_csv: String,
    #[serde(flatten)]
    pub summary: RunSummary,
}

/// Pooled results of one detector at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub point: String,
    pub sweep_value: Option<f64>,
    pub detector: String,
    pub runs: usize,
    pub mean_pm_auc: Option<f64>,
    pub mean_pm_gm: Option<f64>,
    pub counts: DetectionCounts,
    pub metrics: DetectionMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub name: Option<String>,
    pub sweep: Option<String>,
    pub batch_size: usize,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunRecord>,
    pub aggregates: Vec<Aggregate>,
}

/// Applies command-line overrides and validates the result.
pub fn effective_config(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentConfig, CliError> {
    let mut cfg = cfg.clone();
    if let Some(s) = opts.seed {
        cfg.seeds = vec![s];
    }
    if let Some(l) = opts.length {
        cfg.length_cap = Some(l);
    }
    if let Some(o) = &opts.output {
        cfg.output = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn points(cfg: &ExperimentConfig) -> Result<Vec<Point>, CliError> {
    if let StreamSpec::Csv {
        path,
        delimiter,
        header,
        drifts,
        ..
    } = &cfg.stream
    {
        let file = File::open(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        let format = CsvFormat {
            delimiter: *delimiter as u8,
            has_header: *header,
        };
        let mut instances = read_csv(file, format)?;
        if let Some(cap) = cfg.length_cap {
            instances.truncate(cap.min(usize::MAX as u64) as usize);
        }
        return Ok(vec![Point {
            label: "base".into(),
            value: None,
            source: Source::Csv {
                instances: Arc::new(instances),
                drifts: drifts.clone(),
            },
        }]);
    }
    let g = cfg.generator()?.expect("generated stream");
    let capped = |g: GeneratorConfig| Source::Generated(cap_generator(g, cfg.length_cap));
    Ok(match &cfg.sweep {
        None => vec![Point {
            label: "base".into(),
            value: None,
            source: capped(g),
        }],
        Some(Sweep::AffectedClasses { values }) => {
            let values = values.clone().unwrap_or_else(|| (1..=g.classes).collect());
            values
                .into_iter()
                .map(|c| {
                    Ok(Point {
                        label: format!("c{c}"),
                        value: Some(c as f64),
                        source: capped(inject_local_drift(g.clone(), c).map_err(|e| CliError::Config(e.to_string()))?),
                    })
                })
                .collect::<Result<_, CliError>>()?
        }
        Some(Sweep::ImbalanceRatio { values }) => values
            .iter()
            .map(|&ir| Point {
                label: format!("ir{ir}"),
                value: Some(ir),
                source: capped(GeneratorConfig { ir, ..g.clone() }),
            })
            .collect(),
    })
}

/// Gives stochastic detectors the run seed.
fn seeded(spec: &DetectorSpec, seed: u64) -> DetectorSpec {
    let mut spec = spec.clone();
    if let DetectorSpec::RbmIm { config } = &mut spec {
        config.rbm.seed = seed;
    }
    spec
}

fn run_dir(cfg: &ExperimentConfig, point: &Point, detector: &str, seed: u64) -> PathBuf {
    let mut p = PathBuf::from(RUNS_DIR);
    if cfg.sweep.is_some() {
        p.push(&point.label);
    }
    p.join(detector).join(format!("seed-{seed}"))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::Runtime(format!("{}: {e}", parent.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn execute(
    cfg: &ExperimentConfig,
    classes: usize,
    point: &Point,
    spec: &DetectorSpec,
    seed: u64,
    staging: &Path,
) -> Result<RunRecord, CliError> {
    let (batches, truth): (Box<dyn Iterator<Item = rbmim::error::Result<MiniBatch>>>, Vec<DriftPoint>) =
        match &point.source {
            Source::Generated(g) => {
                let stream = GeneratorConfig { seed, ..g.clone() }.build()?;
                let truth = drift_points(&stream, cfg.batch_size);
                (Box::new(stream.batches(cfg.batch_size)), truth)
            }
            Source::Csv { instances, drifts } => (
                Box::new(Batcher::new(instances.iter().cloned(), cfg.batch_size)),
                drifts.clone(),
            ),
        };
    let mut detector = seeded(spec, seed).build(classes)?;
    let result = run_prequential(batches, classes, Some(detector.as_mut()), &cfg.prequential)?;
    let counts = detection_counts(&result.detections(), &truth, cfg.horizon, result.rows.len() as u64);
    let summary = RunSummary::new(spec.name(), seed, &result, counts);

    let dir = run_dir(cfg, point, spec.name(), seed);
    let metrics = dir.join("metrics.csv");
    let log = dir.join("drift_log.csv");
    write_metrics_csv(create(&staging.join(&metrics))?, spec.name(), &result.rows)?;
    write_drift_log_csv(create(&staging.join(&log))?, &result.records)?;
    Ok(RunRecord {
        point: point.label.clone(),
        sweep_value: point.value,
        metrics_csv: portable(&metrics),
        drift_log_csv: portable(&log),
        summary,
    })
}

fn portable(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

fn mean(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn aggregate(runs: &[RunRecord], points: &[Point], detectors: &[DetectorSpec]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for p in points {
        for d in detectors {
            let group: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.point == p.label && r.summary.detector == d.name())
                .collect();
            let mut counts = DetectionCounts::default();
            for r in &group {
                counts.merge(&r.summary.counts);
            }
            out.push(Aggregate {
                point: p.label.clone(),
                sweep_value: p.value,
                detector: d.name().to_string(),
                runs: group.len(),
                mean_pm_auc: mean(group.iter().map(|r| r.summary.mean_pm_auc)),
                mean_pm_gm: mean(group.iter().map(|r| r.summary.mean_pm_gm)),
                metrics: counts.summary(),
                counts,
            });
        }
    }
    out
}

pub fn write_plot_data<W: std::io::Write>(out: W, sweep: Option<&str>, aggregates: &[Aggregate]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record([
        "sweep",
        "value",
        "detector",
        "runs",
        "mean_pm_auc",
        "mean_pm_gm",
        "mean_delay",
        "false_alarms_per_100",
        "miss_rate",
        "attribution_precision",
        "attribution_recall",
    ])
    .map_err(io)?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for a in aggregates {
        let m = &a.metrics;
        w.write_record([
            sweep.unwrap_or("none").to_string(),
            opt(a.sweep_value),
            a.detector.clone(),
            a.runs.to_string(),
            opt(a.mean_pm_auc),
            opt(a.mean_pm_gm),
            opt(m.mean_delay),
            m.false_alarms_per_100.to_string(),
            opt(m.miss_rate),
            opt(m.attribution_precision),
            opt(m.attribution_recall),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(())
}

/// Refuses to replace a directory that does not hold a previous run.
fn check_output(out: &Path) -> Result<(), CliError> {
    if !out.exists() {
        return Ok(());
    }
    if !out.is_dir() {
        return Err(CliError::Runtime(format!("{} exists and is not a directory", out.display())));
    }
    let empty = fs::read_dir(out)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?
        .next()
        .is_none();
    if !empty && !out.join(SUMMARY_FILE).is_file() {
        return Err(CliError::Runtime(format!(
            "{} is not empty and holds no previous results",
            out.display()
        )));
    }
    Ok(())
}

fn staging_dir(out: &Path) -> PathBuf {
    let name = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    out.with_file_name(format!(".{name}.partial-{}", std::process::id()))
}

/// Runs every (sweep point, seed, detector) combination and writes the
/// reports into the output directory. Nothing is left behind on failure; a
/// previous run in the same directory is replaced on success.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentSummary, CliError> {
    let cfg = effective_config(cfg, opts)?;
    let classes = cfg.classes()?;
    let points = points(&cfg)?;
    let out = cfg.output.clone();
    check_output(&out)?;
    let staging = staging_dir(&out);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| CliError::Runtime(format!("{}: {e}", staging.display())))?;
    }
    fs::create_dir_all(&staging).map_err(|e| CliError::Runtime(format!("{}: {e}", staging.display())))?;

    let result = run_into(&cfg, classes, &points, opts, &staging);
    if result.is_err() {
        let _ = fs::remove_dir_all(&staging);
        return result;
    }
    if out.exists() {
        fs::remove_dir_all(&out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
    }
    fs::rename(&staging, &out).map_err(|e| {
        let _ = fs::remove_dir_all(&staging);
        CliError::Runtime(format!("{}: {e}", out.display()))
    })?;
    result
}

fn run_into(
    cfg: &ExperimentConfig,
    classes: usize,
    points: &[Point],
    opts: &RunOptions,
    staging: &Path,
) -> Result<ExperimentSummary, CliError> {
    let jobs: Vec<(&Point, u64, &DetectorSpec)> = points
        .iter()
        .flat_map(|p| {
            cfg.seeds
                .iter()
                .flat_map(move |&s| cfg.detectors.iter().map(move |d| (p, s, d)))
        })
        .collect();
    let total = jobs.len();
    let done = AtomicUsize::new(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let runs: Vec<RunRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, seed, d)| {
                let r = execute(cfg, classes, p, d, seed, staging)?;
                let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                if !opts.quiet {
                    let auc = r.summary.mean_pm_auc.map_or("-".into(), |v| format!("{v:.4}"));
                    eprintln!(
                        "[{k}/{total}] {} {} seed {}: pmAUC {auc}, {} detections",
                        p.label, r.summary.detector, seed, r.summary.detections
                    );
                }
                Ok(r)
            })
            .collect::<Result<_, CliError>>()
    })?;

    let sweep = cfg.sweep.as_ref().map(|s| s.name());
    let aggregates = aggregate(&runs, points, &cfg.detectors);
    write_plot_data(create(&staging.join(PLOT_FILE))?, sweep, &aggregates)?;
    let summary = ExperimentSummary {
        name: cfg.name.clone(),
        sweep: sweep.map(str::to_string),
        batch_size: cfg.batch_size,
        horizon: cfg.horizon,
        seeds: cfg.seeds.clone(),
        runs,
        aggregates,
    };
    write_summary_json(create(&staging.join(SUMMARY_FILE))?, &summary)?;
    Ok(summary)
}

/// Writes a generated stream as CSV; the file appears only once complete.
pub fn generate(generator: &Path, out: &Path, seed: Option<u64>, length: Option<u64>) -> Result<(), CliError> {
    let mut g = load_generator(generator)?;
    if let Some(s) = seed {
        g.seed = s;
    }
    let g = cap_generator(g, length);
    let stream = g.build().map_err(|e| CliError::Config(e.to_string()))?;
    let tmp = staging_dir(out);
    let written = create(&tmp).and_then(|w| stream.export_csv(w).map_err(CliError::from));
    let done = written.and_then(|_| {
        fs::rename(&tmp, out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))
    });
    if done.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    done
}
