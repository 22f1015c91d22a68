//! Experiment configuration files.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rbmim::eval::{DetectorSpec, DriftPoint, PrequentialConfig, DEFAULT_HORIZON};
use rbmim::gen::{make_benchmark, DriftKind, GeneratorConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_BATCH_SIZE: usize = 50;
pub const DEFAULT_IR_SWEEP: [f64; 6] = [50.0, 100.0, 200.0, 300.0, 400.0, 500.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub output: PathBuf,
    pub seeds: Vec<u64>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Matching horizon in batches for detection scoring.
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    /// Largest number of instances read from the stream. Generated streams
    /// are shrunk to it with their drift and prior positions scaled along.
    #[serde(default)]
    pub length_cap: Option<u64>,
    pub stream: StreamSpec,
    pub detectors: Vec<DetectorSpec>,
    #[serde(default)]
    pub prequential: PrequentialConfig,
    #[serde(default)]
    pub sweep: Option<Sweep>,
}

fn default_batch_size() -> usize {
    DEFAULT_BATCH_SIZE
}

fn default_horizon() -> u64 {
    DEFAULT_HORIZON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StreamSpec {
    /// Generator parameters inline.
    Generator { config: GeneratorConfig },
    /// Generator parameters in a separate TOML file.
    GeneratorFile { path: PathBuf },
    /// One of the named artificial benchmarks.
    Benchmark { name: String, length: u64 },
    /// Features then an integer label per row.
    Csv {
        path: PathBuf,
        classes: usize,
        #[serde(default = "default_delimiter")]
        delimiter: char,
        #[serde(default)]
        header: Option<bool>,
        /// Known drift points, if any, for detection scoring.
        #[serde(default)]
        drifts: Vec<DriftPoint>,
    },
}

fn default_delimiter() -> char {
    ','
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Sweep {
    /// Local drift on the `c` smallest classes; `1..=Z` when unset.
    AffectedClasses {
        #[serde(default)]
        values: Option<Vec<usize>>,
    },
    ImbalanceRatio {
        #[serde(default = "default_ir_sweep")]
        values: Vec<f64>,
    },
}

fn default_ir_sweep() -> Vec<f64> {
    DEFAULT_IR_SWEEP.to_vec()
}

impl Sweep {
    pub fn name(&self) -> &'static str {
        match self {
            Sweep::AffectedClasses { .. } => "affected_classes",
            Sweep::ImbalanceRatio { .. } => "imbalance_ratio",
        }
    }
}

/// Reads and parses a config file. Relative paths inside it are resolved
/// against the file's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg: ExperimentConfig =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    cfg.output = base.join(&cfg.output);
    match &mut cfg.stream {
        StreamSpec::GeneratorFile { path } | StreamSpec::Csv { path, .. } => *path = base.join(&*path),
        _ => {}
    }
    Ok(cfg)
}

pub fn load_generator(path: &Path) -> Result<GeneratorConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Shrinks a generator to `cap` instances, scaling every position in the
/// schedule by the same factor.
pub fn cap_generator(mut g: GeneratorConfig, cap: Option<u64>) -> GeneratorConfig {
    let Some(cap) = cap else { return g };
    if cap >= g.length {
        return g;
    }
    let scale = |j: u64| ((j as u128 * cap as u128) / g.length as u128) as u64;
    g.drift.t1 = scale(g.drift.t1);
    g.drift.t2 = scale(g.drift.t2);
    for k in &mut g.knots {
        k.at = scale(k.at);
    }
    for s in &mut g.role_swaps {
        s.at = scale(s.at);
    }
    g.length = cap;
    g
}

impl ExperimentConfig {
    /// The base generator of a generated stream, before sweeps and caps.
    pub fn generator(&self) -> Result<Option<GeneratorConfig>, CliError> {
        Ok(match &self.stream {
            StreamSpec::Generator { config } => Some(config.clone()),
            StreamSpec::GeneratorFile { path } => Some(load_generator(path)?),
            StreamSpec::Benchmark { name, length } => {
                Some(make_benchmark(name, *length, 0).map_err(|e| CliError::Config(e.to_string()))?)
            }
            StreamSpec::Csv { .. } => None,
        })
    }

    pub fn classes(&self) -> Result<usize, CliError> {
        Ok(match &self.stream {
            StreamSpec::Csv { classes, .. } => *classes,
            _ => self.generator()?.map_or(0, |g| g.classes),
        })
    }

    /// Every structural and range problem, one message each.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.seeds.is_empty() {
            out.push("seeds must be non-empty".into());
        }
        let mut seen = HashSet::new();
        for s in &self.seeds {
            if !seen.insert(*s) {
                out.push(format!("seed {s} listed twice"));
            }
        }
        if self.batch_size == 0 {
            out.push("batch size must be >= 1".into());
        }
        if self.horizon == 0 {
            out.push("horizon must be >= 1".into());
        }
        if let Some(cap) = self.length_cap {
            let min = 10 * self.batch_size as u64;
            if cap < min {
                out.push(format!("length cap {cap} is below 10 batches ({min} instances)"));
            }
        }
        if self.prequential.window == 0 {
            out.push("metric window must be >= 1".into());
        }
        if let Err(e) = self.prequential.classifier.validate() {
            out.push(e.to_string());
        }

        let generator = match self.generator() {
            Ok(g) => g,
            Err(e) => {
                out.push(e.to_string());
                return out;
            }
        };
        let classes = match &self.stream {
            StreamSpec::Csv {
                path,
                classes,
                delimiter,
                drifts,
                ..
            } => {
                if *classes < 2 {
                    out.push("class count must be >= 2".into());
                }
                if !delimiter.is_ascii() {
                    out.push(format!("delimiter {delimiter:?} is not a single byte"));
                }
                if !path.is_file() {
                    out.push(format!("stream file {} does not exist", path.display()));
                }
                for d in drifts {
                    if d.classes.iter().any(|&c| c >= *classes) {
                        out.push(format!("drift at batch {} names a class out of range", d.batch));
                    }
                }
                *classes
            }
            _ => {
                let g = generator.clone().expect("generated stream");
                if let Err(e) = cap_generator(g.clone(), self.length_cap).validate() {
                    out.push(e.to_string());
                }
                g.classes
            }
        };

        match (&self.sweep, &generator) {
            (None, _) => {}
            (Some(_), None) => out.push("sweeps need a generated stream".into()),
            (Some(Sweep::AffectedClasses { values }), Some(g)) => {
                if g.drift.kind == DriftKind::None {
                    out.push("an affected-class sweep needs a drift kind other than none".into());
                }
                if let Some(vs) = values {
                    if vs.is_empty() {
                        out.push("sweep values must be non-empty".into());
                    }
                    for &c in vs {
                        if c == 0 || c > g.classes {
                            out.push(format!("affected class count {c} outside 1..={}", g.classes));
                        }
                    }
                }
            }
            (Some(Sweep::ImbalanceRatio { values }), Some(g)) => {
                if !g.knots.is_empty() {
                    out.push("an imbalance-ratio sweep cannot be combined with explicit prior knots".into());
                }
                if values.is_empty() {
                    out.push("sweep values must be non-empty".into());
                }
                for &ir in values {
                    if !(ir >= 1.0 && ir.is_finite()) {
                        out.push(format!("imbalance ratio must be >= 1, got {ir}"));
                    }
                }
            }
        }

        if self.detectors.is_empty() {
            out.push("at least one detector is required".into());
        }
        let mut names = HashSet::new();
        for d in &self.detectors {
            if !names.insert(d.name()) {
                out.push(format!("detector {} listed twice", d.name()));
            }
            if classes >= 2 {
                if let Err(e) = d.build(classes) {
                    out.push(format!("detector {}: {e}", d.name()));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let d = self.diagnostics();
        if d.is_empty() {
            Ok(())
        } else {
            Err(CliError::Invalid(d))
        }
    }
}
