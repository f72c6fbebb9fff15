use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use qtransfer::cascade::write_instances_csv;
use qtransfer::ingest::write_records;
use qtransfer::{
    aggregate_patterns, build_instances, decompose, fit_classical, fit_quantum, parse_stream,
    predict_quantum, ClassicalFit, ClassicalFitOptions, Execution, InstanceSet, ParseOutcome,
    PatternRow, PatternStats, QuantumFit, QuantumFitConfig, SimulationConfig, WireFormat,
};

pub const INSTANCES_FILE: &str = "instances.csv";
pub const PATTERNS_FILE: &str = "patterns.csv";
pub const FIT_FILE: &str = "fit.txt";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Snap,
    Jsonl,
}

impl From<Format> for WireFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Snap => WireFormat::Snap,
            Format::Jsonl => WireFormat::Jsonl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Model {
    Classical,
    Quantum,
    Both,
}

impl Model {
    fn classical(self) -> bool {
        matches!(self, Model::Classical | Model::Both)
    }

    fn quantum(self) -> bool {
        matches!(self, Model::Quantum | Model::Both)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDescriptor {
    pub path: String,
    pub format: String,
    pub bytes: u64,
}

/// Counters across every stage. `records_parsed = records_used + malformed`
/// and `instances_built = instances_kept + instances_dropped`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct StageCounters {
    pub records_parsed: u64,
    pub records_used: u64,
    pub malformed: u64,
    pub two_hop_tweets: u64,
    pub excluded_tweets: u64,
    pub instances_built: u64,
    pub instances_kept: u64,
    pub instances_dropped: u64,
    pub dropped_over_n_max: u64,
    pub dropped_unknown_source: u64,
    pub direct_retweet_cooccurrence: u64,
    pub clamped: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictionRow {
    pub n: usize,
    pub observed: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassicalSummary {
    pub anchor: f64,
    pub slope: f64,
    pub residual: f64,
    pub n_max_fitted: usize,
    pub predictions: Vec<PredictionRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct QuantumSummary {
    pub q1: f64,
    pub p: f64,
    pub phases: Vec<f64>,
    pub residual: f64,
    pub converged: bool,
    pub winning_start: usize,
    pub predictions: Vec<PredictionRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InterferenceEntry {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub inputs: Vec<InputDescriptor>,
    pub counters: StageCounters,
    pub patterns: Vec<PatternRow>,
    pub classical: Option<ClassicalSummary>,
    pub quantum: Option<QuantumSummary>,
    pub interference: Vec<InterferenceEntry>,
    pub stage_seconds: BTreeMap<String, f64>,
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    if path == Path::new("-") {
        io::stdin()
            .read_to_end(&mut bytes)
            .context("reading standard input")?;
    } else {
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .with_context(|| format!("cannot read {}", path.display()))?;
    }
    Ok(bytes)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .with_context(|| format!("cannot create {}", parent.display()))?;
    }
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

pub struct Extraction {
    pub inputs: Vec<InputDescriptor>,
    pub parsed: ParseOutcome,
    pub instances: InstanceSet,
    pub stats: PatternStats,
}

impl Extraction {
    pub fn counters(&self) -> StageCounters {
        let c = &self.instances.counters;
        StageCounters {
            records_parsed: self.parsed.entries_seen(),
            records_used: self.parsed.records.len() as u64,
            malformed: self.parsed.malformed,
            two_hop_tweets: c.two_hop_tweets,
            excluded_tweets: c.excluded_tweets,
            instances_built: c.groups,
            instances_kept: self.instances.instances.len() as u64,
            instances_dropped: c.dropped(),
            dropped_over_n_max: c.dropped_over_n_max,
            dropped_unknown_source: c.dropped_unknown_source,
            direct_retweet_cooccurrence: c.direct_retweet_cooccurrence,
            clamped: self.stats.clamped_instances,
        }
    }
}

fn extract(
    inputs: &[PathBuf],
    format: Format,
    n_max: usize,
    exec: Execution,
    timings: &mut BTreeMap<String, f64>,
) -> Result<Extraction> {
    if n_max == 0 {
        bail!("--nmax must be at least 1");
    }
    let started = Instant::now();
    let mut descriptors = Vec::new();
    let mut parsed = ParseOutcome::default();
    for path in inputs {
        let bytes = read_input(path)?;
        descriptors.push(InputDescriptor {
            path: path.display().to_string(),
            format: WireFormat::from(format).to_string(),
            bytes: bytes.len() as u64,
        });
        parsed.append(parse_stream(format.into(), bytes.as_slice(), exec)?);
    }
    timings.insert("parse".into(), started.elapsed().as_secs_f64());

    let started = Instant::now();
    let instances = build_instances(&parsed.records, n_max, exec);
    let stats = aggregate_patterns(&instances.instances, n_max);
    timings.insert("extract".into(), started.elapsed().as_secs_f64());
    Ok(Extraction {
        inputs: descriptors,
        parsed,
        instances,
        stats,
    })
}

fn write_tables(extraction: &Extraction, out_dir: &Path) -> Result<()> {
    write_instances_csv(
        &extraction.instances.instances,
        create(&out_dir.join(INSTANCES_FILE))?,
    )?;
    extraction
        .stats
        .write_csv(create(&out_dir.join(PATTERNS_FILE))?)?;
    Ok(())
}

fn print_counters(counters: &StageCounters) {
    eprintln!(
        "records parsed {} (used {}, malformed {}); instances built {} (kept {}, dropped {}: {} over n_max, {} unknown source); clamped {}; excluded tweets {}; direct-retweet co-occurrence {}",
        counters.records_parsed,
        counters.records_used,
        counters.malformed,
        counters.instances_built,
        counters.instances_kept,
        counters.instances_dropped,
        counters.dropped_over_n_max,
        counters.dropped_unknown_source,
        counters.clamped,
        counters.excluded_tweets,
        counters.direct_retweet_cooccurrence,
    );
}

/// `extract`: parse corpora and write the instance and pattern tables.
pub fn cmd_extract(
    inputs: &[PathBuf],
    format: Format,
    n_max: usize,
    out_dir: &Path,
    exec: Execution,
) -> Result<StageCounters> {
    let mut timings = BTreeMap::new();
    let extraction = extract(inputs, format, n_max, exec, &mut timings)?;
    write_tables(&extraction, out_dir)?;
    let counters = extraction.counters();
    print_counters(&counters);
    Ok(counters)
}

pub struct Fits {
    pub classical: Option<ClassicalFit>,
    pub quantum: Option<QuantumFit>,
}

fn run_fits(
    stats: &PatternStats,
    model: Model,
    seed: u64,
    weighted: bool,
    exec: Execution,
) -> Result<Fits> {
    let classical = model
        .classical()
        .then(|| {
            fit_classical(
                stats,
                ClassicalFitOptions {
                    weight_by_instances: weighted,
                },
            )
        })
        .transpose()
        .context("classical fit")?;
    let quantum = model
        .quantum()
        .then(|| {
            fit_quantum(
                stats,
                &QuantumFitConfig {
                    seed,
                    execution: exec,
                    ..Default::default()
                },
            )
        })
        .transpose()
        .context("quantum fit")?;
    if let Some(fit) = &quantum {
        if !fit.converged {
            eprintln!("warning: quantum fit did not converge within the evaluation budget");
        }
    }
    Ok(Fits { classical, quantum })
}

fn fit_report(fits: &Fits) -> String {
    let mut out = String::new();
    if let Some(fit) = &fits.classical {
        out.push_str(&fit.report());
    }
    if let Some(fit) = &fits.quantum {
        out.push_str(&fit.report());
    }
    out
}

/// `fit`: fit the requested models to a pattern-stats table.
pub fn cmd_fit(
    stats_path: &Path,
    model: Model,
    seed: u64,
    weighted: bool,
    out: Option<&Path>,
    exec: Execution,
) -> Result<Fits> {
    let bytes = read_input(stats_path)?;
    let stats = PatternStats::read_csv(bytes.as_slice())
        .with_context(|| format!("malformed stats table {}", stats_path.display()))?;
    let fits = run_fits(&stats, model, seed, weighted, exec)?;
    let report = fit_report(&fits);
    match out {
        Some(path) => create(path)?.write_all(report.as_bytes())?,
        None => io::stdout().lock().write_all(report.as_bytes())?,
    }
    Ok(fits)
}

/// `simulate`: generate a corpus from a config file and print the ground truth.
pub fn cmd_simulate(
    config_path: &Path,
    out: &Path,
    format: Format,
    seed: Option<u64>,
    exec: Execution,
) -> Result<SimulationConfig> {
    let text = fs::read_to_string(config_path)
        .with_context(|| format!("cannot read {}", config_path.display()))?;
    let mut config = SimulationConfig::from_kv_str(&text)
        .with_context(|| format!("invalid config {}", config_path.display()))?;
    if let Some(seed) = seed {
        config.set_seed(seed);
    }
    let corpus = config.simulate(exec)?;
    write_records(format.into(), create(out)?, &corpus)?;
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "n,expected_probability")?;
    for (n, p) in config.ground_truth_table() {
        writeln!(stdout, "{n},{p}")?;
    }
    eprintln!("wrote {} tweets to {}", corpus.len(), out.display());
    Ok(config)
}

fn predictions(observed: &[(usize, f64)], predict: impl Fn(usize) -> f64) -> Vec<PredictionRow> {
    observed
        .iter()
        .map(|&(n, observed)| PredictionRow {
            n,
            observed,
            predicted: predict(n),
        })
        .collect()
}

/// `report`: every stage in one run, written as tables, a fit report and a
/// JSON run report.
#[allow(clippy::too_many_arguments)]
pub fn cmd_report(
    inputs: &[PathBuf],
    format: Format,
    n_max: usize,
    model: Model,
    seed: u64,
    weighted: bool,
    out_dir: &Path,
    exec: Execution,
) -> Result<RunReport> {
    let mut timings = BTreeMap::new();
    let extraction = extract(inputs, format, n_max, exec, &mut timings)?;
    write_tables(&extraction, out_dir)?;
    let counters = extraction.counters();
    print_counters(&counters);

    let started = Instant::now();
    let fits = run_fits(&extraction.stats, model, seed, weighted, exec)?;
    timings.insert("fit".into(), started.elapsed().as_secs_f64());
    create(&out_dir.join(FIT_FILE))?.write_all(fit_report(&fits).as_bytes())?;

    let classical = fits.classical.as_ref().map(|fit| ClassicalSummary {
        anchor: fit.anchor,
        slope: fit.slope,
        residual: fit.residual,
        n_max_fitted: fit.n_max_fitted,
        predictions: predictions(
            &fit.points.iter().map(|p| (p.0, p.1)).collect::<Vec<_>>(),
            |n| fit.predict(n),
        ),
    });
    let mut interference = Vec::new();
    let quantum = match fits.quantum.as_ref() {
        Some(fit) => {
            let all: Vec<usize> = (0..fit.channels()).collect();
            for (i, j, value) in decompose(&fit.params(), &all)?.pairs() {
                interference.push(InterferenceEntry {
                    i: i + 1,
                    j: j + 1,
                    value,
                });
            }
            Some(QuantumSummary {
                q1: fit.q1,
                p: fit.p,
                phases: fit.phases.clone(),
                residual: fit.residual,
                converged: fit.converged,
                winning_start: fit.winning_start,
                predictions: predictions(&fit.observed, |n| {
                    predict_quantum(fit, n).map(|p| p.value).unwrap_or(f64::NAN)
                }),
            })
        }
        None => None,
    };

    let report = RunReport {
        inputs: extraction.inputs,
        counters,
        patterns: extraction.stats.rows,
        classical,
        quantum,
        interference,
        stage_seconds: timings,
    };
    let mut writer = create(&out_dir.join(REPORT_FILE))?;
    serde_json::to_writer_pretty(&mut writer, &report)?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(report)
}
