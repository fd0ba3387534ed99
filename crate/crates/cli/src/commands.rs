use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use weakpu::classifier::{self, classify, TrainedClassifier};
use weakpu::data::{make_pu_split, SampleLabel};
use weakpu::eval::{confusion, metrics, run_sweep, to_ground_truth, ConfusionCounts, Metrics, SweepResult};
use weakpu::iforest::{fit_forest, IsolationForest};
use weakpu::io::{load_feature_file, FeatureFile, FileFormat, PuView};
use weakpu::pipeline::{
    assemble_training_set, mine_counter_examples, rank_unlabeled, CounterExampleSet, RankedPool,
    StageSeeds,
};
use weakpu::synth::{BlobSpec, PlantedAnomalySpec};
use weakpu::{seed, RunConfig};

use crate::config_file::{ConfigFile, DataSource};
use crate::{Cli, CliError, Command};

/// Files produced by one command, written only after every stage succeeded.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    fn write(self) -> Result<(), CliError> {
        fs::create_dir_all(&self.dir).map_err(|e| {
            CliError::runtime(format!("cannot create {}: {e}", self.dir.display()))
        })?;
        for (name, bytes) in self.files {
            let path = self.dir.join(&name);
            fs::write(&path, bytes)
                .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
            log::info!("wrote {}", path.display());
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct ExperimentReport<'a> {
    config: &'a RunConfig,
    data: &'a DataSource,
    rows: usize,
    dim: usize,
    sweep: &'a SweepResult,
}

#[derive(Serialize)]
struct EvaluationReport {
    rows: usize,
    confusion: ConfusionCounts,
    metrics: Metrics,
}

fn effective_config(cli: &Cli) -> Result<(RunConfig, Option<DataSource>), CliError> {
    let (mut run, data) = match &cli.config {
        Some(path) => {
            let file = ConfigFile::load(path)?;
            (file.run, file.data)
        }
        None => (RunConfig::default(), None),
    };
    if let Some(seed) = cli.seed {
        run.master_seed = seed;
    }
    if let Some(fractions) = &cli.fractions {
        run.fractions = fractions.clone();
    }
    if let Some(class) = cli.positive_class {
        run.positive_class = class;
    }
    if let Some(folds) = cli.folds {
        run.folds = folds;
    }
    run.validate()?;
    Ok((run, data))
}

fn load(path: &Path) -> Result<FeatureFile, CliError> {
    Ok(load_feature_file(path, FileFormat::from_path(path))?)
}

fn load_pu(path: &Path) -> Result<PuView, CliError> {
    Ok(load(path)?.into_pu()?)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::runtime(format!("thread pool: {e}")))?;
    }
    let (cfg, data_source) = effective_config(&cli)?;
    let out_dir = cli
        .out
        .clone()
        .ok_or_else(|| CliError::config("--out <DIR> is required"))?;
    let format = cli.format.unwrap_or(FileFormat::Pufv);
    let mut out = Outputs::new(&out_dir);

    match &cli.command {
        Command::Synth {
            kind,
            n,
            d,
            separation,
            outliers,
        } => {
            let source = match kind.as_str() {
                "blobs" => DataSource::Blobs(BlobSpec {
                    n_per_class: n.unwrap_or(500),
                    d: d.unwrap_or(20),
                    separation: separation.unwrap_or(8.0),
                    seed: cfg.master_seed,
                }),
                "anomalies" => DataSource::Anomalies(PlantedAnomalySpec::new(
                    n.unwrap_or(1000),
                    outliers.unwrap_or(50),
                    d.unwrap_or(8),
                    cfg.master_seed,
                )),
                other => return Err(CliError::config(format!("unknown kind `{other}`"))),
            };
            let data = source.load()?;
            out.add(format!("data.{}", format.extension()), encode(&data.into(), format));
        }
        Command::Split { input, fraction } => {
            let full = load(input)?.into_labeled()?;
            let split = make_pu_split(
                &full,
                cfg.positive_class,
                fraction.unwrap_or(cfg.positive_fraction),
                seed::derive(cfg.master_seed, "split", 0),
            )?;
            let pu = &split.dataset;
            out.add(format!("pu.{}", format.extension()), encode(&FeatureFile::from_pu(pu)?, format));
            let truth = pu.hidden_truth.as_deref().unwrap_or_default();
            out.add("truth.csv", truth_csv(truth));
        }
        Command::FitForest { input } => {
            let pu = load_pu(input)?.dataset;
            let seeds = StageSeeds::from_master(cfg.master_seed);
            let forest = fit_forest(&seeds.forest_config(&cfg.forest), &pu.positives)?;
            out.add("forest.json", forest.to_json()?);
        }
        Command::Score { forest, input } => {
            let forest = IsolationForest::load(forest)?;
            let pu = load_pu(input)?.dataset;
            let pool = rank_unlabeled(&forest, &pu.unlabeled)?;
            out.add("ranked.csv", pool.to_csv());
        }
        Command::Mine { ranked, k } => {
            if *k < 1 {
                return Err(CliError::config(format!("--k must be at least 1, got {k}")));
            }
            let pool = RankedPool::load(ranked)?;
            let k = usize::try_from(*k).map_err(|_| CliError::config("--k too large"))?;
            let mined = mine_counter_examples(&pool, k)?;
            out.add("counter_examples.csv", counter_examples_csv(&mined));
        }
        Command::Train { input, mined } => {
            let pu = load_pu(input)?.dataset;
            let mined = parse_counter_examples(mined)?;
            let seeds = StageSeeds::from_master(cfg.master_seed);
            let assembled =
                assemble_training_set(&pu.positives, &pu.unlabeled, &mined, seeds.assemble)?;
            let model =
                classifier::train(&assembled.dataset, &seeds.classifier_config(&cfg.classifier))?;
            out.add("model.json", model.to_json()?);
        }
        Command::Evaluate {
            model,
            input,
            truth,
        } => {
            let model = TrainedClassifier::load(model)?;
            let file = load(input)?;
            let probs = model.predict_batch(&file.features)?;
            out.add("predictions.csv", predictions_csv(&file, &probs));
            if let Some(report) = evaluation(&file, &probs, truth.as_deref(), cfg.positive_class)? {
                let json = serde_json::to_string_pretty(&report)
                    .map_err(|e| CliError::runtime(e.to_string()))?;
                out.add("metrics.json", json);
            }
        }
        Command::Experiment { synth, input } => {
            let source = match (input, synth) {
                (Some(path), _) => DataSource::File {
                    path: path.clone(),
                    format: cli.format,
                },
                (None, Some(kind)) => DataSource::synth(kind, cfg.master_seed)?,
                (None, None) => data_source.ok_or_else(|| {
                    CliError::config("no data: pass --input, --synth, or a config with a data entry")
                })?,
            };
            let data = source.load()?;
            let sweep = run_sweep(&data, &cfg, &cfg.fractions)?;
            let report = ExperimentReport {
                config: &cfg,
                data: &source,
                rows: data.n(),
                dim: data.features.d(),
                sweep: &sweep,
            };
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::runtime(e.to_string()))?;
            out.add("report.json", json);
            out.add("table.txt", sweep.render_table());
            out.add("folds.csv", sweep.folds_csv());
        }
    }
    out.write()
}

fn encode(file: &FeatureFile, format: FileFormat) -> Vec<u8> {
    match format {
        FileFormat::Pufv => weakpu::io::encode_pufv(file),
        FileFormat::Csv => weakpu::io::render_csv(file).into_bytes(),
    }
}

fn truth_csv(truth: &[u8]) -> String {
    let mut s = String::from("unlabeled_index,label\n");
    for (i, l) in truth.iter().enumerate() {
        writeln!(s, "{i},{l}").unwrap();
    }
    s
}

fn parse_truth(path: &Path) -> Result<Vec<u8>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("unlabeled_index,label") {
        return Err(CliError::data(format!("{}: expected header unlabeled_index,label", path.display())));
    }
    let mut labels = Vec::new();
    for (row, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || CliError::data(format!("{}: malformed row {row}", path.display()));
        let (idx, label) = line.trim().split_once(',').ok_or_else(bad)?;
        if idx.parse::<usize>().ok() != Some(labels.len()) {
            return Err(bad());
        }
        match label {
            "0" => labels.push(0),
            "1" => labels.push(1),
            _ => return Err(bad()),
        }
    }
    Ok(labels)
}

fn counter_examples_csv(set: &CounterExampleSet) -> String {
    let mut s = String::from("unlabeled_index\n");
    for i in &set.indices {
        writeln!(s, "{i}").unwrap();
    }
    s
}

fn parse_counter_examples(path: &Path) -> Result<CounterExampleSet, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("unlabeled_index") {
        return Err(CliError::data(format!("{}: expected header unlabeled_index", path.display())));
    }
    let indices = lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(row, l)| {
            l.trim()
                .parse::<usize>()
                .map_err(|_| CliError::data(format!("{}: malformed row {row}", path.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if indices.is_empty() {
        return Err(CliError::data(format!("{}: no counter-examples", path.display())));
    }
    Ok(CounterExampleSet { indices })
}

/// One row per input row: its file label (empty if none), the probability of
/// the positive-labeled class, and the thresholded prediction.
fn predictions_csv(file: &FeatureFile, probs: &[f64]) -> String {
    let predicted = classify(probs, 0.5);
    let mut s = String::from("row,label,probability,predicted\n");
    for (i, (p, c)) in probs.iter().zip(&predicted).enumerate() {
        let label = file
            .labels
            .as_ref()
            .map(|l| l[i].code().to_string())
            .unwrap_or_default();
        writeln!(s, "{i},{label},{p},{c}").unwrap();
    }
    s
}

/// Scores the unlabeled rows against a truth file, or every row of a fully
/// labeled file. Returns `None` when there is nothing to score against.
fn evaluation(
    file: &FeatureFile,
    probs: &[f64],
    truth: Option<&Path>,
    positive_class: u8,
) -> Result<Option<EvaluationReport>, CliError> {
    let (probs, actual): (Vec<f64>, Vec<u8>) = match (truth, &file.labels) {
        (Some(path), labels) => {
            let truth = parse_truth(path)?;
            let unlabeled: Vec<f64> = match labels {
                Some(l) => (0..probs.len())
                    .filter(|&i| l[i] == SampleLabel::Unlabeled)
                    .map(|i| probs[i])
                    .collect(),
                None => probs.to_vec(),
            };
            if unlabeled.len() != truth.len() {
                return Err(CliError::data(format!(
                    "truth file has {} rows but the input has {} unlabeled rows",
                    truth.len(),
                    unlabeled.len()
                )));
            }
            (unlabeled, truth)
        }
        (None, Some(labels)) if labels.iter().all(|&l| l != SampleLabel::Unlabeled) => {
            let classes = labels.iter().map(|&l| u8::from(l == SampleLabel::Positive)).collect();
            (probs.to_vec(), classes)
        }
        _ => return Ok(None),
    };
    let predicted = to_ground_truth(&probs, positive_class);
    let counts = confusion(&predicted, &actual)?;
    Ok(Some(EvaluationReport {
        rows: actual.len(),
        confusion: counts,
        metrics: metrics(&counts),
    }))
}

