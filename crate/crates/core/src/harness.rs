//! End-to-end experiments: split, scale, train, evaluate, rank, sweep and time.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{self, DataSplit, Dataset, DatasetError, Sample, ScaledSet, Scaler};
use crate::lm::{self, LmConfig, LmError};
use crate::metaheuristics::{
    self, Algorithm, Bounds, ConvergenceCurve, Knobs, MetaError, RunStatus, TrainConfig, TrainResult,
    DEFAULT_WEIGHT_BOUND,
};
use crate::metrics::{self, MetricReport, MetricsError, ModelReports, Phase, RankTable};
use crate::mlp::{self, MlpError, Provenance, TrainedModel, WeightVector, HIDDEN};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Population sizes of the published sensitivity analysis.
pub const DEFAULT_POPULATION_SIZES: [usize; 11] = [25, 50, 100, 150, 200, 250, 300, 350, 400, 450, 500];
pub const DEFAULT_ITERATIONS: usize = 1000;
pub const REPLAY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Data(#[from] DatasetError),
    #[error(transparent)]
    Meta(#[from] MetaError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("replay mismatch: {0}")]
    Replay(String),
}

impl HarnessError {
    /// True for problems with the input data rather than with a run.
    pub fn is_data_error(&self) -> bool {
        matches!(self, HarnessError::Data(_) | HarnessError::Io { .. } | HarnessError::Parse { .. })
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, HarnessError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| HarnessError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    write_text(path, &(serde_json::to_string_pretty(value).expect("serializable") + "\n"))
}

/// A training method: one of the six metaheuristics or the LM baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Meta(Algorithm),
    Lm,
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Meta(a) => a.model_label(),
            Method::Lm => "LM-MLP".to_string(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Meta(a) => a.fmt(f),
            Method::Lm => f.write_str("lm"),
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        if lower == "lm" || lower == "lm-mlp" {
            return Ok(Method::Lm);
        }
        lower.parse().map(Method::Meta).map_err(|e: String| e + " or lm")
    }
}

impl TryFrom<String> for Method {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

/// Split, train rows, test rows and a scaler fitted on the train rows only.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub split: DataSplit,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub scaler: Scaler,
    pub train_set: ScaledSet,
}

pub fn prepare(data: &Dataset, train_fraction: f64, split_seed: u64) -> Result<Prepared, HarnessError> {
    let split = dataset::split(data, train_fraction, split_seed)?;
    prepare_with(data, split)
}

pub fn prepare_with(data: &Dataset, split: DataSplit) -> Result<Prepared, HarnessError> {
    if !split.is_partition_of(data.len()) {
        return Err(HarnessError::Replay(format!(
            "split does not partition the {} dataset rows",
            data.len()
        )));
    }
    let train = data.select(&split.train_indices)?;
    let test = data.select(&split.test_indices)?;
    let scaler = Scaler::fit(&train)?;
    let train_set = scaler.transform(&train);
    Ok(Prepared {
        split,
        train,
        test,
        scaler,
        train_set,
    })
}

/// Everything that pins one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub method: Method,
    /// For LM, `iterations` is the epoch cap and `seed` drives the initial weights.
    pub config: TrainConfig,
    pub hidden: usize,
    pub split_seed: u64,
    pub train_fraction: f64,
}

impl ExperimentSpec {
    pub fn new(method: Method, population_size: usize, iterations: usize, seed: u64) -> Self {
        ExperimentSpec {
            method,
            config: TrainConfig::new(mlp::WEIGHT_COUNT, population_size, iterations, seed),
            hidden: HIDDEN,
            split_seed: dataset::DEFAULT_SPLIT_SEED,
            train_fraction: dataset::DEFAULT_TRAIN_FRACTION,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub model: TrainedModel,
    pub train: MetricReport,
    pub test: MetricReport,
    pub result: TrainResult,
    pub split: DataSplit,
}

/// Trains on a prepared split and scores the model in heating-load units.
pub fn train_prepared(spec: &ExperimentSpec, prep: &Prepared) -> Result<Experiment, HarnessError> {
    let result = match spec.method {
        Method::Meta(a) => metaheuristics::train_mlp(a, &spec.config, &prep.train_set, spec.hidden)?,
        Method::Lm => {
            let config = LmConfig {
                max_epochs: spec.config.iterations,
                ..LmConfig::default()
            };
            lm::lm_train(lm::random_init(spec.hidden, spec.config.seed), &config, &prep.train_set)?
        }
    };
    let provenance = Provenance {
        algorithm: spec.method.to_string(),
        config: serde_json::to_value(spec).expect("serializable"),
        seed: Some(spec.config.seed),
        training_mse: Some(result.best_objective),
    };
    let model = TrainedModel::from_weights(
        WeightVector(result.best_vector.clone()),
        spec.hidden,
        prep.scaler.clone(),
        provenance,
    )?;
    let (train, test) = evaluate_prepared(&model, prep)?;
    Ok(Experiment {
        model,
        train,
        test,
        result,
        split: prep.split.clone(),
    })
}

/// Load-split-scale-train-evaluate for one spec.
pub fn run_experiment(data: &Dataset, spec: &ExperimentSpec) -> Result<Experiment, HarnessError> {
    let prep = prepare(data, spec.train_fraction, spec.split_seed)?;
    train_prepared(spec, &prep)
}

fn phase_report(model: &TrainedModel, phase: Phase, rows: &[Sample]) -> Result<MetricReport, HarnessError> {
    let observed: Vec<f64> = rows.iter().map(|s| s.heating_load).collect();
    let predicted = model.predict_all(rows);
    Ok(MetricReport::compute(phase, &observed, &predicted)?)
}

fn evaluate_prepared(model: &TrainedModel, prep: &Prepared) -> Result<(MetricReport, MetricReport), HarnessError> {
    Ok((
        phase_report(model, Phase::Train, &prep.train)?,
        phase_report(model, Phase::Test, &prep.test)?,
    ))
}

/// Train and test metrics of `model` on `split`, in heating-load units.
pub fn evaluate(model: &TrainedModel, data: &Dataset, split: &DataSplit) -> Result<(MetricReport, MetricReport), HarnessError> {
    model.validate()?;
    if !split.is_partition_of(data.len()) {
        return Err(HarnessError::Replay("split does not match the dataset".into()));
    }
    let train = data.select(&split.train_indices)?;
    let test = data.select(&split.test_indices)?;
    Ok((
        phase_report(model, Phase::Train, &train)?,
        phase_report(model, Phase::Test, &test)?,
    ))
}

/// Scores the models and renders the score table as CSV.
pub fn rank_models(reports: &[ModelReports]) -> Result<(RankTable, String), HarnessError> {
    let table = metrics::score_models(reports)?;
    let csv = table.to_csv();
    Ok((table, csv))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub name: String,
    pub model: TrainedModel,
    pub train: MetricReport,
    pub test: MetricReport,
    pub result: TrainResult,
}

impl ModelEntry {
    pub fn reports(&self) -> ModelReports {
        ModelReports {
            model: self.name.clone(),
            train: self.train.clone(),
            test: self.test.clone(),
        }
    }
}

/// Self-contained experiment record; [`RunReport::verify`] recomputes every
/// metric from the stored models and split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub dataset_source: String,
    pub dataset_checksum: Option<String>,
    pub dataset_rows: usize,
    pub split: DataSplit,
    pub scaler: Scaler,
    pub models: Vec<ModelEntry>,
    #[serde(default)]
    pub rank: Option<RankTable>,
    #[serde(default)]
    pub timing: Vec<TimingRow>,
}

impl RunReport {
    /// Collects experiments that share one split. Ranks them when there are at
    /// least two.
    pub fn new(data: &Dataset, prep: &Prepared, entries: Vec<ModelEntry>) -> Result<RunReport, HarnessError> {
        let reports: Vec<ModelReports> = entries.iter().map(ModelEntry::reports).collect();
        let rank = if reports.len() >= 2 {
            Some(metrics::score_models(&reports)?)
        } else {
            None
        };
        Ok(RunReport {
            tool_version: TOOL_VERSION.to_string(),
            dataset_source: data.source.clone(),
            dataset_checksum: data.checksum().map(str::to_string),
            dataset_rows: data.len(),
            split: prep.split.clone(),
            scaler: prep.scaler.clone(),
            models: entries,
            rank,
            timing: Vec::new(),
        })
    }

    pub fn model_reports(&self) -> Vec<ModelReports> {
        self.models.iter().map(ModelEntry::reports).collect()
    }

    /// Recomputes scaler, metrics and ranking from the dataset and compares
    /// against the stored values.
    pub fn verify(&self, data: &Dataset, tol: f64) -> Result<(), HarnessError> {
        if let (Some(stored), Some(actual)) = (&self.dataset_checksum, data.checksum()) {
            if stored != actual {
                return Err(HarnessError::Replay(format!(
                    "dataset checksum {actual} differs from recorded {stored}"
                )));
            }
        }
        if data.len() != self.dataset_rows {
            return Err(HarnessError::Replay(format!(
                "dataset has {} rows, report recorded {}",
                data.len(),
                self.dataset_rows
            )));
        }
        let prep = prepare_with(data, self.split.clone())?;
        if prep.scaler != self.scaler {
            return Err(HarnessError::Replay("scaler state differs".into()));
        }
        for entry in &self.models {
            if entry.model.scaler != self.scaler {
                return Err(HarnessError::Replay(format!("{}: model scaler differs", entry.name)));
            }
            let (train, test) = evaluate_prepared(&entry.model, &prep)?;
            for (stored, fresh) in [(&entry.train, &train), (&entry.test, &test)] {
                if !stored.approx_eq(fresh, tol) {
                    return Err(HarnessError::Replay(format!(
                        "{} {} metrics: stored {stored:?}, recomputed {fresh:?}",
                        entry.name, stored.phase
                    )));
                }
            }
        }
        if let Some(rank) = &self.rank {
            if *rank != metrics::score_models(&self.model_reports())? {
                return Err(HarnessError::Replay("rank table differs".into()));
            }
        }
        Ok(())
    }
}

/// Population-size sensitivity plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepPlan {
    pub algorithms: Vec<Algorithm>,
    pub population_sizes: Vec<usize>,
    pub iterations: usize,
    pub seeds: Vec<u64>,
    pub split_seed: u64,
    pub train_fraction: f64,
    /// Symmetric weight bound: every weight searched in `[-bound, bound]`.
    pub bound: f64,
    pub hidden: usize,
    pub knobs: Knobs,
}

impl Default for SweepPlan {
    fn default() -> Self {
        SweepPlan {
            algorithms: Algorithm::ALL.to_vec(),
            population_sizes: DEFAULT_POPULATION_SIZES.to_vec(),
            iterations: DEFAULT_ITERATIONS,
            seeds: vec![1, 2, 3, 4, 5],
            split_seed: dataset::DEFAULT_SPLIT_SEED,
            train_fraction: dataset::DEFAULT_TRAIN_FRACTION,
            bound: DEFAULT_WEIGHT_BOUND,
            hidden: HIDDEN,
            knobs: Knobs::default(),
        }
    }
}

impl SweepPlan {
    pub fn from_toml(text: &str) -> Result<SweepPlan, HarnessError> {
        let plan: SweepPlan = toml::from_str(text).map_err(|e| HarnessError::Plan(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plan serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: &str| Err(HarnessError::Plan(m.to_string()));
        if self.algorithms.is_empty() {
            return fail("no algorithms");
        }
        if self.population_sizes.is_empty() {
            return fail("no population sizes");
        }
        if self.population_sizes.contains(&0) {
            return fail("population sizes must be positive");
        }
        if self.seeds.is_empty() {
            return fail("no seeds");
        }
        if self.iterations == 0 {
            return fail("iterations must be positive");
        }
        if self.hidden == 0 {
            return fail("hidden must be positive");
        }
        if !(self.bound.is_finite() && self.bound > 0.0) {
            return fail("bound must be finite and positive");
        }
        Ok(())
    }

    /// Cells in plan order: algorithm, then size, then seed.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut out = Vec::new();
        for &algorithm in &self.algorithms {
            for &population_size in &self.population_sizes {
                for &seed in &self.seeds {
                    out.push(CellKey {
                        algorithm,
                        population_size,
                        seed,
                    });
                }
            }
        }
        out
    }

    pub fn config_for(&self, cell: &CellKey) -> TrainConfig {
        TrainConfig {
            population_size: cell.population_size,
            iterations: self.iterations,
            bounds: Bounds::uniform(mlp::weight_count(self.hidden), -self.bound, self.bound),
            seed: cell.seed,
            knobs: self.knobs.clone(),
        }
    }

    pub fn spec_for(&self, cell: &CellKey) -> ExperimentSpec {
        ExperimentSpec {
            method: Method::Meta(cell.algorithm),
            config: self.config_for(cell),
            hidden: self.hidden,
            split_seed: self.split_seed,
            train_fraction: self.train_fraction,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub algorithm: Algorithm,
    pub population_size: usize,
    pub seed: u64,
}

impl CellKey {
    /// Stable file key: hash of the cell plus everything else that changes its
    /// result, so stale files from a different plan are never reused.
    pub fn id(&self, plan: &SweepPlan, dataset_checksum: Option<&str>) -> String {
        let text = format!(
            "{}|{}|{}|{}|{}|{}|{}|{}|{}|{}",
            self.algorithm,
            self.population_size,
            self.seed,
            plan.iterations,
            plan.split_seed,
            plan.train_fraction,
            plan.bound,
            plan.hidden,
            plan.knobs.to_toml(),
            dataset_checksum.unwrap_or("-"),
        );
        let digest = hex::encode(Sha256::digest(text.as_bytes()));
        format!("{}-{}-s{}-{}", self.algorithm, self.population_size, self.seed, &digest[..16])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub final_mse: f64,
    pub evaluations: u64,
    pub wall_time: f64,
    pub run_status: RunStatus,
    pub train: MetricReport,
    pub test: MetricReport,
    pub curve: ConvergenceCurve,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum CellOutcome {
    Done(CellSummary),
    Failed { error: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub key: CellKey,
    pub id: String,
    #[serde(flatten)]
    pub outcome: CellOutcome,
}

impl CellRecord {
    pub fn summary(&self) -> Option<&CellSummary> {
        match &self.outcome {
            CellOutcome::Done(s) => Some(s),
            CellOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestSize {
    pub algorithm: Algorithm,
    pub population_size: usize,
    pub median_final_mse: f64,
    /// The size the published sensitivity analysis picked, for comparison.
    pub published: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub tool_version: String,
    pub dataset_checksum: Option<String>,
    pub plan: SweepPlan,
    pub cells: Vec<CellRecord>,
    pub best_sizes: Vec<BestSize>,
}

/// Median of a non-empty slice; the mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Per algorithm, the size with the lowest median final training MSE; ties
/// go to the smaller size. Algorithms with no successful cell are skipped.
pub fn best_sizes(plan: &SweepPlan, cells: &[CellRecord]) -> Vec<BestSize> {
    let mut out = Vec::new();
    for &algorithm in &plan.algorithms {
        let mut by_size: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for c in cells.iter().filter(|c| c.key.algorithm == algorithm) {
            if let Some(s) = c.summary() {
                by_size.entry(c.key.population_size).or_default().push(s.final_mse);
            }
        }
        let best = by_size
            .iter()
            .map(|(&size, mses)| (size, median(mses)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        if let Some((population_size, median_final_mse)) = best {
            out.push(BestSize {
                algorithm,
                population_size,
                median_final_mse,
                published: algorithm.published_best_population(),
            });
        }
    }
    out
}

fn run_cell(plan: &SweepPlan, prep: &Prepared, key: CellKey, id: String) -> CellRecord {
    let outcome = match train_prepared(&plan.spec_for(&key), prep) {
        Ok(exp) => CellOutcome::Done(CellSummary {
            final_mse: exp.result.best_objective,
            evaluations: exp.result.evaluations,
            wall_time: exp.result.wall_time,
            run_status: exp.result.status,
            train: exp.train,
            test: exp.test,
            curve: exp.result.curve,
        }),
        Err(e) => CellOutcome::Failed { error: e.to_string() },
    };
    CellRecord { key, id, outcome }
}

pub fn cell_path(dir: &Path, id: &str) -> PathBuf {
    dir.join("cells").join(format!("{id}.json"))
}

/// Runs every cell of `plan`, up to `workers` at a time. With `out_dir`, each
/// finished cell is written to `out_dir/cells/` and cells already there are
/// reused, so an interrupted sweep resumes where it stopped. The final report
/// goes to `out_dir/sweep.json`.
pub fn run_sweep(
    plan: &SweepPlan,
    data: &Dataset,
    out_dir: Option<&Path>,
    workers: usize,
) -> Result<SweepReport, HarnessError> {
    plan.validate()?;
    let prep = prepare(data, plan.train_fraction, plan.split_seed)?;
    let checksum = data.checksum();
    let keys: Vec<(CellKey, String)> = plan.cells().into_iter().map(|k| (k, k.id(plan, checksum))).collect();

    let mut done: Vec<Option<CellRecord>> = keys
        .iter()
        .map(|(key, id)| {
            let path = cell_path(out_dir?, id);
            let rec: CellRecord = read_json(&path).ok()?;
            (rec.key == *key && rec.id == *id).then_some(rec)
        })
        .collect();
    let pending: Vec<usize> = (0..keys.len()).filter(|&i| done[i].is_none()).collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Plan(e.to_string()))?;
    let fresh: Vec<Result<CellRecord, HarnessError>> = pool.install(|| {
        pending
            .par_iter()
            .map(|&i| {
                let (key, id) = &keys[i];
                let rec = run_cell(plan, &prep, *key, id.clone());
                if let Some(dir) = out_dir {
                    write_json(&cell_path(dir, id), &rec)?;
                }
                Ok(rec)
            })
            .collect()
    });
    for (i, rec) in pending.into_iter().zip(fresh) {
        done[i] = Some(rec?);
    }

    let cells: Vec<CellRecord> = done.into_iter().map(|c| c.expect("every cell filled")).collect();
    let report = SweepReport {
        tool_version: TOOL_VERSION.to_string(),
        dataset_checksum: checksum.map(str::to_string),
        best_sizes: best_sizes(plan, &cells),
        plan: plan.clone(),
        cells,
    };
    if let Some(dir) = out_dir {
        write_json(&dir.join("sweep.json"), &report)?;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub algorithm: Algorithm,
    pub population_size: usize,
    /// Seconds; `None` when every seed failed.
    pub median_wall_time: Option<f64>,
    pub median_evaluations: Option<f64>,
    pub runs: usize,
}

/// One row per (algorithm, population size) in plan order, medians over seeds.
pub fn timing_table(report: &SweepReport) -> Vec<TimingRow> {
    let mut rows = Vec::new();
    for &algorithm in &report.plan.algorithms {
        for &population_size in &report.plan.population_sizes {
            let done: Vec<&CellSummary> = report
                .cells
                .iter()
                .filter(|c| c.key.algorithm == algorithm && c.key.population_size == population_size)
                .filter_map(CellRecord::summary)
                .collect();
            let med = |f: fn(&CellSummary) -> f64| {
                (!done.is_empty()).then(|| median(&done.iter().map(|s| f(s)).collect::<Vec<_>>()))
            };
            rows.push(TimingRow {
                algorithm,
                population_size,
                median_wall_time: med(|s| s.wall_time),
                median_evaluations: med(|s| s.evaluations as f64),
                runs: done.len(),
            });
        }
    }
    rows
}

pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut out = String::from("algorithm,population_size,median_wall_time_s,median_evaluations,runs\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.algorithm.model_label(),
            r.population_size,
            opt(r.median_wall_time),
            opt(r.median_evaluations),
            r.runs
        ));
    }
    out
}

/// Runs the plan without persisting cells and tabulates wall time.
pub fn time_algorithms(plan: &SweepPlan, data: &Dataset, workers: usize) -> Result<Vec<TimingRow>, HarnessError> {
    Ok(timing_table(&run_sweep(plan, data, None, workers)?))
}

/// The published BBO network with a scaler fitted on the whole dataset.
pub fn reference_model(data: &Dataset) -> Result<TrainedModel, HarnessError> {
    Ok(mlp::reference_bbo_predictor(Scaler::fit(&data.samples)?))
}

/// How well the published network fits the data under the two readings of its
/// output: a scaled value mapped back to heating load, or heating load directly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFit {
    pub r2_scaled_output: f64,
    pub r2_raw_output: f64,
    pub rows: usize,
}

pub fn reference_fit(data: &Dataset) -> Result<ReferenceFit, HarnessError> {
    let model = reference_model(data)?;
    let observed: Vec<f64> = data.samples.iter().map(|s| s.heating_load).collect();
    let scaled = model.predict_all(&data.samples);
    let raw: Vec<f64> = data
        .samples
        .iter()
        .map(|s| model.forward_scaled(&model.scaler.scale_features(&s.features())))
        .collect();
    Ok(ReferenceFit {
        r2_scaled_output: metrics::r2(&observed, &scaled)?,
        r2_raw_output: metrics::r2(&observed, &raw)?,
        rows: data.len(),
    })
}
