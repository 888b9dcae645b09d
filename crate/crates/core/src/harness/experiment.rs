use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::statistics::Statistics;

use super::cv::{cross_validate_gamma, CvReport, CvSpec};
use super::metrics::{auc, column_means, mean_impute, rmse, rmse_imputation};
use super::HarnessError;
use crate::amputer::{ampute_with, AmputationPlan};
use crate::data::{normalize, stratified_split_indices, LabelKind, MaskedDataset};
use crate::engine::{train, FragmganConfig, TrainedFragmgan};
use crate::seed::derive;

const REP_STREAM: u64 = 21;
const SWEEP_STREAM: u64 = 22;
const AMPUTE_STREAM: u64 = 1;
const SPLIT_STREAM: u64 = 2;
const CV_STREAM: u64 = 3;
const TRAIN_STREAM: u64 = 4;
const EVAL_STREAM: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Masked-cell RMSE on the normalized scale. Also reports the same error
    /// on the original scale and for column-mean imputation.
    RmseImpute,
    RmseLabel,
    Auc,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GammaPolicy {
    Fixed(f64),
    CrossValidate(CvSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    /// Applied to the (complete) input each repetition; `None` uses the data as given.
    pub amputation: Option<AmputationPlan>,
    pub model: FragmganConfig,
    pub repetitions: usize,
    pub test_fraction: f64,
    /// Empty selects every metric the data supports.
    pub metrics: Vec<Metric>,
    pub gamma: GammaPolicy,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            amputation: None,
            model: FragmganConfig::default(),
            repetitions: 10,
            test_fraction: 0.2,
            metrics: Vec::new(),
            gamma: GammaPolicy::Fixed(1.0),
            seed: 0,
            jobs: 0,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.repetitions == 0 {
            return Err(HarnessError::Config(
                "repetitions must be at least 1".into(),
            ));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(HarnessError::Config(format!(
                "test fraction {} outside (0, 1)",
                self.test_fraction
            )));
        }
        match &self.gamma {
            GammaPolicy::Fixed(g) if !(0.0..=1.0).contains(g) => {
                Err(HarnessError::Config(format!("gamma {g} outside [0, 1]")))
            }
            GammaPolicy::CrossValidate(cv) => cv.validate(),
            _ => Ok(()),
        }
    }

    fn resolve_metrics(&self, data: &MaskedDataset) -> Result<Vec<Metric>, HarnessError> {
        let has_truth = self.amputation.is_some();
        let label = data.labels().map(|_| match data.label_kind() {
            LabelKind::Binary => Metric::Auc,
            LabelKind::Continuous => Metric::RmseLabel,
        });
        if self.metrics.is_empty() {
            let mut all = Vec::new();
            if has_truth {
                all.push(Metric::RmseImpute);
            }
            all.extend(label);
            if all.is_empty() {
                return Err(HarnessError::Config(
                    "nothing to measure: no amputation and no labels".into(),
                ));
            }
            return Ok(all);
        }
        for m in &self.metrics {
            let ok = match m {
                Metric::RmseImpute => has_truth,
                other => label == Some(*other),
            };
            if !ok {
                return Err(HarnessError::Config(format!(
                    "metric {m:?} is not available for this data"
                )));
            }
        }
        Ok(self.metrics.clone())
    }
}

/// Seed of repetition `index` under a master seed.
pub fn repetition_seed(master: u64, index: usize) -> u64 {
    derive(master, REP_STREAM, index as u64)
}

/// The data one repetition trains and tests on.
#[derive(Debug, Clone)]
pub struct PreparedRepetition {
    pub seed: u64,
    /// Incomplete data (amputed, or the input as given).
    pub data: MaskedDataset,
    /// The complete input when the data was amputed.
    pub truth: Option<MaskedDataset>,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

pub fn prepare_repetition(
    data: &MaskedDataset,
    spec: &ExperimentSpec,
    index: usize,
) -> Result<PreparedRepetition, HarnessError> {
    let seed = repetition_seed(spec.seed, index);
    let (incomplete, truth) = match &spec.amputation {
        Some(plan) => {
            let plan = AmputationPlan {
                seed: derive(seed, AMPUTE_STREAM, 0),
                ..plan.clone()
            };
            (ampute_with(data, &plan)?, Some(data.clone()))
        }
        None => (data.clone(), None),
    };
    let (train_idx, test_idx) = stratified_split_indices(
        &incomplete,
        spec.test_fraction,
        derive(seed, SPLIT_STREAM, 0),
    )?;
    Ok(PreparedRepetition {
        seed,
        data: incomplete,
        truth,
        train_idx,
        test_idx,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub index: usize,
    pub seed: u64,
    pub gamma: f64,
    pub iterations: usize,
    /// Metric name and value, in reporting order.
    pub values: Vec<(String, f64)>,
    pub cv: Option<CvReport>,
}

pub struct RepetitionOutcome {
    pub result: RepetitionResult,
    pub model: TrainedFragmgan,
}

/// Ampute (optionally), split, choose gamma on the training split, train and
/// score on the test split.
pub fn run_repetition(
    data: &MaskedDataset,
    spec: &ExperimentSpec,
    index: usize,
) -> Result<RepetitionOutcome, HarnessError> {
    spec.validate()?;
    let metrics = spec.resolve_metrics(data)?;
    let prep = prepare_repetition(data, spec, index)?;
    let train_ds = prep.data.subset(&prep.train_idx);
    let test_ds = prep.data.subset(&prep.test_idx);
    let train_truth = prep.truth.as_ref().map(|t| t.subset(&prep.train_idx));

    let (gamma, cv) = match &spec.gamma {
        GammaPolicy::Fixed(g) => (*g, None),
        GammaPolicy::CrossValidate(cv) => {
            let report = cross_validate_gamma(
                &train_ds,
                train_truth.as_ref(),
                &spec.model,
                cv,
                derive(prep.seed, CV_STREAM, 0),
            )?;
            (report.gamma, Some(report))
        }
    };
    let cfg = FragmganConfig {
        gamma,
        seed: derive(prep.seed, TRAIN_STREAM, 0),
        ..spec.model.clone()
    };
    let model = train(&train_ds, &cfg)?;
    let draw = derive(prep.seed, EVAL_STREAM, 0);

    let mut values = Vec::new();
    for metric in metrics {
        match metric {
            Metric::RmseImpute => {
                let truth = prep
                    .truth
                    .as_ref()
                    .expect("metric resolved against amputation")
                    .subset(&prep.test_idx);
                let mask = test_ds.mask_matrix();
                let stats = &model.norm_stats;
                let truth_scaled = normalize(&truth, Some(stats))?.0;
                let imputed = model.impute_normalized(&test_ds, draw)?;
                values.push((
                    "rmse_impute".to_string(),
                    rmse_imputation(truth_scaled.features(), &imputed, &mask)?,
                ));
                let raw = model.impute(&test_ds, draw)?;
                values.push((
                    "rmse_impute_raw".to_string(),
                    rmse_imputation(truth.features(), &raw, &mask)?,
                ));
                let means = column_means(&normalize(&train_ds, Some(stats))?.0)?;
                let baseline = mean_impute(&normalize(&test_ds, Some(stats))?.0, &means);
                values.push((
                    "rmse_impute_mean_baseline".to_string(),
                    rmse_imputation(truth_scaled.features(), &baseline, &mask)?,
                ));
            }
            Metric::RmseLabel | Metric::Auc => {
                let pred = model.predict(&test_ds, draw)?;
                let y = test_ds.labels().expect("metric resolved against labels");
                let value = if metric == Metric::Auc {
                    auc(&pred, y)?
                } else {
                    rmse(y, &pred)?
                };
                let name = if metric == Metric::Auc {
                    "auc"
                } else {
                    "rmse_label"
                };
                values.push((name.to_string(), value));
            }
        }
    }
    Ok(RepetitionOutcome {
        result: RepetitionResult {
            index,
            seed: prep.seed,
            gamma,
            iterations: model.iterations_run(),
            values,
            cv,
        },
        model,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation (n − 1); 0 when only one value exists.
    pub std: f64,
    pub raw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub metrics: Vec<MetricSummary>,
    /// Repetitions that finished.
    pub repetitions: usize,
    /// False when a single repetition leaves the deviation undefined.
    pub std_defined: bool,
    /// False for the partial table of an aborted experiment.
    pub complete: bool,
    pub runs: Vec<RepetitionResult>,
}

impl ResultTable {
    pub fn aggregate(runs: Vec<RepetitionResult>, complete: bool) -> Self {
        let names: Vec<String> = runs
            .first()
            .map(|r| r.values.iter().map(|(n, _)| n.clone()).collect())
            .unwrap_or_default();
        let metrics = names
            .into_iter()
            .map(|name| {
                let raw: Vec<f64> = runs
                    .iter()
                    .map(|r| {
                        r.values
                            .iter()
                            .find(|(n, _)| *n == name)
                            .map_or(f64::NAN, |(_, v)| *v)
                    })
                    .collect();
                let mean = raw.iter().sum::<f64>() / raw.len() as f64;
                let std = if raw.len() > 1 {
                    raw.iter().std_dev()
                } else {
                    0.0
                };
                MetricSummary {
                    metric: name,
                    mean,
                    std,
                    raw,
                }
            })
            .collect();
        Self {
            metrics,
            repetitions: runs.len(),
            std_defined: runs.len() > 1,
            complete,
            runs,
        }
    }

    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric == name)
    }

    /// Gamma used in each repetition.
    pub fn gammas(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.gamma).collect()
    }
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs every repetition, in parallel up to `spec.jobs`. With `out` set, writes
/// `results.csv`, `summary.json` and one loss trace per repetition under
/// `traces/`. A failing repetition aborts the experiment; the finished ones
/// are still written and returned inside the error.
pub fn run_experiment(
    data: &MaskedDataset,
    spec: &ExperimentSpec,
    out: Option<&Path>,
) -> Result<ResultTable, HarnessError> {
    spec.validate()?;
    spec.resolve_metrics(data)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir.join("traces"))?;
    }
    let outcomes: Vec<Result<RepetitionResult, HarnessError>> = with_pool(spec.jobs, || {
        (0..spec.repetitions)
            .into_par_iter()
            .map(|index| {
                let outcome = run_repetition(data, spec, index)?;
                if let Some(dir) = out {
                    let file =
                        fs::File::create(dir.join("traces").join(format!("rep_{index}.csv")))?;
                    outcome.model.write_trace_csv(file)?;
                }
                Ok(outcome.result)
            })
            .collect()
    })?;

    let mut runs = Vec::new();
    let mut failure = None;
    for (index, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) => runs.push(r),
            Err(e) => {
                failure.get_or_insert((index, e));
            }
        }
    }
    let table = ResultTable::aggregate(runs, failure.is_none());
    if let Some(dir) = out {
        write_results(&table, dir)?;
    }
    match failure {
        None => Ok(table),
        Some((repetition, source)) => Err(HarnessError::Aborted {
            repetition,
            source: Box::new(source),
            partial: Box::new(table),
        }),
    }
}

/// `results.csv` (metric, mean, std, raw values) and `summary.json`.
pub fn write_results(table: &ResultTable, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    let csv_err = |e: csv::Error| HarnessError::Io(e.to_string());
    let mut w = csv::WriterBuilder::new()
        .flexible(true)
        .from_path(dir.join("results.csv"))
        .map_err(csv_err)?;
    let mut header = vec!["metric".to_string(), "mean".into(), "std".into()];
    header.extend((1..=table.repetitions).map(|i| format!("raw_{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for m in &table.metrics {
        let mut record = vec![m.metric.clone(), m.mean.to_string(), m.std.to_string()];
        record.extend(m.raw.iter().map(f64::to_string));
        w.write_record(&record).map_err(csv_err)?;
    }
    let mut gammas = vec!["gamma".to_string(), String::new(), String::new()];
    gammas.extend(table.gammas().iter().map(f64::to_string));
    w.write_record(&gammas).map_err(csv_err)?;
    w.flush()?;
    let json = serde_json::to_string_pretty(table).map_err(|e| HarnessError::Io(e.to_string()))?;
    fs::write(dir.join("summary.json"), json)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rate: f64,
    pub table: ResultTable,
}

/// One experiment per miss rate, each under its own derived master seed.
/// With `out` set, each rate writes into `rate_<r>/` and the rate-by-metric
/// summary goes to `sweep.csv`.
pub fn run_sweep(
    data: &MaskedDataset,
    spec: &ExperimentSpec,
    rates: &[f64],
    out: Option<&Path>,
) -> Result<Vec<SweepRow>, HarnessError> {
    if rates.is_empty() {
        return Err(HarnessError::Config("sweep needs at least one rate".into()));
    }
    let Some(plan) = &spec.amputation else {
        return Err(HarnessError::Config(
            "sweep needs an amputation plan".into(),
        ));
    };
    let mut rows = Vec::with_capacity(rates.len());
    for (i, &rate) in rates.iter().enumerate() {
        let spec = ExperimentSpec {
            amputation: Some(AmputationPlan {
                target_miss_rate: rate,
                ..plan.clone()
            }),
            seed: derive(spec.seed, SWEEP_STREAM, i as u64),
            ..spec.clone()
        };
        let dir = out.map(|d| d.join(format!("rate_{rate}")));
        let table = run_experiment(data, &spec, dir.as_deref())?;
        rows.push(SweepRow { rate, table });
    }
    if let Some(dir) = out {
        write_sweep_csv(&rows, &dir.join("sweep.csv"))?;
    }
    Ok(rows)
}

/// Columns `rate, <metric>_mean, <metric>_std, …`, one row per rate.
pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<(), HarnessError> {
    let csv_err = |e: csv::Error| HarnessError::Io(e.to_string());
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let names: Vec<String> = rows
        .first()
        .map(|r| r.table.metrics.iter().map(|m| m.metric.clone()).collect())
        .unwrap_or_default();
    let mut header = vec!["rate".to_string()];
    for n in &names {
        header.push(format!("{n}_mean"));
        header.push(format!("{n}_std"));
    }
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        let mut record = vec![row.rate.to_string()];
        for n in &names {
            let m = row.table.metric(n);
            record.push(m.map_or(String::new(), |m| m.mean.to_string()));
            record.push(m.map_or(String::new(), |m| m.std.to_string()));
        }
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
