//! Missing-weight prediction evaluation.
//!
//! A data case repeatedly splits the network (ratio-based train/test split,
//! with a validation slice carved from the training part), trains from the
//! same initial parameters for every optimizer in a repeat, and reports the
//! test RMSE as mean and sample standard deviation across repeats.

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{init_params, Activations, Exec, Model, ModelConfig, ParamVector};
use crate::network::{split_edges, Edge, SymmetricSparseNetwork, WeightMap};
use crate::seed::{self, derive_seed, Purpose};
use crate::trainer::{train_first_order, train_second_order, StepControl, StopReason};

/// RMSE over `edges` in the original weight scale.
///
/// Edge weights are on the same internal scale as the model's training
/// data; both sides are mapped back through `weight_map` before comparing.
pub(crate) fn params_rmse(x: &ParamVector, weight_map: &WeightMap, edges: &[Edge]) -> Result<f64> {
    if edges.is_empty() {
        return Err(Error::invalid("RMSE over an empty edge set"));
    }
    let n = x.node_count();
    for e in edges {
        for node in [e.u, e.i] {
            if node >= n {
                return Err(Error::NodeOutOfRange {
                    node,
                    node_count: n,
                });
            }
        }
    }
    let act = Activations::new(x, Exec::Sequential);
    let sum: f64 = edges
        .iter()
        .map(|e| {
            let r = weight_map.inverse(e.weight) - weight_map.inverse(act.predict(e.u, e.i));
            r * r
        })
        .sum();
    Ok((sum / edges.len() as f64).sqrt())
}

/// Root mean squared error of the model's predictions on `test`.
///
/// `test` weights must be on the scale of the network the model was trained
/// on; the error is reported in original units.
pub fn rmse(model: &Model, test: &[Edge]) -> Result<f64> {
    params_rmse(&model.params, &model.weight_map, test)
}

/// One data case of the evaluation protocol.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataCaseSpec {
    pub name: String,
    pub train_fraction: f64,
    pub repeats: usize,
    pub validation_fraction_of_train: f64,
}

impl Default for DataCaseSpec {
    fn default() -> Self {
        Self {
            name: "case".into(),
            train_fraction: 0.2,
            repeats: 10,
            validation_fraction_of_train: 0.1,
        }
    }
}

/// Optimizers and execution settings for [`run_data_case`].
#[derive(Debug, Clone, Default)]
pub struct CaseOptions {
    pub control: StepControl,
    /// When set, the first-order baseline also runs with this learning rate.
    pub first_order_rate: Option<f64>,
    pub parallel_repeats: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepeatResult {
    pub repeat: usize,
    pub rmse: f64,
    pub time_ms: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub rmse_mean: f64,
    pub rmse_std: f64,
    pub time_ms_mean: f64,
    pub per_repeat: Vec<RepeatResult>,
}

/// Mean and sample (n − 1) standard deviation; the deviation of a single value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

impl CaseResult {
    pub fn from_repeats(per_repeat: Vec<RepeatResult>) -> Self {
        let rmses: Vec<f64> = per_repeat.iter().map(|r| r.rmse).collect();
        let times: Vec<f64> = per_repeat.iter().map(|r| r.time_ms).collect();
        let (rmse_mean, rmse_std) = mean_std(&rmses);
        let (time_ms_mean, _) = mean_std(&times);
        Self {
            rmse_mean,
            rmse_std,
            time_ms_mean,
            per_repeat,
        }
    }
}

/// Results of a data case for each optimizer that ran.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataCaseReport {
    pub spec: DataCaseSpec,
    pub base_seed: u64,
    pub second_order: CaseResult,
    pub first_order: Option<CaseResult>,
}

/// CSV column order of [`DataCaseReport::to_csv`].
pub const CASE_CSV_COLUMNS: [&str; 7] = [
    "optimizer",
    "row",
    "rmse",
    "rmse_std",
    "iterations",
    "stop_reason",
    "time_ms",
];

impl DataCaseReport {
    fn results(&self) -> Vec<(&'static str, &CaseResult)> {
        let mut out = vec![("second-order", &self.second_order)];
        if let Some(f) = &self.first_order {
            out.push(("first-order", f));
        }
        out
    }

    /// One row per repeat plus an aggregate `mean` row per optimizer. The
    /// `time_ms` column is present only when `include_timing` is set.
    pub fn to_csv(&self, include_timing: bool) -> String {
        let cols = if include_timing { 7 } else { 6 };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&CASE_CSV_COLUMNS[..cols])
            .expect("in-memory csv");
        for (name, result) in self.results() {
            for r in &result.per_repeat {
                let row = [
                    name.to_string(),
                    r.repeat.to_string(),
                    r.rmse.to_string(),
                    String::new(),
                    r.iterations.to_string(),
                    r.stop_reason.to_string(),
                    r.time_ms.to_string(),
                ];
                w.write_record(&row[..cols]).expect("in-memory csv");
            }
            let mean_iters = result
                .per_repeat
                .iter()
                .map(|r| r.iterations as f64)
                .sum::<f64>()
                / result.per_repeat.len() as f64;
            let row = [
                name.to_string(),
                "mean".to_string(),
                result.rmse_mean.to_string(),
                result.rmse_std.to_string(),
                mean_iters.to_string(),
                String::new(),
                result.time_ms_mean.to_string(),
            ];
            w.write_record(&row[..cols]).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
    }

    /// Structured JSON summary.
    pub fn summary_json(&self, include_timing: bool) -> String {
        let mut value = serde_json::json!({
            "case": self.spec.name,
            "train_fraction": self.spec.train_fraction,
            "validation_fraction_of_train": self.spec.validation_fraction_of_train,
            "repeats": self.spec.repeats,
            "base_seed": self.base_seed,
        });
        for (name, result) in self.results() {
            let mut entry = serde_json::json!({
                "rmse_mean": result.rmse_mean,
                "rmse_std": result.rmse_std,
                "rmse_per_repeat": result.per_repeat.iter().map(|r| r.rmse).collect::<Vec<_>>(),
                "stop_reasons": result.per_repeat.iter().map(|r| r.stop_reason.as_str()).collect::<Vec<_>>(),
            });
            if include_timing {
                entry["time_ms_mean"] = serde_json::json!(result.time_ms_mean);
            }
            value[name] = entry;
        }
        serde_json::to_string_pretty(&value).expect("summary serialization cannot fail")
    }
}

struct RepeatOutcome {
    second: RepeatResult,
    first: Option<RepeatResult>,
}

fn run_repeat(
    net: &SymmetricSparseNetwork,
    spec: &DataCaseSpec,
    config: &ModelConfig,
    options: &CaseOptions,
    base_seed: u64,
    repeat: usize,
) -> Result<RepeatOutcome> {
    let repeat_seed = base_seed.wrapping_add(repeat as u64);
    let split = split_edges(
        net,
        spec.train_fraction,
        spec.validation_fraction_of_train,
        repeat_seed,
    )?;
    let config = ModelConfig {
        seed: derive_seed(repeat_seed, Purpose::Init),
        ..config.clone()
    };

    let started = Instant::now();
    let (model, report) = train_second_order(net, &split, &config, &options.control)?;
    let second = RepeatResult {
        repeat,
        rmse: rmse(&model, &split.test)?,
        time_ms: started.elapsed().as_secs_f64() * 1e3,
        iterations: report.iterations_run,
        stop_reason: report.stop_reason,
    };

    let first = match options.first_order_rate {
        Some(rate) => {
            let started = Instant::now();
            let (model, report) = train_first_order(net, &split, &config, rate)?;
            Some(RepeatResult {
                repeat,
                rmse: rmse(&model, &split.test)?,
                time_ms: started.elapsed().as_secs_f64() * 1e3,
                iterations: report.iterations_run,
                stop_reason: report.stop_reason,
            })
        }
        None => None,
    };
    Ok(RepeatOutcome { second, first })
}

/// Runs `spec.repeats` seeded repeats of split, train and test.
///
/// Repeat `r` splits with seed `base_seed + r` and initializes every
/// optimizer from the same parameters derived from that seed.
pub fn run_data_case(
    net: &SymmetricSparseNetwork,
    spec: &DataCaseSpec,
    config: &ModelConfig,
    options: &CaseOptions,
    base_seed: u64,
) -> Result<DataCaseReport> {
    if spec.repeats == 0 {
        return Err(Error::invalid("repeats must be >= 1"));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::invalid("train fraction must lie in (0, 1)"));
    }
    let outcomes: Vec<RepeatOutcome> = if options.parallel_repeats {
        (0..spec.repeats)
            .into_par_iter()
            .map(|r| run_repeat(net, spec, config, options, base_seed, r))
            .collect::<Result<_>>()?
    } else {
        (0..spec.repeats)
            .map(|r| run_repeat(net, spec, config, options, base_seed, r))
            .collect::<Result<_>>()?
    };

    let mut second = Vec::with_capacity(outcomes.len());
    let mut first = Vec::new();
    for o in outcomes {
        second.push(o.second);
        first.extend(o.first);
    }
    Ok(DataCaseReport {
        spec: spec.clone(),
        base_seed,
        second_order: CaseResult::from_repeats(second),
        first_order: options
            .first_order_rate
            .map(|_| CaseResult::from_repeats(first)),
    })
}

/// Synthetic network generated from planted parameters.
#[derive(Debug, Clone)]
pub struct SyntheticNetwork {
    pub network: SymmetricSparseNetwork,
    /// Planted `x*` with entries uniform on (−1, 1).
    pub planted: ParamVector,
}

/// Samples each unordered pair with probability `known_density` and weights
/// it with the planted model's prediction plus Gaussian noise.
pub fn generate_synthetic(
    node_count: usize,
    d_true: usize,
    known_density: f64,
    noise_std: f64,
    seed: u64,
) -> Result<SyntheticNetwork> {
    if d_true < 2 {
        return Err(Error::invalid("d_true must be at least 2"));
    }
    if !(known_density > 0.0 && known_density <= 1.0) {
        return Err(Error::invalid(format!(
            "density {known_density} outside (0, 1]"
        )));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::invalid("noise std must be >= 0"));
    }
    let planted = init_params(node_count, d_true, 1.0, derive_seed(seed, Purpose::Init))?;
    let act = Activations::new(&planted, Exec::Sequential);
    let mut rng = seed::rng(derive_seed(seed, Purpose::Synthetic));
    let noise = Normal::new(0.0, noise_std).map_err(|e| Error::invalid(e.to_string()))?;

    let mut edges = Vec::new();
    for u in 0..node_count {
        for i in u + 1..node_count {
            if known_density < 1.0 && !rng.random_bool(known_density) {
                continue;
            }
            let mut w = act.predict(u, i);
            if noise_std > 0.0 {
                w += noise.sample(&mut rng);
            }
            edges.push(Edge::new(u, i, w));
        }
    }
    if edges.is_empty() {
        return Err(Error::TooFewEdges {
            reason: format!("density {known_density} over {node_count} nodes produced no edges"),
        });
    }
    Ok(SyntheticNetwork {
        network: SymmetricSparseNetwork::from_edges(node_count, edges)?,
        planted,
    })
}
