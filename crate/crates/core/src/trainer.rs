//! Outer optimization loops.
//!
//! [`train_second_order`] runs damped Gauss-Newton iterations: each step
//! solves `(N_Z(x) + μI) Δx = −∇Z(x)` by conjugate gradient, backtracks on
//! the objective until it decreases, and adapts `μ` from the ratio of actual
//! to predicted reduction. [`train_first_order`] is plain gradient descent
//! with a rate-halving safeguard, kept as a reference baseline. Both share
//! the same stopping protocol ([`StoppingMonitor`]).

use std::time::Instant;

use serde::Serialize;

use crate::cg::{cg_solve, dot};
use crate::curvature::{GaussNewtonOperator, RegularizationCurvature};
use crate::error::{Error, Result};
use crate::eval::params_rmse;
use crate::model::{init_params, Activations, Model, ModelConfig, ParamVector, Problem};
use crate::network::{Edge, EdgeSplit, SymmetricSparseNetwork};

/// Step acceptance and damping schedule of the second-order loop.
#[derive(Debug, Clone, PartialEq)]
pub struct StepControl {
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
    pub mu_adapt: bool,
    pub mu_raise: f64,
    pub mu_drop: f64,
    pub rho_low: f64,
    pub rho_high: f64,
    pub grad_tol: f64,
    pub mu_min: f64,
    pub mu_max: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            backtrack_factor: 0.5,
            max_backtracks: 20,
            mu_adapt: true,
            mu_raise: 1.5,
            mu_drop: 1.5,
            rho_low: 0.25,
            rho_high: 0.75,
            grad_tol: 1e-8,
            mu_min: 1e-10,
            mu_max: 1e10,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        let ok = self.backtrack_factor > 0.0
            && self.backtrack_factor < 1.0
            && self.max_backtracks >= 1
            && self.mu_raise > 1.0
            && self.mu_drop > 1.0
            && self.rho_low >= 0.0
            && self.rho_low < self.rho_high
            && self.grad_tol >= 0.0
            && self.mu_min > 0.0
            && self.mu_min <= self.mu_max;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid step control {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ValidationRise,
    Plateau,
    MaxIters,
    GradientSmall,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::ValidationRise => "validation_rise",
            StopReason::Plateau => "plateau",
            StopReason::MaxIters => "max_iters",
            StopReason::GradientSmall => "gradient_small",
        }
    }
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Thresholds of the early-stopping protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRules {
    pub plateau_delta: f64,
    pub plateau_window: usize,
    pub max_iters: usize,
}

impl From<&ModelConfig> for StoppingRules {
    fn from(c: &ModelConfig) -> Self {
        Self {
            plateau_delta: c.plateau_delta,
            plateau_window: c.plateau_window,
            max_iters: c.outer_max_iters,
        }
    }
}

/// Tracks the objective and validation error across outer iterations and
/// decides when to stop.
///
/// Checked in order after each iteration: validation error above the
/// previous iteration's, `|Z_k − Z_{k−1}| < plateau_delta` for
/// `plateau_window` consecutive iterations, then the iteration cap.
#[derive(Debug, Clone)]
pub struct StoppingMonitor {
    rules: StoppingRules,
    iterations: usize,
    last_objective: f64,
    last_validation: Option<f64>,
    flat_streak: usize,
}

impl StoppingMonitor {
    pub fn new(
        rules: StoppingRules,
        initial_objective: f64,
        initial_validation: Option<f64>,
    ) -> Self {
        Self {
            rules,
            iterations: 0,
            last_objective: initial_objective,
            last_validation: initial_validation,
            flat_streak: 0,
        }
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn observe(&mut self, objective: f64, validation: Option<f64>) -> Option<StopReason> {
        self.iterations += 1;
        let rose =
            matches!((self.last_validation, validation), (Some(prev), Some(cur)) if cur > prev);
        if (objective - self.last_objective).abs() < self.rules.plateau_delta {
            self.flat_streak += 1;
        } else {
            self.flat_streak = 0;
        }
        self.last_objective = objective;
        if validation.is_some() {
            self.last_validation = validation;
        }
        if rose {
            Some(StopReason::ValidationRise)
        } else if self.flat_streak >= self.rules.plateau_window {
            Some(StopReason::Plateau)
        } else if self.iterations >= self.rules.max_iters {
            Some(StopReason::MaxIters)
        } else {
            None
        }
    }
}

/// One outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub index: usize,
    pub objective: f64,
    pub validation_rmse: Option<f64>,
    /// Damping in effect for this iteration's solve (second order only).
    pub mu: Option<f64>,
    /// Learning rate used (first order only).
    pub learning_rate: Option<f64>,
    pub cg_iterations: usize,
    pub cg_flag: Option<&'static str>,
    pub accepted: bool,
    pub step_length: f64,
    /// `∇Zᵀ Δx` of the proposed direction.
    pub directional_derivative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub optimizer: &'static str,
    pub iterations_run: usize,
    pub initial_objective: f64,
    pub objective_trace: Vec<f64>,
    pub validation_rmse_trace: Vec<f64>,
    pub stop_reason: StopReason,
    pub final_mu: Option<f64>,
    /// Iteration whose parameters were returned (0 = initialization).
    pub best_iteration: usize,
    pub records: Vec<IterationRecord>,
    pub wall_time_ms: u64,
}

impl TrainReport {
    /// Structured JSON form. Wall time is only included on request so that
    /// repeated runs produce identical bytes.
    pub fn to_json(&self, include_timing: bool) -> String {
        serde_json::to_string_pretty(&self.to_json_value(include_timing))
            .expect("report serialization cannot fail")
    }

    pub fn to_json_value(&self, include_timing: bool) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("report serialization cannot fail");
        if !include_timing {
            if let Some(obj) = value.as_object_mut() {
                obj.remove("wall_time_ms");
            }
        }
        value
    }

    /// One CSV row per iteration.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "index",
            "objective",
            "validation_rmse",
            "mu",
            "learning_rate",
            "cg_iterations",
            "cg_flag",
            "accepted",
            "step_length",
        ])
        .expect("in-memory csv");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            w.write_record([
                r.index.to_string(),
                r.objective.to_string(),
                opt(r.validation_rmse),
                opt(r.mu),
                opt(r.learning_rate),
                r.cg_iterations.to_string(),
                r.cg_flag.unwrap_or("").to_string(),
                r.accepted.to_string(),
                r.step_length.to_string(),
            ])
            .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
    }
}

struct Setup {
    train: SymmetricSparseNetwork,
    validation: Vec<Edge>,
    init: ParamVector,
}

fn setup(net: &SymmetricSparseNetwork, split: &EdgeSplit, config: &ModelConfig) -> Result<Setup> {
    config.validate()?;
    if split.train.is_empty() {
        return Err(Error::TooFewEdges {
            reason: "training set is empty".into(),
        });
    }
    let train = net.subnetwork(&split.train)?;
    let init = init_params(net.node_count(), config.d, config.init_range, config.seed)?;
    Ok(Setup {
        train,
        validation: split.validation.clone(),
        init,
    })
}

fn non_finite(what: &str, iteration: usize) -> Error {
    Error::NonFinite {
        context: format!("{what} at outer iteration {iteration}"),
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

struct Tracker<'a> {
    validation: &'a [Edge],
    weight_map: crate::network::WeightMap,
    best_rmse: Option<f64>,
    best_x: ParamVector,
    best_iteration: usize,
}

impl<'a> Tracker<'a> {
    fn new(
        validation: &'a [Edge],
        train: &SymmetricSparseNetwork,
        x: &ParamVector,
    ) -> Result<(Self, Option<f64>)> {
        let mut t = Self {
            validation,
            weight_map: *train.weight_map(),
            best_rmse: None,
            best_x: x.clone(),
            best_iteration: 0,
        };
        let v = t.rmse(x)?;
        t.best_rmse = v;
        Ok((t, v))
    }

    fn rmse(&self, x: &ParamVector) -> Result<Option<f64>> {
        if self.validation.is_empty() {
            Ok(None)
        } else {
            params_rmse(x, &self.weight_map, self.validation).map(Some)
        }
    }

    fn update(&mut self, x: &ParamVector, iteration: usize, rmse: Option<f64>) {
        let better = match (rmse, self.best_rmse) {
            (Some(cur), Some(best)) => cur <= best,
            _ => true,
        };
        if better {
            self.best_rmse = rmse;
            self.best_x = x.clone();
            self.best_iteration = iteration;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    optimizer: &'static str,
    tracker: Tracker<'_>,
    train: &SymmetricSparseNetwork,
    config: &ModelConfig,
    initial_objective: f64,
    records: Vec<IterationRecord>,
    stop_reason: StopReason,
    final_mu: Option<f64>,
    started: Instant,
) -> (Model, TrainReport) {
    let report = TrainReport {
        optimizer,
        iterations_run: records.len(),
        initial_objective,
        objective_trace: records.iter().map(|r| r.objective).collect(),
        validation_rmse_trace: records.iter().filter_map(|r| r.validation_rmse).collect(),
        stop_reason,
        final_mu,
        best_iteration: tracker.best_iteration,
        records,
        wall_time_ms: started.elapsed().as_millis() as u64,
    };
    let model = Model {
        params: tracker.best_x,
        config: config.clone(),
        weight_map: *train.weight_map(),
        labels: train.labels().map(<[String]>::to_vec),
    };
    (model, report)
}

/// Damped Gauss-Newton training with conjugate-gradient inner solves.
///
/// Returns the parameters with the best validation RMSE seen (the final
/// iterate when the validation set is empty).
pub fn train_second_order(
    net: &SymmetricSparseNetwork,
    split: &EdgeSplit,
    config: &ModelConfig,
    control: &StepControl,
) -> Result<(Model, TrainReport)> {
    control.validate()?;
    let Setup {
        train,
        validation,
        init,
    } = setup(net, split, config)?;
    let started = Instant::now();
    let problem = Problem::new(&train, config.lambda).with_exec(config.exec);
    let reg = if config.exact_regularization_curvature {
        RegularizationCurvature::Exact
    } else {
        RegularizationCurvature::GaussNewton
    };

    let mut x = init;
    let mut act = Activations::new(&x, config.exec);
    let mut z = problem.objective_at(&act);
    if !z.is_finite() {
        return Err(non_finite("objective", 0));
    }
    let initial_objective = z;
    let (mut tracker, val0) = Tracker::new(&validation, &train, &x)?;
    let mut monitor = StoppingMonitor::new(StoppingRules::from(config), z, val0);
    let mut mu = config.mu;
    let mut val = val0;
    let mut records = Vec::new();
    let mut stop = StopReason::MaxIters;

    for iteration in 1..=config.outer_max_iters {
        let grad = problem.gradient_at(&act);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(non_finite("gradient", iteration));
        }
        if inf_norm(&grad) <= control.grad_tol {
            stop = StopReason::GradientSmall;
            break;
        }
        let op = GaussNewtonOperator::from_activations(&problem, act.clone(), mu, reg);
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        let solve = cg_solve(
            |p, out| op.damped_product_into(p, out),
            &rhs,
            config.cg_tolerance,
            config.cg_max_iters,
        )
        .map_err(|e| Error::NonFinite {
            context: format!("{e} (outer iteration {iteration})"),
        })?;
        let direction = solve.step;
        let slope = dot(&grad, &direction);

        let mut eta = 1.0;
        let mut accepted = None;
        if slope < 0.0 {
            for _ in 0..control.max_backtracks {
                let trial = x.offset(&direction, eta);
                let trial_act = Activations::new(&trial, config.exec);
                let trial_z = problem.objective_at(&trial_act);
                if !trial_z.is_finite() {
                    return Err(non_finite("trial objective", iteration));
                }
                if trial_z < z {
                    accepted = Some((trial, trial_act, trial_z));
                    break;
                }
                eta *= control.backtrack_factor;
            }
        }

        let mu_used = mu;
        let record_step;
        match accepted {
            Some((trial, trial_act, trial_z)) => {
                if control.mu_adapt {
                    let step: Vec<f64> = direction.iter().map(|v| eta * v).collect();
                    let curv = op.damped_product(&step)?;
                    let predicted = -dot(&grad, &step) - 0.5 * dot(&step, &curv);
                    let rho = if predicted > 0.0 {
                        (z - trial_z) / predicted
                    } else {
                        0.0
                    };
                    if rho < control.rho_low {
                        mu *= control.mu_raise;
                    } else if rho > control.rho_high {
                        mu /= control.mu_drop;
                    }
                    mu = mu.clamp(control.mu_min, control.mu_max);
                }
                x = trial;
                act = trial_act;
                z = trial_z;
                val = tracker.rmse(&x)?;
                tracker.update(&x, iteration, val);
                record_step = eta;
            }
            None => {
                mu = (mu * control.mu_raise).min(control.mu_max);
                record_step = 0.0;
            }
        }

        records.push(IterationRecord {
            index: iteration,
            objective: z,
            validation_rmse: val,
            mu: Some(mu_used),
            learning_rate: None,
            cg_iterations: solve.iterations,
            cg_flag: Some(solve.flag.as_str()),
            accepted: record_step > 0.0,
            step_length: record_step,
            directional_derivative: slope,
        });
        if let Some(reason) = monitor.observe(z, val) {
            stop = reason;
            break;
        }
    }

    Ok(finish(
        "second-order",
        tracker,
        &train,
        config,
        initial_objective,
        records,
        stop,
        Some(mu),
        started,
    ))
}

/// Maximum number of consecutive learning-rate halvings per iteration.
pub const MAX_RATE_HALVINGS: usize = 20;

/// Gradient descent `x ← x − η∇Z(x)` with the same stopping protocol.
///
/// If a step raises the objective the rate is halved and the step retried;
/// after [`MAX_RATE_HALVINGS`] failed halvings training stops with
/// [`StopReason::Plateau`].
pub fn train_first_order(
    net: &SymmetricSparseNetwork,
    split: &EdgeSplit,
    config: &ModelConfig,
    learning_rate: f64,
) -> Result<(Model, TrainReport)> {
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(Error::invalid(format!(
            "learning rate must be > 0, got {learning_rate}"
        )));
    }
    let Setup {
        train,
        validation,
        init,
    } = setup(net, split, config)?;
    let started = Instant::now();
    let problem = Problem::new(&train, config.lambda).with_exec(config.exec);
    let grad_tol = StepControl::default().grad_tol;

    let mut x = init;
    let mut act = Activations::new(&x, config.exec);
    let mut z = problem.objective_at(&act);
    if !z.is_finite() {
        return Err(non_finite("objective", 0));
    }
    let initial_objective = z;
    let (mut tracker, val0) = Tracker::new(&validation, &train, &x)?;
    let mut monitor = StoppingMonitor::new(StoppingRules::from(config), z, val0);
    let mut rate = learning_rate;
    let mut val = val0;
    let mut records = Vec::new();
    let mut stop = StopReason::MaxIters;

    for iteration in 1..=config.outer_max_iters {
        let grad = problem.gradient_at(&act);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(non_finite("gradient", iteration));
        }
        if inf_norm(&grad) <= grad_tol {
            stop = StopReason::GradientSmall;
            break;
        }
        let mut accepted = None;
        for attempt in 0..=MAX_RATE_HALVINGS {
            if attempt > 0 {
                rate *= 0.5;
            }
            let trial = x.offset(&grad, -rate);
            let trial_act = Activations::new(&trial, config.exec);
            let trial_z = problem.objective_at(&trial_act);
            if !trial_z.is_finite() {
                return Err(non_finite("trial objective", iteration));
            }
            if trial_z <= z {
                accepted = Some((trial, trial_act, trial_z));
                break;
            }
        }
        let slope = -rate * dot(&grad, &grad);
        let ok = accepted.is_some();
        if let Some((trial, trial_act, trial_z)) = accepted {
            x = trial;
            act = trial_act;
            z = trial_z;
            val = tracker.rmse(&x)?;
            tracker.update(&x, iteration, val);
        }
        records.push(IterationRecord {
            index: iteration,
            objective: z,
            validation_rmse: val,
            mu: None,
            learning_rate: Some(rate),
            cg_iterations: 0,
            cg_flag: None,
            accepted: ok,
            step_length: if ok { rate } else { 0.0 },
            directional_derivative: slope,
        });
        if !ok {
            stop = StopReason::Plateau;
            break;
        }
        if let Some(reason) = monitor.observe(z, val) {
            stop = reason;
            break;
        }
    }

    Ok(finish(
        "first-order",
        tracker,
        &train,
        config,
        initial_objective,
        records,
        stop,
        None,
        started,
    ))
}
