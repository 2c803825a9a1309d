//! Decision parameters, the sigmoid mapping, the biased symmetric prediction
//! rule and the regularized objective with its analytic gradient.
//!
//! Parameters are stored row-major: node `u` owns `values[u*d .. u*d + d]`.
//! Column 0 feeds the node bias through the sigmoid, columns `1..d` feed the
//! latent factors. For an edge `(u, i)` the prediction is
//!
//! ```text
//! ĝ(u,i) = φ(x[u,0]) + φ(x[i,0]) + Σ_{c=1}^{d-1} φ(x[u,c]) φ(x[i,c])
//! ```
//!
//! and the training objective is
//!
//! ```text
//! Z(x) = ½ Σ_{(u,i)∈E} [ (g − ĝ)² + λ (Σ_c φ²(x[u,c]) + Σ_c φ²(x[i,c])) ]
//! ```
//!
//! with every undirected edge counted once.

use std::path::Path;

use rand::distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{SymmetricSparseNetwork, WeightMap};
use crate::seed;

/// Logistic function `1 / (1 + e^{-t})`, evaluated without overflow for any finite `t`.
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let z = t.exp();
        z / (1.0 + z)
    }
}

/// Derivative `φ(t)(1 − φ(t))`.
///
/// Computed as `e^{-|t|} / (1 + e^{-|t|})²`, which stays positive long after
/// `1 − φ(t)` would round to zero.
#[inline]
pub fn sigmoid_prime(t: f64) -> f64 {
    let z = (-t.abs()).exp();
    let denom = 1.0 + z;
    z / (denom * denom)
}

/// Evaluation strategy for per-node and per-edge loops.
///
/// Both modes produce bit-identical results: parallel work is partitioned
/// by node or edge and every reduction runs sequentially in a fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    #[default]
    Sequential,
    Parallel,
}

impl Exec {
    pub(crate) fn fill(self, out: &mut [f64], f: impl Fn(usize) -> f64 + Sync + Send) {
        match self {
            Exec::Sequential => out.iter_mut().enumerate().for_each(|(k, v)| *v = f(k)),
            Exec::Parallel => out.par_iter_mut().enumerate().for_each(|(k, v)| *v = f(k)),
        }
    }

    pub(crate) fn for_each_row(
        self,
        out: &mut [f64],
        width: usize,
        f: impl Fn(usize, &mut [f64]) + Sync + Send,
    ) {
        match self {
            Exec::Sequential => out
                .chunks_mut(width)
                .enumerate()
                .for_each(|(u, row)| f(u, row)),
            Exec::Parallel => out
                .par_chunks_mut(width)
                .enumerate()
                .for_each(|(u, row)| f(u, row)),
        }
    }
}

/// The decision vector `x` of length `|V|·d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    d: usize,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(d: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 || !values.len().is_multiple_of(d) {
            return Err(Error::invalid(format!(
                "parameter length {} is not a multiple of d = {d}",
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("parameter {k}"),
            });
        }
        Ok(Self { d, values })
    }

    pub fn zeros(node_count: usize, d: usize) -> Self {
        Self {
            d,
            values: vec![0.0; node_count * d],
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn node_count(&self) -> usize {
        self.values.len() / self.d
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Raw parameters of node `u`.
    pub fn row(&self, u: usize) -> &[f64] {
        &self.values[u * self.d..(u + 1) * self.d]
    }

    /// `x + step · direction`.
    pub fn offset(&self, direction: &[f64], step: f64) -> Self {
        debug_assert_eq!(direction.len(), self.values.len());
        Self {
            d: self.d,
            values: self
                .values
                .iter()
                .zip(direction)
                .map(|(x, p)| x + step * p)
                .collect(),
        }
    }

    /// Non-negative outputs `φ(x[u,c])`; column 0 is the bias.
    pub fn nlf(&self, u: usize, c: usize) -> f64 {
        sigmoid(self.values[u * self.d + c])
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Hyperparameters shared by both optimizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Total columns per node: one bias column plus `d − 1` latent factors.
    pub d: usize,
    pub lambda: f64,
    /// Initial Tikhonov damping.
    pub mu: f64,
    pub cg_tolerance: f64,
    pub cg_max_iters: usize,
    pub outer_max_iters: usize,
    pub plateau_delta: f64,
    pub plateau_window: usize,
    pub init_range: f64,
    pub seed: u64,
    /// Use the exact second derivative of the regularizer in the curvature
    /// product instead of the `λφ'φ|E(u)|` diagonal.
    #[serde(default)]
    pub exact_regularization_curvature: bool,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d: 8,
            lambda: 0.05,
            mu: 1.0,
            cg_tolerance: 0.1,
            cg_max_iters: 50,
            outer_max_iters: 500,
            plateau_delta: 1e-5,
            plateau_window: 10,
            init_range: 1.0,
            seed: 42,
            exact_regularization_curvature: false,
            exec: Exec::Sequential,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let checks: [(bool, &str); 8] = [
            (self.d >= 2, "d must be at least 2"),
            (
                self.lambda >= 0.0 && self.lambda.is_finite(),
                "lambda must be >= 0",
            ),
            (self.mu > 0.0 && self.mu.is_finite(), "mu must be > 0"),
            (
                self.cg_tolerance > 0.0 && self.cg_tolerance < 1.0,
                "cg tolerance must lie in (0, 1)",
            ),
            (self.cg_max_iters >= 1, "cg max iterations must be >= 1"),
            (
                self.outer_max_iters >= 1,
                "outer max iterations must be >= 1",
            ),
            (self.plateau_window >= 1, "plateau window must be >= 1"),
            (
                self.init_range > 0.0 && self.init_range.is_finite(),
                "init range must be > 0",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::invalid(*msg)),
            None => Ok(()),
        }
    }
}

/// `φ` and `φ'` of every parameter, computed once per point `x`.
#[derive(Debug, Clone)]
pub struct Activations {
    pub(crate) d: usize,
    pub(crate) phi: Vec<f64>,
    pub(crate) dphi: Vec<f64>,
}

impl Activations {
    pub fn new(x: &ParamVector, exec: Exec) -> Self {
        let xs = x.as_slice();
        let mut phi = vec![0.0; xs.len()];
        let mut dphi = vec![0.0; xs.len()];
        exec.fill(&mut phi, |k| sigmoid(xs[k]));
        exec.fill(&mut dphi, |k| sigmoid_prime(xs[k]));
        Self {
            d: x.d(),
            phi,
            dphi,
        }
    }

    #[inline]
    pub fn phi_row(&self, u: usize) -> &[f64] {
        &self.phi[u * self.d..(u + 1) * self.d]
    }

    #[inline]
    pub fn dphi_row(&self, u: usize) -> &[f64] {
        &self.dphi[u * self.d..(u + 1) * self.d]
    }

    #[inline]
    pub fn predict(&self, u: usize, i: usize) -> f64 {
        combine(self.phi_row(u), self.phi_row(i))
    }
}

/// Bias sum followed by factor products in ascending column order.
/// Commutative term by term, so swapping the rows is bit-exact.
#[inline]
fn combine(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = a[0] + b[0];
    for c in 1..a.len() {
        acc += a[c] * b[c];
    }
    acc
}

fn check_node(x: &ParamVector, node: usize) -> Result<()> {
    if node >= x.node_count() {
        return Err(Error::NodeOutOfRange {
            node,
            node_count: x.node_count(),
        });
    }
    Ok(())
}

/// Predicted weight `ĝ(u,i)` on the internal scale.
pub fn predict(x: &ParamVector, u: usize, i: usize) -> Result<f64> {
    check_node(x, u)?;
    check_node(x, i)?;
    let a: Vec<f64> = x.row(u).iter().map(|&t| sigmoid(t)).collect();
    let b: Vec<f64> = x.row(i).iter().map(|&t| sigmoid(t)).collect();
    Ok(combine(&a, &b))
}

/// Objective and gradient over a fixed training network.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub train: &'a SymmetricSparseNetwork,
    pub lambda: f64,
    pub exec: Exec,
}

impl<'a> Problem<'a> {
    pub fn new(train: &'a SymmetricSparseNetwork, lambda: f64) -> Self {
        Self {
            train,
            lambda,
            exec: Exec::Sequential,
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub(crate) fn check(&self, x: &ParamVector) -> Result<()> {
        let expected = self.train.node_count() * x.d();
        if x.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Per-edge residuals `g − ĝ` in edge order.
    pub fn residuals(&self, act: &Activations) -> Vec<f64> {
        let edges = self.train.edges();
        let mut out = vec![0.0; edges.len()];
        self.exec.fill(&mut out, |k| {
            let e = edges[k];
            e.weight - act.predict(e.u, e.i)
        });
        out
    }

    pub fn objective(&self, x: &ParamVector) -> Result<f64> {
        self.check(x)?;
        let act = Activations::new(x, self.exec);
        Ok(self.objective_at(&act))
    }

    pub(crate) fn objective_at(&self, act: &Activations) -> f64 {
        let edges = self.train.edges();
        let mut sq = vec![0.0; self.train.node_count()];
        if self.lambda != 0.0 {
            self.exec
                .fill(&mut sq, |u| act.phi_row(u).iter().map(|p| p * p).sum());
        }
        let mut terms = vec![0.0; edges.len()];
        self.exec.fill(&mut terms, |k| {
            let e = edges[k];
            let r = e.weight - act.predict(e.u, e.i);
            r * r + self.lambda * (sq[e.u] + sq[e.i])
        });
        0.5 * terms.iter().sum::<f64>()
    }

    pub fn gradient(&self, x: &ParamVector) -> Result<Vec<f64>> {
        self.check(x)?;
        let act = Activations::new(x, self.exec);
        Ok(self.gradient_at(&act))
    }

    pub(crate) fn gradient_at(&self, act: &Activations) -> Vec<f64> {
        let d = act.d;
        let res = self.residuals(act);
        let mut grad = vec![0.0; act.phi.len()];
        if grad.is_empty() {
            return grad;
        }
        self.exec.for_each_row(&mut grad, d, |u, row| {
            for nb in self.train.neighbors(u) {
                let e = res[nb.edge];
                row[0] += e;
                let partner = act.phi_row(nb.node);
                for c in 1..d {
                    row[c] += e * partner[c];
                }
            }
            let reg = self.lambda * self.train.degree(u) as f64;
            let phi = act.phi_row(u);
            let dphi = act.dphi_row(u);
            for c in 0..d {
                row[c] = -dphi[c] * row[c] + reg * phi[c] * dphi[c];
            }
        });
        grad
    }
}

/// `Z(x)` over the training network with regularization `lambda`.
pub fn objective(x: &ParamVector, train: &SymmetricSparseNetwork, lambda: f64) -> Result<f64> {
    Problem::new(train, lambda).objective(x)
}

/// Analytic gradient `∇Z(x)`.
pub fn gradient(x: &ParamVector, train: &SymmetricSparseNetwork, lambda: f64) -> Result<Vec<f64>> {
    Problem::new(train, lambda).gradient(x)
}

/// I.i.d. uniform entries on the open interval `(−init_range, init_range)`.
pub fn init_params(node_count: usize, d: usize, init_range: f64, seed: u64) -> Result<ParamVector> {
    if !(init_range > 0.0 && init_range.is_finite()) {
        return Err(Error::invalid("init range must be > 0"));
    }
    if d == 0 {
        return Err(Error::invalid("d must be positive"));
    }
    let dist = Uniform::new(-init_range, init_range).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = seed::rng(seed);
    let values = (0..node_count * d)
        .map(|_| loop {
            let v = dist.sample(&mut rng);
            if v > -init_range {
                break v;
            }
        })
        .collect();
    ParamVector::new(d, values)
}

/// Trained parameters together with the scale and node labels they refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: ParamVector,
    pub config: ModelConfig,
    pub weight_map: WeightMap,
    pub labels: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    node_count: usize,
    d: usize,
    lambda: f64,
    weight_map: WeightMap,
    config: ModelConfig,
    labels: Option<Vec<String>>,
    params: Vec<f64>,
}

const MODEL_FORMAT: &str = "symnlf-model";

impl Model {
    pub fn node_count(&self) -> usize {
        self.params.node_count()
    }

    /// Prediction on the internal (training) scale.
    pub fn predict_internal(&self, u: usize, i: usize) -> Result<f64> {
        predict(&self.params, u, i)
    }

    /// Prediction mapped back to the original weight scale.
    pub fn predict(&self, u: usize, i: usize) -> Result<f64> {
        Ok(self.weight_map.inverse(self.predict_internal(u, i)?))
    }

    /// Resolves a node token from an input file to an index.
    pub fn node_index(&self, token: &str) -> Option<usize> {
        match &self.labels {
            Some(labels) => labels.iter().position(|l| l == token),
            None => token
                .parse::<usize>()
                .ok()
                .filter(|&u| u < self.node_count()),
        }
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: 1,
            node_count: self.node_count(),
            d: self.params.d(),
            lambda: self.config.lambda,
            weight_map: self.weight_map,
            config: self.config.clone(),
            labels: self.labels.clone(),
            params: self.params.as_slice().to_vec(),
        };
        serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if file.format != MODEL_FORMAT || file.version != 1 {
            return Err(Error::ModelFormat(format!(
                "unsupported format {} v{}",
                file.format, file.version
            )));
        }
        if file.params.len() != file.node_count * file.d {
            return Err(Error::ModelFormat(
                "parameter count does not match node_count * d".into(),
            ));
        }
        if file.d != file.config.d {
            return Err(Error::ModelFormat(
                "d does not match the stored config".into(),
            ));
        }
        if let Some(l) = &file.labels {
            if l.len() != file.node_count {
                return Err(Error::ModelFormat(
                    "label count does not match node_count".into(),
                ));
            }
        }
        Ok(Self {
            params: ParamVector::new(file.d, file.params)?,
            config: file.config,
            weight_map: file.weight_map,
            labels: file.labels,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
