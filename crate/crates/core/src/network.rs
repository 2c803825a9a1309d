//! Sparse symmetric weighted networks.
//!
//! A [`SymmetricSparseNetwork`] stores every known undirected edge once, in
//! canonical orientation `u < i`, together with a CSR-style adjacency that
//! lists each edge from both endpoints. Adjacency lists are ordered by
//! ascending partner index so that every reduction over `E(u)` runs in a
//! fixed order.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// One known entry `g_{u,i}` of the symmetric weight matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub i: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(u: usize, i: usize, weight: f64) -> Self {
        Self { u, i, weight }
    }

    /// Same edge with endpoints ordered `u < i`.
    pub fn canonical(self) -> Self {
        if self.u <= self.i {
            self
        } else {
            Self {
                u: self.i,
                i: self.u,
                weight: self.weight,
            }
        }
    }

    fn key(&self) -> (usize, usize) {
        let c = self.canonical();
        (c.u, c.i)
    }
}

/// Entry of an adjacency list: partner node, edge weight and the index of
/// the undirected edge in [`SymmetricSparseNetwork::edges`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub node: usize,
    pub weight: f64,
    pub edge: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelfLoopPolicy {
    #[default]
    Reject,
    Drop,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub self_loops: SelfLoopPolicy,
}

/// Affine map between original weights and the internal training scale.
///
/// `forward` sends `[source_min, source_max]` onto `[target_min, target_max]`.
/// When all source weights were equal the map sends them to the target
/// midpoint and keeps unit slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightMap {
    pub source_min: f64,
    pub source_max: f64,
    pub target_min: f64,
    pub target_max: f64,
}

impl Default for WeightMap {
    fn default() -> Self {
        Self::identity()
    }
}

impl WeightMap {
    pub fn identity() -> Self {
        Self {
            source_min: 0.0,
            source_max: 1.0,
            target_min: 0.0,
            target_max: 1.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.source_min == self.target_min && self.source_max == self.target_max
    }

    fn is_degenerate(&self) -> bool {
        self.source_min == self.source_max
    }

    fn target_mid(&self) -> f64 {
        0.5 * (self.target_min + self.target_max)
    }

    /// Original scale to internal scale.
    pub fn forward(&self, w: f64) -> f64 {
        if self.is_identity() {
            w
        } else if self.is_degenerate() {
            self.target_mid() + (w - self.source_min)
        } else {
            self.target_min
                + (w - self.source_min) / (self.source_max - self.source_min)
                    * (self.target_max - self.target_min)
        }
    }

    /// Internal scale back to original scale.
    pub fn inverse(&self, s: f64) -> f64 {
        if self.is_identity() {
            s
        } else if self.is_degenerate() {
            self.source_min + (s - self.target_mid())
        } else {
            self.source_min
                + (s - self.target_min) / (self.target_max - self.target_min)
                    * (self.source_max - self.source_min)
        }
    }
}

/// Undirected weighted network with known-entry structure.
#[derive(Debug, Clone)]
pub struct SymmetricSparseNetwork {
    node_count: usize,
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    neighbors: Vec<Neighbor>,
    labels: Option<Vec<String>>,
    weight_map: WeightMap,
}

impl SymmetricSparseNetwork {
    /// Builds a network from edges given in any orientation.
    ///
    /// Duplicate undirected pairs with equal weight collapse to one edge;
    /// conflicting weights, self-loops, non-finite weights and out-of-range
    /// endpoints are errors.
    pub fn from_edges(node_count: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut canon: Vec<Edge> = Vec::new();
        for e in edges {
            for node in [e.u, e.i] {
                if node >= node_count {
                    return Err(Error::NodeOutOfRange { node, node_count });
                }
            }
            if e.u == e.i {
                return Err(Error::invalid(format!("self-loop on node {}", e.u)));
            }
            if !e.weight.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("weight of edge ({}, {})", e.u, e.i),
                });
            }
            canon.push(e.canonical());
        }
        canon.sort_by_key(Edge::key);

        let mut edges: Vec<Edge> = Vec::with_capacity(canon.len());
        for e in canon {
            match edges.last() {
                Some(prev) if prev.key() == e.key() => {
                    if prev.weight != e.weight {
                        return Err(Error::ConflictingDuplicate {
                            u: e.u,
                            i: e.i,
                            first: prev.weight,
                            second: e.weight,
                        });
                    }
                }
                _ => edges.push(e),
            }
        }

        let mut degree = vec![0usize; node_count];
        for e in &edges {
            degree[e.u] += 1;
            degree[e.i] += 1;
        }
        let mut offsets = Vec::with_capacity(node_count + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..node_count].to_vec();
        let placeholder = Neighbor {
            node: 0,
            weight: 0.0,
            edge: 0,
        };
        let mut neighbors = vec![placeholder; offsets[node_count]];
        // Edges are sorted by (u, i), so each list fills in ascending partner order.
        for (idx, e) in edges.iter().enumerate() {
            neighbors[cursor[e.u]] = Neighbor {
                node: e.i,
                weight: e.weight,
                edge: idx,
            };
            cursor[e.u] += 1;
            neighbors[cursor[e.i]] = Neighbor {
                node: e.u,
                weight: e.weight,
                edge: idx,
            };
            cursor[e.i] += 1;
        }
        debug_assert!((0..node_count).all(|u| {
            neighbors[offsets[u]..offsets[u + 1]]
                .windows(2)
                .all(|w| w[0].node < w[1].node)
        }));

        Ok(Self {
            node_count,
            edges,
            offsets,
            neighbors,
            labels: None,
            weight_map: WeightMap::identity(),
        })
    }

    /// A network over the same node set and scale holding only `edges`.
    pub fn subnetwork(&self, edges: &[Edge]) -> Result<Self> {
        let mut net = Self::from_edges(self.node_count, edges.iter().copied())?;
        net.labels = self.labels.clone();
        net.weight_map = self.weight_map;
        Ok(net)
    }

    pub fn with_labels(mut self, labels: Option<Vec<String>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != self.node_count {
                return Err(Error::invalid(format!(
                    "{} labels for {} nodes",
                    l.len(),
                    self.node_count
                )));
            }
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Undirected edges in canonical orientation, sorted by `(u, i)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn weight_map(&self) -> &WeightMap {
        &self.weight_map
    }

    /// `E(u)`: partners of `u` with their weights, ascending by partner.
    pub fn adjacency(&self, u: usize) -> Result<&[Neighbor]> {
        if u >= self.node_count {
            return Err(Error::NodeOutOfRange {
                node: u,
                node_count: self.node_count,
            });
        }
        Ok(self.neighbors(u))
    }

    /// Unchecked variant of [`adjacency`](Self::adjacency); panics when `u` is out of range.
    #[inline]
    pub fn neighbors(&self, u: usize) -> &[Neighbor] {
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    #[inline]
    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    /// Display token for node `u`: its original label or its index.
    pub fn node_label(&self, u: usize) -> String {
        node_token(self.labels(), u)
    }
}

pub(crate) fn node_token(labels: Option<&[String]>, u: usize) -> String {
    match labels {
        Some(l) => l[u].clone(),
        None => u.to_string(),
    }
}

/// Reads an edge list of `u i w` triples.
///
/// Blank lines and lines starting with `#` are skipped. When every node
/// token is a non-negative integer the integers are used as node indices
/// (so the node count is `max + 1`); otherwise tokens are mapped to dense
/// indices in order of first appearance and kept as labels.
pub fn load_edge_list<R: BufRead>(
    source: R,
    options: LoadOptions,
) -> Result<SymmetricSparseNetwork> {
    struct Raw {
        line: usize,
        u: String,
        i: String,
        weight: f64,
    }

    let mut raw = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io("<edge list>", e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Malformed {
                line: line_no,
                reason: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let weight: f64 = fields[2].parse().map_err(|_| Error::Malformed {
            line: line_no,
            reason: format!("invalid weight '{}'", fields[2]),
        })?;
        if !weight.is_finite() {
            return Err(Error::NonFiniteWeight { line: line_no });
        }
        if fields[0] == fields[1] {
            match options.self_loops {
                SelfLoopPolicy::Reject => {
                    return Err(Error::SelfLoop {
                        line: line_no,
                        node: fields[0].to_string(),
                    })
                }
                SelfLoopPolicy::Drop => continue,
            }
        }
        raw.push(Raw {
            line: line_no,
            u: fields[0].to_string(),
            i: fields[1].to_string(),
            weight,
        });
    }

    let numeric = raw
        .iter()
        .all(|r| r.u.parse::<usize>().is_ok() && r.i.parse::<usize>().is_ok());

    let mut labels: Option<Vec<String>> = None;
    let mut edges = Vec::with_capacity(raw.len());
    let node_count;
    if numeric {
        let mut max = None;
        for r in &raw {
            let u: usize = r.u.parse().unwrap();
            let i: usize = r.i.parse().unwrap();
            // "01" and "1" parse to the same node.
            if u == i {
                match options.self_loops {
                    SelfLoopPolicy::Reject => {
                        return Err(Error::SelfLoop {
                            line: r.line,
                            node: r.u.clone(),
                        })
                    }
                    SelfLoopPolicy::Drop => continue,
                }
            }
            max = max.max(Some(u.max(i)));
            edges.push(Edge::new(u, i, r.weight));
        }
        node_count = max.map_or(0, |m| m + 1);
    } else {
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut names: Vec<String> = Vec::new();
        let mut intern = |tok: &str| -> usize {
            if let Some(&k) = index.get(tok) {
                return k;
            }
            let k = names.len();
            names.push(tok.to_string());
            index.insert(tok.to_string(), k);
            k
        };
        for r in &raw {
            let u = intern(&r.u);
            let i = intern(&r.i);
            edges.push(Edge::new(u, i, r.weight));
        }
        node_count = names.len();
        labels = Some(names);
    }

    SymmetricSparseNetwork::from_edges(node_count, edges)?.with_labels(labels)
}

pub fn load_edge_list_path(
    path: impl AsRef<Path>,
    options: LoadOptions,
) -> Result<SymmetricSparseNetwork> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_edge_list(std::io::BufReader::new(file), options).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Writes edges as `u i w` lines; weights use shortest round-trip formatting.
pub fn write_edge_list<W: Write>(
    mut out: W,
    edges: &[Edge],
    labels: Option<&[String]>,
) -> std::io::Result<()> {
    for e in edges {
        writeln!(
            out,
            "{} {} {}",
            node_token(labels, e.u),
            node_token(labels, e.i),
            e.weight
        )?;
    }
    out.flush()
}

/// Linearly rescales weights so the observed minimum maps to `lo` and the
/// maximum to `hi`, recording the map for inverse transformation.
pub fn scale_weights(
    net: &SymmetricSparseNetwork,
    lo: f64,
    hi: f64,
) -> Result<SymmetricSparseNetwork> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid(format!(
            "scale range requires lo < hi, got [{lo}, {hi}]"
        )));
    }
    if net.edge_count() == 0 {
        return Err(Error::EmptyNetwork);
    }
    let (min, max) = net
        .edges
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), e| {
            (a.min(e.weight), b.max(e.weight))
        });
    let step = WeightMap {
        source_min: min,
        source_max: max,
        target_min: lo,
        target_max: hi,
    };
    let prior = net.weight_map;
    let combined = WeightMap {
        source_min: prior.inverse(min),
        source_max: prior.inverse(max),
        target_min: lo,
        target_max: hi,
    };

    let mut scaled = net.clone();
    for e in &mut scaled.edges {
        e.weight = step.forward(e.weight);
    }
    for nb in &mut scaled.neighbors {
        nb.weight = scaled.edges[nb.edge].weight;
    }
    scaled.weight_map = combined;
    Ok(scaled)
}

/// Train / validation / test partition of an edge set.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSplit {
    pub train: Vec<Edge>,
    pub validation: Vec<Edge>,
    pub test: Vec<Edge>,
}

impl EdgeSplit {
    /// Writes `train.txt`, `validation.txt` and `test.txt` into `dir`.
    pub fn export(&self, dir: impl AsRef<Path>, labels: Option<&[String]>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, edges) in [
            ("train.txt", &self.train),
            ("validation.txt", &self.validation),
            ("test.txt", &self.test),
        ] {
            let path = dir.join(name);
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_edge_list(std::io::BufWriter::new(file), edges, labels)
                .map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Number of training edges for `n` edges at `train_ratio`, rounded half away from zero.
pub fn train_size(n: usize, train_ratio: f64) -> usize {
    (n as f64 * train_ratio).round() as usize
}

/// Seeded shuffle-and-cut partition of the undirected edges.
///
/// The first `round(n * train_ratio)` shuffled edges form the training pool
/// and the rest the test set. `round(|pool| * validation_ratio_of_train)`
/// edges (at least one when the ratio is positive) are carved off the end of
/// the pool as the validation set. Each output set is sorted canonically.
pub fn split_edges(
    net: &SymmetricSparseNetwork,
    train_ratio: f64,
    validation_ratio_of_train: f64,
    seed: u64,
) -> Result<EdgeSplit> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::invalid(format!(
            "train ratio {train_ratio} outside (0, 1)"
        )));
    }
    if !(0.0..1.0).contains(&validation_ratio_of_train) {
        return Err(Error::invalid(format!(
            "validation ratio {validation_ratio_of_train} outside [0, 1)"
        )));
    }
    let n = net.edge_count();
    if n < 3 {
        return Err(Error::TooFewEdges {
            reason: format!("splitting needs at least 3 edges, network has {n}"),
        });
    }
    let pool = train_size(n, train_ratio);
    if pool == 0 || pool == n {
        return Err(Error::TooFewEdges {
            reason: format!(
                "{n} edges at train ratio {train_ratio} leave an empty train or test set"
            ),
        });
    }
    let mut n_val = (pool as f64 * validation_ratio_of_train).round() as usize;
    if validation_ratio_of_train > 0.0 && n_val == 0 {
        n_val = 1;
    }
    if n_val >= pool {
        return Err(Error::TooFewEdges {
            reason: format!("{pool} training edges cannot hold {n_val} validation edges"),
        });
    }

    let mut shuffled = net.edges.clone();
    shuffled.shuffle(&mut seed::rng(seed));
    let test = shuffled.split_off(pool);
    let validation = shuffled.split_off(pool - n_val);
    let mut split = EdgeSplit {
        train: shuffled,
        validation,
        test,
    };
    for set in [&mut split.train, &mut split.validation, &mut split.test] {
        set.sort_by_key(Edge::key);
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<SymmetricSparseNetwork> {
        load_edge_list(text.as_bytes(), LoadOptions::default())
    }

    #[test]
    fn loads_simple_path() {
        let net = load("0 1 0.5\n1 2 0.25\n").unwrap();
        assert_eq!(net.node_count(), 3);
        assert_eq!(net.edge_count(), 2);
        let adj: Vec<(usize, f64)> = net
            .adjacency(1)
            .unwrap()
            .iter()
            .map(|n| (n.node, n.weight))
            .collect();
        assert_eq!(adj, vec![(0, 0.5), (2, 0.25)]);
    }

    #[test]
    fn symmetric_duplicates_collapse() {
        let net = load("0 1 0.5\n1 0 0.5\n").unwrap();
        assert_eq!(net.edge_count(), 1);
    }

    #[test]
    fn conflicting_duplicate_is_error() {
        let err = load("0 1 0.5\n1 0 0.7\n").unwrap_err();
        assert!(matches!(err, Error::ConflictingDuplicate { .. }));
    }

    #[test]
    fn self_loop_policy() {
        let err = load("0 0 1.0\n").unwrap_err();
        assert!(err.to_string().contains("self-loop"));
        let net = load_edge_list(
            "0 0 1.0\n0 1 2.0\n".as_bytes(),
            LoadOptions {
                self_loops: SelfLoopPolicy::Drop,
            },
        )
        .unwrap();
        assert_eq!(net.edge_count(), 1);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(
            load("0 1\n").unwrap_err(),
            Error::Malformed { line: 1, .. }
        ));
        assert!(matches!(
            load("# c\n0 1 x\n").unwrap_err(),
            Error::Malformed { line: 2, .. }
        ));
        assert!(matches!(
            load("0 1 inf\n").unwrap_err(),
            Error::NonFiniteWeight { line: 1 }
        ));
        assert!(matches!(
            load("0 1 NaN\n").unwrap_err(),
            Error::NonFiniteWeight { .. }
        ));
    }

    #[test]
    fn comments_blank_lines_and_tabs() {
        let net = load("# header\n\n0\t1\t1.5\n   \n2 1 3\n").unwrap();
        assert_eq!(net.edge_count(), 2);
        assert!(net.labels().is_none());
    }

    #[test]
    fn token_labels_are_interned() {
        let net = load("alpha beta 1\nbeta gamma 2\n").unwrap();
        assert_eq!(net.node_count(), 3);
        assert_eq!(net.labels().unwrap(), ["alpha", "beta", "gamma"]);
        assert_eq!(net.node_label(2), "gamma");
    }

    #[test]
    fn adjacency_edge_cases() {
        let net = load("0 1 0.5\n").unwrap();
        assert_eq!(net.adjacency(0).unwrap()[0].node, 1);
        assert_eq!(net.adjacency(0).unwrap()[0].weight, 0.5);
        let isolated = SymmetricSparseNetwork::from_edges(3, [Edge::new(0, 1, 1.0)]).unwrap();
        assert!(isolated.adjacency(2).unwrap().is_empty());
        assert!(matches!(
            isolated.adjacency(3),
            Err(Error::NodeOutOfRange { .. })
        ));

        let star = load("0 4 1\n0 2 1\n0 1 1\n3 0 1\n").unwrap();
        let partners: Vec<usize> = star.adjacency(0).unwrap().iter().map(|n| n.node).collect();
        assert_eq!(partners, vec![1, 2, 3, 4]);
    }

    #[test]
    fn scaling_examples() {
        let net = load("0 1 0\n1 2 500\n2 3 1000\n").unwrap();
        let s = scale_weights(&net, 0.0, 1.0).unwrap();
        let w: Vec<f64> = s.edges().iter().map(|e| e.weight).collect();
        assert_eq!(w, vec![0.0, 0.5, 1.0]);
        assert_eq!(s.adjacency(1).unwrap()[1].weight, 0.5);

        let unit = load("0 1 0\n1 2 0.3\n2 3 1\n").unwrap();
        let same = scale_weights(&unit, 0.0, 1.0).unwrap();
        assert_eq!(same.edges(), unit.edges());

        let flat = load("0 1 3\n1 2 3\n2 3 3\n").unwrap();
        let f = scale_weights(&flat, 0.0, 1.0).unwrap();
        assert!(f.edges().iter().all(|e| e.weight == 0.5));
        assert_eq!(f.weight_map().inverse(0.5), 3.0);

        let empty = SymmetricSparseNetwork::from_edges(2, []).unwrap();
        assert!(matches!(
            scale_weights(&empty, 0.0, 1.0),
            Err(Error::EmptyNetwork)
        ));
        assert!(scale_weights(&net, 1.0, 1.0).is_err());
    }

    fn path_network(n: usize) -> SymmetricSparseNetwork {
        SymmetricSparseNetwork::from_edges(n + 1, (0..n).map(|k| Edge::new(k, k + 1, k as f64)))
            .unwrap()
    }

    #[test]
    fn split_sizes() {
        let s = split_edges(&path_network(10), 0.2, 0.0, 1).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (2, 0, 8));

        let s = split_edges(&path_network(5484), 0.2, 0.0, 1).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (1097, 4387));

        let s = split_edges(&path_network(100), 0.5, 0.1, 3).unwrap();
        assert_eq!(
            (s.train.len(), s.validation.len(), s.test.len()),
            (45, 5, 50)
        );
    }

    #[test]
    fn split_is_deterministic() {
        let net = path_network(200);
        assert_eq!(
            split_edges(&net, 0.3, 0.1, 9).unwrap(),
            split_edges(&net, 0.3, 0.1, 9).unwrap()
        );
        assert_ne!(
            split_edges(&net, 0.3, 0.1, 9).unwrap(),
            split_edges(&net, 0.3, 0.1, 10).unwrap()
        );
    }

    #[test]
    fn split_errors() {
        let net = path_network(10);
        assert!(split_edges(&net, 0.0, 0.0, 1).is_err());
        assert!(split_edges(&net, 1.0, 0.0, 1).is_err());
        assert!(split_edges(&net, 0.5, 1.0, 1).is_err());
        assert!(split_edges(&path_network(2), 0.5, 0.0, 1).is_err());
        assert!(matches!(
            split_edges(&net, 0.01, 0.0, 1),
            Err(Error::TooFewEdges { .. })
        ));
        // one training edge cannot also feed a validation set
        assert!(split_edges(&net, 0.1, 0.5, 1).is_err());
    }
}
