#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symnlf::network::Edge;
use symnlf::{ParamVector, SymmetricSparseNetwork};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random network on `n` nodes with at least one edge; each pair is kept with probability `p`.
pub fn random_network(rng: &mut ChaCha8Rng, n: usize, p: f64) -> SymmetricSparseNetwork {
    let mut edges = Vec::new();
    for u in 0..n {
        for i in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push(Edge::new(u, i, rng.random_range(0.1..3.0)));
            }
        }
    }
    if edges.is_empty() {
        edges.push(Edge::new(0, n - 1, 1.0));
    }
    SymmetricSparseNetwork::from_edges(n, edges).unwrap()
}

pub fn random_params(rng: &mut ChaCha8Rng, n: usize, d: usize, range: f64) -> ParamVector {
    let values = (0..n * d)
        .map(|_| rng.random_range(-range..range))
        .collect();
    ParamVector::new(d, values).unwrap()
}

pub fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
