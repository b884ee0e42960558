use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{self, Stream};

/// Absolute correlations below this are dropped from the community graph.
pub const DEFAULT_EDGE_CUT: f64 = 0.3;

const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Final partition of the original nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Communities {
    /// Community per node, numbered by first appearance.
    pub labels: Vec<usize>,
    pub modularity: f64,
    pub count: usize,
    /// Aggregation levels that moved at least one node.
    pub levels: usize,
}

impl Communities {
    /// Node indices grouped by community, original order kept within each group.
    pub fn ordering(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.labels.len()).collect();
        order.sort_by_key(|&i| self.labels[i]);
        order
    }
}

/// `|corr|` with entries below `cut` and the diagonal set to zero.
pub fn community_graph(corr: &Matrix, cut: f64) -> Matrix {
    Matrix::from_fn(corr.rows(), corr.cols(), |i, j| {
        let w = corr.get(i, j).abs();
        if i == j || w < cut || !w.is_finite() {
            0.0
        } else {
            w
        }
    })
}

fn validate(weights: &Matrix) -> Result<()> {
    let n = weights.rows();
    if weights.cols() != n {
        return Err(Error::shape("community weights (square)", n, weights.cols()));
    }
    for i in 0..n {
        for j in 0..n {
            let w = weights.get(i, j);
            if !w.is_finite() || w < 0.0 {
                return Err(Error::argument(format!("weight ({i}, {j}) = {w} must be finite and non-negative")));
            }
            if (w - weights.get(j, i)).abs() > SYMMETRY_TOLERANCE * w.abs().max(1.0) {
                return Err(Error::argument(format!("weights not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

fn strengths(weights: &Matrix) -> Vec<f64> {
    (0..weights.rows()).map(|i| weights.row(i).iter().sum()).collect()
}

/// `Q = (1/2m) Σ_ij [A_ij - k_i k_j / 2m] δ(c_i, c_j)`; zero for an empty graph.
pub fn modularity(weights: &Matrix, labels: &[usize]) -> Result<f64> {
    validate(weights)?;
    let n = weights.rows();
    if labels.len() != n {
        return Err(Error::shape("community labels", n, labels.len()));
    }
    let k = strengths(weights);
    let two_m: f64 = k.iter().sum();
    if two_m <= 0.0 {
        return Ok(0.0);
    }
    let groups = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut internal = vec![0.0; groups];
    let mut total = vec![0.0; groups];
    for i in 0..n {
        total[labels[i]] += k[i];
        for j in 0..n {
            if labels[i] == labels[j] {
                internal[labels[i]] += weights.get(i, j);
            }
        }
    }
    Ok(internal
        .iter()
        .zip(&total)
        .map(|(e, t)| e / two_m - (t / two_m) * (t / two_m))
        .sum())
}

/// One round of local moves. Returns the community of every node and whether any node moved.
fn local_moves(weights: &Matrix, two_m: f64, seed: u64, level: u64) -> (Vec<usize>, bool) {
    let n = weights.rows();
    let k = strengths(weights);
    let mut community: Vec<usize> = (0..n).collect();
    let mut total = k.clone();
    let mut link = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut r = rng::stream(seed, Stream::Communities, level);
    let order = rng::permutation(n, &mut r);
    let mut any_move = false;
    loop {
        let mut moved = false;
        for &i in &order {
            let own = community[i];
            for j in 0..n {
                let w = weights.get(i, j);
                if j != i && w > 0.0 {
                    let c = community[j];
                    if link[c] == 0.0 {
                        touched.push(c);
                    }
                    link[c] += w;
                }
            }
            total[own] -= k[i];
            let gain = |c: usize, link: &[f64]| link[c] - total[c] * k[i] / two_m;
            let mut best = own;
            let mut best_gain = gain(own, &link);
            for &c in &touched {
                let g = gain(c, &link);
                if g > best_gain + 1e-14 {
                    best = c;
                    best_gain = g;
                }
            }
            total[best] += k[i];
            community[i] = best;
            if best != own {
                moved = true;
                any_move = true;
            }
            for c in touched.drain(..) {
                link[c] = 0.0;
            }
        }
        if !moved {
            break;
        }
    }
    (community, any_move)
}

fn relabel(labels: &mut [usize]) -> usize {
    let mut map: Vec<Option<usize>> = vec![None; labels.len().max(labels.iter().copied().max().map_or(0, |m| m + 1))];
    let mut next = 0;
    for l in labels.iter_mut() {
        let id = *map[*l].get_or_insert_with(|| {
            next += 1;
            next - 1
        });
        *l = id;
    }
    next
}

/// Multi-level modularity optimization: greedy local moves until no node
/// improves, then each community collapses into a node, repeated until a level
/// makes no move. Node visiting order is seeded.
pub fn louvain_communities(weights: &Matrix, seed: u64) -> Result<Communities> {
    validate(weights)?;
    let n = weights.rows();
    let two_m: f64 = weights.as_slice().iter().sum();
    let mut labels: Vec<usize> = (0..n).collect();
    if two_m <= 0.0 {
        return Ok(Communities {
            count: n,
            labels,
            modularity: 0.0,
            levels: 0,
        });
    }
    let mut graph = weights.clone();
    let mut levels = 0;
    loop {
        let (mut community, moved) = local_moves(&graph, two_m, seed, levels as u64);
        if !moved {
            break;
        }
        levels += 1;
        let groups = relabel(&mut community);
        for l in &mut labels {
            *l = community[*l];
        }
        let mut next = Matrix::zeros(groups, groups);
        for i in 0..graph.rows() {
            for j in 0..graph.cols() {
                let w = graph.get(i, j);
                if w != 0.0 {
                    let (a, b) = (community[i], community[j]);
                    next.set(a, b, next.get(a, b) + w);
                }
            }
        }
        graph = next;
        if groups == 1 {
            break;
        }
    }
    let count = relabel(&mut labels);
    let q = modularity(weights, &labels)?;
    Ok(Communities {
        labels,
        modularity: q,
        count,
        levels,
    })
}
