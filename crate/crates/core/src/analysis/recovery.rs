use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;

/// Largest matching side solved exactly.
const EXACT_LIMIT: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    /// Mean matched `|correlation|` over `min(K, K')` pairs.
    pub score: f64,
    /// `(projection row, truth row)` pairs, sorted by projection row.
    pub assignment: Vec<(usize, usize)>,
    /// `K × K'` absolute Pearson correlations.
    pub correlations: Matrix,
}

/// Matches projection maps to true sources one-to-one, maximizing total `|r|`.
pub fn recovery_score(projections: &Matrix, truth: &Matrix) -> Result<Recovery> {
    if projections.rows() == 0 || truth.rows() == 0 {
        return Err(Error::argument("recovery needs at least one map on each side"));
    }
    if projections.cols() != truth.cols() {
        return Err(Error::shape("recovery map width", truth.cols(), projections.cols()));
    }
    let correlations = Matrix::from_fn(projections.rows(), truth.rows(), |i, j| {
        math::pearson(projections.row(i), truth.row(j)).map_or(0.0, f64::abs)
    });
    let transposed = projections.rows() > truth.rows();
    let c = if transposed { correlations.transpose() } else { correlations.clone() };
    let pairs = if c.rows() <= EXACT_LIMIT { exact(&c) } else { greedy(&c) };
    let mut assignment: Vec<(usize, usize)> =
        pairs.into_iter().map(|(a, b)| if transposed { (b, a) } else { (a, b) }).collect();
    assignment.sort_unstable();
    let total: f64 = assignment.iter().map(|&(i, j)| correlations.get(i, j)).sum();
    Ok(Recovery {
        score: total / assignment.len() as f64,
        assignment,
        correlations,
    })
}

/// Optimal matching of every row of `c` (rows ≤ cols) to a distinct column.
/// Columns are scanned one at a time; the state is the set of rows already matched.
fn exact(c: &Matrix) -> Vec<(usize, usize)> {
    let rows = c.rows();
    let cols = c.cols();
    let states = 1usize << rows;
    let mut best = vec![f64::NEG_INFINITY; states];
    best[0] = 0.0;
    // choice[j][mask]: row given column j on the way to `mask`, or None if j went unused
    let mut choice: Vec<Vec<Option<usize>>> = Vec::with_capacity(cols);
    for j in 0..cols {
        let mut next = best.clone();
        let mut pick = vec![None; states];
        for mask in 0..states {
            if best[mask] == f64::NEG_INFINITY {
                continue;
            }
            for i in 0..rows {
                let bit = 1 << i;
                if mask & bit == 0 {
                    let v = best[mask] + c.get(i, j);
                    if v > next[mask | bit] {
                        next[mask | bit] = v;
                        pick[mask | bit] = Some(i);
                    }
                }
            }
        }
        best = next;
        choice.push(pick);
    }
    let mut mask = states - 1;
    let mut pairs = Vec::with_capacity(rows);
    for j in (0..cols).rev() {
        if let Some(i) = choice[j][mask] {
            pairs.push((i, j));
            mask &= !(1 << i);
        }
    }
    pairs
}

/// Repeatedly takes the largest remaining entry.
fn greedy(c: &Matrix) -> Vec<(usize, usize)> {
    let mut row_used = vec![false; c.rows()];
    let mut col_used = vec![false; c.cols()];
    let mut pairs = Vec::with_capacity(c.rows());
    for _ in 0..c.rows() {
        let mut top: Option<(usize, usize, f64)> = None;
        for i in (0..c.rows()).filter(|&i| !row_used[i]) {
            for j in (0..c.cols()).filter(|&j| !col_used[j]) {
                if top.is_none_or(|(_, _, v)| c.get(i, j) > v) {
                    top = Some((i, j, c.get(i, j)));
                }
            }
        }
        let (i, j, _) = top.expect("rows never exceed columns");
        row_used[i] = true;
        col_used[j] = true;
        pairs.push((i, j));
    }
    pairs
}
