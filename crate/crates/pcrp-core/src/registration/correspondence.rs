//! Feature-space correspondence search constrained to symmetry sides.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// One matched pair: indices into the query's and target's retained feature
/// rows, plus the feature-space distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub query: usize,
    pub target: usize,
    pub distance: f64,
}

/// The correspondence list for one side pairing.
#[derive(Debug, Clone)]
pub struct CorrespondenceSet {
    pub pairs: Vec<Correspondence>,
    /// False when an empty side forced unconstrained matching.
    pub side_consistent: bool,
}

/// Matching knobs: mutual-nearest filtering and Lowe-style ratio pruning
/// (`ratio <= 0` disables the ratio test).
#[derive(Debug, Clone, Copy)]
pub struct MatchOptions {
    pub mutual: bool,
    pub ratio: f64,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self { mutual: true, ratio: 0.0 }
    }
}

/// Matches every query point to its feature-space nearest target point,
/// constrained within symmetry sides: query side A pairs with target side A
/// and B with B, or the flipped association when `flip_sides` is set. The
/// per-side matches are concatenated (side A first). If any active side is
/// empty on either object, matching falls back to unconstrained and the set
/// is flagged side-inconsistent.
pub fn match_correspondences(
    query_features: &DMatrix<f64>,
    target_features: &DMatrix<f64>,
    query_sides: &[bool],
    target_sides: &[bool],
    flip_sides: bool,
    options: &MatchOptions,
) -> Result<CorrespondenceSet> {
    if query_features.nrows() == 0 || target_features.nrows() == 0 {
        return Err(Error::InvalidCloud("correspondence search needs nonempty feature sets".into()));
    }
    if query_features.ncols() != target_features.ncols() {
        return Err(Error::DimensionMismatch {
            expected: query_features.ncols(),
            got: target_features.ncols(),
        });
    }
    if query_sides.len() != query_features.nrows() || target_sides.len() != target_features.nrows() {
        return Err(Error::DimensionMismatch {
            expected: query_features.nrows(),
            got: query_sides.len(),
        });
    }

    let split = |sides: &[bool]| -> (Vec<usize>, Vec<usize>) {
        let a = (0..sides.len()).filter(|&i| sides[i]).collect();
        let b = (0..sides.len()).filter(|&i| !sides[i]).collect();
        (a, b)
    };
    let (qa, qb) = split(query_sides);
    let (ta, tb) = split(target_sides);
    let (first, second) = if flip_sides { ((&qa, &tb), (&qb, &ta)) } else { ((&qa, &ta), (&qb, &tb)) };

    let degenerate = [first, second]
        .iter()
        .any(|(q, t)| (q.is_empty() && !t.is_empty()) || (!q.is_empty() && t.is_empty()));
    if degenerate {
        let all_q: Vec<usize> = (0..query_features.nrows()).collect();
        let all_t: Vec<usize> = (0..target_features.nrows()).collect();
        let pairs = match_subset(query_features, target_features, &all_q, &all_t, options);
        return Ok(CorrespondenceSet { pairs, side_consistent: false });
    }

    let mut pairs = match_subset(query_features, target_features, first.0, first.1, options);
    pairs.extend(match_subset(query_features, target_features, second.0, second.1, options));
    Ok(CorrespondenceSet { pairs, side_consistent: true })
}

/// Nearest-neighbor matches from `q_subset` into `t_subset`, with optional
/// mutual filtering and ratio test.
fn match_subset(
    query_features: &DMatrix<f64>,
    target_features: &DMatrix<f64>,
    q_subset: &[usize],
    t_subset: &[usize],
    options: &MatchOptions,
) -> Vec<Correspondence> {
    if q_subset.is_empty() || t_subset.is_empty() {
        return Vec::new();
    }

    // (best target position, best d², second-best d²) per query point.
    let forward: Vec<(usize, f64, f64)> = q_subset
        .par_iter()
        .map(|&qi| nearest_two(query_features, qi, target_features, t_subset))
        .collect();

    let backward: Vec<usize> = if options.mutual {
        t_subset
            .par_iter()
            .map(|&ti| nearest_two(target_features, ti, query_features, q_subset).0)
            .collect()
    } else {
        Vec::new()
    };

    let mut pairs = Vec::with_capacity(q_subset.len());
    for (q_pos, &(t_pos, d2, second_d2)) in forward.iter().enumerate() {
        if options.mutual && backward[t_pos] != q_pos {
            continue;
        }
        if options.ratio > 0.0 && second_d2.is_finite() && d2 > options.ratio * options.ratio * second_d2
        {
            continue;
        }
        pairs.push(Correspondence {
            query: q_subset[q_pos],
            target: t_subset[t_pos],
            distance: d2.sqrt(),
        });
    }
    pairs
}

/// Positions (within `subset`) of the nearest and second-nearest rows of
/// `haystack` to row `row` of `needles`, by squared Euclidean distance, ties
/// to the lower subset position.
fn nearest_two(
    needles: &DMatrix<f64>,
    row: usize,
    haystack: &DMatrix<f64>,
    subset: &[usize],
) -> (usize, f64, f64) {
    let d = needles.ncols();
    let mut best = 0;
    let mut best_d2 = f64::INFINITY;
    let mut second_d2 = f64::INFINITY;
    for (pos, &hi) in subset.iter().enumerate() {
        let mut d2 = 0.0;
        for j in 0..d {
            let diff = needles[(row, j)] - haystack[(hi, j)];
            d2 += diff * diff;
        }
        if d2 < best_d2 {
            second_d2 = best_d2;
            best_d2 = d2;
            best = pos;
        } else if d2 < second_d2 {
            second_d2 = d2;
        }
    }
    (best, best_d2, second_d2)
}
