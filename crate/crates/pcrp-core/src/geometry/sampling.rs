//! Farthest point sampling.

use crate::error::{Error, Result};

use super::PointCloud;

/// Greedy max-min subsampling: starting from `seed_index`, each step selects
/// the point farthest from the already-selected set. Ties go to the lower
/// index, so the result is deterministic.
pub fn farthest_point_sample(cloud: &PointCloud, m: usize, seed_index: usize) -> Result<Vec<usize>> {
    let n = cloud.len();
    if m == 0 || m > n {
        return Err(Error::SampleTooLarge { requested: m, available: n });
    }
    if seed_index >= n {
        return Err(Error::InvalidCloud(format!("seed index {seed_index} out of range for {n} points")));
    }

    let mut selected = Vec::with_capacity(m);
    let mut min_dist2 = vec![f64::INFINITY; n];
    let mut current = seed_index;
    selected.push(current);

    for _ in 1..m {
        let anchor = cloud.point(current);
        let mut best = 0;
        let mut best_dist = f64::NEG_INFINITY;
        for i in 0..n {
            let d2 = (cloud.point(i) - anchor).norm_squared();
            if d2 < min_dist2[i] {
                min_dist2[i] = d2;
            }
            if min_dist2[i] > best_dist {
                best_dist = min_dist2[i];
                best = i;
            }
        }
        current = best;
        selected.push(current);
        min_dist2[current] = f64::NEG_INFINITY;
    }
    Ok(selected)
}
