//! SMOTE oversampling followed by Tomek-link cleaning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{squared_distance, Dataset};
use crate::error::{Error, Result};
use crate::features::class_name;

pub const DEFAULT_K: usize = 5;

/// Which endpoints of a Tomek link are removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TomekPolicy {
    #[default]
    RemoveBoth,
    /// Remove only the endpoint from the larger class; both when sizes tie.
    RemoveMajority,
}

/// Indices of the `k` nearest members of `pool` to `pool[of]`, excluding itself.
/// Ties break by position in `pool`.
fn k_nearest(ds: &Dataset, pool: &[usize], of: usize, k: usize) -> Vec<usize> {
    let origin = ds.x.row(pool[of]);
    let mut cand: Vec<(f64, usize)> = pool
        .iter()
        .enumerate()
        .filter(|(p, _)| *p != of)
        .map(|(p, &i)| (squared_distance(origin, ds.x.row(i)), p))
        .collect();
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cand.truncate(k);
    cand.into_iter().map(|(_, p)| pool[p]).collect()
}

/// Grows every class to the majority count with interpolated synthetic rows.
///
/// Synthetic rows are appended after the originals, grouped by ascending class
/// code, with ids `synthetic:<class>:<n>`.
pub fn smote(ds: &Dataset, k: usize, seed: u64) -> Result<Dataset> {
    if k == 0 {
        return Err(Error::InvalidHyperparam("SMOTE k must be at least 1".into()));
    }
    let counts = ds.class_counts();
    let Some(&majority) = counts.values().max() else {
        return Ok(ds.clone());
    };
    let mut out = ds.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (&class, &n) in &counts {
        if n == majority {
            continue;
        }
        if n < 2 {
            return Err(Error::ClassTooSmall {
                class: class_name(class),
                size: n,
                needed: 2,
            });
        }
        let members: Vec<usize> = (0..ds.len()).filter(|&i| ds.y[i] == class).collect();
        let k_eff = k.min(n - 1);
        let neighbours: Vec<Vec<usize>> = (0..members.len())
            .map(|p| k_nearest(ds, &members, p, k_eff))
            .collect();
        for s in 0..majority - n {
            let p = rng.random_range(0..members.len());
            let nn = neighbours[p][rng.random_range(0..k_eff)];
            let u: f64 = rng.random();
            let base = ds.x.row(members[p]);
            let other = ds.x.row(nn);
            let row: Vec<f64> = base.iter().zip(other).map(|(a, b)| a + u * (b - a)).collect();
            out.x.push_row(&row)?;
            out.y.push(class);
            out.row_ids.push(format!("synthetic:{}:{s}", class_name(class)));
        }
    }
    Ok(out)
}

/// Nearest neighbour of every row (Euclidean, ties to the lower index).
fn nearest_neighbours(ds: &Dataset) -> Vec<usize> {
    (0..ds.len())
        .map(|i| {
            let mut best = (f64::INFINITY, usize::MAX);
            for j in 0..ds.len() {
                if j == i {
                    continue;
                }
                let d = squared_distance(ds.x.row(i), ds.x.row(j));
                if d < best.0 {
                    best = (d, j);
                }
            }
            best.1
        })
        .collect()
}

/// Opposite-class pairs `(i, j)`, `i < j`, that are each other's nearest neighbour.
pub fn tomek_links(ds: &Dataset) -> Vec<(usize, usize)> {
    if ds.len() < 2 {
        return Vec::new();
    }
    let nn = nearest_neighbours(ds);
    (0..ds.len())
        .filter_map(|i| {
            let j = nn[i];
            (i < j && nn[j] == i && ds.y[i] != ds.y[j]).then_some((i, j))
        })
        .collect()
}

/// Removes Tomek-link endpoints until no link remains. A single pass can expose
/// new mutual-nearest pairs, so cleaning repeats to a fixed point.
pub fn remove_tomek_links(ds: &Dataset, policy: TomekPolicy) -> Dataset {
    let mut current = ds.clone();
    loop {
        let links = tomek_links(&current);
        if links.is_empty() {
            return current;
        }
        let counts = current.class_counts();
        let mut drop = vec![false; current.len()];
        for (i, j) in links {
            match policy {
                TomekPolicy::RemoveBoth => {
                    drop[i] = true;
                    drop[j] = true;
                }
                TomekPolicy::RemoveMajority => {
                    let (ci, cj) = (counts[&current.y[i]], counts[&current.y[j]]);
                    if ci >= cj {
                        drop[i] = true;
                    }
                    if cj >= ci {
                        drop[j] = true;
                    }
                }
            }
        }
        let kept: Vec<usize> = (0..current.len()).filter(|&i| !drop[i]).collect();
        current = current.subset(&kept);
    }
}

pub fn smote_tomek(ds: &Dataset, k: usize, seed: u64) -> Result<Dataset> {
    smote_tomek_with(ds, k, seed, TomekPolicy::RemoveBoth)
}

pub fn smote_tomek_with(ds: &Dataset, k: usize, seed: u64, policy: TomekPolicy) -> Result<Dataset> {
    let balanced = smote(ds, k, seed)?;
    Ok(remove_tomek_links(&balanced, policy))
}
