//! Structure reduction by Laplacian ranking.
//!
//! Edge minimization drops off-diagonal couplings whose normalized
//! magnitude is at most `l`. Simplex minimization isolates every simplex
//! whose degree, normalized by the largest degree of its order, is at most
//! `l`. The random baseline drops a uniformly chosen fraction of couplings.
//! Masked simplices keep their diagonal, so vector shapes never change.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::complex::LaplacianSet;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    EdgeLaplacian,
    SimplexDegree,
    RandomEdge,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::EdgeLaplacian, Scheme::SimplexDegree, Scheme::RandomEdge];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::EdgeLaplacian => "edge-laplacian",
            Scheme::SimplexDegree => "simplex-degree",
            Scheme::RandomEdge => "random-edge",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme {s}")))
    }
}

/// Per-order accounting. Edges are unordered off-diagonal pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderCounts {
    pub order: usize,
    pub original_edges: usize,
    pub retained_edges: usize,
    pub original_simplices: usize,
    pub retained_simplices: usize,
    /// Sum of `|L_ij|` over the original off-diagonal pairs.
    pub original_weight: f64,
    pub retained_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub scheme: Scheme,
    pub threshold: Option<f64>,
    pub fraction: Option<f64>,
    pub per_order: Vec<OrderCounts>,
    /// Retained off-diagonal pairs over original off-diagonal pairs.
    pub retained_fraction: f64,
}

impl ReductionReport {
    pub const CSV_HEADER: &'static str = "scheme,threshold,fraction,order,original_edges,\
        retained_edges,original_simplices,retained_simplices,original_weight,retained_weight,\
        retained_fraction";

    pub fn csv_rows(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.6}"));
        self.per_order
            .iter()
            .map(|c| {
                format!(
                    "{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6}",
                    self.scheme,
                    opt(self.threshold),
                    opt(self.fraction),
                    c.order,
                    c.original_edges,
                    c.retained_edges,
                    c.original_simplices,
                    c.retained_simplices,
                    c.original_weight,
                    c.retained_weight,
                    self.retained_fraction
                )
            })
            .collect()
    }

    pub fn retained_edges(&self) -> usize {
        self.per_order.iter().map(|c| c.retained_edges).sum()
    }

    pub fn original_edges(&self) -> usize {
        self.per_order.iter().map(|c| c.original_edges).sum()
    }
}

fn current_masks(laps: &LaplacianSet) -> Vec<Vec<bool>> {
    (0..laps.num_orders())
        .map(|k| match laps.mask(k) {
            Some(m) => m.to_vec(),
            None => vec![true; laps.laplacian(k).nnz()],
        })
        .collect()
}

fn report(
    original: &LaplacianSet,
    masks: &[Vec<bool>],
    removed_simplices: &[Vec<bool>],
    scheme: Scheme,
    threshold: Option<f64>,
    fraction: Option<f64>,
) -> ReductionReport {
    let mut per_order = Vec::with_capacity(original.num_orders());
    let (mut kept, mut total) = (0usize, 0usize);
    for k in 0..original.num_orders() {
        let l = original.laplacian(k);
        let mut c = OrderCounts {
            order: k,
            original_edges: 0,
            retained_edges: 0,
            original_simplices: l.n_rows(),
            retained_simplices: removed_simplices[k].iter().filter(|r| !**r).count(),
            original_weight: 0.0,
            retained_weight: 0.0,
        };
        for ((i, j, v), &keep) in l.entries().zip(&masks[k]) {
            if i < j {
                c.original_edges += 1;
                c.original_weight += v.abs();
                if keep {
                    c.retained_edges += 1;
                    c.retained_weight += v.abs();
                }
            }
        }
        kept += c.retained_edges;
        total += c.original_edges;
        per_order.push(c);
    }
    ReductionReport {
        scheme,
        threshold,
        fraction,
        per_order,
        retained_fraction: if total == 0 { 1.0 } else { kept as f64 / total as f64 },
    }
}

fn no_removed(laps: &LaplacianSet) -> Vec<Vec<bool>> {
    (0..laps.num_orders())
        .map(|k| vec![false; laps.size(k)])
        .collect()
}

/// Removes couplings with `|normalized L_ij| <= l`, `i != j`.
pub fn minimize_edges(laps: &LaplacianSet, l: f64) -> Result<(LaplacianSet, ReductionReport)> {
    if !(l >= 0.0) {
        return Err(Error::Domain(format!("threshold {l} must be non-negative")));
    }
    let mut masks = current_masks(laps);
    for (k, mask) in masks.iter_mut().enumerate() {
        for (slot, (i, j, v)) in mask.iter_mut().zip(laps.normalized(k).entries()) {
            if i != j && v.abs() <= l {
                *slot = false;
            }
        }
    }
    let out = laps.with_masks(masks.clone())?;
    let rep = report(laps, &masks, &no_removed(laps), Scheme::EdgeLaplacian, Some(l), None);
    Ok((out, rep))
}

/// Degree of each simplex divided by the largest degree of its order.
pub fn normalized_degrees(laps: &LaplacianSet, k: usize) -> Vec<f64> {
    let d = laps.laplacian(k).diagonal();
    let max = d.iter().copied().fold(0.0, f64::max);
    d.iter()
        .map(|&x| if max > 0.0 { x / max } else { 0.0 })
        .collect()
}

/// Isolates simplices whose normalized degree is at most `l`.
pub fn minimize_simplices(laps: &LaplacianSet, l: f64) -> Result<(LaplacianSet, ReductionReport)> {
    if !(l >= 0.0) {
        return Err(Error::Domain(format!("threshold {l} must be non-negative")));
    }
    let mut masks = current_masks(laps);
    let mut removed = no_removed(laps);
    for k in 0..laps.num_orders() {
        for (r, d) in removed[k].iter_mut().zip(normalized_degrees(laps, k)) {
            *r = d <= l;
        }
        for (slot, (i, j, _)) in masks[k].iter_mut().zip(laps.laplacian(k).entries()) {
            if i != j && (removed[k][i] || removed[k][j]) {
                *slot = false;
            }
        }
    }
    let out = laps.with_masks(masks.clone())?;
    let rep = report(laps, &masks, &removed, Scheme::SimplexDegree, Some(l), None);
    Ok((out, rep))
}

/// Removes a uniformly random `fraction` of the off-diagonal pairs.
pub fn minimize_random(
    laps: &LaplacianSet,
    fraction: f64,
    seed: u64,
) -> Result<(LaplacianSet, ReductionReport)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Domain(format!("fraction {fraction} outside [0, 1]")));
    }
    let pairs: Vec<(usize, usize, usize)> = (0..laps.num_orders())
        .flat_map(|k| {
            laps.laplacian(k)
                .entries()
                .filter(|(i, j, _)| i < j)
                .map(move |(i, j, _)| (k, i, j))
                .collect::<Vec<_>>()
        })
        .collect();
    let n_remove = ((fraction * pairs.len() as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut rng = rng_from_seed(seed);
    let mut drop: Vec<std::collections::HashSet<(usize, usize)>> =
        vec![Default::default(); laps.num_orders()];
    for p in sample(&mut rng, pairs.len(), n_remove.min(pairs.len())) {
        let (k, i, j) = pairs[p];
        drop[k].insert((i, j));
        drop[k].insert((j, i));
    }
    let mut masks = current_masks(laps);
    for (k, mask) in masks.iter_mut().enumerate() {
        for (slot, (i, j, _)) in mask.iter_mut().zip(laps.laplacian(k).entries()) {
            if drop[k].contains(&(i, j)) {
                *slot = false;
            }
        }
    }
    let out = laps.with_masks(masks.clone())?;
    let rep = report(laps, &masks, &no_removed(laps), Scheme::RandomEdge, None, Some(fraction));
    Ok((out, rep))
}

fn count_to_remove(target: f64, total: usize) -> usize {
    ((target * total as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Smallest edge threshold whose retained fraction is at most `1 - target`.
pub fn threshold_for_fraction(laps: &LaplacianSet, target: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::Domain(format!("target {target} outside [0, 1]")));
    }
    let mut mags: Vec<f64> = (0..laps.num_orders())
        .flat_map(|k| {
            laps.normalized(k)
                .entries()
                .filter(|(i, j, _)| i < j)
                .map(|(_, _, v)| v.abs())
                .collect::<Vec<_>>()
        })
        .collect();
    mags.sort_by(f64::total_cmp);
    let r = count_to_remove(target, mags.len());
    Ok(if r == 0 { 0.0 } else { mags[r - 1] })
}

/// Smallest normalized-degree threshold whose simplex minimization keeps at
/// most `1 - target` of the off-diagonal pairs.
pub fn degree_threshold_for_fraction(laps: &LaplacianSet, target: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::Domain(format!("target {target} outside [0, 1]")));
    }
    // Each pair disappears once the threshold reaches the smaller of its
    // endpoint degrees.
    let mut cut: Vec<f64> = Vec::new();
    for k in 0..laps.num_orders() {
        let d = normalized_degrees(laps, k);
        cut.extend(
            laps.laplacian(k)
                .entries()
                .filter(|(i, j, _)| i < j)
                .map(|(i, j, _)| d[i].min(d[j])),
        );
    }
    cut.sort_by(f64::total_cmp);
    let r = count_to_remove(target, cut.len());
    Ok(if r == 0 { 0.0 } else { cut[r - 1] })
}

/// Reduces to the requested fraction with the given scheme.
pub fn reduce_to_fraction(
    laps: &LaplacianSet,
    scheme: Scheme,
    target: f64,
    seed: u64,
) -> Result<(LaplacianSet, ReductionReport)> {
    let (out, mut rep) = match scheme {
        Scheme::EdgeLaplacian => minimize_edges(laps, threshold_for_fraction(laps, target)?)?,
        Scheme::SimplexDegree => {
            minimize_simplices(laps, degree_threshold_for_fraction(laps, target)?)?
        }
        Scheme::RandomEdge => minimize_random(laps, target, seed)?,
    };
    rep.fraction = Some(target);
    Ok((out, rep))
}
