//! Training data: connected sub-complexes with masked cochain slots.

use std::collections::{BTreeSet, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::complex::{LaplacianSet, Simplex, SimplicialComplex};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, SeededRng};

/// Carries the retention mask of `reduced` (built over `global`) onto the
/// Laplacians of a sub-complex, so that a pair of simplices is coupled in
/// the sub-complex only if it is retained globally.
pub fn transfer_mask(
    global: &SimplicialComplex,
    reduced: &LaplacianSet,
    sub: &SimplicialComplex,
    sub_laps: &LaplacianSet,
) -> Result<LaplacianSet> {
    if reduced.num_orders() != global.num_orders() {
        return Err(Error::Shape {
            expected: global.num_orders(),
            got: reduced.num_orders(),
        });
    }
    if (0..reduced.num_orders()).all(|k| reduced.mask(k).is_none()) {
        return Ok(sub_laps.clone());
    }
    let mut masks = Vec::with_capacity(sub_laps.num_orders());
    for k in 0..sub_laps.num_orders() {
        let kept: BTreeSet<(usize, usize)> = match (k < reduced.num_orders()).then(|| reduced.mask(k)).flatten() {
            Some(m) => reduced
                .laplacian(k)
                .entries()
                .zip(m)
                .filter(|(_, keep)| **keep)
                .map(|((i, j, _), _)| (i, j))
                .collect(),
            _ => {
                masks.push(vec![true; sub_laps.laplacian(k).nnz()]);
                continue;
            }
        };
        let global_index = |i: usize| {
            global
                .locate(sub.simplex(k, i))
                .map(|(_, g)| g)
                .ok_or_else(|| Error::Validation(format!("{:?} is not in the global complex", sub.simplex(k, i))))
        };
        let mut mask = Vec::with_capacity(sub_laps.laplacian(k).nnz());
        for (i, j, _) in sub_laps.laplacian(k).entries() {
            mask.push(i == j || kept.contains(&(global_index(i)?, global_index(j)?)));
        }
        masks.push(mask);
    }
    sub_laps.with_masks(masks)
}

/// One masked training example.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub laps: LaplacianSet,
    /// Ground-truth cochains per order.
    pub truth: Vec<Vec<f64>>,
    /// Truth with masked slots replaced by placeholders.
    pub inputs: Vec<Vec<f64>>,
    /// Masked `(order, index)` slots.
    pub masked: Vec<(usize, usize)>,
    /// Masked slots whose embedding is supplied from the fully observed
    /// field, as a teacher would transmit it.
    pub remote: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Default)]
pub struct TrainBatch {
    pub samples: Vec<TrainSample>,
}

impl TrainBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Marks a `fraction` of each sample's masked slots as remote.
    pub fn assign_remote(&mut self, fraction: f64, seed: u64) -> Result<()> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::Config(format!("remote fraction {fraction} outside [0, 1]")));
        }
        for (s, sample) in self.samples.iter_mut().enumerate() {
            let mut rng = rng_from_seed(derive_seed(seed, "remote", s as u64));
            let mut slots = sample.masked.clone();
            slots.shuffle(&mut rng);
            let n = (fraction * slots.len() as f64).round() as usize;
            slots.truncate(n);
            slots.sort_unstable();
            sample.remote = slots;
        }
        Ok(())
    }
}

/// Integer placeholder drawn uniformly from `[1, c_max]`.
pub fn placeholder(rng: &mut SeededRng, c_max: f64) -> f64 {
    let hi = c_max.floor().max(1.0) as u64;
    rng.random_range(1..=hi) as f64
}

/// Draws `t` connected sub-complexes of roughly `size` simplices each.
///
/// A breadth-first walk over maximal simplices that share a vertex adds
/// each visited maximal simplex together with its faces until `size` is
/// reached. When the frontier runs dry the walk jumps to a random
/// unvisited maximal simplex.
pub fn downsample_subcomplexes(
    s: &SimplicialComplex,
    t: usize,
    size: usize,
    seed: u64,
) -> Result<Vec<SimplicialComplex>> {
    if size == 0 {
        return Err(Error::Config("sub-complex size must be positive".into()));
    }
    let tops = s.maximal_simplices();
    if tops.is_empty() {
        return Err(Error::Batch("cannot downsample an empty complex".into()));
    }
    let mut by_vertex: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, top) in tops.iter().enumerate() {
        for v in top.vertices() {
            by_vertex.entry(v.as_str()).or_default().push(i);
        }
    }
    let faces_of = |top: &Simplex| -> Vec<Simplex> {
        let v = top.vertices();
        (1u32..(1 << v.len()))
            .map(|bits| {
                Simplex::new((0..v.len()).filter(|b| bits >> b & 1 == 1).map(|b| v[b].clone()))
                    .expect("subsets of a simplex are simplices")
            })
            .collect()
    };

    (0..t)
        .map(|n| {
            let mut rng = rng_from_seed(derive_seed(seed, "downsample", n as u64));
            let mut visited = vec![false; tops.len()];
            let mut chosen: Vec<usize> = Vec::new();
            let mut faces: BTreeSet<Simplex> = BTreeSet::new();
            let mut queue = VecDeque::new();
            while faces.len() < size && chosen.len() < tops.len() {
                let next = match queue.pop_front() {
                    Some(i) => i,
                    None => {
                        let unvisited: Vec<usize> =
                            (0..tops.len()).filter(|&i| !visited[i]).collect();
                        let i = unvisited[rng.random_range(0..unvisited.len())];
                        visited[i] = true;
                        i
                    }
                };
                chosen.push(next);
                faces.extend(faces_of(&tops[next]));
                let mut nbrs: Vec<usize> = tops[next]
                    .vertices()
                    .iter()
                    .flat_map(|v| by_vertex[v.as_str()].iter().copied())
                    .filter(|&j| !visited[j])
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                nbrs.shuffle(&mut rng);
                for j in nbrs {
                    visited[j] = true;
                    queue.push_back(j);
                }
            }
            s.closure_of(chosen.iter().map(|&i| &tops[i]))
        })
        .collect()
}

/// Masks about `ceil(p_train * |S|)` slots of every sub-complex.
///
/// Masking is greedy over a shuffled candidate list. A candidate is taken
/// only if it and every slot masked before it keep an unmasked simplex of
/// the same order within `n_hop` hops. Sub-complexes where no slot
/// qualifies are rejected.
pub fn make_masked_batch(
    subs: &[SimplicialComplex],
    p_train: f64,
    n_hop: usize,
    c_max: f64,
    seed: u64,
) -> Result<TrainBatch> {
    if !(p_train > 0.0 && p_train <= 1.0) {
        return Err(Error::Config(format!("mask fraction {p_train} outside (0, 1]")));
    }
    if n_hop == 0 {
        return Err(Error::Config("n_hop must be at least 1".into()));
    }
    let mut samples = Vec::with_capacity(subs.len());
    for (n, sub) in subs.iter().enumerate() {
        let mut rng = rng_from_seed(derive_seed(seed, "mask", n as u64));
        let laps = LaplacianSet::from_complex(sub)?;
        let truth = sub.cochains();
        let target = (p_train * sub.len() as f64).ceil() as usize;

        let mut is_masked: Vec<Vec<bool>> = truth.iter().map(|c| vec![false; c.len()]).collect();
        let mut masked: Vec<(usize, usize)> = Vec::new();
        let mut candidates: Vec<(usize, usize)> = sub.slots().collect();
        candidates.shuffle(&mut rng);

        // Hop balls are reused across the greedy checks.
        let mut balls: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        let mut ball = |k: usize, i: usize| -> Result<Vec<usize>> {
            if let Some(b) = balls.get(&(k, i)) {
                return Ok(b.clone());
            }
            let b: Vec<usize> = laps
                .hop_distances(k, i)?
                .iter()
                .enumerate()
                .filter(|(j, d)| *j != i && d.is_some_and(|d| d <= n_hop))
                .map(|(j, _)| j)
                .collect();
            balls.insert((k, i), b.clone());
            Ok(b)
        };

        for (k, i) in candidates {
            if masked.len() >= target {
                break;
            }
            let own = ball(k, i)?;
            is_masked[k][i] = true;
            let mut ok = own.iter().any(|&j| !is_masked[k][j]);
            if ok {
                for &(mk, mi) in masked.iter().filter(|(mk, _)| *mk == k) {
                    if !ball(mk, mi)?.iter().any(|&j| !is_masked[mk][j]) {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                masked.push((k, i));
            } else {
                is_masked[k][i] = false;
            }
        }
        if masked.is_empty() {
            return Err(Error::Batch(format!(
                "sub-complex {n} has no simplex with an unmasked neighbour within {n_hop} hops"
            )));
        }
        masked.sort_unstable();
        let mut inputs = truth.clone();
        for &(k, i) in &masked {
            inputs[k][i] = placeholder(&mut rng, c_max);
        }
        samples.push(TrainSample {
            laps,
            truth,
            inputs,
            masked,
            remote: Vec::new(),
        });
    }
    Ok(TrainBatch { samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{random_walk_sample, synth_corpus};

    fn corpus_complex() -> SimplicialComplex {
        let g = synth_corpus(60, 200, 4, 10, 3).unwrap();
        let w = random_walk_sample(&g, 30, 1, 10, 4).unwrap();
        SimplicialComplex::build(&w)
    }

    #[test]
    fn subcomplexes_are_closed_and_sized() {
        let s = corpus_complex();
        let subs = downsample_subcomplexes(&s, 5, 30, 1).unwrap();
        assert_eq!(subs.len(), 5);
        for sub in &subs {
            assert!(sub.is_closed());
            assert!(sub.len() >= 30.min(s.len()));
            for (k, i) in sub.slots() {
                let simplex = sub.simplex(k, i);
                assert_eq!(sub.cochain_of(simplex), s.cochain_of(simplex));
            }
        }
    }

    #[test]
    fn masks_keep_an_unmasked_neighbour() {
        let s = corpus_complex();
        let subs = downsample_subcomplexes(&s, 4, 40, 2).unwrap();
        let batch = make_masked_batch(&subs, 0.3, 2, 10.0, 5).unwrap();
        for sample in &batch.samples {
            assert!(!sample.masked.is_empty());
            for &(k, i) in &sample.masked {
                let d = sample.laps.hop_distances(k, i).unwrap();
                let has = d.iter().enumerate().any(|(j, dj)| {
                    j != i
                        && dj.is_some_and(|x| x <= 2)
                        && !sample.masked.contains(&(k, j))
                });
                assert!(has, "slot ({k},{i}) orphaned");
                assert!((1.0..=10.0).contains(&sample.inputs[k][i]));
            }
        }
    }

    #[test]
    fn tiny_mask_fraction_masks_one_slot() {
        let s = corpus_complex();
        let subs = downsample_subcomplexes(&s, 2, 30, 2).unwrap();
        let batch = make_masked_batch(&subs, 1e-9, 1, 10.0, 5).unwrap();
        assert!(batch.samples.iter().all(|x| x.masked.len() == 1));
    }

    #[test]
    fn isolated_simplex_cannot_be_masked() {
        let s = SimplicialComplex::from_parts([(Simplex::new(["a"]).unwrap(), 3.0)]).unwrap();
        assert!(matches!(
            make_masked_batch(&[s], 0.5, 1, 10.0, 1),
            Err(Error::Batch(_))
        ));
    }

    #[test]
    fn remote_assignment_is_subset() {
        let s = corpus_complex();
        let subs = downsample_subcomplexes(&s, 3, 40, 2).unwrap();
        let mut batch = make_masked_batch(&subs, 0.4, 2, 10.0, 5).unwrap();
        batch.assign_remote(0.5, 1).unwrap();
        for sample in &batch.samples {
            assert!(sample.remote.iter().all(|r| sample.masked.contains(r)));
        }
    }
}
