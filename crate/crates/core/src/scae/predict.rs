use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::model::ScaeModel;
use crate::complex::LaplacianSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    /// `(order, index)` slots filled in this iteration.
    pub predicted: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursiveOutcome {
    pub cochains: Vec<Vec<f64>>,
    pub iterations: Vec<IterationLog>,
    /// Slots with no Laplacian path to a known simplex, filled with the
    /// mean known value of their order.
    pub fallback: Vec<(usize, usize)>,
}

/// Connected components of the operator pattern at one order.
fn components(laps: &LaplacianSet, k: usize) -> Vec<usize> {
    let op = laps.operator(k);
    let n = op.n_rows();
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = next;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for (v, _) in op.row(u) {
                if comp[v] == usize::MAX {
                    comp[v] = next;
                    queue.push_back(v);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Fills missing cochains in rounds.
///
/// Each round ranks the missing simplices by their strongest normalized
/// Laplacian coupling to a known simplex and predicts the top
/// `ceil(p_step * initial_missing)` of them, plus any tied with the last
/// one, from the generator. Predicted values become known for later
/// rounds. Missing slots enter the generator as the mean of `U(1, c_max)`.
pub fn recursive_predict(
    model: &ScaeModel,
    laps: &LaplacianSet,
    known: &[Vec<Option<f64>>],
    p_step: f64,
) -> Result<RecursiveOutcome> {
    if !(p_step > 0.0 && p_step <= 1.0) {
        return Err(Error::Config(format!("p_step {p_step} outside (0, 1]")));
    }
    if known.len() != laps.num_orders() {
        return Err(Error::Shape {
            expected: laps.num_orders(),
            got: known.len(),
        });
    }
    for (k, c) in known.iter().enumerate() {
        if c.len() != laps.size(k) {
            return Err(Error::Shape {
                expected: laps.size(k),
                got: c.len(),
            });
        }
    }
    let missing_total = known.iter().flatten().filter(|v| v.is_none()).count();
    let mut state: Vec<Vec<Option<f64>>> = known.to_vec();
    let mut outcome = RecursiveOutcome {
        cochains: Vec::new(),
        iterations: Vec::new(),
        fallback: Vec::new(),
    };
    if missing_total == 0 {
        outcome.cochains = state.into_iter().map(|c| c.into_iter().flatten().collect()).collect();
        return Ok(outcome);
    }
    if missing_total == known.iter().map(Vec::len).sum::<usize>() {
        return Err(Error::Validation("recursive prediction needs at least one known simplex".into()));
    }
    if laps.num_orders() > model.num_orders() {
        return Err(Error::Domain(format!(
            "structure has {} orders but the model covers {}",
            laps.num_orders(),
            model.num_orders()
        )));
    }

    // Missing slots without any known simplex in their component can
    // never be reached; they get the fallback up front.
    let all_known: Vec<f64> = known.iter().flatten().flatten().copied().collect();
    let global_mean = all_known.iter().sum::<f64>() / all_known.len() as f64;
    for k in 0..state.len() {
        let comp = components(laps, k);
        let n_comp = comp.iter().copied().max().map_or(0, |m| m + 1);
        let mut seeded = vec![false; n_comp];
        for (i, v) in state[k].iter().enumerate() {
            if v.is_some() {
                seeded[comp[i]] = true;
            }
        }
        let known_k: Vec<f64> = state[k].iter().flatten().copied().collect();
        let mean = if known_k.is_empty() {
            global_mean
        } else {
            known_k.iter().sum::<f64>() / known_k.len() as f64
        };
        for i in 0..state[k].len() {
            if state[k][i].is_none() && !seeded[comp[i]] {
                state[k][i] = Some(mean);
                outcome.fallback.push((k, i));
            }
        }
    }

    let quota = ((p_step * missing_total as f64).ceil() as usize).max(1);
    let fill = (1.0 + model.c_max().floor().max(1.0)) / 2.0;
    loop {
        let mut ranked: Vec<(f64, usize, usize)> = Vec::new();
        for (k, values) in state.iter().enumerate() {
            let op = laps.operator(k);
            for (i, v) in values.iter().enumerate() {
                if v.is_some() {
                    continue;
                }
                let score = op
                    .row(i)
                    .filter(|&(j, _)| j != i && values[j].is_some())
                    .map(|(_, w)| w.abs())
                    .fold(0.0, f64::max);
                ranked.push((score, k, i));
            }
        }
        if ranked.is_empty() {
            break;
        }
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        let mut take = quota.min(ranked.len());
        let cutoff = ranked[take - 1].0;
        while take < ranked.len() && ranked[take].0 == cutoff {
            take += 1;
        }
        let chosen: Vec<(usize, usize)> = ranked[..take].iter().map(|&(_, k, i)| (k, i)).collect();

        let mut predictions = Vec::with_capacity(chosen.len());
        for k in 0..state.len() {
            if !chosen.iter().any(|c| c.0 == k) {
                continue;
            }
            let field: Vec<f64> = state[k].iter().map(|v| v.unwrap_or(fill)).collect();
            let op = laps.operator(k);
            let out = model.generate(op, k, model.encode(op, k, &field)?)?;
            for &(ck, i) in chosen.iter().filter(|c| c.0 == k) {
                predictions.push((ck, i, out[i]));
            }
        }
        for (k, i, v) in predictions {
            state[k][i] = Some(v);
        }
        let mut predicted = chosen;
        predicted.sort_unstable();
        outcome.iterations.push(IterationLog { predicted });
    }
    outcome.cochains = state
        .into_iter()
        .map(|c| c.into_iter().map(|v| v.expect("every slot filled")).collect())
        .collect();
    Ok(outcome)
}
