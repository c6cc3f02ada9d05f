//! Teacher/student query protocol.
//!
//! The teacher holds every cochain. The student holds some cochains exactly
//! and caches embeddings it has received. For a query simplex the student
//! gathers a same-order neighbourhood `H`, keeps a locally handled part `G`
//! and asks the teacher for the embeddings of the rest `T`. The generator
//! then decodes the assembled embedding field at the query slot.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::channel::{transmit, ChannelConfig};
use crate::complex::{LaplacianSet, Simplex, SimplicialComplex};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use crate::scae::{embedding_at, placeholder, set_embedding, ScaeModel};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    /// Hop radius of the query neighbourhood.
    pub n_hop: usize,
    pub tau_acc: f64,
    /// Round generated answers to the nearest integer; citations are
    /// counts.
    pub round_predictions: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            n_hop: 2,
            tau_acc: 0.05,
            round_predictions: true,
        }
    }
}

/// What one agent holds per `(order, index)` slot.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeState {
    known: Vec<Vec<Option<f64>>>,
    received: Vec<Vec<Option<Vec<f64>>>>,
}

impl KnowledgeState {
    /// Teacher state: every cochain known.
    pub fn complete(s: &SimplicialComplex) -> Self {
        KnowledgeState {
            known: s.cochains().into_iter().map(|c| c.into_iter().map(Some).collect()).collect(),
            received: (0..s.num_orders()).map(|k| vec![None; s.count(k)]).collect(),
        }
    }

    /// A student knowing `round(fraction * |S|)` cochains chosen uniformly.
    pub fn partial(s: &SimplicialComplex, fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::Config(format!("knowledge fraction {fraction} outside [0, 1]")));
        }
        let slots: Vec<(usize, usize)> = s.slots().collect();
        let n = (fraction * slots.len() as f64).round() as usize;
        let mut rng = rng_from_seed(seed);
        let mut state = KnowledgeState {
            known: (0..s.num_orders()).map(|k| vec![None; s.count(k)]).collect(),
            received: (0..s.num_orders()).map(|k| vec![None; s.count(k)]).collect(),
        };
        for idx in sample(&mut rng, slots.len(), n) {
            let (k, i) = slots[idx];
            state.known[k][i] = Some(s.cochain(k)[i]);
        }
        Ok(state)
    }

    pub fn value(&self, k: usize, i: usize) -> Option<f64> {
        self.known[k][i]
    }

    pub fn is_known(&self, k: usize, i: usize) -> bool {
        self.known[k][i].is_some()
    }

    pub fn embedding(&self, k: usize, i: usize) -> Option<&[f64]> {
        self.received[k][i].as_deref()
    }

    /// Known exactly or held as a received embedding.
    pub fn holds(&self, k: usize, i: usize) -> bool {
        self.is_known(k, i) || self.received[k][i].is_some()
    }

    pub fn known_count(&self) -> usize {
        self.known.iter().flatten().filter(|v| v.is_some()).count()
    }

    pub fn held_count(&self) -> usize {
        self.known
            .iter()
            .zip(&self.received)
            .flat_map(|(a, b)| a.iter().zip(b))
            .filter(|(a, b)| a.is_some() || b.is_some())
            .count()
    }

    /// Every slot this state knows exactly is known with the same value in
    /// `other`.
    pub fn is_subset_of(&self, other: &KnowledgeState) -> bool {
        self.known
            .iter()
            .zip(&other.known)
            .all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.is_none() || x == y))
    }
}

/// Same-order simplices within `n_hop` hops of `q` in the complex,
/// including `q`, in index order. Reduction masks do not shrink it.
pub fn query_neighbourhood(laps: &LaplacianSet, k: usize, q: usize, n_hop: usize) -> Result<Vec<usize>> {
    Ok(laps
        .structural_hop_distances(k, q)?
        .iter()
        .enumerate()
        .filter(|(_, d)| d.is_some_and(|d| d <= n_hop))
        .map(|(j, _)| j)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub g: Vec<usize>,
    pub t: Vec<usize>,
}

fn coupling(op: &CsrMatrix, q: usize, j: usize) -> f64 {
    if j == q {
        1.0
    } else {
        op.get(q, j).abs()
    }
}

/// Splits `h` into the locally handled `G` and the teacher-sent `T`.
///
/// Members the student knows come first, strongest coupling to `q` first.
/// Unknown members follow weakest first, so the strongly coupled gaps are
/// the ones left for the teacher. `G` takes the first `ceil(p_local * |h|)`
/// members. Ties fall back to index order.
pub fn student_split(
    h: &[usize],
    q: usize,
    p_local: f64,
    op: &CsrMatrix,
    known: impl Fn(usize) -> bool,
) -> Result<Split> {
    if !(0.0..=1.0).contains(&p_local) {
        return Err(Error::Config(format!("p_local {p_local} outside [0, 1]")));
    }
    let mut ranked: Vec<(bool, f64, usize)> = h.iter().map(|&j| (known(j), coupling(op, q, j), j)).collect();
    ranked.sort_by(|a, b| {
        b.0.cmp(&a.0).then_with(|| {
            if a.0 {
                b.1.total_cmp(&a.1)
            } else {
                a.1.total_cmp(&b.1)
            }
            .then(a.2.cmp(&b.2))
        })
    });
    let n_g = ((p_local * h.len() as f64).ceil() as usize).min(h.len());
    let mut g: Vec<usize> = ranked[..n_g].iter().map(|r| r.2).collect();
    let mut t: Vec<usize> = ranked[n_g..].iter().map(|r| r.2).collect();
    g.sort_unstable();
    t.sort_unstable();
    Ok(Split { g, t })
}

/// Embeddings delivered by the teacher for one query.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Received {
    pub order: usize,
    pub slots: Vec<usize>,
    pub embeddings: Vec<Vec<f64>>,
    pub symbols: usize,
}

impl Received {
    pub fn get(&self, i: usize) -> Option<&[f64]> {
        self.slots.iter().position(|&s| s == i).map(|p| self.embeddings[p].as_slice())
    }
}

/// Teacher side: encode its full order-`k` field and send the embeddings of
/// `t` through the channel.
pub fn teacher_respond(
    t: &[usize],
    k: usize,
    truth: &[f64],
    model: &ScaeModel,
    laps: &LaplacianSet,
    cfg: &ChannelConfig,
) -> Result<Received> {
    if t.is_empty() {
        return Ok(Received {
            order: k,
            ..Received::default()
        });
    }
    let hidden = model.encode(laps.operator(k), k, truth)?;
    let payload: Vec<f64> = t.iter().flat_map(|&i| embedding_at(&hidden, i)).collect();
    let tx = transmit(&payload, cfg);
    let w = model.embedding_width();
    Ok(Received {
        order: k,
        slots: t.to_vec(),
        embeddings: tx.payload.chunks(w).map(<[f64]>::to_vec).collect(),
        symbols: tx.symbols,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryContext {
    pub simplex: Simplex,
    pub order: usize,
    pub index: usize,
    pub h: Vec<usize>,
    pub g: Vec<usize>,
    pub t: Vec<usize>,
    /// Members of `T` whose embedding the student did not already hold.
    pub t_new: Vec<usize>,
    pub p_local: f64,
    pub prediction: Option<f64>,
    pub truth: f64,
    pub low_confidence: bool,
}

/// Student side: assemble the order-`k` embedding field and decode the
/// query slot.
///
/// Slots in `T` carry the teacher's embeddings. Other slots carry the local
/// encoding of exact values, cached embeddings, or `U(1, c_max)`
/// placeholders. A query the student knows exactly and keeps in `G` is
/// answered from local knowledge.
pub fn student_infer(
    ctx: &QueryContext,
    model: &ScaeModel,
    laps: &LaplacianSet,
    state: &KnowledgeState,
    received: &Received,
    cfg: &ProtocolConfig,
    placeholder_seed: u64,
) -> Result<f64> {
    let k = ctx.order;
    if k >= laps.num_orders() || ctx.index >= laps.size(k) {
        return Err(Error::Domain(format!("query slot ({k}, {}) not in structure", ctx.index)));
    }
    if ctx.g.binary_search(&ctx.index).is_ok() {
        if let Some(v) = state.value(k, ctx.index) {
            return Ok(v);
        }
    }
    let mut rng = rng_from_seed(placeholder_seed);
    let in_t: BTreeSet<usize> = ctx.t.iter().copied().collect();
    let field: Vec<f64> = (0..laps.size(k))
        .map(|i| match state.value(k, i) {
            Some(v) if !in_t.contains(&i) => v,
            _ => placeholder(&mut rng, model.c_max()),
        })
        .collect();
    let op = laps.operator(k);
    let mut hidden = model.encode(op, k, &field)?;
    for i in 0..laps.size(k) {
        let emb = if in_t.contains(&i) {
            received.get(i).or_else(|| state.embedding(k, i)).ok_or_else(|| {
                Error::State(format!("no teacher embedding for slot ({k}, {i})"))
            })?
        } else if state.is_known(k, i) {
            continue;
        } else if let Some(e) = state.embedding(k, i) {
            e
        } else {
            continue;
        };
        set_embedding(&mut hidden, i, emb);
    }
    let out = model.generate(op, k, hidden)?;
    let v = out[ctx.index];
    Ok(if cfg.round_predictions { v.round() } else { v })
}

/// Caches every embedding received this round.
pub fn update_knowledge(state: &mut KnowledgeState, received: &Received) {
    for (&i, e) in received.slots.iter().zip(&received.embeddings) {
        state.received[received.order][i] = Some(e.clone());
    }
}

/// Fraction of `(prediction, truth)` pairs with relative error at most
/// `tau`.
pub fn accuracy(pairs: &[(f64, f64)], tau: f64) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::UndefinedMetric);
    }
    if !(tau > 0.0) {
        return Err(Error::Config(format!("tau {tau} must be positive")));
    }
    let hits = pairs.iter().filter(|(p, c)| is_correct(*p, *c, tau)).count();
    Ok(hits as f64 / pairs.len() as f64)
}

pub fn is_correct(prediction: f64, truth: f64, tau: f64) -> bool {
    (prediction - truth).abs() / truth.max(1.0) <= tau
}

/// One line of the query trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryTrace {
    pub sigma_q: Vec<String>,
    pub order: usize,
    pub h: usize,
    pub g: usize,
    pub t: usize,
    pub t_new: usize,
    pub symbols: usize,
    /// `None` for a noiseless channel.
    pub snr_db: Option<f64>,
    pub prediction: f64,
    pub truth: f64,
    pub correct: bool,
    pub low_confidence: bool,
}

/// A student session against one teacher over a shared structure.
pub struct Session<'a> {
    pub teacher: &'a SimplicialComplex,
    pub laps: &'a LaplacianSet,
    pub model: &'a ScaeModel,
    pub student: KnowledgeState,
    pub cfg: ProtocolConfig,
}

impl<'a> Session<'a> {
    pub fn new(
        teacher: &'a SimplicialComplex,
        laps: &'a LaplacianSet,
        model: &'a ScaeModel,
        student: KnowledgeState,
        cfg: ProtocolConfig,
    ) -> Result<Self> {
        if laps.num_orders() != teacher.num_orders()
            || (0..laps.num_orders()).any(|k| laps.size(k) != teacher.count(k))
        {
            return Err(Error::Validation("structure does not match the teacher complex".into()));
        }
        Ok(Session {
            teacher,
            laps,
            model,
            student,
            cfg,
        })
    }

    /// Runs one query end to end and folds the received embeddings into
    /// the student state.
    pub fn query(&mut self, simplex: &Simplex, p_local: f64, channel: &ChannelConfig, seed: u64) -> Result<(QueryContext, QueryTrace)> {
        let (k, q) = self
            .teacher
            .locate(simplex)
            .ok_or_else(|| Error::Domain(format!("simplex {:?} not in structure", simplex.vertices())))?;
        let h = query_neighbourhood(self.laps, k, q, self.cfg.n_hop)?;
        let split = student_split(&h, q, p_local, self.laps.operator(k), |j| self.student.is_known(k, j))?;
        let t_new: Vec<usize> = split.t.iter().copied().filter(|&j| self.student.embedding(k, j).is_none()).collect();
        let low_confidence = !h.iter().any(|&j| j != q && self.student.holds(k, j)) && split.t.is_empty();
        let mut ctx = QueryContext {
            simplex: simplex.clone(),
            order: k,
            index: q,
            h,
            g: split.g,
            t: split.t,
            t_new,
            p_local,
            prediction: None,
            truth: self.teacher.cochain(k)[q],
            low_confidence,
        };
        let received = teacher_respond(
            &ctx.t_new,
            k,
            self.teacher.cochain(k),
            self.model,
            self.laps,
            &channel.with_seed(derive_seed(seed, "channel", 0)),
        )?;
        let prediction = student_infer(
            &ctx,
            self.model,
            self.laps,
            &self.student,
            &received,
            &self.cfg,
            derive_seed(seed, "placeholder", 0),
        )?;
        update_knowledge(&mut self.student, &received);
        ctx.prediction = Some(prediction);
        let trace = QueryTrace {
            sigma_q: simplex.vertices().to_vec(),
            order: k,
            h: ctx.h.len(),
            g: ctx.g.len(),
            t: ctx.t.len(),
            t_new: ctx.t_new.len(),
            symbols: received.symbols,
            snr_db: (!channel.is_noiseless()).then_some(channel.snr_db),
            prediction,
            truth: ctx.truth,
            correct: is_correct(prediction, ctx.truth, self.cfg.tau_acc),
            low_confidence,
        };
        Ok((ctx, trace))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryOutcome {
    pub traces: Vec<QueryTrace>,
    pub accuracy: f64,
    pub symbols: usize,
}

/// Uniformly drawn distinct query simplices, at most `n`.
pub fn sample_queries(s: &SimplicialComplex, n: usize, seed: u64) -> Vec<Simplex> {
    let slots: Vec<(usize, usize)> = s.slots().collect();
    let mut rng = rng_from_seed(seed);
    sample(&mut rng, slots.len(), n.min(slots.len()))
        .into_iter()
        .map(|idx| {
            let (k, i) = slots[idx];
            s.simplex(k, i).clone()
        })
        .collect()
}

/// Runs `queries` in order through one session.
pub fn run_battery(
    session: &mut Session<'_>,
    queries: &[Simplex],
    p_local: f64,
    channel: &ChannelConfig,
    seed: u64,
) -> Result<BatteryOutcome> {
    let mut traces = Vec::with_capacity(queries.len());
    for (n, q) in queries.iter().enumerate() {
        let (_, trace) = session.query(q, p_local, channel, derive_seed(seed, "query", n as u64))?;
        traces.push(trace);
    }
    let pairs: Vec<(f64, f64)> = traces.iter().map(|t| (t.prediction, t.truth)).collect();
    Ok(BatteryOutcome {
        accuracy: accuracy(&pairs, session.cfg.tau_acc)?,
        symbols: traces.iter().map(|t| t.symbols).sum(),
        traces,
    })
}

/// Writes traces as JSON Lines.
pub fn write_traces(path: impl AsRef<Path>, traces: &[QueryTrace]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for t in traces {
        serde_json::to_writer(&mut out, t)?;
        out.push(b'\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(path, e))
}

/// Accuracy per query order, for diagnostics.
pub fn accuracy_by_order(traces: &[QueryTrace]) -> BTreeMap<usize, f64> {
    let mut tally: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for t in traces {
        let e = tally.entry(t.order).or_default();
        e.0 += usize::from(t.correct);
        e.1 += 1;
    }
    tally.into_iter().map(|(k, (c, n))| (k, c as f64 / n as f64)).collect()
}
