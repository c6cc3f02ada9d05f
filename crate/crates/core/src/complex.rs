//! Coauthorship simplicial complexes, their cochains, incidence matrices and
//! Hodge Laplacians.
//!
//! Orientation is induced by the lexicographic order of author ids: a
//! simplex is stored with sorted vertices and its `p`-th face (vertex `p`
//! dropped) enters the boundary with sign `(-1)^p`.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::BipartiteGraph;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Guard used when normalizing by a zero diagonal.
pub const NORMALIZATION_EPS: f64 = 1e-12;

/// An unoriented simplex in canonical (sorted) vertex order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Simplex(Vec<String>);

impl Simplex {
    /// Sorts the vertices; rejects empty or repeated vertex lists.
    pub fn new<S: Into<String>>(vertices: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut v: Vec<String> = vertices.into_iter().map(Into::into).collect();
        if v.is_empty() {
            return Err(Error::Domain("a simplex needs at least one vertex".into()));
        }
        v.sort();
        if v.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain(format!("repeated vertex in {v:?}")));
        }
        Ok(Simplex(v))
    }

    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    pub fn vertices(&self) -> &[String] {
        &self.0
    }

    /// The `p`-th face (vertex `p` removed). Panics on a 0-simplex.
    pub fn face(&self, p: usize) -> Simplex {
        assert!(self.0.len() > 1, "a vertex has no faces");
        let mut v = self.0.clone();
        v.remove(p);
        Simplex(v)
    }

    /// Faces with their boundary signs `(-1)^p`.
    pub fn signed_faces(&self) -> impl Iterator<Item = (Simplex, i8)> + '_ {
        let n = if self.0.len() > 1 { self.0.len() } else { 0 };
        (0..n).map(move |p| (self.face(p), if p % 2 == 0 { 1 } else { -1 }))
    }

    pub fn is_subset_of(&self, other: &Simplex) -> bool {
        // both sorted
        let mut it = other.0.iter();
        self.0.iter().all(|v| it.any(|w| w == v))
    }

    fn subsets_of(vertices: &[String]) -> impl Iterator<Item = Simplex> + '_ {
        let n = vertices.len();
        (1u64..(1u64 << n)).map(move |bits| {
            Simplex(
                (0..n)
                    .filter(|i| bits & (1 << i) != 0)
                    .map(|i| vertices[i].clone())
                    .collect(),
            )
        })
    }
}

impl TryFrom<Vec<String>> for Simplex {
    type Error = Error;
    fn try_from(v: Vec<String>) -> Result<Self> {
        Simplex::new(v)
    }
}

impl From<Simplex> for Vec<String> {
    fn from(s: Simplex) -> Self {
        s.0
    }
}

impl fmt::Display for Simplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.0.join(","))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct OrderData {
    simplices: Vec<Simplex>,
    index: HashMap<Simplex, usize>,
    cochain: Vec<f64>,
}

impl OrderData {
    fn from_sorted(entries: Vec<(Simplex, f64)>) -> Self {
        let mut data = OrderData::default();
        for (i, (s, c)) in entries.into_iter().enumerate() {
            data.index.insert(s.clone(), i);
            data.simplices.push(s);
            data.cochain.push(c);
        }
        data
    }
}

/// A simplicial complex with one real cochain per order.
///
/// Simplices of each order are indexed densely in canonical order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimplicialComplex {
    orders: Vec<OrderData>,
}

/// JSON dump layout: one entry per order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexDump {
    pub orders: Vec<OrderDump>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderDump {
    pub simplices: Vec<Simplex>,
    pub cochains: Vec<f64>,
}

impl SimplicialComplex {
    /// Every paper's author set becomes a simplex together with all its
    /// faces; the cochain of a simplex is the summed citations of every
    /// paper whose author set contains it. Cost is exponential in the
    /// largest author list.
    pub fn build(g: &BipartiteGraph) -> Self {
        let mut acc: BTreeMap<Simplex, f64> = BTreeMap::new();
        for paper in g.papers() {
            let mut authors = paper.authors.clone();
            authors.sort();
            for s in Simplex::subsets_of(&authors) {
                *acc.entry(s).or_insert(0.0) += paper.citations as f64;
            }
        }
        Self::from_closed_map(acc)
    }

    fn from_closed_map(acc: BTreeMap<Simplex, f64>) -> Self {
        let mut per_order: Vec<Vec<(Simplex, f64)>> = Vec::new();
        for (s, c) in acc {
            let k = s.order();
            if per_order.len() <= k {
                per_order.resize_with(k + 1, Vec::new);
            }
            per_order[k].push((s, c));
        }
        SimplicialComplex {
            orders: per_order.into_iter().map(OrderData::from_sorted).collect(),
        }
    }

    /// Builds a complex from explicit simplices and cochains. The set must
    /// be closed under faces and cochains must be finite and non-negative.
    pub fn from_parts(entries: impl IntoIterator<Item = (Simplex, f64)>) -> Result<Self> {
        let mut acc = BTreeMap::new();
        for (s, c) in entries {
            if !c.is_finite() || c < 0.0 {
                return Err(Error::Validation(format!("cochain {c} at {s} is invalid")));
            }
            let shown = s.to_string();
            if acc.insert(s, c).is_some() {
                return Err(Error::Validation(format!("simplex {shown} listed twice")));
            }
        }
        for s in acc.keys() {
            if let Some((face, _)) = s.signed_faces().find(|(f, _)| !acc.contains_key(f)) {
                return Err(Error::Validation(format!("face {face} of {s} is missing")));
            }
        }
        Ok(Self::from_closed_map(acc))
    }

    /// The closure of `tops` inside `self`, with cochains copied over.
    pub fn closure_of<'a>(&self, tops: impl IntoIterator<Item = &'a Simplex>) -> Result<Self> {
        let mut acc = BTreeMap::new();
        for top in tops {
            for s in Simplex::subsets_of(top.vertices()) {
                if !acc.contains_key(&s) {
                    let c = self
                        .cochain_of(&s)
                        .ok_or_else(|| Error::Domain(format!("{s} is not in the complex")))?;
                    acc.insert(s, c);
                }
            }
        }
        Ok(Self::from_closed_map(acc))
    }

    /// Highest order present, `None` for the empty complex.
    pub fn max_order(&self) -> Option<usize> {
        self.orders.len().checked_sub(1)
    }

    pub fn num_orders(&self) -> usize {
        self.orders.len()
    }

    pub fn count(&self, k: usize) -> usize {
        self.orders.get(k).map_or(0, |o| o.simplices.len())
    }

    pub fn len(&self) -> usize {
        self.orders.iter().map(|o| o.simplices.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn simplices(&self, k: usize) -> &[Simplex] {
        self.orders.get(k).map_or(&[], |o| &o.simplices)
    }

    pub fn simplex(&self, k: usize, i: usize) -> &Simplex {
        &self.orders[k].simplices[i]
    }

    /// `(order, index)` of a stored simplex.
    pub fn locate(&self, s: &Simplex) -> Option<(usize, usize)> {
        let k = s.order();
        self.orders.get(k)?.index.get(s).map(|&i| (k, i))
    }

    pub fn contains(&self, s: &Simplex) -> bool {
        self.locate(s).is_some()
    }

    pub fn cochain(&self, k: usize) -> &[f64] {
        self.orders.get(k).map_or(&[], |o| &o.cochain)
    }

    pub fn cochains(&self) -> Vec<Vec<f64>> {
        self.orders.iter().map(|o| o.cochain.clone()).collect()
    }

    pub fn cochain_of(&self, s: &Simplex) -> Option<f64> {
        self.locate(s).map(|(k, i)| self.orders[k].cochain[i])
    }

    /// All `(order, index)` slots, order-major.
    pub fn slots(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.orders
            .iter()
            .enumerate()
            .flat_map(|(k, o)| (0..o.simplices.len()).map(move |i| (k, i)))
    }

    /// A copy carrying different cochain values.
    pub fn with_cochains(&self, cochains: Vec<Vec<f64>>) -> Result<Self> {
        if cochains.len() != self.orders.len() {
            return Err(Error::Shape {
                expected: self.orders.len(),
                got: cochains.len(),
            });
        }
        let mut out = self.clone();
        for (o, c) in out.orders.iter_mut().zip(cochains) {
            if c.len() != o.simplices.len() {
                return Err(Error::Shape {
                    expected: o.simplices.len(),
                    got: c.len(),
                });
            }
            o.cochain = c;
        }
        Ok(out)
    }

    /// Simplices that are not a face of any stored simplex.
    pub fn maximal_simplices(&self) -> Vec<Simplex> {
        let mut out = Vec::new();
        for k in 0..self.orders.len() {
            let mut covered = vec![false; self.count(k)];
            for up in self.simplices(k + 1) {
                for (f, _) in up.signed_faces() {
                    covered[self.orders[k].index[&f]] = true;
                }
            }
            out.extend(
                self.simplices(k)
                    .iter()
                    .zip(covered)
                    .filter(|(_, c)| !c)
                    .map(|(s, _)| s.clone()),
            );
        }
        out
    }

    /// Stored simplices strictly containing `s`, grouped by order.
    pub fn proper_supersets(&self, s: &Simplex) -> Vec<(usize, usize)> {
        (s.order() + 1..self.orders.len())
            .flat_map(|l| {
                self.orders[l]
                    .simplices
                    .iter()
                    .enumerate()
                    .filter(|(_, mu)| s.is_subset_of(mu))
                    .map(move |(i, _)| (l, i))
            })
            .collect()
    }

    /// Checks that every face of every stored simplex is stored.
    pub fn is_closed(&self) -> bool {
        self.orders.iter().flat_map(|o| &o.simplices).all(|s| {
            s.signed_faces()
                .all(|(f, _)| self.orders[f.order()].index.contains_key(&f))
        })
    }

    pub fn incidence_matrix(&self, k: usize) -> Result<IncidenceMatrix> {
        let top = self.max_order().unwrap_or(0);
        if k == 0 || k > top || self.is_empty() {
            return Err(Error::Domain(format!(
                "incidence order {k} outside 1..={top}"
            )));
        }
        let columns = self.orders[k]
            .simplices
            .iter()
            .map(|s| {
                let mut col: Vec<(usize, i8)> = s
                    .signed_faces()
                    .map(|(f, sign)| (self.orders[k - 1].index[&f], sign))
                    .collect();
                col.sort_unstable();
                col
            })
            .collect();
        Ok(IncidenceMatrix {
            order: k,
            n_rows: self.count(k - 1),
            columns,
        })
    }

    /// `L_k = B_k^T B_k + B_{k+1} B_{k+1}^T`, with `B_0` and `B_{K+1}` zero.
    pub fn hodge_laplacian(&self, k: usize) -> Result<CsrMatrix> {
        let top = self
            .max_order()
            .ok_or_else(|| Error::Domain("the complex is empty".into()))?;
        if k > top {
            return Err(Error::Domain(format!("Laplacian order {k} outside 0..={top}")));
        }
        let n = self.count(k);
        let mut acc: BTreeMap<(usize, usize), i64> = BTreeMap::new();
        if k >= 1 {
            let b = self.incidence_matrix(k)?;
            let mut rows: Vec<Vec<(usize, i8)>> = vec![Vec::new(); b.n_rows];
            for (j, col) in b.columns.iter().enumerate() {
                for &(i, s) in col {
                    rows[i].push((j, s));
                }
            }
            for row in &rows {
                for &(j1, s1) in row {
                    for &(j2, s2) in row {
                        *acc.entry((j1, j2)).or_insert(0) += i64::from(s1 * s2);
                    }
                }
            }
        }
        if k < top {
            let b = self.incidence_matrix(k + 1)?;
            for col in &b.columns {
                for &(i1, s1) in col {
                    for &(i2, s2) in col {
                        *acc.entry((i1, i2)).or_insert(0) += i64::from(s1 * s2);
                    }
                }
            }
        }
        Ok(CsrMatrix::from_triplets(
            n,
            n,
            acc.into_iter().map(|((i, j), v)| (i, j, v as f64)),
        ))
    }

    pub fn to_dump(&self) -> ComplexDump {
        ComplexDump {
            orders: self
                .orders
                .iter()
                .map(|o| OrderDump {
                    simplices: o.simplices.clone(),
                    cochains: o.cochain.clone(),
                })
                .collect(),
        }
    }

    pub fn from_dump(dump: ComplexDump) -> Result<Self> {
        let mut entries = Vec::new();
        for (k, o) in dump.orders.into_iter().enumerate() {
            if o.simplices.len() != o.cochains.len() {
                return Err(Error::Shape {
                    expected: o.simplices.len(),
                    got: o.cochains.len(),
                });
            }
            for (s, c) in o.simplices.into_iter().zip(o.cochains) {
                if s.order() != k {
                    return Err(Error::Validation(format!("{s} listed under order {k}")));
                }
                entries.push((s, c));
            }
        }
        Self::from_parts(entries)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.to_dump())?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_dump(serde_json::from_str(&text)?)
    }
}

/// Signed incidence between `(k-1)`-simplices (rows) and `k`-simplices
/// (columns). Stored column-wise; entries are `-1`, `0` or `+1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    order: usize,
    n_rows: usize,
    columns: Vec<Vec<(usize, i8)>>,
}

impl IncidenceMatrix {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.columns.len())
    }

    pub fn column(&self, j: usize) -> &[(usize, i8)] {
        &self.columns[j]
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.columns[j]
            .iter()
            .find(|(r, _)| *r == i)
            .map_or(0, |&(_, s)| s)
    }

    /// Non-zero entries of `self * next` in exact integer arithmetic.
    pub fn compose(&self, next: &IncidenceMatrix) -> Result<BTreeMap<(usize, usize), i64>> {
        if next.n_rows != self.columns.len() {
            return Err(Error::Shape {
                expected: self.columns.len(),
                got: next.n_rows,
            });
        }
        let mut acc: BTreeMap<(usize, usize), i64> = BTreeMap::new();
        for (j, col) in next.columns.iter().enumerate() {
            for &(m, s) in col {
                for &(i, t) in &self.columns[m] {
                    *acc.entry((i, j)).or_insert(0) += i64::from(s) * i64::from(t);
                }
            }
        }
        acc.retain(|_, v| *v != 0);
        Ok(acc)
    }

    pub fn to_dense(&self) -> Vec<Vec<i64>> {
        let mut d = vec![vec![0; self.columns.len()]; self.n_rows];
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, s) in col {
                d[i][j] = i64::from(s);
            }
        }
        d
    }
}

/// `L_ij / sqrt(max(L_ii, eps) * max(L_jj, eps))`, with unit diagonal
/// wherever `L_ii > 0`.
pub fn normalized_laplacian(l: &CsrMatrix) -> CsrMatrix {
    let d: Vec<f64> = l.diagonal().iter().map(|&x| x.max(NORMALIZATION_EPS)).collect();
    l.map(|i, j, v| {
        if i == j {
            if v > 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            v / (d[i] * d[j]).sqrt()
        }
    })
}

/// Hodge Laplacians of every order, optionally with binary retention
/// masks, plus the normalized masked operators the convolutions use.
///
/// A mask is aligned with the stored entries of `L_k` in row-major order.
/// Diagonal entries are always retained.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianSet {
    laplacians: Vec<CsrMatrix>,
    normalized: Vec<CsrMatrix>,
    masks: Option<Vec<Vec<bool>>>,
    operators: Vec<CsrMatrix>,
}

impl LaplacianSet {
    pub fn from_complex(s: &SimplicialComplex) -> Result<Self> {
        let laplacians = (0..s.num_orders())
            .map(|k| s.hodge_laplacian(k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_laplacians(laplacians))
    }

    pub fn from_laplacians(laplacians: Vec<CsrMatrix>) -> Self {
        let normalized: Vec<CsrMatrix> = laplacians.iter().map(normalized_laplacian).collect();
        LaplacianSet {
            operators: normalized.clone(),
            laplacians,
            normalized,
            masks: None,
        }
    }

    /// Applies retention masks; an absent mask keeps everything.
    pub fn with_masks(&self, masks: Vec<Vec<bool>>) -> Result<Self> {
        if masks.len() != self.laplacians.len() {
            return Err(Error::Shape {
                expected: self.laplacians.len(),
                got: masks.len(),
            });
        }
        let mut masks = masks;
        for (l, m) in self.laplacians.iter().zip(masks.iter_mut()) {
            if m.len() != l.nnz() {
                return Err(Error::Shape {
                    expected: l.nnz(),
                    got: m.len(),
                });
            }
            for (slot, (i, j, _)) in m.iter_mut().zip(l.entries()) {
                if i == j {
                    *slot = true;
                }
            }
        }
        let operators = self
            .normalized
            .iter()
            .zip(&masks)
            .map(|(n, m)| {
                let mut keep = m.iter();
                n.filter(|_, _, _| *keep.next().expect("mask aligned with entries"))
            })
            .collect();
        Ok(LaplacianSet {
            laplacians: self.laplacians.clone(),
            normalized: self.normalized.clone(),
            masks: Some(masks),
            operators,
        })
    }

    /// Drops any mask.
    pub fn unmasked(&self) -> Self {
        Self::from_laplacians(self.laplacians.clone())
    }

    pub fn num_orders(&self) -> usize {
        self.laplacians.len()
    }

    pub fn laplacian(&self, k: usize) -> &CsrMatrix {
        &self.laplacians[k]
    }

    pub fn normalized(&self, k: usize) -> &CsrMatrix {
        &self.normalized[k]
    }

    pub fn mask(&self, k: usize) -> Option<&[bool]> {
        self.masks.as_ref().map(|m| m[k].as_slice())
    }

    /// Masked normalized Laplacian of order `k`, the convolution operator.
    pub fn operator(&self, k: usize) -> &CsrMatrix {
        &self.operators[k]
    }

    /// Entrywise product of `L_k` with its mask.
    pub fn masked_laplacian(&self, k: usize) -> CsrMatrix {
        match self.mask(k) {
            None => self.laplacians[k].clone(),
            Some(m) => {
                let mut keep = m.iter();
                self.laplacians[k].filter(|_, _, _| *keep.next().expect("aligned"))
            }
        }
    }

    pub fn size(&self, k: usize) -> usize {
        self.laplacians[k].n_rows()
    }

    /// Breadth-first hop counts from `source` over the retained
    /// off-diagonal pattern of `L_k`; `None` marks unreachable simplices.
    pub fn hop_distances(&self, k: usize, source: usize) -> Result<Vec<Option<usize>>> {
        self.checked_size(k, source)?;
        Ok(bfs(&self.operators[k], source))
    }

    /// Hop counts over the unmasked pattern, i.e. in the complex itself
    /// regardless of any reduction.
    pub fn structural_hop_distances(&self, k: usize, source: usize) -> Result<Vec<Option<usize>>> {
        self.checked_size(k, source)?;
        Ok(bfs(&self.normalized[k], source))
    }

    /// Shortest hop count between simplices `i` and `j` of order `k`.
    pub fn edge_distance(&self, k: usize, i: usize, j: usize) -> Result<Option<usize>> {
        self.checked_size(k, j)?;
        Ok(self.hop_distances(k, i)?[j])
    }

    fn checked_size(&self, k: usize, i: usize) -> Result<usize> {
        let n = self
            .laplacians
            .get(k)
            .ok_or_else(|| Error::Domain(format!("no Laplacian of order {k}")))?
            .n_rows();
        if i >= n {
            return Err(Error::Domain(format!(
                "index {i} out of range for {n} simplices of order {k}"
            )));
        }
        Ok(n)
    }
}

fn bfs(op: &CsrMatrix, source: usize) -> Vec<Option<usize>> {
    let n = op.n_rows();
    let mut dist = vec![None; n];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].expect("queued nodes have a distance");
        for (v, _) in op.row(u) {
            if v != u && dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// How an exact query decomposes: the independent citation plus one
/// signed superset sum per higher order.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryBreakdown {
    pub direct: f64,
    pub independent: f64,
    pub superset_terms: Vec<(usize, f64)>,
    pub total: f64,
}

/// Ground-truth cochain of `q`, computed by direct summation over papers
/// and again by inclusion–exclusion over stored supersets. The two must
/// agree exactly.
pub fn exact_query(s: &SimplicialComplex, g: &BipartiteGraph, q: &Simplex) -> Result<f64> {
    query_breakdown(s, g, q).map(|b| b.total)
}

pub fn query_breakdown(
    s: &SimplicialComplex,
    g: &BipartiteGraph,
    q: &Simplex,
) -> Result<QueryBreakdown> {
    if let Some(v) = q.vertices().iter().find(|v| !g.authors().contains(*v)) {
        return Err(Error::Domain(format!("unknown author {v}")));
    }
    let mut direct = 0.0;
    let mut independent = 0.0;
    for p in g.papers() {
        let mut authors = p.authors.clone();
        authors.sort();
        let paper = Simplex(authors);
        if q.is_subset_of(&paper) {
            direct += p.citations as f64;
            if paper == *q {
                independent += p.citations as f64;
            }
        }
    }
    let k = q.order();
    let mut by_order: BTreeMap<usize, f64> = BTreeMap::new();
    for (l, i) in s.proper_supersets(q) {
        *by_order.entry(l).or_insert(0.0) += s.cochain(l)[i];
    }
    let superset_terms: Vec<(usize, f64)> = by_order
        .into_iter()
        .map(|(l, sum)| {
            let sign = if (l - k + 1) % 2 == 0 { 1.0 } else { -1.0 };
            (l, sign * sum)
        })
        .collect();
    let total = independent + superset_terms.iter().map(|(_, t)| t).sum::<f64>();
    if total != direct {
        return Err(Error::Validation(format!(
            "inclusion-exclusion gives {total} but direct summation gives {direct} for {q}"
        )));
    }
    Ok(QueryBreakdown {
        direct,
        independent,
        superset_terms,
        total,
    })
}
