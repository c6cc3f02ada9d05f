#![allow(dead_code)]

pub mod fixture;
pub mod grad;

use nalgebra::{DMatrix, SymmetricEigen};
use semcom_core::dataset::synth_corpus;
use semcom_core::sparse::CsrMatrix;
use semcom_core::{BipartiteGraph, Simplex, SimplicialComplex};

/// A random corpus whose complex stays small (at most 6 papers of at most
/// 3 authors, so at most 42 simplices).
pub fn small_corpus(seed: u64) -> BipartiteGraph {
    synth_corpus(8, 6, 3, 9, seed).expect("valid synthetic parameters")
}

pub fn small_complex(seed: u64) -> (BipartiteGraph, SimplicialComplex) {
    let g = small_corpus(seed);
    let s = SimplicialComplex::build(&g);
    (g, s)
}

pub fn dense(m: &CsrMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.n_rows(), m.n_cols());
    for (i, j, v) in m.entries() {
        d[(i, j)] = v;
    }
    d
}

pub fn min_eigenvalue(m: &CsrMatrix) -> f64 {
    SymmetricEigen::new(dense(m)).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Citation total of every paper whose author set contains `q`, by a plain
/// scan of the bipartite graph.
pub fn direct_sum(g: &BipartiteGraph, q: &Simplex) -> f64 {
    g.papers()
        .iter()
        .filter(|p| q.vertices().iter().all(|v| p.authors.contains(v)))
        .map(|p| p.citations as f64)
        .sum()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}
