use semcom_core::dataset::PaperRecord;
use semcom_core::{BipartiteGraph, SimplicialComplex};

/// Two overlapping 3-simplices joined into a ring by two extra edges:
/// exactly 30 simplices in one connected piece.
pub fn thirty_simplex_graph() -> BipartiteGraph {
    BipartiteGraph::new(vec![
        PaperRecord::new("p1", &["a", "b", "c", "d"], 3).unwrap(),
        PaperRecord::new("p2", &["c", "d", "e", "f"], 5).unwrap(),
        PaperRecord::new("p3", &["e", "g"], 2).unwrap(),
        PaperRecord::new("p4", &["a", "g"], 4).unwrap(),
    ])
    .unwrap()
}

pub fn thirty_simplex_complex() -> SimplicialComplex {
    SimplicialComplex::build(&thirty_simplex_graph())
}
