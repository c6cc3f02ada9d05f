//! Coauthorship corpora: papers with author lists and citation counts.
//!
//! Corpora are stored as JSON Lines, one `{"id", "authors", "citations"}`
//! object per line.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// One paper: a vertex of the paper side of the bipartite graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub id: String,
    pub authors: Vec<String>,
    pub citations: u64,
}

impl PaperRecord {
    pub fn new(id: impl Into<String>, authors: &[&str], citations: u64) -> Result<Self> {
        let record = PaperRecord {
            id: id.into(),
            authors: authors.iter().map(|a| a.to_string()).collect(),
            citations,
        };
        record.validate()?;
        Ok(record)
    }

    fn validate(&self) -> Result<()> {
        if self.authors.is_empty() {
            return Err(Error::Validation(format!("paper {} has no authors", self.id)));
        }
        let mut seen = HashSet::with_capacity(self.authors.len());
        if let Some(dup) = self.authors.iter().find(|a| !seen.insert(a.as_str())) {
            return Err(Error::Validation(format!(
                "paper {} lists author {dup} twice",
                self.id
            )));
        }
        Ok(())
    }
}

/// Papers `U`, authors `V` and the authorship edges between them.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BipartiteGraph {
    papers: Vec<PaperRecord>,
    authors: BTreeSet<String>,
}

impl BipartiteGraph {
    pub fn new(papers: Vec<PaperRecord>) -> Result<Self> {
        let mut ids = HashSet::with_capacity(papers.len());
        let mut authors = BTreeSet::new();
        for p in &papers {
            p.validate()?;
            if !ids.insert(p.id.as_str()) {
                return Err(Error::Validation(format!("duplicate paper id {}", p.id)));
            }
            authors.extend(p.authors.iter().cloned());
        }
        Ok(BipartiteGraph { papers, authors })
    }

    pub fn papers(&self) -> &[PaperRecord] {
        &self.papers
    }

    pub fn authors(&self) -> &BTreeSet<String> {
        &self.authors
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for p in &self.papers {
            out.push_str(&serde_json::to_string(p).expect("paper records always serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut papers = Vec::new();
        let mut ids = HashSet::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            if line.trim().is_empty() {
                continue;
            }
            let record: PaperRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            record.validate().map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if !ids.insert(record.id.clone()) {
                return Err(Error::Validation(format!(
                    "duplicate paper id {} on line {line_no}",
                    record.id
                )));
            }
            papers.push(record);
        }
        BipartiteGraph::new(papers)
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<BipartiteGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    BipartiteGraph::from_jsonl(&text)
}

pub fn save_corpus(graph: &BipartiteGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, graph.to_jsonl()).map_err(|e| Error::io(path, e))
}

/// Samples a connected-biased sub-corpus by walking paper → shared author →
/// adjacent paper. Only papers with `cite_min <= citations <= cite_max` are
/// visitable. When the walk cannot leave the current paper it restarts from
/// a uniformly chosen unvisited eligible paper.
pub fn random_walk_sample(
    g: &BipartiteGraph,
    n_papers: usize,
    cite_min: u64,
    cite_max: u64,
    seed: u64,
) -> Result<BipartiteGraph> {
    if cite_min > cite_max {
        return Err(Error::Validation(format!(
            "cite_min {cite_min} exceeds cite_max {cite_max}"
        )));
    }
    let eligible: Vec<usize> = g
        .papers
        .iter()
        .enumerate()
        .filter(|(_, p)| (cite_min..=cite_max).contains(&p.citations))
        .map(|(i, _)| i)
        .collect();
    if eligible.is_empty() {
        return Err(Error::EmptySample);
    }

    let mut by_author: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for &i in &eligible {
        for a in &g.papers[i].authors {
            by_author.entry(a.as_str()).or_default().push(i);
        }
    }

    let mut rng = rng_from_seed(seed);
    let target = n_papers.min(eligible.len());
    let mut visited = vec![false; g.papers.len()];
    let mut order = Vec::with_capacity(target);
    let mut current: Option<usize> = None;

    while order.len() < target {
        let next = current.and_then(|cur| {
            let open: Vec<&str> = g.papers[cur]
                .authors
                .iter()
                .map(String::as_str)
                .filter(|a| by_author[a].iter().any(|&p| !visited[p]))
                .collect();
            if open.is_empty() {
                return None;
            }
            let author = open[rng.random_range(0..open.len())];
            let candidates: Vec<usize> = by_author[author]
                .iter()
                .copied()
                .filter(|&p| !visited[p])
                .collect();
            Some(candidates[rng.random_range(0..candidates.len())])
        });
        let next = match next {
            Some(p) => p,
            None => {
                let unvisited: Vec<usize> =
                    eligible.iter().copied().filter(|&p| !visited[p]).collect();
                unvisited[rng.random_range(0..unvisited.len())]
            }
        };
        visited[next] = true;
        order.push(next);
        current = Some(next);
    }

    BipartiteGraph::new(order.into_iter().map(|i| g.papers[i].clone()).collect())
}

/// Generates a corpus with known structure.
///
/// Author-set sizes are uniform in `[1, max_coauthors]` and citations uniform
/// in `[1, cite_max]`. Each paper draws its authors from a window of
/// `3 * max_coauthors` consecutive author ids at a random offset, so groups
/// of authors recur across papers the way real collaborations do. The first
/// paper always has `max_coauthors` authors.
pub fn synth_corpus(
    n_authors: usize,
    n_papers: usize,
    max_coauthors: usize,
    cite_max: u64,
    seed: u64,
) -> Result<BipartiteGraph> {
    if max_coauthors == 0 {
        return Err(Error::Validation("max_coauthors must be at least 1".into()));
    }
    if n_authors < max_coauthors {
        return Err(Error::Validation(format!(
            "n_authors {n_authors} is smaller than max_coauthors {max_coauthors}"
        )));
    }
    if n_papers == 0 || cite_max == 0 {
        return Err(Error::Validation(
            "n_papers and cite_max must be positive".into(),
        ));
    }
    let width = n_authors.len_digits();
    let author_id = |i: usize| format!("a{i:0width$}");
    let window = (3 * max_coauthors).min(n_authors);

    let mut rng = rng_from_seed(seed);
    let mut papers = Vec::with_capacity(n_papers);
    for p in 0..n_papers {
        let size = if p == 0 {
            max_coauthors
        } else {
            rng.random_range(1..=max_coauthors)
        };
        let offset = rng.random_range(0..n_authors);
        let mut authors: Vec<String> = sample(&mut rng, window, size)
            .into_iter()
            .map(|i| author_id((offset + i) % n_authors))
            .collect();
        authors.sort();
        papers.push(PaperRecord {
            id: format!("p{p:06}"),
            authors,
            citations: rng.random_range(1..=cite_max),
        });
    }
    BipartiteGraph::new(papers)
}

trait LenDigits {
    fn len_digits(self) -> usize;
}

impl LenDigits for usize {
    fn len_digits(self) -> usize {
        self.max(1).ilog10() as usize + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::SimplicialComplex;

    fn two_papers() -> BipartiteGraph {
        BipartiteGraph::from_jsonl(
            "{\"id\":\"u1\",\"authors\":[\"a\",\"b\"],\"citations\":5}\n\
             {\"id\":\"u2\",\"authors\":[\"a\",\"b\",\"c\"],\"citations\":3}\n",
        )
        .unwrap()
    }

    #[test]
    fn loads_two_line_file() {
        let g = two_papers();
        assert_eq!(g.papers().len(), 2);
        assert_eq!(g.authors().len(), 3);
        assert_eq!(g.papers()[0].id, "u1");
    }

    #[test]
    fn empty_file_is_empty_graph() {
        let g = BipartiteGraph::from_jsonl("").unwrap();
        assert!(g.is_empty());
        assert!(g.authors().is_empty());
    }

    #[test]
    fn empty_author_list_names_the_line() {
        let err = BipartiteGraph::from_jsonl(
            "{\"id\":\"u1\",\"authors\":[\"a\"],\"citations\":1}\n\
             {\"id\":\"u2\",\"authors\":[],\"citations\":3}\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn malformed_line_and_negative_citations_fail() {
        assert!(matches!(
            BipartiteGraph::from_jsonl("{\"id\":\"u1\"\n").unwrap_err(),
            Error::Parse { line: 1, .. }
        ));
        assert!(matches!(
            BipartiteGraph::from_jsonl("{\"id\":\"u1\",\"authors\":[\"a\"],\"citations\":-2}")
                .unwrap_err(),
            Error::Parse { line: 1, .. }
        ));
    }

    #[test]
    fn duplicate_ids_and_authors_rejected() {
        let dup = "{\"id\":\"u1\",\"authors\":[\"a\"],\"citations\":1}\n\
                   {\"id\":\"u1\",\"authors\":[\"b\"],\"citations\":1}\n";
        assert!(matches!(
            BipartiteGraph::from_jsonl(dup).unwrap_err(),
            Error::Validation(_)
        ));
        assert!(PaperRecord::new("x", &["a", "a"], 1).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let text = two_papers().to_jsonl();
        fs::write(&path, &text).unwrap();
        let g = load_corpus(&path).unwrap();
        let out = dir.path().join("d.jsonl");
        save_corpus(&g, &out).unwrap();
        assert_eq!(fs::read_to_string(out).unwrap(), text);
    }

    #[test]
    fn synth_contract() {
        let g = synth_corpus(10, 30, 4, 10, 1).unwrap();
        assert_eq!(g.papers().len(), 30);
        assert!(g.papers().iter().any(|p| p.authors.len() == 4));
        assert!(g
            .papers()
            .iter()
            .all(|p| (1..=4).contains(&p.authors.len()) && (1..=10).contains(&p.citations)));
        assert_eq!(g, synth_corpus(10, 30, 4, 10, 1).unwrap());
        assert_ne!(g, synth_corpus(10, 30, 4, 10, 2).unwrap());
    }

    #[test]
    fn synth_single_author_gives_vertices_only() {
        let g = synth_corpus(5, 12, 1, 3, 9).unwrap();
        let s = SimplicialComplex::build(&g);
        assert_eq!(s.max_order(), Some(0));
    }

    #[test]
    fn synth_rejects_infeasible() {
        assert!(synth_corpus(3, 10, 4, 5, 0).is_err());
        assert!(synth_corpus(3, 10, 0, 5, 0).is_err());
        assert!(synth_corpus(3, 0, 2, 5, 0).is_err());
    }

    #[test]
    fn walk_respects_bounds_and_seed() {
        let big = synth_corpus(300, 1500, 5, 20, 3).unwrap();
        let s = random_walk_sample(&big, 80, 1, 10, 11).unwrap();
        assert_eq!(s.papers().len(), 80);
        assert!(s.papers().iter().all(|p| (1..=10).contains(&p.citations)));
        assert_eq!(s, random_walk_sample(&big, 80, 1, 10, 11).unwrap());
        let ids: HashSet<_> = big.papers().iter().map(|p| &p.id).collect();
        assert!(s.papers().iter().all(|p| ids.contains(&p.id)));
        assert!(s.authors().is_subset(big.authors()));
    }

    #[test]
    fn walk_single_paper_and_saturation() {
        let g = two_papers();
        let one = random_walk_sample(&g, 1, 1, 10, 0).unwrap();
        assert_eq!(one.papers().len(), 1);
        let all = random_walk_sample(&g, 50, 1, 10, 0).unwrap();
        assert_eq!(all.papers().len(), 2);
        let only_u2 = random_walk_sample(&g, 5, 1, 4, 0).unwrap();
        assert_eq!(only_u2.papers()[0].id, "u2");
    }

    #[test]
    fn walk_without_eligible_papers_fails() {
        let g = two_papers();
        assert!(matches!(
            random_walk_sample(&g, 5, 100, 200, 0).unwrap_err(),
            Error::EmptySample
        ));
        assert!(matches!(
            random_walk_sample(&g, 5, 4, 2, 0).unwrap_err(),
            Error::Validation(_)
        ));
    }
}
