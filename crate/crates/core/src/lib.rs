//! Joint semantic communication and inference over minimal simplicial
//! structures.
//!
//! The pipeline runs from a coauthorship-style bipartite corpus
//! ([`dataset`]) to a simplicial complex with cochains and Hodge Laplacians
//! ([`complex`]), reduces that structure ([`minimizer`]), trains a masked
//! simplicial convolutional autoencoder ([`scae`]) and simulates a
//! teacher/student query protocol ([`protocol`]) over an AWGN channel
//! ([`channel`]). [`harness`] drives the experiment sweeps.

pub mod channel;
pub mod complex;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod minimizer;
pub mod protocol;
pub mod rng;
pub mod scae;
pub mod sparse;

pub use complex::{IncidenceMatrix, LaplacianSet, Simplex, SimplicialComplex};
pub use dataset::{BipartiteGraph, PaperRecord};
pub use error::{Error, Result};
