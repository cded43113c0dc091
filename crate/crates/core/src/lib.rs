//! Network edge-probability estimation by mixing a catalog of candidate
//! models fitted on a held-out dyad split.

pub mod candidates;
pub mod cli;
pub mod error;
pub mod evaluate;
pub mod graph;
pub mod linalg;
pub mod mixing;
pub mod pipeline;
pub mod rng;
pub mod simulate;
pub mod split;

pub use error::{Error, Result};

/// The guide's chapters, compiled so their examples run as doctests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graphs-and-splits.md")]
    mod graphs_and_splits {}
    #[doc = include_str!("../../../book/src/candidates.md")]
    mod candidates {}
    #[doc = include_str!("../../../book/src/mixing.md")]
    mod mixing {}
    #[doc = include_str!("../../../book/src/conditioning.md")]
    mod conditioning {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
