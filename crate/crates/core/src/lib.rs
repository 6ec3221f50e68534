//! Connectivity recovery for damaged UAV swarms.
//!
//! The crate turns a damaged swarm into a batch of multi-hop damage-aware
//! graphs, trains a dilated graph convolution network over that batch and
//! picks the fastest target layout that reconnects the survivors.

pub mod dgcn;
pub mod error;
pub mod graph;
pub mod harness;
pub mod io;
pub mod mbda;
pub mod planner;
pub mod scenario;
pub mod seed;
pub mod swarm;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/swarm.md")]
    mod swarm {}
    #[doc = include_str!("../../../book/src/damage.md")]
    mod damage {}
    #[doc = include_str!("../../../book/src/mdag.md")]
    mod mdag {}
    #[doc = include_str!("../../../book/src/dgcn.md")]
    mod dgcn {}
    #[doc = include_str!("../../../book/src/planning.md")]
    mod planning {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
