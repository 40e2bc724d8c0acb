//! Recombination-chain ensembles of districting plans and the analyses built
//! on them: seat-share distributions across district scales, seats-votes
//! point clouds with efficiency-gap reference lines, and paired ensembles
//! for two-region splits.

pub mod chain;
pub mod cli;
pub mod graph;
pub mod io;
pub mod region;
pub mod seed;
pub mod stats;
pub mod synth;
pub mod tally;
pub mod tree;

pub use chain::{run_chain, run_ensemble, run_multiscale, ChainError, ChainParams, EnsembleRun};
pub use graph::{Assignment, DualGraph, GraphError, NodeRecord, Topology, VotePair};
pub use stats::SeatHistogram;
pub use tally::{ContestSpec, Seats, TiePolicy};
