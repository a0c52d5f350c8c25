//! Similarity for heterogeneous information networks.
//!
//! Every entity type carries its own similarity matrix. Types influence each
//! other through relations: the similarity of two entities is the weighted
//! average similarity of their neighbours across every incident relation,
//! with the diagonal pinned to 1. The fixed point is reached by dense
//! Jacobi sweeps ([`dense`]) or by sweeps that keep each block as
//! `I + U D U^T` and re-project with a randomized eigensolver ([`lowrank`]).

pub mod dense;
pub mod error;
pub mod io;
pub mod lowrank;
pub mod network;
pub mod quality;
pub mod rng;
pub mod rsvd;
pub mod similarity;
pub mod solver;
pub mod sparse;
pub mod stochastic;
pub mod synth;
pub mod weights;

pub use dense::{classical_simrank, solve_dense, solve_lyapunov, sweep, DenseSolution, SolverConfig};
pub use error::{Error, Result};
pub use lowrank::{
    rank_neighbors, solve_lowrank, FactoredSimilarity, FactoredSimilaritySet, LowRankSolution, Ranks, SvdConfig,
};
pub use network::{EntityType, HeteroNetwork, NetworkBuilder, Relation, RelationId, TypeId};
pub use quality::ordering_quality;
pub use similarity::{residual, residual_max_norm, SimilaritySet, SolveTrace};
pub use solver::{Outcome, Registry, Similarity, SolveOptions, Solver};
pub use nalgebra;
pub use weights::{check_convergence_conditions, default_weights, ConditionReport, WeightMatrix};
