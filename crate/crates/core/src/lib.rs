//! Multi-target tracking on a line with dependent measurement likelihoods.
//!
//! A labeled multi-hypothesis filter whose data-association hypotheses are
//! scored in two stages: an optimistic per-track (independence) weight that
//! a ranked-assignment iterator can enumerate lazily in best-first order,
//! and a dependence factor λ ∈ [0, 1] — collision exclusion or occlusion
//! credit — that verification applies afterwards and that can only demote.
//! The propose-and-verify loop exploits that monotonicity to extract the
//! exact top-K children per parent while enumerating only a small prefix of
//! the assignment lattice, and certifies how much of its output is final.
//!
//! The crate also ships the matching one-dimensional simulator, a Monte
//! Carlo runner, brute-force oracles used by the test suite, and a Graphviz
//! export of the hypothesis tree.

pub mod assignment;
pub mod dependence;
pub mod exec;
pub mod filter;
pub mod hypothesis;
pub mod kinematics;
pub mod oracle;
pub mod propose_verify;
pub mod runner;
pub mod simulator;
pub mod tree;
