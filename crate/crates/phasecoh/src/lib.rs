//! Exact minimal-cost quantum phase estimation under coherence constraints.
//!
//! Given copies of an unknown diagonal phase unitary and a fixed probe state,
//! the smallest average estimation cost achievable with networks that cannot
//! create coherence is a semidefinite program over Choi matrices. This crate
//! provides the full toolchain:
//!
//! - [`tensor`]: labeled multipartite complex matrices (partial trace,
//!   partial transpose, dephasing, Hermitian eigendecomposition).
//! - [`cost`]: cost functions on the circle and their Toeplitz cost matrices.
//! - [`states`]: density matrices and static coherence measures (l1, weight,
//!   robustness).
//! - [`channels`]: Choi matrices, maximally incoherent operations (MIO), and
//!   explicit channel constructions.
//! - [`combs`]: quantum combs, the link product, causal normalization, and
//!   dephasing-compatibility of supermaps.
//! - [`sdp`]: an embedded primal-dual interior-point solver for semidefinite
//!   programs with Hermitian data.
//! - [`estimate`]: minimal average cost, its dual, the advantage monotone,
//!   weight-based bounds, and the multi-copy comb relaxation.
//! - [`protocol`]: executable protocols, including the compilation of many
//!   copies of a small phase gate into one large one, and textbook phase
//!   estimation.
//! - [`verify`]: the self-check suite behind `phasecoh verify`.
//!
//! See the `examples/` directory for a runnable tour of each capability.
pub mod channels;
pub mod cli;
pub mod combs;
pub mod cost;
pub mod error;
pub mod estimate;
pub mod protocol;
pub mod sdp;
pub mod states;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
