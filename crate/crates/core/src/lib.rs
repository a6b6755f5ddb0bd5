//! Extraction of almost-isometric copies of ℓ∞^m from subspaces of ℓ∞^N.
//!
//! The pipeline runs in stages, each usable on its own:
//!
//! 1. [`preprocess`]: put a basis in John position and build a 2-summing
//!    frame from Dvoretzky–Rogers vectors.
//! 2. [`sparsifier`]: thin the frame rows with random selectors until every
//!    column ℓ₁ sum is at most `3 √(log N)`.
//! 3. [`extractor`]: split entries into small and large parts, select a
//!    δ-subset and greedily peel off disjoint row blocks.
//! 4. [`assembler`]: sum the blocks with peak signs and certify the result
//!    against the unit-vector basis of ℓ∞^m.
//!
//! [`oracle`] holds brute-force checks for all of the above and
//! [`pipeline`] wires the stages together.

pub mod assembler;
pub mod error;
pub mod extractor;
pub mod generators;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod sparsifier;

pub use error::{Error, Result};
pub use model::{Block, EquivalenceReport, ExtractParams, FrameMatrix, Instance, InstanceKind, SignedBasisMatrix};
pub use pipeline::{run_pipeline, RunConfig, RunResult};
