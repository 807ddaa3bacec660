//! Exact toolkit for finite-dimensional based Banach spaces whose unit balls
//! are rational polytopes: gauges, isometric embeddings, amalgamation, and a
//! generic-chain construction with back-and-forth equivalence checks.
//!
//! Everything is computed over arbitrary-precision rationals. There are no
//! floats and no tolerances anywhere in the computational path; every
//! nontrivial answer is backed by a certificate that is checked exactly.

pub mod amalgam;
pub mod approx;
pub mod backforth;
mod error;
pub mod exactnum;
pub mod fraisse;
pub mod morphism;
pub mod polytope;
pub mod space;
pub mod suites;

pub use amalgam::{amalgamate, l1_sum, quotient_distance, Amalgam};
pub use approx::{
    choose_delta, decimal_between, dyadic_between, extend_epsilon_isometry, extension_ball,
    pullback_norm, rational_sandwich, ExtensionResult, SandwichParams,
};
pub use backforth::{
    back_and_forth_epsilon, back_and_forth_exact, embed_any, BackForthOutcome,
    BackForthTranscript, GrowthPolicy, StuckReport, TranscriptMode,
};
pub use error::Error;
pub use exactnum::{Rational, RationalMatrix, RationalVector};
pub use fraisse::{
    build_generic_chain, check_universality, enumerate_extensions, enumerate_spaces, fraisse_step,
    Chain, ComplexityBound, EmbeddingSearch, ExtensionRequest, UniversalityOutcome,
};
pub use morphism::{BasedMorphism, IsometryOutcome};
pub use polytope::Polytope;
pub use space::BasedSpace;
pub use suites::{run_suite, SuiteFailure, SuiteReport, SUITE_NAMES};
