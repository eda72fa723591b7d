//! Symbolic text planning for RDF-to-text generation.
//!
//! The pipeline turns sets of RDF triples into ranked, linearized text plans
//! and deterministic text realizations:
//!
//! 1. [`corpus`] parses WebNLG XML / native JSON corpora of (triple set, reference) pairs.
//! 2. [`plan`] defines sentence/text plan trees and exhaustively enumerates all
//!    plans for an input graph.
//! 3. [`matcher`] recovers latent plans for (graph, reference) pairs, producing a
//!    plan-annotated training corpus.
//! 4. [`scorer`] fits a product-of-experts model over matched plans and ranks
//!    candidate plans for new inputs.
//! 5. [`linearizer`] converts plans to and from the bracketed token format.
//! 6. [`realizer`] renders plans as text through per-relation templates.
//! 7. [`eval`] measures plan/realization consistency and corpus BLEU.
//!
//! Probabilistic code is generic over the floating-point type through [`Scalar`];
//! the `*64` aliases at the crate root pick `f64`, which the CLI uses throughout.

use std::fmt;

use num_traits::{Float, FromPrimitive};

pub mod cli;
pub mod corpus;
pub mod eval;
pub mod linearizer;
pub mod matcher;
pub mod plan;
pub mod realizer;
pub mod scorer;

/// Floating-point scalar used by the probabilistic components (expert
/// probabilities, plan scores, BLEU).
pub trait Scalar: Float + FromPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static {
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 conversion")
    }
    fn from_count(v: u64) -> Self {
        Self::from_u64(v).expect("u64 conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub type ScoringModel32 = scorer::ScoringModel<f32>;
pub type ScoringModel64 = scorer::ScoringModel<f64>;
pub type PlanScore32 = scorer::PlanScore<f32>;
pub type PlanScore64 = scorer::PlanScore<f64>;
