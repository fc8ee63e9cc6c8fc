//! Core algorithms for learning concept collocates and their types from a
//! corpus of short, noisy text records ("verbatims").
//!
//! The crate is `no_std` compatible (it only needs `alloc`). Everything that
//! touches the filesystem, the terminal or threads lives in the companion
//! `ontolearn` crate.
//!
//! The pieces, bottom-up:
//!
//! * [`corpus`]: tokenization, n-gram spans and corpus statistics.
//! * [`lexicon`]: dictionary, seed ontology, abbreviations, sense counts and
//!   stop/noise lists.
//! * [`normalize`]: white-space merging, run-on splitting, spelling
//!   correction and abbreviation disambiguation.
//! * [`embeddings`]: skip-gram with negative sampling.
//! * [`pos`], [`kmeans`], [`features`]: per-collocate feature vectors.
//! * [`forest`]: CART trees and random forests.
//! * [`pipeline`]: weak labeling, two-stage training, inference and the
//!   query-by-committee loop.
//! * [`evaluate`]: precision/recall/F1 and feature-family ablations.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod evaluate;
pub mod features;
pub mod forest;
pub mod kmeans;
pub mod lexicon;
pub mod normalize;
pub mod pipeline;
pub mod pos;
pub mod rng;

mod math;

pub use error::{Error, Result};
