#![no_std]
//! Cross-domain sequential recommendation with image fusion.
//!
//! Items of two domains carry a learnable ID embedding and a frozen image
//! embedding. A user's history is split into its X view, Y view and merged
//! view; each (view, modality) pair gets its own causal attention encoder,
//! whose last state is scored against the item tables by cosine similarity.
//! ID and image distributions are mixed per view, views are weighted into
//! one training objective and one ranking at evaluation time.
//!
//! This crate is `no_std` + `alloc`: file formats, the CLI and threading
//! live in the companion `ifcdsr` crate.

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod attn;
pub mod catalog;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod score;
pub mod seqdata;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
