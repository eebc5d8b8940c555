//! Basis-function models of expressive loudness in ensemble performance.
//!
//! The pipeline reads MusicXML scores, encodes every part's notes as basis
//! functions, merges and fuses parts of the same instrument class, and
//! regresses standardized loudness (sampled from a recording through a
//! score alignment) on the resulting matrices with linear, feed-forward or
//! recurrent models under a leave-one-out protocol.

pub mod beat;
pub mod error;
pub mod eval;
pub mod basis;
pub mod fusion;
pub mod models;
pub mod synth;
pub mod score;
pub mod targets;

pub use beat::Beat;
pub use error::{Error, Result};
