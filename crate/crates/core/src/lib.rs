//! Arith-MNIST: a deterministic benchmark-synthesis and neuro-symbolic
//! reasoning toolkit for visual analogical reasoning over colored digits.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! - [`mnist`]: IDX parsing into a class-indexed glyph store.
//! - [`scene`]: three-digit colored scenes, 56x56 RGB rendering, text mode.
//! - [`dsl`]: the condition/operation program grammar and its enumerations.
//! - [`exec`]: the symbolic executor (the ground-truth oracle).
//! - [`neural`]: forward semantics of the modular executor (Gumbel-Softmax
//!   selection, gated updates) with an engineered-encoding equivalence path.
//! - [`manifest`] / [`builder`] / [`dataset`]: split planning, deterministic
//!   generation and (re)loading of datasets.
//! - [`imagination`]: template sampling and imagined-episode augmentation.
//! - [`solver`]: brute-force program induction over episodes.
//! - [`eval`]: scoring predictions along the val/op/order/percep axes.
//!
//! All randomness flows through [`rng::PrngStream`] (splitmix64) with
//! tagged stream derivation, so every artifact regenerates byte-exactly
//! from a master seed.

pub mod builder;
pub mod dataset;
pub mod dsl;
pub mod eval;
pub mod exec;
pub mod imagination;
pub mod manifest;
pub mod mnist;
pub mod neural;
pub mod rng;
pub mod scene;
pub mod solver;
