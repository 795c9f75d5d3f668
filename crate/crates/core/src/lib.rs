//! Bregman (φ-)variation of one-dimensional semimartingales.
//!
//! The crate provides Young functions and their convex machinery, Orlicz
//! (Luxemburg) norms on discrete measures, a simulator for Lévy
//! jump-diffusions with exact jump logs, three routes to the φ-variation,
//! exact and Monte-Carlo checks of the φ-isometry, a spectral engine for
//! 1-d Lévy semigroups, and quadrature checks of the parabolic and elliptic
//! Hardy–Stein identities.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convex;
pub mod error;
pub mod hardystein;
pub mod exec;
pub mod orlicz;
pub mod paths;
pub mod quad;
pub mod semigroup;
pub mod stats;
pub mod suite;
pub mod variation;
pub mod verify;

pub use convex::{LogGrid, SimonenkoIndices, YoungFunction};
pub use error::{Error, Result};
pub use exec::Execution;
