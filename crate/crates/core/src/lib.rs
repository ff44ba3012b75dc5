//! Numerical laboratory for the quantitative Oppenheim problem on generic
//! indefinite ternary quadratic forms.
//!
//! The crate is organized bottom-up:
//!
//! * [`forms`]: forms `Q₀^g`, the right `SL3(R)` action, evaluation.
//! * [`spin`]: the cover `SL2(R) → SO(Q₀)`, the norm balls `H_T` and their
//!   Haar measure.
//! * [`enumeration`]: exact minima of `|Q(n) − ξ|` over integer vectors and
//!   lattice points in boxes.
//! * [`targets`]: the shrinking targets `Ω_{ξ,δ}`.
//! * [`ergodic`]: random forms, orbit averages, the Siegel transform and
//!   Rogers' second moment.
//! * [`experiments`]: falsifiable desk-scale versions of the quantitative
//!   statements.

pub mod enumeration;
pub mod ergodic;
pub mod error;
pub mod experiments;
pub mod forms;
pub mod geometry;
pub mod output;
pub mod reduce;
pub mod seed;
pub mod spin;
pub mod targets;

pub use error::{Error, Result};
pub use forms::{GroupElement, TernaryForm};
pub use spin::{KakCoords, SpinElement};
