//! Exact entropy solutions of Burgers' equation on piecewise-linear data,
//! together with the tools needed to study how fast their total variation
//! decays: one-sided Lipschitz envelopes, certified bounds on the
//! interpolation norm `||u||_{P_alpha}`, a multiscale decomposition into
//! one-sided Lipschitz levels, fractional Sobolev seminorms and closed-form
//! counterexample data.
//!
//! Everything computes on [`pwl::PLFunction`], a compactly supported
//! piecewise-linear function with jumps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constructions;
pub mod decomposition;
pub mod envelopes;
pub mod harness;
pub mod error;
pub mod lax_oleinik;
pub mod palpha;
pub mod pwl;
pub mod random;
pub mod sobolev;

pub use error::{Error, Result};
pub use lax_oleinik::{solve_burgers, survives, tv_decay_curve, DecayCurve, SolveResult};
pub use pwl::{Interval, Node, PLFunction, Side};
