//! Constructive tools for consistent hypothesis testing.
//!
//! The crate covers the pieces needed to go from "these hypothesis sets are
//! separated" to "here is a sequence of tests that errs only finitely often":
//!
//! - [`measures`]: finite-alphabet probability vectors, the named densities on
//!   `(0,1)`, partitions and the probability vectors they induce.
//! - [`distances`]: total variation, the variational distance between convex
//!   hulls (solved as a linear program), the resulting lower bound on
//!   `α + β` and the test attaining it, Kolmogorov–Smirnov distance.
//! - [`partition_tests`]: closure separation of induced vector sets, the
//!   nearest-set frequency test, exact multinomial error enumeration and
//!   Chernoff exponents.
//! - [`scheduler`]: block lengths, interleaved test schedules, certified tail
//!   bounds and unions of test sequences.
//! - [`simulation`]: reproducible samplers and Monte Carlo error estimation.
//! - [`scenarios`]: ready-made experiments and the scenario file schema.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![forbid(unsafe_code)]

pub mod distances;
mod error;
pub mod lp;
pub mod measures;
pub mod numeric;
pub mod report;
pub mod scenarios;
pub mod scheduler;
pub mod simulation;

pub use error::{Error, Result};
