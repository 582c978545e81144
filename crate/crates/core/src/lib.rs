//! Simulation and verification toolkit for the functional central limit
//! theorem of non-stationary m-dependent random fields on `[0,1]²`.
//!
//! The crate is organised around the objects that appear in the limit theorem:
//!
//! * [`fieldgen`] generates m-dependent fields as finite moving averages of
//!   independent, non-identically distributed innovations.
//! * [`sumproc`] builds double partial sums and the normalized random element
//!   `X_n(t₁,t₂) = S_{⌊nt₁⌋,⌊nt₂⌋} / (σn)`.
//! * [`dspace`] holds step functions on the unit square together with the
//!   moduli `w`, `w′` and upper bounds for the Skorohod and Billingsley metrics.
//! * [`sheet`] is the exact Brownian sheet reference.
//! * [`martdecomp`] decomposes a field into its component martingales and
//!   checks the maximal inequalities built on that decomposition.
//! * [`diagnostics`] is the Monte Carlo engine producing [`MCReport`]s.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dspace;
mod error;
pub mod fieldgen;
pub mod martdecomp;
pub mod mc;
pub mod rng;
pub mod sheet;
pub mod stats;
pub mod sumproc;

pub use diagnostics::{Estimate, MCConfig, MCReport, Verdict};
pub use dspace::{GridFunction, Interp, TimeChange};
pub use error::{Error, Result};
pub use fieldgen::{
    DeterministicField, FieldSample, FieldSource, FieldSpec, InnovationArray, InnovationLaw,
    InnovationSpec, MaKernel, VarianceProfile,
};
pub use martdecomp::MartingaleDecomposition;
pub use sheet::FddSpec;
pub use sumproc::{PartialSumField, Rect};
