//! Discretised analysis on compact p-adic analytic manifolds: glued ball
//! trees over a nerve complex, Vladimirov-Taibleson and nearest-neighbour
//! type operators, wavelet eigenbases, spectra, heat semigroups and
//! Dirichlet problems.

// NaN-rejecting `!(x > 0.0)` guards and index loops over dense matrices are
// deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod error;
pub mod export;
pub mod manifold;
pub mod operators;
pub mod padic;
pub mod spectral;
pub mod wavelets;

pub use error::{Error, Result};
