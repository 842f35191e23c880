//! Numerical toolkit for weighted local Hardy spaces with variable exponents.
//!
//! Functions, weights and exponents live on a uniform lattice over `[-T, T]^n`
//! (`n ∈ {1, 2}`). Operators act on [`GridFunction`]s; probes return
//! [`Report`]s whose finiteness claims are judged across resolutions.

pub mod atoms;
pub mod error;
pub mod exponent;
pub mod grid;
pub mod hardy;
pub mod harness;
pub mod lp;
pub mod maximal;
pub mod norms;
pub mod presets;
pub mod report;
pub mod stability;
pub mod wavelet;
pub mod weight;

pub use error::{Error, Result};
pub use exponent::VariableExponent;
pub use grid::{Cube, Domain, GridFunction};
pub use report::Report;
pub use weight::Weight;
