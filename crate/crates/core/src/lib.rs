//! Data-driven finite-horizon representations of linear parameter-varying
//! systems with shifted-affine scheduling dependence.
//!
//! A single recorded trajectory `(w, p)` is turned into a pair of block Hankel
//! matrices ([`ddrep`]); a rank test decides whether the data is rich enough,
//! and the representation is then used for simulation ([`simulate`]) and for
//! iterative control of nonlinear systems through an LPV embedding
//! ([`control`]). Everything data-driven can be checked against the
//! model-based oracles in [`models`].

pub mod control;
pub mod ddrep;
pub mod error;
pub mod experiments;
pub mod formats;
pub mod linalg;
pub mod models;
pub mod signals;
pub mod simulate;

pub use error::{Error, Result};
pub use linalg::RankTolerance;
