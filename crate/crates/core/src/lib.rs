//! Numerical exploration of subspace-hypercyclicity for weighted shift
//! operators on `ℓ²(ℤ)` and `ℓ²(ℕ)`.

pub mod criteria;
pub mod error;
pub mod experiments;
pub mod logdomain;
pub mod orbit;
pub mod shift;
pub mod space;
pub mod weights;

pub use error::{Error, Result};
