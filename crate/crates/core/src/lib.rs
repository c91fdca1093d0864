//! Numerical laboratory for Nevanlinna functions: meromorphic functions whose
//! Schwarzian derivative is a polynomial.

pub mod dynamics;
pub mod error;
pub mod nevanlinna;
pub mod ode;
pub mod probe;
pub mod render;
pub mod schwarzian;
pub mod sphere;

pub use error::{NevlabError, Result};
