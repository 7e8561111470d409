//! Numerical laboratory for the one-dimensional fractional
//! Caffarelli–Kohn–Nirenberg inequality and its singular Onofri limit.

pub mod energy;
pub mod error;
pub mod grid;
pub mod limit;
pub mod liouville;
pub mod onofri;
pub mod operators;
pub mod profile;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
pub use grid::{Grid, GridFunction};
pub use operators::CknParams;
pub use profile::Profile;
pub use quadrature::{Estimate, QuadratureConfig};
