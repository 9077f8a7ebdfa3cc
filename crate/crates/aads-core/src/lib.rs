//! Numerical laboratory for asymptotically anti-de Sitter geometry.

pub mod error;
pub mod experiments;
pub mod fefferman_graham;
pub mod geodesic;
pub mod io;
pub mod linalg;
pub mod modular_geometry;
pub mod numerics;
pub mod ode;
pub mod regions;
pub mod scalar;
pub mod spacetimes;
pub mod tensor_core;

pub use error::{AadsError, Result};
