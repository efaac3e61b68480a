//! Generalized Ricci tensor of degree-2 NQ symplectic manifolds.

pub mod error;
pub mod scalar;
pub mod superalgebra;
pub mod nq;
pub mod connection;
pub mod exactcase;
pub mod flow;
pub mod model;

pub use error::{Error, Result};
