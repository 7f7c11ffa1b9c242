//! Hierarchical subspace models for multiway contingency tables.
//!
//! The crate covers exact subspace analysis (saturation, conformality,
//! decomposition), localized maximum likelihood fitting, Markov basis
//! assembly and Metropolis–Hastings exact tests.

pub mod datasets;
pub mod error;
pub mod exact;
pub mod fit;
pub mod hypergraph;
pub mod markov;
pub mod mcmc;
pub mod subspace;
pub mod spec;
pub mod table;
pub mod varset;

pub use error::{Error, ErrorKind, Result};
pub use hypergraph::{Complex, Decomposition};
pub use subspace::{Subspace, Term};
pub use table::{Shape, Table};
pub use varset::VarSet;
