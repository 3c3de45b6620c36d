//! Positive and invariant tensor decompositions on weighted simplicial
//! complexes.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`], [`tensor`]: dense complex arithmetic, eigen/singular values.
//! - [`wsc`]: weighted simplicial complexes and group actions on them.
//! - [`decomp`]: the five decomposition types and their contractions.
//! - [`families`]: explicit approximating families and convergence studies.
//! - [`ranks`]: flattening bounds, ALS witnesses, residual floors.
//! - [`correlations`]: hidden-variable and quantum models built from
//!   decompositions, and back.
//! - [`tree`]: canonical forms and closure checks on tree complexes.

pub mod correlations;
pub mod decomp;
pub mod error;
pub mod families;
pub mod linalg;
pub mod random;
pub mod ranks;
pub mod tensor;
pub mod tree;
pub mod wsc;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
pub use tensor::{DenseTensor, HermitianMatrix};
pub use wsc::{GroupAction, WeightedSimplicialComplex};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
