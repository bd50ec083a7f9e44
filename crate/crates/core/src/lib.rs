//! Stratified solitary water waves in semi-Lagrangian (Dubreil-Jacotin)
//! variables.
//!
//! The pipeline runs from a density/shear description ([`profiles`]) through
//! the linear spectrum ([`sturm_liouville`]) and a KdV-type initial guess
//! ([`small_amplitude`]) to Newton and pseudo-arclength solves
//! ([`height_solver`], [`continuation`]), with a-posteriori checks in
//! [`diagnostics`] and physical-plane reconstruction in [`eulerian`].

pub mod banded;
pub mod config;
pub mod continuation;
pub mod diagnostics;
pub mod error;
pub mod eulerian;
pub mod height_solver;
pub mod io;
pub mod numerics;
pub mod profiles;
pub mod small_amplitude;
pub mod sturm_liouville;

pub use error::{Category, Error, Result};
